#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mrstitch/geometry.hpp"
#include "mrstitch/image.hpp"

namespace mrstitch {

// How non-submodular binary terms inside an expansion move are made
// graph-representable. Moves are only accepted when the true energy drops,
// so either choice keeps the energy trace monotone.
enum class TruncationPolicy {
  kLowerCurrent,  // reduce E(keep, keep)
  kRaiseMixed,    // spread the excess over E(keep, switch) and E(switch, keep)
};

struct EnergyParams {
  double lambda_m = 1e4;
  double lambda_w = 100.0;
  double lambda_c = 0.05;
  double lambda_s = 1.0;
  double lambda_e = 0.5;
  double lambda_potts = 5.0;
  double lambda_d = 500.0;
  double r_patch = 3.0;
  double r_dup = 5.0;
  std::optional<double> sigma_m;  // defaults to r_dup / 2
  std::optional<double> sigma_d;  // defaults to r_dup / 2
  TruncationPolicy truncation = TruncationPolicy::kLowerCurrent;

  double motion_sigma() const { return sigma_m.value_or(r_dup / 2.0); }
  double duplication_sigma() const { return sigma_d.value_or(r_dup / 2.0); }
};

void validate(const EnergyParams& params);

// A feature match seen on the canvas: p in the reference source, q where the
// same scene point lands in a warped candidate.
struct CanvasMatch {
  Point2 p;
  Point2 q;
};

// Multi-label seam problem. Label 0 is the reference, labels 1..N the warped
// candidates; per-candidate vectors are indexed by label (entry 0 unused).
struct StitchProblem {
  Size canvas;
  std::vector<Image> sources;
  std::vector<std::vector<Point2>> inliers;
  std::vector<std::vector<CanvasMatch>> matches;
  EnergyParams params;

  int num_labels() const { return static_cast<int>(sources.size()); }
  int num_candidates() const { return num_labels() - 1; }
};

// Throws ValidationError if dimensions or per-label vectors disagree.
void validate(const StitchProblem& problem);

struct Labeling {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  Labeling() = default;
  Labeling(int w, int h, int fill = 0)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}
  int& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const Labeling&, const Labeling&) = default;
};

struct DuplicationEdge {
  int a;          // pixel index of p + delta
  int b;          // pixel index of q + delta
  int candidate;  // i
  double weight;  // lambda_d * G(|delta|), summed over merged duplicates
};

// Mask cost of assigning `label` at pixel (x,y): invalid source pixels cost lambda_m.
double mask_term(int x, int y, int label, const StitchProblem& problem);

// Sum of exp(-d^2 / (2 sigma^2)) over inliers within 3 sigma of p.
double motion_quality(Point2 p, const std::vector<Point2>& inliers, double sigma);

struct ColorQuality {
  double value = 0.0;
  int valid_count = 0;
};

// Mean RGB distance between the reference and candidate i over the disc of
// radius r_patch around (x,y), using only pixels valid in both.
ColorQuality color_quality(int x, int y, int candidate, const StitchProblem& problem);

// Normalized warp scores e-hat in [-1,1], one plane per label (plane 0 is
// zero). Pixels outside a candidate's mask get +1.
std::vector<Plane> warp_term(const StitchProblem& problem);

// Pairwise cost between 4-adjacent pixels (x0,y0)-(x1,y1).
double smoothness_term(int x0, int y0, int x1, int y1, int label_p, int label_q,
                       const StitchProblem& problem);

// Edges merged by (a, b, candidate), ordered deterministically.
std::vector<DuplicationEdge> build_duplication_edges(const StitchProblem& problem);

// Precomputed energy: unary tables, per-label colors and gradients for the
// seam terms, and duplication edges. Also constructible directly for tests.
class SeamEnergy {
 public:
  SeamEnergy(int width, int height, int num_labels, const EnergyParams& params);
  static SeamEnergy from_problem(const StitchProblem& problem);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_labels() const { return labels_; }
  int pixel_count() const { return width_ * height_; }
  const EnergyParams& params() const { return params_; }

  double& mask_cost(int pixel, int label) { return mask_[idx(pixel, label)]; }
  double mask_cost(int pixel, int label) const { return mask_[idx(pixel, label)]; }
  double& warp_cost(int pixel, int label) { return warp_[idx(pixel, label)]; }
  double warp_cost(int pixel, int label) const { return warp_[idx(pixel, label)]; }
  double unary(int pixel, int label) const {
    return mask_[idx(pixel, label)] + warp_[idx(pixel, label)];
  }

  // Color/gradient used by the seam term; masked pixels should be zero.
  void set_color(int label, int pixel, const Color& c);
  void set_gradient(int label, int pixel, double g);
  double smoothness(int p, int q, int label_p, int label_q) const;

  std::vector<DuplicationEdge>& duplication_edges() { return edges_; }
  const std::vector<DuplicationEdge>& duplication_edges() const { return edges_; }

 private:
  std::size_t idx(int pixel, int label) const {
    return static_cast<std::size_t>(pixel) * labels_ + label;
  }

  int width_;
  int height_;
  int labels_;
  EnergyParams params_;
  std::vector<double> mask_;
  std::vector<double> warp_;
  std::vector<double> colors_;     // [label][pixel][3]
  std::vector<double> gradients_;  // [label][pixel]
  std::vector<DuplicationEdge> edges_;
};

struct EnergyBreakdown {
  double mask = 0.0;
  double warp = 0.0;
  double smooth = 0.0;
  double duplication = 0.0;
  double total = 0.0;
  std::size_t duplication_satisfied = 0;  // edges whose condition holds
};

EnergyBreakdown total_energy(const Labeling& x, const SeamEnergy& energy);
EnergyBreakdown total_energy(const Labeling& x, const StitchProblem& problem);

// Per-pixel unary argmin, ties to the smaller label.
Labeling unary_argmin(const SeamEnergy& energy);

struct MoveRecord {
  int cycle = 0;
  int label = 0;
  EnergyBreakdown energy;
};

struct ExpansionResult {
  Labeling labeling;
  EnergyBreakdown initial;
  EnergyBreakdown final;
  std::vector<MoveRecord> accepted;
  int cycles = 0;
};

// Alpha-expansion. A move is applied only if it lowers the exact energy;
// stops when a full cycle gains less than 1e-9.
ExpansionResult alpha_expansion(const SeamEnergy& energy,
                                std::optional<Labeling> init = std::nullopt,
                                int max_cycles = 100);

// Exhaustive minimum; ties go to the lexicographically smallest labeling.
// Throws SizeError beyond 1e7 labelings.
Labeling brute_force_minimize(const SeamEnergy& energy);

Image composite(const Labeling& x, const StitchProblem& problem);

}  // namespace mrstitch
