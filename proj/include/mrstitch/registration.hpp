#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mrstitch/correspond.hpp"
#include "mrstitch/homography.hpp"
#include "mrstitch/image.hpp"
#include "mrstitch/warp_mesh.hpp"

namespace mrstitch {

using IndexSet = std::vector<std::size_t>;  // sorted, unique

// A length given either in pixels or as a fraction of an image diagonal.
struct Length {
  double value = 0.0;
  bool fraction_of_diagonal = false;

  double resolve(double diagonal) const {
    return fraction_of_diagonal ? value * diagonal : value;
  }
};

struct RegistrationParams {
  int iterations = 500;                  // tau_H
  Length seed_radius{0.15, true};        // r_H
  double inlier_threshold = 3.0;         // T_H, px
  Length growth_radius{0.05, true};      // r_D
  double dedup_threshold = 0.5;          // theta_H
  int max_homographies = 6;              // N_H
  double sim_dev_max = 10.0;             // px
  double scale_min = 0.5;
  double scale_max = 2.0;
  double overlap_identity_max = 0.95;
  double diag_min_frac = 0.5;
  CpwParams cpw;
};

// Throws ValidationError naming the first out-of-range field.
void validate(const RegistrationParams& params);

// Least median of squares over 4-point minimal samples solved by normalized
// DLT, then a DLT re-fit on the winning hypothesis' inliers.
Homography estimate_homography_lmeds(std::span<const Correspondence> pairs,
                                     std::uint64_t rng_seed);

// Normalized DLT over all pairs (>= 4).
Homography fit_homography_dlt(std::span<const Correspondence> pairs);

struct RawCandidate {
  Homography homography;
  Point2 seed;
  IndexSet seed_subset;
  std::size_t generation = 0;  // order of production
};

struct GenerationStats {
  int iterations = 0;
  int too_few_neighbors = 0;
  int estimation_failed = 0;
};

std::vector<RawCandidate> generate_candidates(const CorrespondenceSet& set,
                                              const RegistrationParams& params,
                                              double reference_diagonal,
                                              std::uint64_t rng_seed,
                                              GenerationStats* stats = nullptr);

enum class ScreenReason {
  kAccepted,
  kSimilarityDeviation,  // (a)
  kScale,                // (b)
  kInvalidFootprint,     // a candidate corner maps to or behind infinity
  kNearIdentity,         // (c)
  kShortDiagonal,        // (d)
  kNoInliers,            // empty inlier set after screening
};

std::string to_string(ScreenReason reason);

struct ScreenResult {
  bool accept = false;
  ScreenReason reason = ScreenReason::kAccepted;
};

ScreenResult screen(const Homography& h, std::span<const Correspondence> seed_subset,
                    Size candidate, const RegistrationParams& params);

// Least-squares similarity (rotation, uniform scale, translation) mapping
// p1 -> p0. Returned as a homography-shaped matrix.
Eigen::Matrix3d fit_similarity(std::span<const Correspondence> pairs);

// Seed members within T_H, grown through T_H-inliers whose reference
// points lie within r_D of a member, to a fixpoint.
IndexSet inlier_set(const Homography& h, const CorrespondenceSet& set,
                    const IndexSet& seed_subset, double inlier_threshold,
                    double growth_radius);

// Cosine of the 0-1 indicator vectors; 0 when either set is empty.
double similarity(const IndexSet& a, const IndexSet& b);

struct ScoredCandidate {
  RawCandidate raw;
  IndexSet inliers;
};

// Greedy by |D| descending (generation order on ties); keeps a candidate iff
// its similarity to every kept one is below theta_H; at most N_H.
std::vector<ScoredCandidate> deduplicate(std::vector<ScoredCandidate> candidates,
                                         double theta, int max_kept);

// Sum over correspondences of 1/(1+exp(-(T_H - e))): a smooth inlier count.
double smooth_inlier_objective(const Homography& h, const CorrespondenceSet& set,
                               double inlier_threshold);

struct RefineStats {
  int iterations = 0;
  double f_initial = 0.0;
  double f_final = 0.0;
};

// Levenberg-Marquardt ascent of smooth_inlier_objective over the 8 free
// entries. Never decreases the objective; never fails.
Homography refine_homography(const Homography& h, const CorrespondenceSet& set,
                             double inlier_threshold, RefineStats* stats = nullptr);

struct CandidateRegistration {
  Homography initial;   // before refinement
  Homography refined;   // H-hat
  IndexSet inliers;     // D, against H-hat
  Point2 seed;
  WarpMesh mesh;
  Image warped;         // on the canvas
  double f_initial = 0.0;
  double f_refined = 0.0;
  bool cpw_fell_back = false;
};

struct RegistrationDiagnostics {
  GenerationStats generation;
  int generated = 0;
  std::map<ScreenReason, int> screened_out;
  int dedup_dropped = 0;
  int kept = 0;
  std::vector<std::string> warnings;

  int screened_out_total() const;
};

struct RegistrationResult {
  Canvas canvas;
  std::vector<CandidateRegistration> candidates;
  RegistrationDiagnostics diagnostics;
};

// Full registration stage. Throws NoRegistrationError (with per-stage
// counts in the message) when nothing survives.
RegistrationResult build_registrations(const Image& reference, const Image& candidate,
                                       const CorrespondenceSet& set,
                                       const RegistrationParams& params,
                                       std::uint64_t rng_seed);

// Bounding box of the reference image and every refined footprint.
Canvas make_canvas(Size reference, Size candidate, std::span<const Homography> warps);

// Deterministic per-stream seed derivation (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mrstitch
