#include "mrstitch/seam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrstitch/error.hpp"
#include "mrstitch/maxflow.hpp"

namespace mrstitch {

void validate(const EnergyParams& p) {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw ValidationError("config", std::string("invalid energy parameter: ") + field);
  };
  require(p.lambda_m >= 0, "lambda_m");
  require(p.lambda_w >= 0, "lambda_w");
  require(p.lambda_c >= 0, "lambda_c");
  require(p.lambda_s >= 0, "lambda_s");
  require(p.lambda_e >= 0, "lambda_e");
  require(p.lambda_potts >= 0, "lambda_potts");
  require(p.lambda_d >= 0, "lambda_d");
  require(p.r_patch >= 0, "r_patch");
  require(p.r_dup >= 0, "r_dup");
  require(p.motion_sigma() > 0, "sigma_m");
  require(p.duplication_sigma() > 0, "sigma_d");
}

void validate(const StitchProblem& problem) {
  validate(problem.params);
  const auto n = problem.sources.size();
  if (n < 2) throw ValidationError("seam", "stitch problem needs at least one candidate");
  if (problem.inliers.size() != n || problem.matches.size() != n) {
    throw ValidationError("seam", "per-label vectors must have one entry per label");
  }
  for (const Image& s : problem.sources) {
    if (s.size() != problem.canvas) {
      throw ValidationError("seam", "source dimensions differ from the canvas");
    }
  }
}

double mask_term(int x, int y, int label, const StitchProblem& problem) {
  const double lm = problem.params.lambda_m;
  if (label == 0) return problem.sources[0].valid(x, y) ? 0.0 : lm;
  for (int i = 1; i < problem.num_labels(); ++i) {
    if (!problem.sources[i].valid(x, y)) return lm;
  }
  return 0.0;
}

double motion_quality(Point2 p, const std::vector<Point2>& inliers, double sigma) {
  const double cutoff = 3.0 * sigma;
  double q = 0.0;
  for (const Point2& s : inliers) {
    const double d = distance(p, s);
    if (d <= cutoff) q += std::exp(-d * d / (2 * sigma * sigma));
  }
  return q;
}

namespace {

std::vector<std::pair<int, int>> disc_offsets(double radius) {
  std::vector<std::pair<int, int>> out;
  const int r = static_cast<int>(std::floor(radius));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) out.emplace_back(dx, dy);
    }
  }
  return out;
}

ColorQuality color_quality_with(const std::vector<std::pair<int, int>>& offsets, int x, int y,
                                const Image& ref, const Image& cand) {
  ColorQuality q;
  double sum = 0.0;
  for (const auto& [dx, dy] : offsets) {
    const int xx = x + dx;
    const int yy = y + dy;
    if (!ref.in_bounds(xx, yy) || !ref.valid(xx, yy) || !cand.valid(xx, yy)) continue;
    sum += color_distance(ref.at(xx, yy), cand.at(xx, yy));
    ++q.valid_count;
  }
  q.value = q.valid_count > 0 ? sum / q.valid_count : 0.0;
  return q;
}

// Q_m for every pixel by splatting each inlier over its 3-sigma disc.
Plane motion_quality_plane(Size canvas, const std::vector<Point2>& inliers, double sigma) {
  Plane out(canvas.width, canvas.height);
  const double cutoff = 3.0 * sigma;
  for (const Point2& s : inliers) {
    const int x0 = std::max(0, static_cast<int>(std::ceil(s.x - cutoff)));
    const int x1 = std::min(canvas.width - 1, static_cast<int>(std::floor(s.x + cutoff)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(s.y - cutoff)));
    const int y1 = std::min(canvas.height - 1, static_cast<int>(std::floor(s.y + cutoff)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = distance({double(x), double(y)}, s);
        if (d <= cutoff) out(x, y) += std::exp(-d * d / (2 * sigma * sigma));
      }
    }
  }
  return out;
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

ColorQuality color_quality(int x, int y, int candidate, const StitchProblem& problem) {
  return color_quality_with(disc_offsets(problem.params.r_patch), x, y, problem.sources[0],
                            problem.sources[candidate]);
}

std::vector<Plane> warp_term(const StitchProblem& problem) {
  const Size c = problem.canvas;
  const auto offsets = disc_offsets(problem.params.r_patch);
  std::vector<Plane> out;
  out.emplace_back(c.width, c.height, 0.0);
  for (int i = 1; i < problem.num_labels(); ++i) {
    const Image& cand = problem.sources[i];
    const Plane qm = motion_quality_plane(c, problem.inliers[i], problem.params.motion_sigma());
    Plane e(c.width, c.height, 0.0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int y = 0; y < c.height; ++y) {
      for (int x = 0; x < c.width; ++x) {
        if (!cand.valid(x, y)) continue;
        const double qc = color_quality_with(offsets, x, y, problem.sources[0], cand).value;
        e(x, y) = -qm(x, y) + problem.params.lambda_c * qc;
        lo = std::min(lo, e(x, y));
        hi = std::max(hi, e(x, y));
      }
    }
    Plane hat(c.width, c.height, 1.0);
    for (int y = 0; y < c.height; ++y) {
      for (int x = 0; x < c.width; ++x) {
        if (!cand.valid(x, y)) continue;
        hat(x, y) = hi > lo ? -1.0 + 2.0 * (e(x, y) - lo) / (hi - lo) : 0.0;
      }
    }
    out.push_back(std::move(hat));
  }
  return out;
}

double smoothness_term(int x0, int y0, int x1, int y1, int label_p, int label_q,
                       const StitchProblem& problem) {
  if (label_p == label_q) return 0.0;
  const EnergyParams& prm = problem.params;
  const Image& a = problem.sources[label_p];
  const Image& b = problem.sources[label_q];
  const double color = color_distance(a.at(x0, y0), b.at(x0, y0)) +
                       color_distance(a.at(x1, y1), b.at(x1, y1));
  const double edge = 0.5 * (masked_gradient_at(a, x0, y0) + masked_gradient_at(b, x1, y1));
  return prm.lambda_s * color + prm.lambda_e * edge + prm.lambda_potts;
}

std::vector<DuplicationEdge> build_duplication_edges(const StitchProblem& problem) {
  const Size c = problem.canvas;
  const double sigma = problem.params.duplication_sigma();
  const auto offsets = disc_offsets(problem.params.r_dup);
  std::vector<DuplicationEdge> raw;
  for (int i = 1; i < problem.num_labels(); ++i) {
    for (const CanvasMatch& m : problem.matches[i]) {
      const int px = round_half_up(m.p.x), py = round_half_up(m.p.y);
      const int qx = round_half_up(m.q.x), qy = round_half_up(m.q.y);
      if (px == qx && py == qy) continue;  // every offset would be a self-loop
      for (const auto& [dx, dy] : offsets) {
        const int ax = px + dx, ay = py + dy, bx = qx + dx, by = qy + dy;
        if (ax < 0 || ay < 0 || ax >= c.width || ay >= c.height) continue;
        if (bx < 0 || by < 0 || bx >= c.width || by >= c.height) continue;
        const int d2 = dx * dx + dy * dy;
        const double w =
            problem.params.lambda_d * (d2 == 0 ? 1.0 : std::exp(-d2 / (2 * sigma * sigma)));
        raw.push_back({ay * c.width + ax, by * c.width + bx, i, w});
      }
    }
  }
  std::sort(raw.begin(), raw.end(), [](const DuplicationEdge& l, const DuplicationEdge& r) {
    if (l.a != r.a) return l.a < r.a;
    if (l.b != r.b) return l.b < r.b;
    return l.candidate < r.candidate;
  });
  std::vector<DuplicationEdge> merged;
  for (const auto& e : raw) {
    if (!merged.empty() && merged.back().a == e.a && merged.back().b == e.b &&
        merged.back().candidate == e.candidate) {
      merged.back().weight += e.weight;
    } else {
      merged.push_back(e);
    }
  }
  return merged;
}

SeamEnergy::SeamEnergy(int width, int height, int num_labels, const EnergyParams& params)
    : width_(width), height_(height), labels_(num_labels), params_(params),
      mask_(static_cast<std::size_t>(width) * height * num_labels, 0.0),
      warp_(mask_.size(), 0.0), colors_(mask_.size() * 3, 0.0), gradients_(mask_.size(), 0.0) {}

void SeamEnergy::set_color(int label, int pixel, const Color& c) {
  const std::size_t base = (static_cast<std::size_t>(label) * pixel_count() + pixel) * 3;
  colors_[base] = c[0];
  colors_[base + 1] = c[1];
  colors_[base + 2] = c[2];
}

void SeamEnergy::set_gradient(int label, int pixel, double g) {
  gradients_[static_cast<std::size_t>(label) * pixel_count() + pixel] = g;
}

double SeamEnergy::smoothness(int p, int q, int label_p, int label_q) const {
  if (label_p == label_q) return 0.0;
  const std::size_t n = static_cast<std::size_t>(pixel_count());
  auto col = [&](int label, int pixel) { return &colors_[(label * n + pixel) * 3]; };
  auto dist = [](const double* u, const double* v) {
    const double d0 = u[0] - v[0], d1 = u[1] - v[1], d2 = u[2] - v[2];
    return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
  };
  const double color = dist(col(label_p, p), col(label_q, p)) + dist(col(label_p, q), col(label_q, q));
  const double edge = 0.5 * (gradients_[label_p * n + p] + gradients_[label_q * n + q]);
  return params_.lambda_s * color + params_.lambda_e * edge + params_.lambda_potts;
}

SeamEnergy SeamEnergy::from_problem(const StitchProblem& problem) {
  validate(problem);
  const Size c = problem.canvas;
  const int labels = problem.num_labels();
  SeamEnergy energy(c.width, c.height, labels, problem.params);
  const std::vector<Plane> hat = warp_term(problem);
  for (int label = 0; label < labels; ++label) {
    const Image& src = problem.sources[label];
    const Plane grad = masked_gradient_magnitude(src);
    for (int y = 0; y < c.height; ++y) {
      for (int x = 0; x < c.width; ++x) {
        const int p = y * c.width + x;
        energy.mask_cost(p, label) = mask_term(x, y, label, problem);
        energy.warp_cost(p, label) = label == 0 ? 0.0 : problem.params.lambda_w * hat[label](x, y);
        energy.set_color(label, p, src.at(x, y));
        energy.set_gradient(label, p, grad(x, y));
      }
    }
  }
  energy.duplication_edges() = build_duplication_edges(problem);
  return energy;
}

EnergyBreakdown total_energy(const Labeling& x, const SeamEnergy& energy) {
  EnergyBreakdown e;
  const int w = energy.width();
  const int h = energy.height();
  for (int p = 0; p < energy.pixel_count(); ++p) {
    e.mask += energy.mask_cost(p, x.labels[p]);
    e.warp += energy.warp_cost(p, x.labels[p]);
  }
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const int p = y * w + xx;
      if (xx + 1 < w) e.smooth += energy.smoothness(p, p + 1, x.labels[p], x.labels[p + 1]);
      if (y + 1 < h) e.smooth += energy.smoothness(p, p + w, x.labels[p], x.labels[p + w]);
    }
  }
  for (const DuplicationEdge& d : energy.duplication_edges()) {
    if (x.labels[d.a] == 0 && x.labels[d.b] == d.candidate) {
      e.duplication += d.weight;
      ++e.duplication_satisfied;
    }
  }
  e.total = e.mask + e.warp + e.smooth + e.duplication;
  return e;
}

EnergyBreakdown total_energy(const Labeling& x, const StitchProblem& problem) {
  return total_energy(x, SeamEnergy::from_problem(problem));
}

Labeling unary_argmin(const SeamEnergy& energy) {
  Labeling out(energy.width(), energy.height());
  for (int p = 0; p < energy.pixel_count(); ++p) {
    int best = 0;
    for (int l = 1; l < energy.num_labels(); ++l) {
      if (energy.unary(p, l) < energy.unary(p, best)) best = l;
    }
    out.labels[p] = best;
  }
  return out;
}

namespace {

struct MoveBuilder {
  MaxFlowGraph& graph;
  std::vector<double>& cost_switch;
  std::vector<double>& cost_keep;
  TruncationPolicy policy;

  // Binary term table over (y_p, y_q), y = 1 meaning "switch to alpha".
  void pairwise(int p, int q, double a, double b, double c, double d) {
    const double excess = a + d - b - c;
    if (excess > 0) {
      if (policy == TruncationPolicy::kLowerCurrent) {
        a -= excess;
      } else {
        b += 0.5 * excess;
        c += 0.5 * excess;
      }
    }
    cost_keep[p] += a;
    cost_switch[p] += c;
    cost_switch[q] += d - c;
    const double cap = b + c - a - d;
    if (cap > 0) graph.add_edge(p, q, cap, 0.0);
  }
};

Labeling expansion_move(const SeamEnergy& energy, const Labeling& cur, int alpha) {
  const int w = energy.width();
  const int h = energy.height();
  const int n = energy.pixel_count();
  MaxFlowGraph graph(n, 2 * n + static_cast<int>(energy.duplication_edges().size()));
  graph.add_nodes(n);
  std::vector<double> cost_switch(n, 0.0), cost_keep(n, 0.0);
  MoveBuilder builder{graph, cost_switch, cost_keep, energy.params().truncation};
  for (int p = 0; p < n; ++p) {
    cost_keep[p] += energy.unary(p, cur.labels[p]);
    cost_switch[p] += energy.unary(p, alpha);
  }
  auto add_smooth = [&](int p, int q) {
    const int lp = cur.labels[p], lq = cur.labels[q];
    builder.pairwise(p, q, energy.smoothness(p, q, lp, lq), energy.smoothness(p, q, lp, alpha),
                     energy.smoothness(p, q, alpha, lq), 0.0);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      if (x + 1 < w) add_smooth(p, p + 1);
      if (y + 1 < h) add_smooth(p, p + w);
    }
  }
  for (const DuplicationEdge& e : energy.duplication_edges()) {
    const int la = cur.labels[e.a], lb = cur.labels[e.b];
    auto term = [&](int xa, int xb) { return xa == 0 && xb == e.candidate ? e.weight : 0.0; };
    const double a = term(la, lb), b = term(la, alpha), c = term(alpha, lb),
                 d = term(alpha, alpha);
    if (a == 0 && b == 0 && c == 0 && d == 0) continue;
    builder.pairwise(e.a, e.b, a, b, c, d);
  }
  for (int p = 0; p < n; ++p) {
    // keep (source side) pays the sink t-link; switch pays the source t-link
    const double m = std::min(cost_keep[p], cost_switch[p]);
    graph.add_tweights(p, cost_switch[p] - m, cost_keep[p] - m);
  }
  graph.maxflow();
  Labeling next = cur;
  for (int p = 0; p < n; ++p) {
    if (!graph.in_source_segment(p)) next.labels[p] = alpha;
  }
  return next;
}

}  // namespace

ExpansionResult alpha_expansion(const SeamEnergy& energy, std::optional<Labeling> init,
                                int max_cycles) {
  ExpansionResult result;
  result.labeling = init ? std::move(*init) : unary_argmin(energy);
  if (result.labeling.width != energy.width() || result.labeling.height != energy.height()) {
    throw ValidationError("seam", "initial labeling does not match the canvas");
  }
  for (int l : result.labeling.labels) {
    if (l < 0 || l >= energy.num_labels()) {
      throw ValidationError("seam", "initial labeling has an out-of-range label");
    }
  }
  result.initial = total_energy(result.labeling, energy);
  EnergyBreakdown current = result.initial;
  for (int cycle = 1; cycle <= max_cycles; ++cycle) {
    result.cycles = cycle;
    bool progressed = false;
    for (int alpha = 0; alpha < energy.num_labels(); ++alpha) {
      Labeling next = expansion_move(energy, result.labeling, alpha);
      if (next == result.labeling) continue;
      const EnergyBreakdown e = total_energy(next, energy);
      if (e.total < current.total) {
        if (current.total - e.total >= 1e-9) progressed = true;
        result.labeling = std::move(next);
        current = e;
        result.accepted.push_back({cycle, alpha, e});
      }
    }
    if (!progressed) break;
  }
  result.final = current;
  return result;
}

Labeling brute_force_minimize(const SeamEnergy& energy) {
  const int n = energy.pixel_count();
  const int labels = energy.num_labels();
  double count = 1;
  for (int p = 0; p < n; ++p) {
    count *= labels;
    if (count > 1e7) {
      throw SizeError("brute force over " + std::to_string(labels) + "^" + std::to_string(n) +
                      " labelings exceeds 1e7");
    }
  }
  Labeling cur(energy.width(), energy.height(), 0);
  Labeling best = cur;
  double best_e = total_energy(cur, energy).total;
  for (;;) {
    int p = n - 1;
    while (p >= 0 && cur.labels[p] == labels - 1) cur.labels[p--] = 0;
    if (p < 0) break;
    ++cur.labels[p];
    const double e = total_energy(cur, energy).total;
    if (e < best_e) {
      best_e = e;
      best = cur;
    }
  }
  return best;
}

Image composite(const Labeling& x, const StitchProblem& problem) {
  Image out(problem.canvas.width, problem.canvas.height);
  for (int y = 0; y < problem.canvas.height; ++y) {
    for (int xx = 0; xx < problem.canvas.width; ++xx) {
      const Image& src = problem.sources[x.at(xx, y)];
      if (src.valid(xx, y)) {
        out.set(xx, y, src.at(xx, y));
      } else {
        out.set_invalid(xx, y);
      }
    }
  }
  return out;
}

}  // namespace mrstitch
