#include "mrstitch/registration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "mrstitch/error.hpp"

namespace mrstitch {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate(const RegistrationParams& p) {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw ValidationError("config", std::string("invalid registration parameter: ") + field);
  };
  require(p.iterations > 0, "tau_h");
  require(p.seed_radius.value > 0, "r_h");
  require(p.inlier_threshold > 0, "t_h");
  require(p.growth_radius.value > 0, "r_d");
  require(p.dedup_threshold > 0 && p.dedup_threshold <= 1, "theta_h");
  require(p.max_homographies > 0, "n_h");
  require(p.sim_dev_max > 0, "sim_dev_max");
  require(p.scale_min > 0 && p.scale_max > p.scale_min, "scale_range");
  require(p.overlap_identity_max > 0 && p.overlap_identity_max < 1, "overlap_identity_max");
  require(p.diag_min_frac > 0, "diag_min_frac");
  require(p.cpw.grid > 0, "cpw_grid");
  require(p.cpw.data_weight > 0, "cpw_data_weight");
  require(p.cpw.similarity_weight > 0, "cpw_similarity_weight");
}

namespace {

// Similarity transform taking the points' centroid to the origin and their
// mean distance to sqrt(2).
Eigen::Matrix3d conditioning(std::span<const Point2> pts) {
  Point2 c{0, 0};
  for (const Point2& p : pts) c = c + p;
  c = (1.0 / static_cast<double>(pts.size())) * c;
  double mean = 0;
  for (const Point2& p : pts) mean += distance(p, c);
  mean /= static_cast<double>(pts.size());
  const double s = mean > 1e-12 ? std::sqrt(2.0) / mean : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x, 0, s, -s * c.y, 0, 0, 1;
  return t;
}

Point2 transform(const Eigen::Matrix3d& t, Point2 p) {
  const double w = t(2, 0) * p.x + t(2, 1) * p.y + t(2, 2);
  return {(t(0, 0) * p.x + t(0, 1) * p.y + t(0, 2)) / w,
          (t(1, 0) * p.x + t(1, 1) * p.y + t(1, 2)) / w};
}

bool collinear(Point2 a, Point2 b, Point2 c) {
  const Point2 u = b - a;
  const Point2 v = c - a;
  const double scale = std::max({u.x * u.x + u.y * u.y, v.x * v.x + v.y * v.y, 1e-12});
  return std::abs(u.x * v.y - u.y * v.x) < 1e-6 * scale;
}

bool degenerate_sample(const Correspondence* s[4]) {
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        if (collinear(s[i]->p0, s[j]->p0, s[k]->p0) ||
            collinear(s[i]->p1, s[j]->p1, s[k]->p1)) {
          return true;
        }
      }
    }
  }
  return false;
}

double median_squared_error(const Homography& h, std::span<const Correspondence> pairs,
                            std::vector<double>& scratch) {
  scratch.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double e = reprojection_error(h, pairs[i]);
    scratch[i] = e * e;
  }
  auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(scratch.size() / 2);
  std::nth_element(scratch.begin(), mid, scratch.end());
  return *mid;
}

}  // namespace

Homography fit_homography_dlt(std::span<const Correspondence> pairs) {
  if (pairs.size() < 4) throw InsufficientDataError("DLT needs at least 4 pairs");
  std::vector<Point2> p0, p1;
  for (const auto& c : pairs) {
    p0.push_back(c.p0);
    p1.push_back(c.p1);
  }
  const Eigen::Matrix3d t0 = conditioning(p0);
  const Eigen::Matrix3d t1 = conditioning(p1);
  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Point2 a = transform(t1, p1[i]);
    const Point2 b = transform(t0, p0[i]);
    Eigen::Matrix<double, 9, 1> r1, r2;
    r1 << -a.x, -a.y, -1, 0, 0, 0, b.x * a.x, b.x * a.y, b.x;
    r2 << 0, 0, 0, -a.x, -a.y, -1, b.y * a.x, b.y * a.y, b.y;
    ata += r1 * r1.transpose() + r2 * r2.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  const Eigen::Matrix<double, 9, 1> h = eig.eigenvectors().col(0);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d full = t0.inverse() * hn * t1;
  if (!full.allFinite()) throw DegeneracyError("DLT produced a non-finite homography");
  return Homography(full);
}

Homography estimate_homography_lmeds(std::span<const Correspondence> pairs,
                                     std::uint64_t rng_seed) {
  constexpr int kSamples = 256;
  const std::size_t n = pairs.size();
  if (n < 4) throw InsufficientDataError("LMedS needs at least 4 pairs, got " + std::to_string(n));

  std::vector<std::array<std::size_t, 4>> samples;
  const double combos = double(n) * (n - 1) * (n - 2) * (n - 3) / 24.0;
  if (combos <= kSamples) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c)
          for (std::size_t d = c + 1; d < n; ++d) samples.push_back({a, b, c, d});
  } else {
    std::mt19937_64 rng(rng_seed);
    for (int s = 0; s < kSamples; ++s) {
      // Resampling on degeneracy happens below; here just draw distinct indices.
      std::array<std::size_t, 4> idx{};
      for (int k = 0; k < 4; ++k) {
        bool fresh;
        do {
          idx[k] = rng() % n;
          fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
        } while (!fresh);
      }
      samples.push_back(idx);
    }
  }

  std::mt19937_64 resample_rng(derive_seed(rng_seed, 1));
  const bool random_mode = combos > kSamples;
  std::vector<double> scratch;
  double best_median = std::numeric_limits<double>::infinity();
  std::optional<Homography> best;
  for (auto idx : samples) {
    std::optional<Homography> h;
    for (int attempt = 0; attempt < 50 && !h; ++attempt) {
      const Correspondence* s[4] = {&pairs[idx[0]], &pairs[idx[1]], &pairs[idx[2]],
                                    &pairs[idx[3]]};
      if (!degenerate_sample(s)) {
        try {
          h = fit_homography_dlt(std::array<Correspondence, 4>{*s[0], *s[1], *s[2], *s[3]});
        } catch (const DegeneracyError&) {
        }
      }
      if (h || !random_mode) break;
      for (int k = 0; k < 4; ++k) {
        bool fresh;
        do {
          idx[k] = resample_rng() % n;
          fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
        } while (!fresh);
      }
    }
    if (!h) continue;
    const double med = median_squared_error(*h, pairs, scratch);
    if (med < best_median) {
      best_median = med;
      best = *h;
    }
  }
  if (!best) throw DegeneracyError("every LMedS minimal sample was degenerate");

  const double threshold = std::max(2.5 * std::sqrt(best_median), 1e-6);
  std::vector<Correspondence> inliers;
  for (const auto& c : pairs) {
    if (reprojection_error(*best, c) < threshold) inliers.push_back(c);
  }
  if (inliers.size() >= 4) {
    try {
      return fit_homography_dlt(inliers);
    } catch (const Error&) {
    }
  }
  return *best;
}

std::vector<RawCandidate> generate_candidates(const CorrespondenceSet& set,
                                              const RegistrationParams& params,
                                              double reference_diagonal,
                                              std::uint64_t rng_seed,
                                              GenerationStats* stats) {
  GenerationStats local;
  std::vector<RawCandidate> out;
  const double radius = params.seed_radius.resolve(reference_diagonal);
  const std::size_t n = set.size();
  if (n == 0) {
    if (stats) *stats = local;
    return out;
  }
  for (int t = 0; t < params.iterations; ++t) {
    ++local.iterations;
    std::mt19937_64 rng(derive_seed(rng_seed, static_cast<std::uint64_t>(t)));
    const Point2 seed = set[rng() % n].p0;
    IndexSet subset;
    std::vector<Correspondence> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      if (distance(set[i].p0, seed) <= radius) {
        subset.push_back(i);
        pairs.push_back(set[i]);
      }
    }
    if (pairs.size() < 6) {
      ++local.too_few_neighbors;
      continue;
    }
    try {
      Homography h = estimate_homography_lmeds(pairs, rng());
      out.push_back({h, seed, std::move(subset), out.size()});
    } catch (const Error&) {
      ++local.estimation_failed;
    }
  }
  if (stats) *stats = local;
  return out;
}

std::string to_string(ScreenReason reason) {
  switch (reason) {
    case ScreenReason::kAccepted: return "accepted";
    case ScreenReason::kSimilarityDeviation: return "similarity_deviation";
    case ScreenReason::kScale: return "scale";
    case ScreenReason::kInvalidFootprint: return "invalid_footprint";
    case ScreenReason::kNearIdentity: return "near_identity";
    case ScreenReason::kShortDiagonal: return "short_diagonal";
    case ScreenReason::kNoInliers: return "no_inliers";
  }
  return "unknown";
}

Eigen::Matrix3d fit_similarity(std::span<const Correspondence> pairs) {
  // x0 = a x1 - b y1 + tx ; y0 = b x1 + a y1 + ty
  Eigen::MatrixXd a(2 * pairs.size(), 4);
  Eigen::VectorXd rhs(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& c = pairs[i];
    a.row(2 * i) << c.p1.x, -c.p1.y, 1, 0;
    a.row(2 * i + 1) << c.p1.y, c.p1.x, 0, 1;
    rhs(2 * i) = c.p0.x;
    rhs(2 * i + 1) = c.p0.y;
  }
  const Eigen::Vector4d s = a.colPivHouseholderQr().solve(rhs);
  Eigen::Matrix3d m;
  m << s(0), -s(1), s(2), s(1), s(0), s(3), 0, 0, 1;
  return m;
}

ScreenResult screen(const Homography& h, std::span<const Correspondence> seed_subset,
                    Size candidate, const RegistrationParams& params) {
  // (a) deviation from the best similarity on the seed points H explains.
  std::vector<Correspondence> fit_points;
  for (const auto& c : seed_subset) {
    if (reprojection_error(h, c) < params.inlier_threshold) fit_points.push_back(c);
  }
  if (fit_points.size() < 2) fit_points.assign(seed_subset.begin(), seed_subset.end());
  if (fit_points.size() >= 2) {
    const Eigen::Matrix3d s = fit_similarity(fit_points);
    double total = 0;
    for (const auto& c : fit_points) {
      const auto hp = h.apply(c.p1);
      if (!hp) return {false, ScreenReason::kSimilarityDeviation};
      total += distance(*hp, transform(s, c.p1));
    }
    if (total / static_cast<double>(fit_points.size()) > params.sim_dev_max) {
      return {false, ScreenReason::kSimilarityDeviation};
    }
  }

  // (b) scale of the linear part.
  const Eigen::Matrix2d lin = h.matrix().topLeftCorner<2, 2>();
  const Eigen::Vector2d sv = Eigen::JacobiSVD<Eigen::Matrix2d>(lin).singularValues();
  for (int i = 0; i < 2; ++i) {
    if (sv(i) < params.scale_min || sv(i) > params.scale_max) {
      return {false, ScreenReason::kScale};
    }
  }

  const auto corners = image_corners(candidate);
  std::vector<Point2> mapped;
  for (const Point2& c : corners) {
    if (h.w_of(c) <= 1e-12) return {false, ScreenReason::kInvalidFootprint};
    mapped.push_back(*h.apply(c));
  }

  // (c) too close to the identity: intersection over union of footprints.
  const double w = candidate.width - 1;
  const double ht = candidate.height - 1;
  const double rect_area = w * ht;
  const double quad_area = std::abs(signed_area(mapped));
  const double inter = std::abs(signed_area(clip_to_rect(mapped, 0, 0, w, ht)));
  const double uni = rect_area + quad_area - inter;
  if (uni > 0 && inter / uni > params.overlap_identity_max) {
    return {false, ScreenReason::kNearIdentity};
  }

  // (d) both diagonals at least diag_min_frac of the original.
  const double diag = std::hypot(w, ht);
  if (distance(mapped[0], mapped[2]) < params.diag_min_frac * diag ||
      distance(mapped[1], mapped[3]) < params.diag_min_frac * diag) {
    return {false, ScreenReason::kShortDiagonal};
  }
  return {true, ScreenReason::kAccepted};
}

IndexSet inlier_set(const Homography& h, const CorrespondenceSet& set,
                    const IndexSet& seed_subset, double inlier_threshold,
                    double growth_radius) {
  const std::size_t n = set.size();
  std::vector<char> eligible(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    eligible[i] = reprojection_error(h, set[i]) < inlier_threshold;
  }
  // Spatial hash of eligible points on a growth_radius grid.
  auto key = [&](Point2 p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / growth_radius));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / growth_radius));
    return std::pair{cx, cy};
  };
  struct PairHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
      return std::hash<std::int64_t>()(k.first * 73856093LL ^ k.second * 19349663LL);
    }
  };
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>, PairHash>
      grid;
  for (std::size_t i = 0; i < n; ++i) {
    if (eligible[i]) grid[key(set[i].p0)].push_back(i);
  }
  std::vector<char> member(n, 0);
  std::vector<std::size_t> queue;
  for (std::size_t i : seed_subset) {
    if (i < n && eligible[i] && !member[i]) {
      member[i] = 1;
      queue.push_back(i);
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Point2 p = set[queue[head]].p0;
    const auto [cx, cy] = key(p);
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (!member[j] && distance(set[j].p0, p) <= growth_radius) {
            member[j] = 1;
            queue.push_back(j);
          }
        }
      }
    }
  }
  IndexSet out;
  for (std::size_t i = 0; i < n; ++i) {
    if (member[i]) out.push_back(i);
  }
  return out;
}

double similarity(const IndexSet& a, const IndexSet& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(common) /
         std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

std::vector<ScoredCandidate> deduplicate(std::vector<ScoredCandidate> candidates,
                                         double theta, int max_kept) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) {
                     if (a.inliers.size() != b.inliers.size()) {
                       return a.inliers.size() > b.inliers.size();
                     }
                     return a.raw.generation < b.raw.generation;
                   });
  std::vector<ScoredCandidate> kept;
  for (auto& c : candidates) {
    if (static_cast<int>(kept.size()) >= max_kept) break;
    const bool distinct = std::all_of(kept.begin(), kept.end(), [&](const ScoredCandidate& k) {
      return similarity(c.inliers, k.inliers) < theta;
    });
    if (distinct) kept.push_back(std::move(c));
  }
  return kept;
}

double smooth_inlier_objective(const Homography& h, const CorrespondenceSet& set,
                               double inlier_threshold) {
  double f = 0;
  for (const auto& c : set.pairs) {
    f += 1.0 / (1.0 + std::exp(-(inlier_threshold - reprojection_error(h, c))));
  }
  return f;
}

namespace {

// Residuals whose squared sum is n - f: r_i = sqrt(1 - S(e_i)).
struct SmoothInlierResiduals {
  const CorrespondenceSet& set;
  double threshold;
  Eigen::Matrix3d t0_inv;  // undo reference conditioning
  Eigen::Matrix3d t1;      // candidate conditioning

  std::optional<Homography> homography(const Eigen::Matrix<double, 8, 1>& theta) const {
    Eigen::Matrix3d hn;
    hn << theta(0), theta(1), theta(2), theta(3), theta(4), theta(5), theta(6), theta(7), 1.0;
    try {
      return Homography(t0_inv * hn * t1);
    } catch (const DegeneracyError&) {
      return std::nullopt;
    }
  }

  bool evaluate(const Eigen::Matrix<double, 8, 1>& theta, Eigen::VectorXd& r) const {
    const auto h = homography(theta);
    if (!h) return false;
    r.resize(static_cast<Eigen::Index>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
      const double e = reprojection_error(*h, set[i]);
      // 1 - 1/(1+exp(-(T-e))) = 1/(1+exp(T-e))
      r(static_cast<Eigen::Index>(i)) = std::sqrt(1.0 / (1.0 + std::exp(threshold - e)));
    }
    return r.allFinite();
  }
};

}  // namespace

Homography refine_homography(const Homography& h, const CorrespondenceSet& set,
                             double inlier_threshold, RefineStats* stats) {
  RefineStats local;
  local.f_initial = smooth_inlier_objective(h, set, inlier_threshold);
  local.f_final = local.f_initial;
  auto finish = [&](const Homography& out) {
    if (stats) *stats = local;
    return out;
  };
  if (set.empty()) return finish(h);

  std::vector<Point2> p0, p1;
  for (const auto& c : set.pairs) {
    p0.push_back(c.p0);
    p1.push_back(c.p1);
  }
  const Eigen::Matrix3d t0 = conditioning(p0);
  const Eigen::Matrix3d t1 = conditioning(p1);
  Eigen::Matrix3d hc = t0 * h.matrix() * t1.inverse();
  if (std::abs(hc(2, 2)) < 1e-12 * hc.norm()) return finish(h);
  hc /= hc(2, 2);

  const SmoothInlierResiduals model{set, inlier_threshold, t0.inverse(), t1};
  Eigen::Matrix<double, 8, 1> theta;
  theta << hc(0, 0), hc(0, 1), hc(0, 2), hc(1, 0), hc(1, 1), hc(1, 2), hc(2, 0), hc(2, 1);

  Eigen::VectorXd r;
  if (!model.evaluate(theta, r)) return finish(h);
  double cost = r.squaredNorm();
  Homography best = h;
  const auto m = static_cast<Eigen::Index>(set.size());
  Eigen::MatrixXd jac(m, 8);
  Eigen::VectorXd rp, rm;
  double mu = -1.0;
  constexpr double kStep = 1e-6;

  for (int iter = 0; iter < 200; ++iter) {
    local.iterations = iter + 1;
    bool jac_ok = true;
    for (int k = 0; k < 8 && jac_ok; ++k) {
      Eigen::Matrix<double, 8, 1> tp = theta, tm = theta;
      tp(k) += kStep;
      tm(k) -= kStep;
      jac_ok = model.evaluate(tp, rp) && model.evaluate(tm, rm);
      if (jac_ok) jac.col(k) = (rp - rm) / (2 * kStep);
    }
    if (!jac_ok) break;
    const Eigen::Matrix<double, 8, 8> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 8, 1> g = jac.transpose() * r;
    if (g.cwiseAbs().maxCoeff() < 1e-12) break;
    if (mu < 0) mu = 1e-3 * std::max(jtj.diagonal().maxCoeff(), 1e-12);

    bool accepted = false;
    double delta_f = 0.0;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Eigen::Matrix<double, 8, 8> a = jtj;
      a.diagonal().array() += mu;
      const Eigen::Matrix<double, 8, 1> step = a.ldlt().solve(-g);
      const Eigen::Matrix<double, 8, 1> cand = theta + step;
      Eigen::VectorXd rc;
      if (step.allFinite() && model.evaluate(cand, rc) && rc.squaredNorm() < cost) {
        const double new_cost = rc.squaredNorm();
        delta_f = cost - new_cost;
        theta = cand;
        r = rc;
        cost = new_cost;
        mu = std::max(mu * 0.3, 1e-15);
        accepted = true;
      } else {
        mu *= 10.0;
        if (mu > 1e20) break;
      }
    }
    if (!accepted) break;
    if (auto hh = model.homography(theta)) best = *hh;
    if (delta_f < 1e-9) break;
  }
  local.f_final = smooth_inlier_objective(best, set, inlier_threshold);
  if (local.f_final < local.f_initial) {
    // Conditioning round-off can undo a sub-ulp gain; keep the input then.
    local.f_final = local.f_initial;
    return finish(h);
  }
  return finish(best);
}

int RegistrationDiagnostics::screened_out_total() const {
  int total = 0;
  for (const auto& [reason, count] : screened_out) total += count;
  return total;
}

Canvas make_canvas(Size reference, Size candidate, std::span<const Homography> warps) {
  double x0 = 0, y0 = 0;
  double x1 = reference.width - 1, y1 = reference.height - 1;
  for (const Homography& h : warps) {
    for (const Point2& c : image_corners(candidate)) {
      const auto m = h.apply(c);
      if (!m) continue;
      x0 = std::min(x0, m->x);
      y0 = std::min(y0, m->y);
      x1 = std::max(x1, m->x);
      y1 = std::max(y1, m->y);
    }
  }
  // Round-off in a fitted homography must not add a row of empty canvas.
  constexpr double kSlack = 1e-6;
  const int fx0 = static_cast<int>(std::floor(x0 + kSlack));
  const int fy0 = static_cast<int>(std::floor(y0 + kSlack));
  const int cx1 = static_cast<int>(std::ceil(x1 - kSlack));
  const int cy1 = static_cast<int>(std::ceil(y1 - kSlack));
  Canvas canvas;
  canvas.offset_x = -fx0;
  canvas.offset_y = -fy0;
  canvas.size = {cx1 - fx0 + 1, cy1 - fy0 + 1};
  return canvas;
}

namespace {

std::string describe(const RegistrationDiagnostics& d) {
  std::ostringstream out;
  out << "iterations=" << d.generation.iterations
      << " too_few_neighbors=" << d.generation.too_few_neighbors
      << " estimation_failed=" << d.generation.estimation_failed
      << " generated=" << d.generated;
  for (const auto& [reason, count] : d.screened_out) {
    out << " screened_" << to_string(reason) << "=" << count;
  }
  out << " dedup_dropped=" << d.dedup_dropped << " kept=" << d.kept;
  return out.str();
}

std::vector<Correspondence> gather(const CorrespondenceSet& set, const IndexSet& idx) {
  std::vector<Correspondence> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(set[i]);
  return out;
}

}  // namespace

RegistrationResult build_registrations(const Image& reference, const Image& candidate,
                                       const CorrespondenceSet& set,
                                       const RegistrationParams& params,
                                       std::uint64_t rng_seed) {
  validate(params);
  RegistrationResult result;
  RegistrationDiagnostics& diag = result.diagnostics;
  if (set.size() < 4) {
    throw NoRegistrationError("no registration: " + std::to_string(set.size()) +
                              " correspondences, need at least 4");
  }
  const double ref_diag = std::hypot(reference.width(), reference.height());
  const double growth = params.growth_radius.resolve(ref_diag);

  const auto raw = generate_candidates(set, params, ref_diag, rng_seed, &diag.generation);
  diag.generated = static_cast<int>(raw.size());

  std::vector<ScoredCandidate> scored;
  for (const RawCandidate& c : raw) {
    const auto seeds = gather(set, c.seed_subset);
    const ScreenResult s = screen(c.homography, seeds, candidate.size(), params);
    if (!s.accept) {
      ++diag.screened_out[s.reason];
      continue;
    }
    IndexSet d = inlier_set(c.homography, set, c.seed_subset, params.inlier_threshold, growth);
    if (d.empty()) {
      ++diag.screened_out[ScreenReason::kNoInliers];
      continue;
    }
    scored.push_back({c, std::move(d)});
  }
  const std::size_t before_dedup = scored.size();
  std::vector<ScoredCandidate> kept =
      deduplicate(std::move(scored), params.dedup_threshold, params.max_homographies);
  diag.dedup_dropped = static_cast<int>(before_dedup - kept.size());

  struct Refined {
    ScoredCandidate source;
    Homography h;
    IndexSet inliers;
    double f0, f1;
  };
  std::vector<Refined> refined;
  for (auto& k : kept) {
    RefineStats rs;
    Homography h = refine_homography(k.raw.homography, set, params.inlier_threshold, &rs);
    IndexSet d = inlier_set(h, set, k.raw.seed_subset, params.inlier_threshold, growth);
    if (d.empty()) {
      h = k.raw.homography;
      d = k.inliers;
      rs.f_final = rs.f_initial;
      diag.warnings.push_back("refinement emptied an inlier set; kept the unrefined homography");
    }
    // Refined sets can drift together; keep the pairwise bound on final sets.
    const bool distinct = std::all_of(refined.begin(), refined.end(), [&](const Refined& r) {
      return similarity(d, r.inliers) < params.dedup_threshold;
    });
    if (!distinct) {
      ++diag.dedup_dropped;
      continue;
    }
    refined.push_back({k, h, std::move(d), rs.f_initial, rs.f_final});
  }

  std::vector<Homography> warps;
  for (const auto& r : refined) warps.push_back(r.h);
  result.canvas = make_canvas(reference.size(), candidate.size(), warps);

  for (auto& r : refined) {
    CandidateRegistration reg{r.source.raw.homography, r.h, r.inliers, r.source.raw.seed,
                              {}, {}, r.f0, r.f1, false};
    try {
      const auto inliers = gather(set, r.inliers);
      CpwResult cpw = cpw_refine(r.h, inliers, candidate.size(), params.cpw);
      if (cpw.fell_back) diag.warnings.push_back(cpw.warning);
      reg.cpw_fell_back = cpw.fell_back;
      reg.mesh = std::move(cpw.mesh);
    } catch (const DegeneracyError& e) {
      ++diag.screened_out[ScreenReason::kInvalidFootprint];
      diag.warnings.push_back(std::string("dropped candidate: ") + e.what());
      continue;
    }
    reg.warped = warp_image(candidate, reg.mesh, result.canvas);
    result.candidates.push_back(std::move(reg));
  }
  diag.kept = static_cast<int>(result.candidates.size());
  if (result.candidates.empty()) {
    const auto near = diag.screened_out.find(ScreenReason::kNearIdentity);
    const bool only_near_identity = near != diag.screened_out.end() && near->second > 0 &&
                                    near->second == diag.screened_out_total();
    throw NoRegistrationError("no registration survived filtering: " + describe(diag),
                              only_near_identity);
  }
  return result;
}

}  // namespace mrstitch
