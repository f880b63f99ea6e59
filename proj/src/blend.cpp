#include "mrstitch/blend.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <deque>

#include "mrstitch/error.hpp"

namespace mrstitch {

namespace {

Color difference(const Color& from, const Color& to) {
  return {to[0] - from[0], to[1] - from[1], to[2] - from[2]};
}

// Guidance across the edge p -> n. Seam edges average the gradients of the
// two labeled sources wherever each is valid on both ends.
Color edge_guidance(const Image& composite, const Labeling& labels,
                    const std::vector<Image>& sources, int px, int py, int nx, int ny) {
  const int a = labels.at(px, py);
  const int b = labels.at(nx, ny);
  if (a == b) return difference(composite.at(px, py), composite.at(nx, ny));
  Color sum{0.0, 0.0, 0.0};
  int count = 0;
  for (int label : {a, b}) {
    const Image& s = sources[static_cast<std::size_t>(label)];
    if (!s.valid(px, py) || !s.valid(nx, ny)) continue;
    const Color d = difference(s.at(px, py), s.at(nx, ny));
    for (int c = 0; c < 3; ++c) sum[c] += d[c];
    ++count;
  }
  if (count == 0) return {0.0, 0.0, 0.0};
  for (double& v : sum) v /= count;
  return sum;
}

}  // namespace

std::size_t BlendProblem::fixed_count() const {
  return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), PixelRole::kFixed));
}

std::size_t BlendProblem::free_count() const {
  return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), PixelRole::kFree));
}

BlendProblem build_guidance(const Image& composite, const Labeling& labels,
                            const std::vector<Image>& sources) {
  const int w = composite.width();
  const int h = composite.height();
  if (labels.width != w || labels.height != h)
    throw ValidationError("blend", "label map does not match the composite size");
  for (const Image& s : sources)
    if (s.width() != w || s.height() != h)
      throw ValidationError("blend", "source does not match the composite size");
  for (int v : labels.labels)
    if (v < 0 || v >= static_cast<int>(sources.size()))
      throw ValidationError("blend", "label out of range");
  if (composite.valid_count() == 0) throw EmptyProblemError("composite has no valid pixels");

  BlendProblem problem;
  problem.composite = composite;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  problem.roles.assign(n, PixelRole::kOutside);
  problem.guidance_x.assign(n, Color{0.0, 0.0, 0.0});
  problem.guidance_y.assign(n, Color{0.0, 0.0, 0.0});

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!composite.valid(x, y)) continue;
      const bool anchored = labels.at(x, y) == 0 && !sources.empty() && sources[0].valid(x, y);
      problem.roles[i] = anchored ? PixelRole::kFixed : PixelRole::kFree;
      if (x + 1 < w && composite.valid(x + 1, y))
        problem.guidance_x[i] = edge_guidance(composite, labels, sources, x, y, x + 1, y);
      if (y + 1 < h && composite.valid(x, y + 1))
        problem.guidance_y[i] = edge_guidance(composite, labels, sources, x, y, x, y + 1);
    }
  }
  return problem;
}

Image solve_poisson(const BlendProblem& problem, BlendReport* report,
                    const PoissonOptions& options) {
  const int w = problem.width();
  const int h = problem.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  BlendReport local;
  BlendReport& rep = report ? *report : local;
  rep = BlendReport{};

  std::vector<PixelRole> roles = problem.roles;
  auto role = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return PixelRole::kOutside;
    return roles[static_cast<std::size_t>(y) * w + x];
  };
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};

  // Free components that never touch a fixed pixel have no unique solution;
  // they keep their composite colors.
  std::vector<char> seen(n, 0);
  for (std::size_t start = 0; start < n; ++start) {
    if (roles[start] != PixelRole::kFree || seen[start]) continue;
    std::vector<std::size_t> component;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    bool anchored = false;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      component.push_back(i);
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k];
        const int ny = y + kDy[k];
        const PixelRole r = role(nx, ny);
        if (r == PixelRole::kFixed) anchored = true;
        if (r != PixelRole::kFree) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (!seen[j]) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
    }
    if (!anchored) {
      for (std::size_t i : component) roles[i] = PixelRole::kFixed;
      rep.unanchored_pixels += component.size();
    }
  }
  if (rep.unanchored_pixels > 0)
    rep.warnings.push_back(std::to_string(rep.unanchored_pixels) +
                           " pixels have no blending boundary and were left unblended");

  std::vector<long> unknown(n, -1);
  std::vector<std::size_t> pixel_of;
  for (std::size_t i = 0; i < n; ++i) {
    if (roles[i] != PixelRole::kFree) continue;
    unknown[i] = static_cast<long>(pixel_of.size());
    pixel_of.push_back(i);
  }
  rep.free_pixels = pixel_of.size();

  Image out = problem.composite;
  if (pixel_of.empty()) {
    rep.channels.assign(3, ChannelStats{});
    return out;
  }

  const long m = static_cast<long>(pixel_of.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(m) * 5);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 3);
  Eigen::MatrixXd guess(m, 3);

  for (long u = 0; u < m; ++u) {
    const std::size_t i = pixel_of[static_cast<std::size_t>(u)];
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    for (int c = 0; c < 3; ++c) guess(u, c) = problem.composite.channel(x, y, c);
    int degree = 0;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      const PixelRole r = role(nx, ny);
      if (r == PixelRole::kOutside) continue;
      ++degree;
      // Guidance for p -> n, stored on the edge's left/top pixel.
      Color g;
      if (k == 0) g = problem.guidance_x[i];
      else if (k == 2) g = problem.guidance_y[i];
      else if (k == 1) g = problem.guidance_x[i - 1];
      else g = problem.guidance_y[i - static_cast<std::size_t>(w)];
      const double sign = (k == 0 || k == 2) ? 1.0 : -1.0;
      for (int c = 0; c < 3; ++c) rhs(u, c) -= sign * g[c];
      const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
      if (r == PixelRole::kFixed) {
        for (int c = 0; c < 3; ++c) rhs(u, c) += problem.composite.channel(nx, ny, c);
      } else {
        triplets.emplace_back(u, unknown[j], -1.0);
      }
    }
    triplets.emplace_back(u, u, static_cast<double>(degree));
  }

  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::IdentityPreconditioner>
      cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations);
  cg.compute(a);

  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd b = rhs.col(c);
    Eigen::VectorXd x = cg.solveWithGuess(b, guess.col(c));
    ChannelStats stats;
    stats.iterations = static_cast<int>(cg.iterations());
    const double bnorm = b.norm();
    const double rnorm = (a * x - b).norm();
    stats.relative_residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
    stats.converged = cg.info() == Eigen::Success;
    if (!stats.converged)
      rep.warnings.push_back("poisson solve for channel " + std::to_string(c) +
                             " did not converge (relative residual " +
                             std::to_string(stats.relative_residual) + ")");
    rep.channels.push_back(stats);
    for (long u = 0; u < m; ++u) guess(u, c) = x(u);
  }

  for (long u = 0; u < m; ++u) {
    const std::size_t i = pixel_of[static_cast<std::size_t>(u)];
    Color col;
    for (int c = 0; c < 3; ++c) {
      double v = guess(u, c);
      if (!std::isfinite(v)) v = 0.0;
      col[c] = std::clamp(v, 0.0, 255.0);
    }
    out.set(static_cast<int>(i % w), static_cast<int>(i / w), col);
  }
  return out;
}

}  // namespace mrstitch
