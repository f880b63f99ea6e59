#include <doctest.h>

#include <cmath>

#include "mrstitch/blend.hpp"
#include "mrstitch/error.hpp"
#include "test_util.hpp"

using namespace mrstitch;

namespace {

Image composite_of(const Labeling& x, const std::vector<Image>& sources) {
  Image out(x.width, x.height);
  for (int y = 0; y < x.height; ++y)
    for (int xx = 0; xx < x.width; ++xx) {
      const Image& s = sources[x.at(xx, y)];
      if (s.valid(xx, y)) out.set(xx, y, s.at(xx, y));
    }
  return out;
}

// Residual of the discrete Poisson system evaluated independently of the
// solver, relative to the right-hand side with boundary values moved over.
double relative_residual(const BlendProblem& p, const Image& out, int ch) {
  const int w = p.width(), h = p.height();
  double r2 = 0, b2 = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (p.roles[y * w + x] != PixelRole::kFree) continue;
      double lhs = 0, rhs = 0, boundary = 0;
      auto edge = [&](int nx, int ny, double g) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
        if (p.roles[ny * w + nx] == PixelRole::kOutside) return;
        lhs += out.at(x, y)[ch] - out.at(nx, ny)[ch];
        rhs += g;
        if (p.roles[ny * w + nx] == PixelRole::kFixed) boundary += out.at(nx, ny)[ch];
      };
      edge(x + 1, y, -p.guidance_x[y * w + x][ch]);
      if (x > 0) edge(x - 1, y, p.guidance_x[y * w + x - 1][ch]);
      edge(x, y + 1, -p.guidance_y[y * w + x][ch]);
      if (y > 0) edge(x, y - 1, p.guidance_y[(y - 1) * w + x][ch]);
      r2 += (lhs - rhs) * (lhs - rhs);
      b2 += (rhs + boundary) * (rhs + boundary);
    }
  return b2 > 0 ? std::sqrt(r2 / b2) : std::sqrt(r2);
}

}  // namespace

TEST_CASE("uniform candidate labeling passes the candidate through") {
  const Image ref = testutil::textured_image(40, 30, 1);
  Image cand = testutil::textured_image(40, 30, 2);
  Image ref_masked = ref;
  for (int y = 0; y < 30; ++y)
    for (int x = 20; x < 40; ++x) ref_masked.set_invalid(x, y);
  // the reference covers the left half with the candidate's own colors
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 20; ++x) ref_masked.set(x, y, cand.at(x, y));
  Labeling x(40, 30, 0);
  for (int y = 0; y < 30; ++y)
    for (int xx = 20; xx < 40; ++xx) x.at(xx, y) = 1;
  const std::vector<Image> sources{ref_masked, cand};
  const BlendProblem p = build_guidance(composite_of(x, sources), x, sources);
  BlendReport report;
  const Image out = solve_poisson(p, &report);
  double worst = 0;
  for (int y = 0; y < 30; ++y)
    for (int xx = 0; xx < 40; ++xx)
      for (int ch = 0; ch < 3; ++ch)
        worst = std::max(worst, std::abs(out.at(xx, y)[ch] - cand.at(xx, y)[ch]));
  CHECK(worst < 0.5);
  REQUIRE(report.channels.size() == 3);
  for (const auto& c : report.channels) CHECK(c.converged);
}

TEST_CASE("constant offset seam becomes a smooth ramp") {
  const int w = 40, h = 20;
  Image ref = testutil::constant_image(w, h, {10, 10, 10});
  for (int y = 0; y < h; ++y)
    for (int x = w / 2; x < w; ++x) ref.set_invalid(x, y);
  const Image cand = testutil::constant_image(w, h, {20, 20, 20});
  Labeling x(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int xx = w / 2; xx < w; ++xx) x.at(xx, y) = 1;
  const std::vector<Image> sources{ref, cand};
  const BlendProblem p = build_guidance(composite_of(x, sources), x, sources);
  CHECK(p.fixed_count() == static_cast<std::size_t>(w / 2 * h));
  CHECK(p.free_count() == static_cast<std::size_t>(w / 2 * h));
  BlendReport report;
  const Image out = solve_poisson(p, &report);
  double max_step = 0;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx + 1 < w; ++xx)
      max_step = std::max(max_step, std::abs(out.at(xx + 1, y)[0] - out.at(xx, y)[0]));
  CHECK(max_step < 2.0);
  // Dirichlet pixels are untouched
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w / 2; ++xx) CHECK(out.at(xx, y) == ref.at(xx, y));
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(report.channels[ch].relative_residual <= 1e-6);
    CHECK(relative_residual(p, out, ch) <= 1e-5);
  }
}

TEST_CASE("residual on a textured two-source seam") {
  const Image ref = testutil::textured_image(32, 24, 4);
  Image ref_masked = ref;
  for (int y = 0; y < 24; ++y)
    for (int x = 18; x < 32; ++x) ref_masked.set_invalid(x, y);
  Image cand = testutil::textured_image(32, 24, 5);
  cand.set_invalid(31, 0);
  Labeling x(32, 24, 0);
  for (int y = 0; y < 24; ++y)
    for (int xx = 0; xx < 32; ++xx)
      if (xx >= 12 + (y % 5)) x.at(xx, y) = 1;
  const std::vector<Image> sources{ref_masked, cand};
  const BlendProblem p = build_guidance(composite_of(x, sources), x, sources);
  BlendReport report;
  const Image out = solve_poisson(p, &report);
  CHECK(p.roles[31] == PixelRole::kOutside);
  CHECK_FALSE(out.valid(31, 0));
  for (int ch = 0; ch < 3; ++ch) CHECK(report.channels[ch].relative_residual <= 1e-6);
  for (int y = 0; y < 24; ++y)
    for (int xx = 0; xx < 32; ++xx)
      if (x.at(xx, y) == 0) CHECK(out.at(xx, y) == ref.at(xx, y));
}

TEST_CASE("all reference labels leave the composite unchanged") {
  const Image ref = testutil::textured_image(16, 12, 9);
  const Image cand = testutil::textured_image(16, 12, 10);
  const Labeling x(16, 12, 0);
  const std::vector<Image> sources{ref, cand};
  const BlendProblem p = build_guidance(ref, x, sources);
  CHECK(p.free_count() == 0);
  const Image out = solve_poisson(p);
  for (int y = 0; y < 12; ++y)
    for (int xx = 0; xx < 16; ++xx) CHECK(out.at(xx, y) == ref.at(xx, y));
}

TEST_CASE("a free region with no boundary is passed through with a warning") {
  Image ref(10, 4);
  const Image cand = testutil::textured_image(10, 4, 3);
  const Labeling x(10, 4, 1);
  const std::vector<Image> sources{ref, cand};
  const BlendProblem p = build_guidance(cand, x, sources);
  BlendReport report;
  const Image out = solve_poisson(p, &report);
  CHECK(report.unanchored_pixels == 40);
  CHECK_FALSE(report.warnings.empty());
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 10; ++xx) CHECK(out.at(xx, y) == cand.at(xx, y));
}

TEST_CASE("invalid inputs") {
  const Image empty(6, 6);
  const std::vector<Image> sources{empty, empty};
  CHECK_THROWS_AS(build_guidance(empty, Labeling(6, 6, 0), sources), EmptyProblemError);
  const Image ref = testutil::constant_image(6, 6, {1, 1, 1});
  CHECK_THROWS_AS(build_guidance(ref, Labeling(5, 6, 0), {ref, ref}), ValidationError);
  Labeling bad(6, 6, 0);
  bad.at(0, 0) = 4;
  CHECK_THROWS_AS(build_guidance(ref, bad, {ref, ref}), ValidationError);
}
