#include <doctest.h>

#include <cmath>

#include "mrstitch/error.hpp"
#include "mrstitch/warp_mesh.hpp"
#include "test_util.hpp"

using namespace mrstitch;

namespace {

double max_vertex_shift(const WarpMesh& a, const WarpMesh& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.sources().size(); ++i)
    worst = std::max(worst, distance(a.sources()[i], b.sources()[i]));
  return worst;
}

}  // namespace

TEST_CASE("homography mesh agrees with the inverse map") {
  Eigen::Matrix3d m;
  m << 1.02, 0.01, 40, -0.01, 0.99, 5, 2e-5, 1e-5, 1;
  const Homography h(m);
  const WarpMesh mesh = WarpMesh::from_homography(h.inverse(), {40, 5}, {700, 500}, 8);
  for (int r = 0; r <= 8; ++r)
    for (int c = 0; c <= 8; ++c) {
      const Point2 v = mesh.vertex_position(c, r);
      const Point2 expect = *h.inverse().apply(v);
      CHECK(distance(mesh.source(c, r), expect) < 1e-9);
    }
  CHECK(mesh.min_quad_area() > 0);
  const Point2 src{123.25, 77.5};
  const auto fwd = mesh.forward(src, *h.apply(src));
  REQUIRE(fwd);
  const auto back = mesh.source_at(*fwd);
  REQUIRE(back);
  CHECK(distance(*back, src) < 1e-9);
  CHECK_FALSE(mesh.source_at({0, 0}).has_value());
}

TEST_CASE("cpw with no inliers keeps the initial mesh") {
  const Homography h = Homography::translation(100, 20);
  const CpwResult r = cpw_refine(h, {}, {320, 240}, {});
  CHECK_FALSE(r.fell_back);
  CHECK(max_vertex_shift(r.mesh, r.initial) < 1e-9);
}

TEST_CASE("cpw with consistent inliers barely moves") {
  Eigen::Matrix3d m;
  m << 1.01, 0.02, 100, -0.015, 0.99, 20, 3e-5, 0, 1;
  const Homography h(m);
  std::vector<Correspondence> inliers;
  for (int y = 5; y < 240; y += 17)
    for (int x = 3; x < 320; x += 23) {
      const Point2 p1{double(x), double(y)};
      inliers.push_back({*h.apply(p1), p1, 1});
    }
  const CpwResult r = cpw_refine(h, inliers, {320, 240}, {});
  CHECK(max_vertex_shift(r.mesh, r.initial) < 1e-6);
}

TEST_CASE("cpw pulls the mesh towards an offset cluster") {
  const Homography h;  // mesh math only; no screening involved
  std::vector<Correspondence> inliers;
  for (int dy = -10; dy <= 10; dy += 5)
    for (int dx = -10; dx <= 10; dx += 5) {
      const Point2 p1{200.0 + dx, 150.0 + dy};
      inliers.push_back({p1 + Point2{2, 0}, p1, 1});
    }
  // Anchor the far side with exact matches so the cluster effect is local.
  for (int y = 0; y < 480; y += 40) inliers.push_back({{620, double(y)}, {620, double(y)}, 1});
  const CpwResult r = cpw_refine(h, inliers, {640, 480}, {});
  REQUIRE_FALSE(r.fell_back);
  const auto near = r.mesh.source_at({202, 150});
  REQUIRE(near);
  CHECK(std::abs(near->x - 200.0) < 0.5);
  const auto far = r.mesh.source_at({620, 150});
  REQUIRE(far);
  CHECK(std::abs(far->x - 620.0) < 0.25);
  const double shift_near = std::abs((*r.mesh.source_at({202, 150})).x - 202.0);
  const double shift_mid = std::abs((*r.mesh.source_at({420, 150})).x - 420.0);
  CHECK(shift_near == doctest::Approx(2.0).epsilon(0.25));
  CHECK(shift_mid < shift_near);
}

TEST_CASE("warping through meshes") {
  const Image img = testutil::textured_image(64, 48, 2);
  SUBCASE("identity") {
    const CpwResult r = cpw_refine(Homography(), {}, img.size(), {});
    const Image out = warp_image(img, r.mesh, Canvas{img.size(), 0, 0});
    CHECK(out.valid_count() == 64u * 48u);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 64; ++x) {
        const Color a = out.at(x, y), b = img.at(x, y);
        for (int c = 0; c < 3; ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-9));
      }
  }
  SUBCASE("translation by five") {
    const CpwResult r = cpw_refine(Homography::translation(5, 0), {}, img.size(), {});
    const Image out = warp_image(img, r.mesh, Canvas{img.size(), 0, 0});
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 64; ++x) {
        CHECK(out.valid(x, y) == (x >= 5));
        if (x >= 5) CHECK(out.at(x, y)[0] == doctest::Approx(img.at(x - 5, y)[0]).epsilon(1e-9));
      }
  }
  SUBCASE("entirely outside") {
    const CpwResult r = cpw_refine(Homography::translation(500, 0), {}, img.size(), {});
    CHECK(warp_image(img, r.mesh, Canvas{img.size(), 0, 0}).valid_count() == 0);
  }
}
