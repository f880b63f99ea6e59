#include "mrstitch/warp_mesh.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>

#include "mrstitch/error.hpp"

namespace mrstitch {

WarpMesh::WarpMesh(Point2 origin, double cell_width, double cell_height, int grid,
                   std::vector<Point2> sources)
    : origin_(origin), cell_w_(cell_width), cell_h_(cell_height), grid_(grid),
      sources_(std::move(sources)) {}

WarpMesh WarpMesh::from_homography(const Homography& inverse, Point2 min_corner,
                                   Point2 max_corner, int grid) {
  const double cw = std::max(max_corner.x - min_corner.x, 1e-6) / grid;
  const double ch = std::max(max_corner.y - min_corner.y, 1e-6) / grid;
  std::vector<Point2> sources;
  sources.reserve(static_cast<std::size_t>(grid + 1) * (grid + 1));
  for (int row = 0; row <= grid; ++row) {
    for (int col = 0; col <= grid; ++col) {
      const Point2 pos{min_corner.x + col * cw, min_corner.y + row * ch};
      const auto src = inverse.apply(pos);
      if (!src) throw DegeneracyError("mesh vertex maps to infinity");
      sources.push_back(*src);
    }
  }
  return WarpMesh(min_corner, cw, ch, grid, std::move(sources));
}

bool WarpMesh::contains(Point2 ref) const {
  constexpr double kEps = 1e-9;
  const double x1 = origin_.x + grid_ * cell_w_;
  const double y1 = origin_.y + grid_ * cell_h_;
  return ref.x >= origin_.x - kEps && ref.y >= origin_.y - kEps && ref.x <= x1 + kEps &&
         ref.y <= y1 + kEps;
}

void WarpMesh::locate(Point2 ref, int& col, int& row, double weights[4]) const {
  const double fx = (ref.x - origin_.x) / cell_w_;
  const double fy = (ref.y - origin_.y) / cell_h_;
  col = std::clamp(static_cast<int>(std::floor(fx)), 0, grid_ - 1);
  row = std::clamp(static_cast<int>(std::floor(fy)), 0, grid_ - 1);
  const double ax = fx - col;
  const double ay = fy - row;
  weights[0] = (1 - ax) * (1 - ay);
  weights[1] = ax * (1 - ay);
  weights[2] = (1 - ax) * ay;
  weights[3] = ax * ay;
}

Point2 WarpMesh::interpolate(int col, int row, const double weights[4]) const {
  const Point2& a = source(col, row);
  const Point2& b = source(col + 1, row);
  const Point2& c = source(col, row + 1);
  const Point2& d = source(col + 1, row + 1);
  return {weights[0] * a.x + weights[1] * b.x + weights[2] * c.x + weights[3] * d.x,
          weights[0] * a.y + weights[1] * b.y + weights[2] * c.y + weights[3] * d.y};
}

std::optional<Point2> WarpMesh::source_at(Point2 ref) const {
  if (grid_ == 0 || !contains(ref)) return std::nullopt;
  int col, row;
  double w[4];
  locate(ref, col, row, w);
  return interpolate(col, row, w);
}

std::optional<Point2> WarpMesh::forward(Point2 src, Point2 guess) const {
  if (grid_ == 0) return std::nullopt;
  Point2 x = guess;
  for (int iter = 0; iter < 50; ++iter) {
    int col, row;
    double w[4];
    locate(x, col, row, w);
    const Point2 s = interpolate(col, row, w);
    const Point2 r = src - s;
    if (norm(r) < 1e-10) return x;
    // Jacobian of the bilinear cell map (extrapolated outside the cell).
    const double ax = (x.x - origin_.x) / cell_w_ - col;
    const double ay = (x.y - origin_.y) / cell_h_ - row;
    const Point2& a = source(col, row);
    const Point2& b = source(col + 1, row);
    const Point2& c = source(col, row + 1);
    const Point2& d = source(col + 1, row + 1);
    const Point2 dax = (1 - ay) * (b - a) + ay * (d - c);
    const Point2 day = (1 - ax) * (c - a) + ax * (d - b);
    const double j00 = dax.x / cell_w_, j01 = day.x / cell_h_;
    const double j10 = dax.y / cell_w_, j11 = day.y / cell_h_;
    const double det = j00 * j11 - j01 * j10;
    if (std::abs(det) < 1e-15) return std::nullopt;
    x.x += (j11 * r.x - j01 * r.y) / det;
    x.y += (-j10 * r.x + j00 * r.y) / det;
    if (!std::isfinite(x.x) || !std::isfinite(x.y)) return std::nullopt;
  }
  int col, row;
  double w[4];
  locate(x, col, row, w);
  if (norm(src - interpolate(col, row, w)) < 1e-6) return x;
  return std::nullopt;
}

double WarpMesh::min_quad_area() const {
  double best = std::numeric_limits<double>::infinity();
  for (int row = 0; row < grid_; ++row) {
    for (int col = 0; col < grid_; ++col) {
      const Point2 quad[4] = {source(col, row), source(col + 1, row),
                              source(col + 1, row + 1), source(col, row + 1)};
      best = std::min(best, signed_area(quad));
    }
  }
  return best;
}

namespace {

struct TriangleCoords {
  std::size_t v1, v2, v3;
  double u, v;
};

// Expresses v1 in the frame of edge v2->v3 and its 90-degree rotation.
TriangleCoords triangle_coords(const WarpMesh& mesh, std::size_t v1, std::size_t v2,
                               std::size_t v3) {
  const Point2 a = mesh.sources()[v1];
  const Point2 b = mesh.sources()[v2];
  const Point2 c = mesh.sources()[v3];
  const Point2 e = c - b;
  const Point2 f = a - b;
  const Point2 re{-e.y, e.x};
  const double ee = e.x * e.x + e.y * e.y;
  return {v1, v2, v3, (f.x * e.x + f.y * e.y) / ee, (f.x * re.x + f.y * re.y) / ee};
}

}  // namespace

CpwResult cpw_refine(const Homography& h, std::span<const Correspondence> inliers,
                     Size candidate, const CpwParams& params) {
  Point2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Point2 hi{-lo.x, -lo.y};
  for (const Point2& c : image_corners(candidate)) {
    const auto m = h.apply(c);
    if (!m) throw DegeneracyError("candidate corner maps to infinity");
    lo = {std::min(lo.x, m->x), std::min(lo.y, m->y)};
    hi = {std::max(hi.x, m->x), std::max(hi.y, m->y)};
  }
  const int g = params.grid;
  CpwResult result;
  result.initial = WarpMesh::from_homography(h.inverse(), lo, hi, g);
  result.mesh = result.initial;
  const WarpMesh& init = result.initial;

  const std::size_t nv = init.vertex_count();
  const std::size_t unknowns = 2 * nv;
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> rhs;
  int row = 0;

  const Homography inverse = h.inverse();
  const double sd = std::sqrt(params.data_weight);
  for (const Correspondence& c : inliers) {
    if (!init.contains(c.p0)) continue;
    int col, r;
    double w[4];
    init.locate(c.p0, col, r, w);
    const std::size_t idx[4] = {init.vertex_index(col, r), init.vertex_index(col + 1, r),
                                init.vertex_index(col, r + 1),
                                init.vertex_index(col + 1, r + 1)};
    // Displacements are measured against the homography itself, so
    // inliers it already explains exert no pull on the mesh.
    const auto base = inverse.apply(c.p0);
    if (!base) continue;
    const Point2 predicted = *base;
    for (int axis = 0; axis < 2; ++axis) {
      for (int k = 0; k < 4; ++k) {
        if (w[k] != 0.0) trip.emplace_back(row, 2 * idx[k] + axis, sd * w[k]);
      }
      const double target = axis == 0 ? c.p1.x - predicted.x : c.p1.y - predicted.y;
      rhs.push_back(sd * target);
      ++row;
    }
  }

  const double ss = std::sqrt(params.similarity_weight);
  auto add_triangle = [&](const TriangleCoords& t) {
    // d1 - d2 - u (d3 - d2) - v R90 (d3 - d2) = 0, R90(x,y) = (-y, x)
    const double u = t.u, v = t.v;
    // x row
    trip.emplace_back(row, 2 * t.v1, ss);
    trip.emplace_back(row, 2 * t.v2, ss * (-1 + u));
    trip.emplace_back(row, 2 * t.v3, ss * (-u));
    trip.emplace_back(row, 2 * t.v2 + 1, ss * (-v));
    trip.emplace_back(row, 2 * t.v3 + 1, ss * v);
    rhs.push_back(0.0);
    ++row;
    // y row
    trip.emplace_back(row, 2 * t.v1 + 1, ss);
    trip.emplace_back(row, 2 * t.v2 + 1, ss * (-1 + u));
    trip.emplace_back(row, 2 * t.v3 + 1, ss * (-u));
    trip.emplace_back(row, 2 * t.v2, ss * v);
    trip.emplace_back(row, 2 * t.v3, ss * (-v));
    rhs.push_back(0.0);
    ++row;
  };
  for (int r = 0; r < g; ++r) {
    for (int col = 0; col < g; ++col) {
      const std::size_t v00 = init.vertex_index(col, r);
      const std::size_t v10 = init.vertex_index(col + 1, r);
      const std::size_t v01 = init.vertex_index(col, r + 1);
      const std::size_t v11 = init.vertex_index(col + 1, r + 1);
      add_triangle(triangle_coords(init, v01, v00, v10));
      add_triangle(triangle_coords(init, v10, v11, v01));
    }
  }

  Eigen::SparseMatrix<double> a(row, static_cast<Eigen::Index>(unknowns));
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(rhs.data(), row);
  if (b.squaredNorm() == 0.0) return result;

  Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>> solver;
  solver.setTolerance(params.tolerance);
  solver.setMaxIterations(static_cast<Eigen::Index>(10 * unknowns));
  solver.compute(a);
  const Eigen::VectorXd d =
      solver.solveWithGuess(b, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknowns)));
  result.iterations = static_cast<int>(solver.iterations());
  result.residual = solver.error();

  std::vector<Point2> moved = init.sources();
  for (std::size_t i = 0; i < nv; ++i) {
    moved[i].x += d[2 * i];
    moved[i].y += d[2 * i + 1];
  }
  WarpMesh refined(init.origin(), init.cell_width(), init.cell_height(), g, std::move(moved));
  const bool finite = d.allFinite();
  if (!finite || !(refined.min_quad_area() > 0.0)) {
    result.fell_back = true;
    result.warning = "CPW produced a degenerate quad; using the unrefined mesh";
    return result;
  }
  result.mesh = std::move(refined);
  return result;
}

Image warp_image(const Image& candidate, const WarpMesh& mesh, const Canvas& canvas) {
  Image out(canvas.size.width, canvas.size.height);
  for (int y = 0; y < canvas.size.height; ++y) {
    for (int x = 0; x < canvas.size.width; ++x) {
      const auto src = mesh.source_at(canvas.to_reference({double(x), double(y)}));
      if (!src) continue;
      const Sample s = bilinear_sample(candidate, src->x, src->y);
      if (s.valid) out.set(x, y, s.color);
    }
  }
  return out;
}

}  // namespace mrstitch
