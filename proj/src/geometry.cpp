#include "mrstitch/geometry.hpp"

namespace mrstitch {

double signed_area(std::span<const Point2> polygon) {
  double acc = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

namespace {

template <typename Inside, typename Cross>
std::vector<Point2> clip_edge(const std::vector<Point2>& in, Inside inside,
                              Cross cross) {
  std::vector<Point2> out;
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& cur = in[i];
    const Point2& prev = in[(i + n - 1) % n];
    const bool cur_in = inside(cur);
    const bool prev_in = inside(prev);
    if (cur_in) {
      if (!prev_in) out.push_back(cross(prev, cur));
      out.push_back(cur);
    } else if (prev_in) {
      out.push_back(cross(prev, cur));
    }
  }
  return out;
}

}  // namespace

std::vector<Point2> clip_to_rect(std::span<const Point2> polygon, double x0,
                                 double y0, double x1, double y1) {
  std::vector<Point2> poly(polygon.begin(), polygon.end());
  auto at_x = [](double x) {
    return [x](Point2 a, Point2 b) {
      const double t = (x - a.x) / (b.x - a.x);
      return Point2{x, a.y + t * (b.y - a.y)};
    };
  };
  auto at_y = [](double y) {
    return [y](Point2 a, Point2 b) {
      const double t = (y - a.y) / (b.y - a.y);
      return Point2{a.x + t * (b.x - a.x), y};
    };
  };
  poly = clip_edge(poly, [&](Point2 p) { return p.x >= x0; }, at_x(x0));
  if (poly.empty()) return poly;
  poly = clip_edge(poly, [&](Point2 p) { return p.x <= x1; }, at_x(x1));
  if (poly.empty()) return poly;
  poly = clip_edge(poly, [&](Point2 p) { return p.y >= y0; }, at_y(y0));
  if (poly.empty()) return poly;
  poly = clip_edge(poly, [&](Point2 p) { return p.y <= y1; }, at_y(y1));
  return poly;
}

std::vector<Point2> image_corners(Size size) {
  const double w = size.width - 1;
  const double h = size.height - 1;
  return {{0.0, 0.0}, {w, 0.0}, {w, h}, {0.0, h}};
}

}  // namespace mrstitch
