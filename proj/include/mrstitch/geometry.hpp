#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace mrstitch {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

struct Size {
  int width = 0;
  int height = 0;
  friend bool operator==(Size, Size) = default;
};

// Signed shoelace area; positive for counter-clockwise in a y-up frame,
// i.e. clockwise as drawn in image coordinates.
double signed_area(std::span<const Point2> polygon);

// Clips an arbitrary simple polygon against an axis-aligned rectangle
// [x0,x1]x[y0,y1] (Sutherland-Hodgman).
std::vector<Point2> clip_to_rect(std::span<const Point2> polygon, double x0,
                                 double y0, double x1, double y1);

// Corners of an image domain in pixel-center coordinates, in order
// (0,0), (w-1,0), (w-1,h-1), (0,h-1).
std::vector<Point2> image_corners(Size size);

}  // namespace mrstitch

namespace mrstitch {

// Stitching canvas. Reference pixel (x,y) sits at canvas pixel
// (x + offset_x, y + offset_y).
struct Canvas {
  Size size;
  int offset_x = 0;
  int offset_y = 0;

  Point2 to_canvas(Point2 ref) const { return {ref.x + offset_x, ref.y + offset_y}; }
  Point2 to_reference(Point2 c) const { return {c.x - offset_x, c.y - offset_y}; }
};

}  // namespace mrstitch
