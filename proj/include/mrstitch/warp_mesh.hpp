#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrstitch/correspond.hpp"
#include "mrstitch/geometry.hpp"
#include "mrstitch/homography.hpp"
#include "mrstitch/image.hpp"

namespace mrstitch {

// Uniform (G+1)x(G+1) grid laid over a rectangle of the reference frame.
// Each vertex stores the candidate-image point it pulls from, so the mesh is
// an inverse map: reference point -> candidate point, bilinear per cell.
class WarpMesh {
 public:
  WarpMesh() = default;
  WarpMesh(Point2 origin, double cell_width, double cell_height, int grid,
           std::vector<Point2> sources);

  // Mesh over `bounds` = [x0,y0]-[x1,y1] with vertex sources from
  // `inverse` (reference -> candidate). Throws DegeneracyError if a vertex
  // maps to infinity.
  static WarpMesh from_homography(const Homography& inverse, Point2 min_corner,
                                  Point2 max_corner, int grid);

  int grid() const { return grid_; }
  Point2 origin() const { return origin_; }
  double cell_width() const { return cell_w_; }
  double cell_height() const { return cell_h_; }
  std::size_t vertex_count() const { return sources_.size(); }

  std::size_t vertex_index(int col, int row) const {
    return static_cast<std::size_t>(row) * (grid_ + 1) + col;
  }
  const Point2& source(int col, int row) const { return sources_[vertex_index(col, row)]; }
  const std::vector<Point2>& sources() const { return sources_; }
  Point2 vertex_position(int col, int row) const {
    return {origin_.x + col * cell_w_, origin_.y + row * cell_h_};
  }

  bool contains(Point2 ref) const;
  // Cell containing `ref` and bilinear weights for its vertices
  // (v00, v10, v01, v11). Points outside are clamped to the border cell.
  void locate(Point2 ref, int& col, int& row, double weights[4]) const;

  // Candidate-image point for a reference point; empty outside the mesh.
  std::optional<Point2> source_at(Point2 ref) const;
  // Reference point whose source is `src` (Newton on the bilinear map).
  std::optional<Point2> forward(Point2 src, Point2 guess) const;

  // Smallest signed quad area in candidate coordinates.
  double min_quad_area() const;

 private:
  Point2 interpolate(int col, int row, const double weights[4]) const;

  Point2 origin_;
  double cell_w_ = 1.0;
  double cell_h_ = 1.0;
  int grid_ = 0;
  std::vector<Point2> sources_;
};

struct CpwParams {
  int grid = 16;
  double data_weight = 1.0;
  double similarity_weight = 0.05;
  double tolerance = 1e-8;
};

struct CpwResult {
  WarpMesh mesh;
  WarpMesh initial;
  bool fell_back = false;
  std::string warning;
  int iterations = 0;
  double residual = 0.0;
};

// Content-preserving refinement of the mesh induced by `h` over the
// footprint h(candidate). Data term pins each inlier's reference point to
// its candidate point; similarity term keeps each mesh triangle similar to
// its initial shape. Degenerate results fall back to the initial mesh.
CpwResult cpw_refine(const Homography& h, std::span<const Correspondence> inliers,
                     Size candidate, const CpwParams& params);

// Inverse warping of `candidate` onto the canvas through the mesh.
Image warp_image(const Image& candidate, const WarpMesh& mesh, const Canvas& canvas);

}  // namespace mrstitch
