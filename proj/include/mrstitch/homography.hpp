#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>

#include "mrstitch/geometry.hpp"

namespace mrstitch {

// Projective map from candidate-image coordinates into reference-image
// coordinates. Stored canonically: H(2,2)==1 when that entry is nonzero,
// otherwise unit Frobenius norm.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  // Throws DegeneracyError when |det| <= 1e-9 after normalization.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography translation(double dx, double dy);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  // Projects a point; empty when it maps to the plane at infinity.
  std::optional<Point2> apply(Point2 p) const;
  // Homogeneous w of the projected point (before division).
  double w_of(Point2 p) const { return m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2); }

  Homography inverse() const;
  Homography compose(const Homography& inner) const;  // this ∘ inner

  bool approx_equal(const Homography& other, double tol = 1e-9) const;

 private:
  Eigen::Matrix3d m_;
};

// Normalizes an arbitrary 3x3 matrix to the canonical representative.
Eigen::Matrix3d normalize_homography(const Eigen::Matrix3d& m);

}  // namespace mrstitch
