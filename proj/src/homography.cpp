#include "mrstitch/homography.hpp"

#include <Eigen/LU>
#include <cmath>

#include "mrstitch/error.hpp"

namespace mrstitch {

Eigen::Matrix3d normalize_homography(const Eigen::Matrix3d& m) {
  const double fro = m.norm();
  if (fro == 0.0 || !std::isfinite(fro)) return m;
  if (std::abs(m(2, 2)) > 1e-12 * fro) return m / m(2, 2);
  return m / fro;
}

Homography::Homography(const Eigen::Matrix3d& m) : m_(normalize_homography(m)) {
  const double det = m_.determinant();
  if (!std::isfinite(det) || std::abs(det) <= 1e-9) {
    throw DegeneracyError("singular homography");
  }
}

Homography Homography::translation(double dx, double dy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = dx;
  m(1, 2) = dy;
  return Homography(m);
}

std::optional<Point2> Homography::apply(Point2 p) const {
  const double w = w_of(p);
  if (std::abs(w) < 1e-12) return std::nullopt;
  return Point2{(m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2)) / w,
                (m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2)) / w};
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Homography Homography::compose(const Homography& inner) const {
  return Homography(m_ * inner.m_);
}

bool Homography::approx_equal(const Homography& other, double tol) const {
  return (m_ - other.m_).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace mrstitch
