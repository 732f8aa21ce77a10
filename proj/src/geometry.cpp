#include "md/geometry.h"

namespace md {

Isometry3 v2t(const Vector6d& v) {
  const Eigen::Vector3d q = v.tail<3>();
  const double n2 = q.squaredNorm();
  if (n2 > 1.0 + 1e-12) {
    throw InvalidPerturbation("v2t: |q| > 1 (" + std::to_string(std::sqrt(n2)) + ")");
  }
  const double w = std::sqrt(std::max(0.0, 1.0 - n2));
  Isometry3 iso  = Isometry3::Identity();
  iso.linear()   = Eigen::Quaterniond(w, q.x(), q.y(), q.z()).toRotationMatrix();
  iso.translation() = v.head<3>();
  return iso;
}

Vector6d t2v(const Isometry3& iso) {
  Eigen::Quaterniond q(iso.linear());
  if (q.w() < 0) {
    q.coeffs() *= -1.0;
  }
  Vector6d v;
  v.head<3>() = iso.translation();
  v.tail<3>() = q.vec();
  return v;
}

double translationNorm(const Isometry3& iso) {
  return iso.translation().norm();
}

double rotationAngle(const Isometry3& iso) {
  return Eigen::AngleAxisd(iso.linear()).angle();
}

bool isValidIsometry(const Isometry3& iso, double tolerance) {
  const Eigen::Matrix3d& r = iso.linear();
  if (!iso.matrix().allFinite()) {
    return false;
  }
  if (((r.transpose() * r) - Eigen::Matrix3d::Identity()).norm() > tolerance) {
    return false;
  }
  return std::abs(r.determinant() - 1.0) <= tolerance;
}

Isometry3 orthonormalized(const Isometry3& iso) {
  const Eigen::Matrix3d& r = iso.linear();
  if (((r.transpose() * r) - Eigen::Matrix3d::Identity()).norm() <= 1e-7) {
    return iso;
  }
  Isometry3 out = iso;
  out.linear()  = Eigen::Quaterniond(r).normalized().toRotationMatrix();
  return out;
}

}  // namespace md
