// SE(3) chart used by every optimization module: 6-vector perturbations
// holding translation and the imaginary part of a unit quaternion.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <stdexcept>

namespace md {

using Isometry3 = Eigen::Isometry3d;
using Vector6d  = Eigen::Matrix<double, 6, 1>;
using Matrix6d  = Eigen::Matrix<double, 6, 6>;

struct InvalidPerturbation : std::runtime_error {
  explicit InvalidPerturbation(const std::string& what) : std::runtime_error(what) {}
};

// [t, q_imag] -> isometry. The real part is recovered as sqrt(1 - |q|^2).
Isometry3 v2t(const Vector6d& v);

// Inverse chart; quaternion sign fixed so the real part is >= 0.
Vector6d t2v(const Isometry3& iso);

inline Isometry3 boxplus(const Isometry3& x, const Vector6d& d) {
  return x * v2t(d);
}

// Right chart: boxminus(boxplus(x, d), x) == d for small d.
inline Vector6d boxminus(const Isometry3& xa, const Isometry3& xb) {
  return t2v(xb.inverse() * xa);
}

// Magnitudes used by keyframe spawning thresholds.
double translationNorm(const Isometry3& iso);
double rotationAngle(const Isometry3& iso);

bool isValidIsometry(const Isometry3& iso, double tolerance = 1e-9);

// Quaternion round-trip renormalization, applied when R'R drifts from I.
Isometry3 orthonormalized(const Isometry3& iso);

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

}  // namespace md
