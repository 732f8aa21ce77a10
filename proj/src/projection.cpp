#include "md/projection.h"

#include <cmath>

namespace md {

ProjectionModel::ProjectionModel(ProjectionKind kind, const CameraMatrix& k, int rows,
                                 int cols, double min_range, double max_range)
    : kind_(kind), k_(k), rows_(rows), cols_(cols), min_range_(min_range),
      max_range_(max_range) {
  if (k.fx == 0 || k.fy == 0) {
    throw std::invalid_argument("ProjectionModel: fx and fy must be nonzero");
  }
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("ProjectionModel: image size must be positive");
  }
  if (min_range <= 0 || max_range <= min_range) {
    throw std::invalid_argument("ProjectionModel: invalid range interval");
  }
}

ProjectionResult ProjectionModel::project(const Eigen::Vector3d& p) const {
  ProjectionResult out;
  if (!p.allFinite()) {
    return out;
  }
  if (kind_ == ProjectionKind::Pinhole) {
    if (p.z() <= 0) {
      return out;
    }
    out.range = p.z();
    out.uv.u  = k_.fx * p.x() / p.z() + k_.cx;
    out.uv.v  = k_.fy * p.y() / p.z() + k_.cy;
  } else {
    out.range = p.norm();
    if (out.range <= 0) {
      return out;
    }
    const double azimuth   = std::atan2(p.y(), p.x());
    const double elevation = std::atan2(p.z(), std::hypot(p.x(), p.y()));
    out.uv.u = k_.fx * azimuth + k_.cx;
    out.uv.v = k_.fy * elevation + k_.cy;
  }
  out.valid = out.range >= min_range_ && out.range <= max_range_ && inImage(out.uv);
  return out;
}

Eigen::Vector3d ProjectionModel::unproject(const PixelCoord& uv, double range) const {
  if (range < min_range_ || range > max_range_) {
    throw InvalidRange("unproject: range " + std::to_string(range) +
                       " outside valid interval");
  }
  if (kind_ == ProjectionKind::Pinhole) {
    return {(uv.u - k_.cx) / k_.fx * range, (uv.v - k_.cy) / k_.fy * range, range};
  }
  const double azimuth   = (uv.u - k_.cx) / k_.fx;
  const double elevation = (uv.v - k_.cy) / k_.fy;
  const double ce        = std::cos(elevation);
  return {range * ce * std::cos(azimuth), range * ce * std::sin(azimuth),
          range * std::sin(elevation)};
}

Eigen::Matrix<double, 2, 3> ProjectionModel::projectionJacobian(
    const Eigen::Vector3d& p) const {
  Eigen::Matrix<double, 2, 3> jac;
  if (kind_ == ProjectionKind::Pinhole) {
    if (std::abs(p.z()) < 1e-12) {
      throw ProjectionSingularity("projectionJacobian: pinhole point at z=0");
    }
    const double iz = 1.0 / p.z();
    jac << k_.fx * iz, 0, -k_.fx * p.x() * iz * iz,
           0, k_.fy * iz, -k_.fy * p.y() * iz * iz;
    return jac;
  }
  const double r2 = p.x() * p.x() + p.y() * p.y();
  if (r2 < 1e-18) {
    throw ProjectionSingularity("projectionJacobian: spherical point on z-axis");
  }
  const double r  = std::sqrt(r2);
  const double n2 = r2 + p.z() * p.z();
  jac << -k_.fx * p.y() / r2, k_.fx * p.x() / r2, 0,
         -k_.fy * p.z() * p.x() / (r * n2), -k_.fy * p.z() * p.y() / (r * n2),
          k_.fy * r / n2;
  return jac;
}

double ProjectionModel::rangeOf(const Eigen::Vector3d& p) const {
  return kind_ == ProjectionKind::Pinhole ? p.z() : p.norm();
}

ProjectionModel ProjectionModel::scaled(int row_factor, int col_factor) const {
  CameraMatrix k = k_;
  k.fx /= col_factor;
  k.cx /= col_factor;
  k.fy /= row_factor;
  k.cy /= row_factor;
  return {kind_, k, rows_ / row_factor, cols_ / col_factor, min_range_, max_range_};
}

}  // namespace md
