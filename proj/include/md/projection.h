// Pinhole and spherical projection models behind one interface. The
// spherical model maps azimuth to columns (fx px/rad) and elevation to
// rows (fy px/rad, typically negative so elevation grows upward).
#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace md {

struct InvalidRange : std::runtime_error {
  explicit InvalidRange(const std::string& what) : std::runtime_error(what) {}
};

struct ProjectionSingularity : std::runtime_error {
  explicit ProjectionSingularity(const std::string& what) : std::runtime_error(what) {}
};

struct CameraMatrix {
  double fx = 0, fy = 0, cx = 0, cy = 0;
};

enum class ProjectionKind { Pinhole, Spherical };

struct PixelCoord {
  double u = 0;  // column
  double v = 0;  // row
};

struct ProjectionResult {
  bool valid   = false;
  PixelCoord uv;
  double range = 0;  // depth (pinhole) or euclidean range (spherical)
};

class ProjectionModel {
 public:
  ProjectionModel() = default;
  ProjectionModel(ProjectionKind kind, const CameraMatrix& k, int rows, int cols,
                  double min_range, double max_range);

  ProjectionKind kind() const { return kind_; }
  const CameraMatrix& k() const { return k_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double minRange() const { return min_range_; }
  double maxRange() const { return max_range_; }

  // Behind-camera, out-of-range and out-of-image points come back invalid.
  ProjectionResult project(const Eigen::Vector3d& p) const;

  // Inverse mapping; throws InvalidRange outside [min_range, max_range].
  Eigen::Vector3d unproject(const PixelCoord& uv, double range) const;

  // du/dp, 2x3. Throws ProjectionSingularity at pz=0 (pinhole) or on the
  // z-axis (spherical).
  Eigen::Matrix<double, 2, 3> projectionJacobian(const Eigen::Vector3d& p) const;

  // Range of a point in this model (pinhole: z, spherical: |p|).
  double rangeOf(const Eigen::Vector3d& p) const;

  // Model for an image downscaled by the given integer factors.
  ProjectionModel scaled(int row_factor, int col_factor) const;

  bool inImage(const PixelCoord& uv, double border = 0.0) const {
    return uv.u >= border && uv.u <= cols_ - 1 - border && uv.v >= border &&
           uv.v <= rows_ - 1 - border;
  }

 private:
  ProjectionKind kind_ = ProjectionKind::Pinhole;
  CameraMatrix k_;
  int rows_ = 0, cols_ = 0;
  double min_range_ = 0.1, max_range_ = 100.0;
};

}  // namespace md
