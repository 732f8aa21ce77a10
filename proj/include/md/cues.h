// Multi-cue pyramid construction: surface normals from range images,
// LiDAR cloud-to-image conversion and coarse-to-fine downscaling.
#pragma once

#include "md/image.h"
#include "md/projection.h"

#include <stdexcept>
#include <vector>

namespace md {

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyFrame : std::runtime_error {
  explicit EmptyFrame(const std::string& what) : std::runtime_error(what) {}
};

struct NormalConfig {
  double radius_scale  = 2.5;  // pixel*m, tau = radius_scale / range
  double min_radius    = 2.0;  // pixels
  double max_radius    = 8.0;
  int min_neighbors    = 6;
  double degeneracy    = 0.5;   // invalid when lambda_min / lambda_mid above this
  double range_gate_abs = 0.1;  // neighbors beyond this range difference are
  double range_gate_rel = 0.05; // excluded from the plane fit
};

struct PyramidConfig {
  int pre_downscale_rows = 1;
  int pre_downscale_cols = 1;
  // Inverse scales relative to the (pre-downscaled) input, finest first,
  // each a power-of-two multiple of the previous one.
  std::vector<int> scales{2, 4, 8};
  NormalConfig normals;
};

struct PyramidLevel {
  ScalarImage intensity;
  ScalarImage range;
  NormalImage normals;
  ProjectionModel model;
  // Masked central-difference gradients per cue, [d/du d/dv].
  Grid<Eigen::Vector2d> intensity_grad;
  Grid<Eigen::Vector2d> range_grad;

  int rows() const { return intensity.rows(); }
  int cols() const { return intensity.cols(); }
};

// Levels ordered coarse to fine.
struct CuePyramid {
  std::vector<PyramidLevel> levels;
  double timestamp = 0;

  const PyramidLevel& finest() const { return levels.back(); }
  const PyramidLevel& coarsest() const { return levels.front(); }
  std::size_t levelCount() const { return levels.size(); }
};

struct LidarPoint {
  Eigen::Vector3d position;
  double intensity = 0;
};

// Plane-fit normals from a range image. Per-pixel invalidation only.
NormalImage computeNormals(const ScalarImage& range, const ProjectionModel& model,
                           const NormalConfig& config = {});

// Z-buffered projection of a cloud into a spherical model. Intensity is
// clipped at the given percentile and scaled to [0, 1].
std::pair<ScalarImage, ScalarImage> cloudToImage(const std::vector<LidarPoint>& points,
                                                 const ProjectionModel& model,
                                                 double intensity_percentile = 0.99);

// Halves a level: intensity mean / range min / normals renormalized mean of
// the valid children; output valid iff at least one child is valid.
PyramidLevel downscaleLevel(const PyramidLevel& level, int row_factor = 2,
                            int col_factor = 2);

void computeGradients(PyramidLevel& level);

CuePyramid buildPyramid(const ScalarImage& intensity, const ScalarImage& range,
                        const ProjectionModel& model, const PyramidConfig& config,
                        double timestamp = 0);

}  // namespace md
