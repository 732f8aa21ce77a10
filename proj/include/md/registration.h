// Multi-cue direct alignment of a moving pyramid against a fixed one,
// coarse to fine. Residuals warp fixed-frame pixels into the moving frame;
// the returned transform maps moving-frame coordinates into the fixed
// frame and the information matrix is the Gauss-Newton H at the optimum.
#pragma once

#include "md/cues.h"
#include "md/geometry.h"
#include "md/ils.h"

#include <stdexcept>

namespace md {

struct InsufficientOverlap : std::runtime_error {
  explicit InsufficientOverlap(const std::string& what) : std::runtime_error(what) {}
};

struct Divergence : std::runtime_error {
  explicit Divergence(const std::string& what) : std::runtime_error(what) {}
};

struct CueWeights {
  double intensity = 1.0;
  double range     = 5.0;                                // 1/m^2
  Eigen::Matrix3d normal = Eigen::Matrix3d::Identity();  // isotropic default
};

struct CueGates {
  double intensity        = 0.25;  // |e| above this invalidates the pixel
  double range            = 1.0;   // meters
  double normal_angle_deg = 45.0;
};

struct HuberThresholds {
  double intensity = 0.1;
  double range     = 0.25;
  double normal    = 0.2;
};

struct RegistrationConfig {
  CueWeights weights;
  CueGates gates;
  HuberThresholds huber;
  SolverConfig solver;
  int min_valid_pixels_finest = 300;  // scaled by level area ratio
  double overlap_range_gate   = 1.0;
  // A candidate iterate may transiently raise the mean chi2 by this factor
  // (the valid-pixel set changes between iterates); beyond it the step is
  // damped and, with damping exhausted, the registration diverges.
  double chi2_growth_cap = 1.5;
};

struct RegistrationResult {
  Isometry3 transform = Isometry3::Identity();  // fixed <- moving
  Matrix6d information = Matrix6d::Zero();      // H at the accepted optimum
  double chi2_intensity = 0, chi2_range = 0, chi2_normal = 0;
  double mean_chi2          = 0;  // chi2 per contributing residual
  std::size_t valid_pixels  = 0;  // finest level
  bool converged            = false;
};

// Cue remapping: the value of a fixed-frame cue after applying X.
double remapRange(const ProjectionModel& moving_model, const Isometry3& x,
                  const Eigen::Vector3d& p_fixed);
Eigen::Vector3d remapNormal(const Isometry3& x, const Eigen::Vector3d& n_fixed);

// Per-pixel residuals and analytic jacobians w.r.t. a right perturbation
// of moving_from_fixed. A cue is present only when valid on both sides.
struct PixelResidual {
  bool valid = false;  // at least one cue present, no gate violated
  bool has_intensity = false, has_range = false, has_normal = false;
  double e_intensity = 0, e_range = 0;
  Eigen::Vector3d e_normal = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 1, 6> j_intensity = Eigen::Matrix<double, 1, 6>::Zero();
  Eigen::Matrix<double, 1, 6> j_range     = Eigen::Matrix<double, 1, 6>::Zero();
  Eigen::Matrix<double, 3, 6> j_normal    = Eigen::Matrix<double, 3, 6>::Zero();
};

PixelResidual residualAt(const PyramidLevel& fixed, const PyramidLevel& moving,
                         const Isometry3& moving_from_fixed, int row, int col,
                         const RegistrationConfig& config);

// Fraction of valid fixed pixels that reproject onto a range-compatible
// valid moving pixel under fixed_from_moving.
double overlap(const PyramidLevel& fixed, const PyramidLevel& moving,
               const Isometry3& fixed_from_moving, double range_gate = 1.0);

RegistrationResult registerPyramids(const CuePyramid& fixed, const CuePyramid& moving,
                                    const Isometry3& guess,
                                    const RegistrationConfig& config = {});

}  // namespace md
