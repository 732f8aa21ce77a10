// Timestamped trajectories: TUM-style text serialization and ATE with
// closed-form rigid alignment.
#pragma once

#include "md/geometry.h"

#include <iosfwd>
#include <string>
#include <vector>

namespace md {

struct TrajectoryError : std::runtime_error {
  explicit TrajectoryError(const std::string& what) : std::runtime_error(what) {}
};

struct StampedPose {
  double timestamp = 0;
  Isometry3 pose   = Isometry3::Identity();
};

// Timestamps strictly increasing; push() enforces it.
struct Trajectory {
  std::vector<StampedPose> poses;

  void push(double timestamp, const Isometry3& pose);
  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

// One line per pose: `timestamp tx ty tz qx qy qz qw`, 9 significant digits.
void writeTrajectory(const Trajectory& trajectory, std::ostream& out);
void writeTrajectory(const Trajectory& trajectory, const std::string& path);
Trajectory readTrajectory(std::istream& in);
Trajectory readTrajectory(const std::string& path);

struct AteResult {
  double rmse = 0;
  Isometry3 alignment = Isometry3::Identity();  // groundtruth <- estimate
  Trajectory aligned_estimate;
  std::vector<double> errors;  // translational error per association
};

// Associates by nearest timestamp within max_dt, aligns with the Horn
// closed form over the associated translations, reports the residual RMSE.
// Throws TrajectoryError with fewer than 3 associations.
AteResult ateRmse(const Trajectory& estimate, const Trajectory& groundtruth,
                  double max_dt = 0.02);

}  // namespace md
