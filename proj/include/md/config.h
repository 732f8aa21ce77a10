// Run configuration: one JSON document covering sensor model, pyramid,
// registration, tracker, loop closure and graph solver parameters.
#pragma once

#include "md/dataset.h"
#include "md/loop_closer.h"
#include "md/tracking.h"

#include <string>

namespace md {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  std::string sensor = "rgbd";  // rgbd | lidar
  ProjectionModel model;
  RgbdLoadConfig rgbd;
  PyramidConfig pyramid;
  TrackerConfig tracker;
  LoopCloserConfig loop_closer;
  bool loop_closure_enabled = true;
  SolverConfig graph_solver;
  double ply_voxel   = 0.0;  // 0 disables map thinning
  double synth_noise_sigma = 0.0;  // intensity noise when rendering fixtures
  std::uint64_t seed = 0;
  bool single_thread = false;

  void validate() const;  // throws ConfigError
};

// Defaults for the given sensor kind; the LiDAR profile switches to the
// spherical model, full-resolution finest level and wider gates.
RunConfig defaultConfig(const std::string& sensor = "rgbd");

std::string configToJson(const RunConfig& config);
RunConfig configFromJson(const std::string& text);  // rejects unknown keys
RunConfig loadConfig(const std::string& path);

}  // namespace md
