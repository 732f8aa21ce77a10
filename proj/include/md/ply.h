// World-frame point cloud export of keyframe maps.
#pragma once

#include "md/tracking.h"

#include <string>

namespace md {

struct PlyError : std::runtime_error {
  explicit PlyError(const std::string& what) : std::runtime_error(what) {}
};

struct PlyConfig {
  double voxel_size = 0.0;  // > 0 keeps one point per voxel
};

// Unprojects every valid finest-level pixel of every keyframe through the
// keyframe pose and writes an ASCII PLY with x, y, z, intensity. Returns the
// number of vertices written. Throws PlyError on an empty keyframe set or
// write failure.
std::size_t exportPly(const std::vector<std::shared_ptr<const Keyframe>>& keyframes,
                      const std::string& path, const PlyConfig& config = {});

}  // namespace md
