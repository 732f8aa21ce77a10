// RANSAC rigid alignment of 3D-3D correspondences: minimal 3-point Horn
// fits, inlier counting under a distance gate, refit on the best inlier set.
#pragma once

#include "md/geometry.h"

#include <cstdint>
#include <string>
#include <vector>

namespace md {

using Correspondence = std::pair<Eigen::Vector3d, Eigen::Vector3d>;  // (p_i, p_j)

struct RansacConfig {
  double inlier_gate         = 0.2;  // meters; 0.5 for LiDAR-scale scenes
  int max_iterations         = 1000;
  int min_inliers            = 10;
  double min_inlier_fraction = 0.4;
  std::uint64_t seed         = 1;
};

struct RansacResult {
  bool success = false;
  Isometry3 transform = Isometry3::Identity();  // maps p_j into p_i
  std::vector<int> inliers;
  std::string failure;  // empty on success
};

// Closed-form rigid fit (Horn / Umeyama) mapping the second points onto the
// first; throws DegenerateFit when the point set is collinear.
struct DegenerateFit : std::runtime_error {
  explicit DegenerateFit(const std::string& what) : std::runtime_error(what) {}
};
Isometry3 hornFit(const std::vector<Correspondence>& correspondences);

RansacResult ransacAlign(const std::vector<Correspondence>& correspondences,
                         const RansacConfig& config = {});

}  // namespace md
