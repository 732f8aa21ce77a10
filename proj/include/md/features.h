// Minimal oriented binary features on masked intensity images: Harris-style
// corner score, orientation from the intensity centroid, and a fixed
// 256-sample rotation-steered comparison pattern.
#pragma once

#include "md/image.h"
#include "md/projection.h"

#include <bitset>
#include <vector>

namespace md {

struct Keypoint {
  PixelCoord uv;            // u = col, v = row
  double response    = 0;
  double orientation = 0;   // radians
};

struct BinaryDescriptor {
  std::bitset<256> bits;
  Keypoint keypoint;
};

struct FeatureConfig {
  int max_features    = 500;
  int grid_rows       = 8;   // spatial bucketing of the response maxima
  int grid_cols       = 8;
  int patch_radius    = 15;  // descriptor sampling support
  int centroid_radius = 7;   // orientation support
  double min_response = 1e-5;
};

// Harris response with a 3x3 structure-tensor window; invalid wherever the
// window touches an invalid pixel.
ScalarImage cornerResponse(const ScalarImage& intensity);

std::vector<BinaryDescriptor> extractFeatures(const ScalarImage& intensity,
                                              const FeatureConfig& config = {});

inline int hammingDistance(const std::bitset<256>& a, const std::bitset<256>& b) {
  return static_cast<int>((a ^ b).count());
}

}  // namespace md
