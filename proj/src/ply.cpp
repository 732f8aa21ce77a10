#include "md/ply.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace md {

namespace {

struct VoxelHash {
  std::size_t operator()(const std::array<long, 3>& v) const {
    std::size_t h = 1469598103934665603ULL;
    for (long x : v) {
      h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ULL;
    }
    return h;
  }
};

}  // namespace

std::size_t exportPly(const std::vector<std::shared_ptr<const Keyframe>>& keyframes,
                      const std::string& path, const PlyConfig& config) {
  if (keyframes.empty()) {
    throw PlyError("exportPly: no keyframes");
  }
  struct Vertex {
    Eigen::Vector3d p;
    double intensity;
  };
  std::vector<Vertex> vertices;
  std::unordered_set<std::array<long, 3>, VoxelHash> occupied;
  for (const auto& kf : keyframes) {
    const PyramidLevel& level = kf->pyramid.finest();
    for (int r = 0; r < level.rows(); ++r) {
      for (int c = 0; c < level.cols(); ++c) {
        if (!level.range.isValid(r, c) || !level.intensity.isValid(r, c)) {
          continue;
        }
        const Eigen::Vector3d p =
            kf->pose *
            level.model.unproject({double(c), double(r)}, level.range.data(r, c));
        if (config.voxel_size > 0) {
          const std::array<long, 3> voxel = {
              static_cast<long>(std::floor(p.x() / config.voxel_size)),
              static_cast<long>(std::floor(p.y() / config.voxel_size)),
              static_cast<long>(std::floor(p.z() / config.voxel_size))};
          if (!occupied.insert(voxel).second) {
            continue;
          }
        }
        vertices.push_back({p, level.intensity.data(r, c)});
      }
    }
  }

  std::ofstream out(path);
  if (!out) {
    throw PlyError("exportPly: cannot open " + path);
  }
  out << "ply\nformat ascii 1.0\nelement vertex " << vertices.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property float intensity\nend_header\n";
  char line[128];
  for (const Vertex& v : vertices) {
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f %.4f\n", v.p.x(), v.p.y(),
                  v.p.z(), v.intensity);
    out << line;
  }
  if (!out) {
    throw PlyError("exportPly: write failure on " + path);
  }
  return vertices.size();
}

}  // namespace md
