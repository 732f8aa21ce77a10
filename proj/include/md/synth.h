// Ray-cast scene renderer for synthetic fixtures: textured planes, boxes
// and spheres with procedural intensity patterns, ground truth by
// construction.
#pragma once

#include "md/cues.h"
#include "md/geometry.h"
#include "md/projection.h"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace md {

struct RenderError : std::runtime_error {
  explicit RenderError(const std::string& what) : std::runtime_error(what) {}
};

enum class PatternId { Sines = 0, Checker = 1, Mixed = 2 };

struct ScenePrimitive {
  enum class Type { Plane, Box, Sphere };
  Type type = Type::Plane;
  // Plane: n.p = offset. Box: axis-aligned shell [lo, hi]. Sphere: solid.
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0;
  Eigen::Vector3d lo = Eigen::Vector3d::Zero(), hi = Eigen::Vector3d::Zero();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1;
  PatternId pattern    = PatternId::Sines;
  double pattern_scale = 1.0;
  // World offset fed to the pattern, so identical shapes can carry
  // identical or distinct textures.
  Eigen::Vector3d pattern_shift = Eigen::Vector3d::Zero();
};

struct Scene {
  std::vector<ScenePrimitive> primitives;
};

// One line per primitive:
//   plane nx ny nz offset pattern scale [shift_x shift_y shift_z]
//   box lox loy loz hix hiy hiz pattern scale [shift...]
//   sphere cx cy cz radius pattern scale [shift...]
Scene parseScene(std::istream& in);
Scene loadScene(const std::string& path);

struct RenderOptions {
  double noise_sigma = 0.0;  // gaussian intensity noise, clamped to [0, 1]
  std::uint64_t seed = 0;
};

struct RenderedFrame {
  ScalarImage intensity;
  ScalarImage range;
};

// pose: world <- sensor. Throws RenderError when the sensor sits inside a
// solid primitive.
RenderedFrame renderScene(const Scene& scene, const Isometry3& pose,
                          const ProjectionModel& model,
                          const RenderOptions& options = {});

double patternIntensity(PatternId id, double scale, const Eigen::Vector3d& p);

}  // namespace md
