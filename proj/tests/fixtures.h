// Shared synthetic fixtures: a textured room seen by a pinhole camera or a
// spinning LiDAR, rendered from ground-truth poses.
#pragma once

#include "md/cues.h"
#include "md/geometry.h"
#include "md/synth.h"

namespace md::fixtures {

inline Scene roomScene() {
  Scene scene;
  ScenePrimitive room;
  room.type          = ScenePrimitive::Type::Box;
  room.lo            = {-3.0, -2.5, -2.0};
  room.hi            = {3.0, 2.5, 4.0};
  room.pattern       = PatternId::Sines;
  room.pattern_scale = 0.7;
  scene.primitives.push_back(room);

  ScenePrimitive pillar;
  pillar.type          = ScenePrimitive::Type::Box;
  pillar.lo            = {-1.4, -2.5, 2.0};
  pillar.hi            = {-0.8, 2.5, 2.6};
  pillar.pattern       = PatternId::Mixed;
  pillar.pattern_scale = 0.35;
  scene.primitives.push_back(pillar);

  ScenePrimitive ball;
  ball.type          = ScenePrimitive::Type::Sphere;
  ball.center        = {1.2, 0.4, 2.4};
  ball.radius        = 0.6;
  ball.pattern       = PatternId::Sines;
  ball.pattern_scale = 0.3;
  ball.pattern_shift = {5, 5, 5};
  scene.primitives.push_back(ball);
  return scene;
}

inline ProjectionModel roomCamera() {
  return {ProjectionKind::Pinhole, {260, 260, 160, 120}, 240, 320, 0.2, 20.0};
}

inline PyramidConfig roomPyramidConfig() {
  PyramidConfig config;
  config.scales = {2, 4, 8};
  return config;
}

inline ProjectionModel lidarModel() {
  const double fx = 512.0 / (2 * M_PI);
  const double fy = -64.0 / (M_PI / 2);
  return {ProjectionKind::Spherical, {fx, fy, 256, 32}, 64, 512, 0.3, 60.0};
}

inline PyramidConfig lidarPyramidConfig() {
  PyramidConfig config;
  config.scales = {1, 2, 4};
  return config;
}

inline CuePyramid renderPyramid(const Scene& scene, const Isometry3& pose,
                                const ProjectionModel& model,
                                const PyramidConfig& config, double timestamp = 0,
                                const RenderOptions& options = {}) {
  const RenderedFrame frame = renderScene(scene, pose, model, options);
  return buildPyramid(frame.intensity, frame.range, model, config, timestamp);
}

}  // namespace md::fixtures
