#include "md/synth.h"

#include <doctest.h>

#include <sstream>

using namespace md;

namespace {

ProjectionModel pinholeModel(int rows = 120, int cols = 160, double f = 100) {
  return {ProjectionKind::Pinhole,
          {f, f, cols / 2.0, rows / 2.0},
          rows,
          cols,
          0.1,
          50.0};
}

}  // namespace

TEST_CASE("plane at z=2 renders range 2 at the principal pixel") {
  Scene scene;
  ScenePrimitive plane;
  plane.type   = ScenePrimitive::Type::Plane;
  plane.normal = Eigen::Vector3d(0, 0, 1);
  plane.offset = 2.0;
  scene.primitives.push_back(plane);
  const auto model = pinholeModel();
  const RenderedFrame frame = renderScene(scene, Isometry3::Identity(), model);
  REQUIRE(frame.range.isValid(60, 80));
  CHECK(frame.range.data(60, 80) == doctest::Approx(2.0));
}

TEST_CASE("cross-pose reprojection consistency") {
  Scene scene;
  ScenePrimitive box;
  box.type = ScenePrimitive::Type::Box;
  box.lo   = {-3, -2.5, -1};
  box.hi   = {3, 2.5, 5};
  scene.primitives.push_back(box);
  const auto model = pinholeModel();

  const Isometry3 pose_a = Isometry3::Identity();
  Vector6d d             = Vector6d::Zero();
  d << 0.2, -0.1, 0.15, 0.02, -0.03, 0.01;
  const Isometry3 pose_b = boxplus(pose_a, d);

  const RenderedFrame frame_a = renderScene(scene, pose_a, model);
  const RenderedFrame frame_b = renderScene(scene, pose_b, model);

  const Isometry3 b_from_a = pose_b.inverse() * pose_a;
  int checked = 0;
  for (int r = 2; r < model.rows() - 2; r += 3) {
    for (int c = 2; c < model.cols() - 2; c += 3) {
      if (!frame_a.range.isValid(r, c)) {
        continue;
      }
      const Eigen::Vector3d p =
          model.unproject({double(c), double(r)}, frame_a.range.data(r, c));
      const Eigen::Vector3d pb = b_from_a * p;
      const auto prj           = model.project(pb);
      if (!prj.valid) {
        continue;
      }
      const int rc = static_cast<int>(std::lround(prj.uv.v));
      const int cc = static_cast<int>(std::lround(prj.uv.u));
      if (!frame_b.range.isValid(rc, cc)) {
        continue;
      }
      // The same surface seen from b; allow for pixel quantization by
      // requiring agreement where the surface is smooth.
      const double diff = std::abs(frame_b.range.data(rc, cc) - model.rangeOf(pb));
      if (diff < 0.05) {
        ++checked;
      }
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("exact ray consistency at subpixel positions") {
  // Where the reprojection lands exactly on a pixel center the ranges agree
  // to high precision: verify by projecting frame-b pixel rays back.
  Scene scene;
  ScenePrimitive plane;
  plane.type   = ScenePrimitive::Type::Plane;
  plane.normal = Eigen::Vector3d(0, 0, 1);
  plane.offset = 3.0;
  scene.primitives.push_back(plane);
  const auto model = pinholeModel();
  Isometry3 pose   = Isometry3::Identity();
  pose.translation() = Eigen::Vector3d(0.4, -0.2, 0.5);
  const RenderedFrame frame = renderScene(scene, pose, model);
  for (int r = 10; r < model.rows() - 10; r += 7) {
    for (int c = 10; c < model.cols() - 10; c += 7) {
      REQUIRE(frame.range.isValid(r, c));
      const Eigen::Vector3d p_world =
          pose * model.unproject({double(c), double(r)}, frame.range.data(r, c));
      CHECK(std::abs(p_world.z() - 3.0) < 1e-6);
    }
  }
}

TEST_CASE("sphere silhouette matches the analytic solid angle within 2 percent") {
  Scene scene;
  ScenePrimitive sphere;
  sphere.type   = ScenePrimitive::Type::Sphere;
  sphere.center = {0, 0, 6};
  sphere.radius = 1.0;
  scene.primitives.push_back(sphere);
  const auto model = pinholeModel(240, 320, 200);
  const RenderedFrame frame = renderScene(scene, Isometry3::Identity(), model);
  int hits = 0;
  for (int r = 0; r < model.rows(); ++r) {
    for (int c = 0; c < model.cols(); ++c) {
      hits += frame.range.isValid(r, c) ? 1 : 0;
    }
  }
  // Projected disc radius ~ f * R / sqrt(d^2 - R^2).
  const double d = 6.0, radius = 1.0, f = 200.0;
  const double disc = f * radius / std::sqrt(d * d - radius * radius);
  const double expected = M_PI * disc * disc;
  CHECK(std::abs(hits - expected) / expected < 0.02);
}

TEST_CASE("sensor inside a sphere is a render error") {
  Scene scene;
  ScenePrimitive sphere;
  sphere.type   = ScenePrimitive::Type::Sphere;
  sphere.center = {0, 0, 0};
  sphere.radius = 10.0;
  scene.primitives.push_back(sphere);
  CHECK_THROWS_AS(renderScene(scene, Isometry3::Identity(), pinholeModel()),
                  RenderError);
}

TEST_CASE("rendering is deterministic for a fixed seed") {
  Scene scene;
  ScenePrimitive box;
  box.type = ScenePrimitive::Type::Box;
  box.lo   = {-3, -3, -3};
  box.hi   = {3, 3, 3};
  scene.primitives.push_back(box);
  RenderOptions options;
  options.noise_sigma = 0.02;
  options.seed        = 77;
  const auto model = pinholeModel();
  const RenderedFrame a = renderScene(scene, Isometry3::Identity(), model, options);
  const RenderedFrame b = renderScene(scene, Isometry3::Identity(), model, options);
  CHECK(a.intensity.data.data() == b.intensity.data.data());
}

TEST_CASE("scene text format round trip") {
  std::istringstream in(R"(# test scene
box -3 -2 -1 3 2 5 2 1.0
sphere 0.5 0 3 0.8 0 1.0
plane 0 0 1 6 1 0.5 10 0 0
)");
  const Scene scene = parseScene(in);
  REQUIRE(scene.primitives.size() == 3);
  CHECK(scene.primitives[0].type == ScenePrimitive::Type::Box);
  CHECK(scene.primitives[1].radius == doctest::Approx(0.8));
  CHECK(scene.primitives[2].pattern_shift.x() == doctest::Approx(10.0));

  std::istringstream bad("triangle 0 0 0");
  CHECK_THROWS_AS(parseScene(bad), RenderError);
}
