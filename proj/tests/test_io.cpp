#include "md/dataset.h"
#include "md/ply.h"
#include "md/trajectory.h"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.h"

using namespace md;
using namespace md::fixtures;
namespace fs = std::filesystem;

namespace {

Isometry3 randomPose(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
  q.normalize();
  Isometry3 pose = Isometry3::Identity();
  pose.linear() = q.toRotationMatrix();
  pose.translation() = Eigen::Vector3d(5 * u(rng), 5 * u(rng), 5 * u(rng));
  return pose;
}

Trajectory transformed(const Trajectory& trajectory, const Isometry3& g) {
  Trajectory out;
  for (const StampedPose& sp : trajectory.poses) {
    out.push(sp.timestamp, g * sp.pose);
  }
  return out;
}

fs::path freshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void writePgm8(const fs::path& path, int rows, int cols, std::uint8_t value) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << cols << " " << rows << "\n255\n";
  for (int i = 0; i < rows * cols; ++i) {
    out.put(static_cast<char>(value));
  }
}

void writePgm16(const fs::path& path, int rows, int cols,
                const std::vector<std::uint16_t>& values) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << cols << " " << rows << "\n65535\n";
  for (std::uint16_t v : values) {  // PNM stores 16-bit samples big-endian
    out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

// RMSE under a fixed rotation with the closed-form optimal translation,
// accumulated in extended precision.
double alignedRmse(const Eigen::Matrix3d& rotation,
                   const std::vector<Eigen::Vector3d>& src,
                   const std::vector<Eigen::Vector3d>& dst) {
  Eigen::Vector3d mean_src = Eigen::Vector3d::Zero(),
                  mean_dst = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  mean_src /= double(src.size());
  mean_dst /= double(src.size());
  const Eigen::Vector3d t = mean_dst - rotation * mean_src;
  long double sum = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    sum += static_cast<long double>((rotation * src[i] + t - dst[i]).squaredNorm());
  }
  return std::sqrt(static_cast<double>(sum / src.size()));
}

}  // namespace

TEST_CASE("trajectory text format") {
  Trajectory trajectory;
  trajectory.push(0.0, Isometry3::Identity());
  std::ostringstream out;
  writeTrajectory(trajectory, out);
  CHECK(out.str() == "0.000000000 0 0 0 0 0 0 1\n");
}

TEST_CASE("trajectory write/read round trip") {
  std::mt19937 rng(7);
  Trajectory trajectory;
  for (int i = 0; i < 1000; ++i) {
    trajectory.push(0.1 * i, randomPose(rng));
  }
  std::stringstream buffer;
  writeTrajectory(trajectory, buffer);
  const Trajectory back = readTrajectory(buffer);
  REQUIRE(back.size() == trajectory.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.poses[i].timestamp == doctest::Approx(trajectory.poses[i].timestamp));
    const Isometry3 rel = trajectory.poses[i].pose.inverse() * back.poses[i].pose;
    CHECK((back.poses[i].pose.translation() - trajectory.poses[i].pose.translation())
              .norm() < 1e-8);
    CHECK(rotationAngle(rel) < 1e-7);
  }
}

TEST_CASE("trajectory parse errors carry line numbers") {
  {
    std::istringstream in("# comment\n0.0 0 0 0 0 0 0 1\nnot a pose\n");
    CHECK_THROWS_WITH_AS(readTrajectory(in), doctest::Contains("line 3"),
                         TrajectoryError);
  }
  {
    std::istringstream in("1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n");
    CHECK_THROWS_WITH_AS(readTrajectory(in), doctest::Contains("line 2"),
                         TrajectoryError);
  }
  {
    std::istringstream in("0.0 0 0 0 0.9 0.9 0.9 0.9\n");
    CHECK_THROWS_AS(readTrajectory(in), TrajectoryError);
  }
}

TEST_CASE("ate is zero for identical and rigidly moved trajectories") {
  std::mt19937 rng(21);
  Trajectory gt;
  for (int i = 0; i < 50; ++i) {
    gt.push(0.1 * i, randomPose(rng));
  }
  CHECK(ateRmse(gt, gt).rmse < 1e-12);

  const Isometry3 motion = randomPose(rng);
  const Trajectory moved = transformed(gt, motion);
  CHECK(ateRmse(moved, gt).rmse < 1e-9);

  // Invariance under rigid transformation of either input.
  Trajectory noisy = gt;
  std::normal_distribution<double> n(0, 0.05);
  for (StampedPose& sp : noisy.poses) {
    sp.pose.translation() += Eigen::Vector3d(n(rng), n(rng), n(rng));
  }
  const double base = ateRmse(noisy, gt).rmse;
  CHECK(std::abs(ateRmse(transformed(noisy, motion), gt).rmse - base) < 1e-9);
  CHECK(std::abs(ateRmse(noisy, transformed(gt, motion)).rmse - base) < 1e-9);
}

TEST_CASE("ate association rules") {
  Trajectory a, b;
  for (int i = 0; i < 10; ++i) {
    a.push(1.0 * i, Isometry3::Identity());
    b.push(1.0 * i + 0.03, Isometry3::Identity());
  }
  CHECK_THROWS_AS(ateRmse(a, b), TrajectoryError);  // 0.03 s > 0.02 s window

  Trajectory two;
  two.push(0.0, Isometry3::Identity());
  two.push(1.0, Isometry3::Identity());
  CHECK_THROWS_AS(ateRmse(two, two), TrajectoryError);  // < 3 associations
}

TEST_CASE("ate matches a brute-force alignment oracle") {
  std::mt19937 rng(99);
  std::normal_distribution<double> noise(0, 0.1);
  Isometry3 disturbance = Isometry3::Identity();
  disturbance.linear() =
      Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  disturbance.translation() = Eigen::Vector3d(0.4, -0.2, 0.1);

  Trajectory gt, est;
  std::vector<Eigen::Vector3d> src, dst;
  for (int i = 0; i < 200; ++i) {
    const double theta = 2 * M_PI * i / 200.0;
    Isometry3 pose = Isometry3::Identity();
    pose.translation() = Eigen::Vector3d(2 * std::cos(theta), 2 * std::sin(theta), 0);
    gt.push(0.1 * i, pose);
    Isometry3 est_pose = disturbance * pose;
    est_pose.translation() += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    est.push(0.1 * i, est_pose);
    src.push_back(est_pose.translation());
    dst.push_back(pose.translation());
  }

  // Coarse yaw grid, then cyclic coordinate descent over the rotation vector
  // with the translation eliminated in closed form at every probe.
  double best_yaw = 0, best = std::numeric_limits<double>::max();
  for (double yaw = 0; yaw < 2 * M_PI; yaw += 0.002) {
    const Eigen::Matrix3d r =
        Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const double rmse = alignedRmse(r, src, dst);
    if (rmse < best) {
      best     = rmse;
      best_yaw = yaw;
    }
  }
  Eigen::Vector3d w(0, 0, best_yaw);
  const auto rotationOf = [](const Eigen::Vector3d& v) {
    const double angle = v.norm();
    return angle < 1e-12
               ? Eigen::Matrix3d::Identity().eval()
               : Eigen::AngleAxisd(angle, v / angle).toRotationMatrix().eval();
  };
  for (double step = 0.01; step > 1e-8; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {1.0, -1.0}) {
          Eigen::Vector3d probe = w;
          probe[axis] += sign * step;
          const double rmse = alignedRmse(rotationOf(probe), src, dst);
          if (rmse < best) {
            best     = rmse;
            w        = probe;
            improved = true;
          }
        }
      }
    }
  }

  const AteResult result = ateRmse(est, gt);
  CHECK(result.rmse == doctest::Approx(best).epsilon(0).scale(0).epsilon(1e-3));
  CHECK(result.errors.size() == 200);
  // Alignment recovers the disturbance it can observe.
  CHECK(result.rmse < 0.2);
}

TEST_CASE("rgbd sequence loading") {
  const fs::path dir = freshDir("md_rgbd_fixture");
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "depth");
  writePgm8(dir / "rgb/0.pgm", 8, 8, 128);
  writePgm8(dir / "rgb/1.pgm", 8, 8, 64);
  std::vector<std::uint16_t> counts(64, 1000);
  counts[0] = 5000;  // 1 m at TUM scale
  counts[1] = 0;     // sensor dropout
  writePgm16(dir / "depth/0.pgm", 8, 8, counts);
  writePgm16(dir / "depth/1.pgm", 8, 8, counts);

  SUBCASE("exact timestamp match") {
    std::ofstream(dir / "rgb.txt") << "# rgb index\n0.0 rgb/0.pgm\n1.0 rgb/1.pgm\n";
    std::ofstream(dir / "depth.txt") << "0.0 depth/0.pgm\n1.0 depth/1.pgm\n";
    auto stream = loadRgbdSequence(dir.string());
    CHECK(stream->size() == 2);
    CHECK(stream->skipped() == 0);
    FrameRecord record;
    REQUIRE(stream->next(record));
    CHECK(!record.isCloud());
    CHECK(record.timestamp == 0.0);
    CHECK(record.intensity.data(3, 3) == doctest::Approx(128.0 / 255.0));
    CHECK(record.depth.data(0, 0) == doctest::Approx(1.0));
    CHECK(record.depth.data(0, 2) == doctest::Approx(0.2));
    CHECK(!record.depth.isValid(0, 1));
    REQUIRE(stream->next(record));
    CHECK(record.timestamp == 1.0);
    CHECK(!stream->next(record));
  }
  SUBCASE("offset beyond the association window") {
    std::ofstream(dir / "rgb.txt") << "0.0 rgb/0.pgm\n1.0 rgb/1.pgm\n";
    std::ofstream(dir / "depth.txt") << "0.03 depth/0.pgm\n1.03 depth/1.pgm\n";
    auto stream = loadRgbdSequence(dir.string());
    CHECK(stream->size() == 0);
    CHECK(stream->skipped() == 2);
  }
  SUBCASE("missing index file") {
    fs::remove(dir / "rgb.txt");
    CHECK_THROWS_WITH_AS(loadRgbdSequence(dir.string()),
                         doctest::Contains("rgb.txt"), LoadError);
  }
  SUBCASE("unreadable image names the file") {
    std::ofstream(dir / "rgb.txt") << "0.0 rgb/missing.pgm\n";
    std::ofstream(dir / "depth.txt") << "0.0 depth/0.pgm\n";
    auto stream = loadRgbdSequence(dir.string());
    FrameRecord record;
    CHECK_THROWS_WITH_AS(stream->next(record), doctest::Contains("missing.pgm"),
                         LoadError);
  }
  fs::remove_all(dir);
}

TEST_CASE("lidar sequence loading") {
  const fs::path dir = freshDir("md_lidar_fixture");

  SUBCASE("binary single point and timestamp from filename") {
    writeLidarCloud({{{1.0, 2.0, 3.0}, 0.5}}, (dir / "1.500000.bin").string());
    auto stream = loadLidarSequence(dir.string());
    CHECK(stream->size() == 1);
    FrameRecord record;
    REQUIRE(stream->next(record));
    CHECK(record.isCloud());
    CHECK(record.timestamp == doctest::Approx(1.5));
    REQUIRE(record.cloud.size() == 1);
    CHECK(record.cloud[0].position == Eigen::Vector3d(1, 2, 3));
    CHECK(record.cloud[0].intensity == 0.5);
  }
  SUBCASE("empty scan fails downstream, not in the loader") {
    std::ofstream(dir / "2.0.bin", std::ios::binary);
    auto stream = loadLidarSequence(dir.string());
    FrameRecord record;
    REQUIRE(stream->next(record));
    CHECK(record.cloud.empty());
    CHECK_THROWS_AS(cloudToImage(record.cloud, lidarModel()), EmptyFrame);
  }
  SUBCASE("binary round trip is bit exact") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> u(-50, 50);
    std::vector<LidarPoint> cloud(500);
    for (LidarPoint& p : cloud) {
      p.position  = Eigen::Vector3d(u(rng), u(rng), u(rng));
      p.intensity = std::abs(u(rng));
    }
    const std::string path = (dir / "3.0.bin").string();
    writeLidarCloud(cloud, path);
    const auto back = readLidarCloud(path);
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(back[i].position == cloud[i].position);
      CHECK(back[i].intensity == cloud[i].intensity);
    }
  }
  SUBCASE("truncated record reports the byte offset") {
    std::ofstream out(dir / "4.0.bin", std::ios::binary);
    const char bytes[20] = {};
    out.write(bytes, sizeof(bytes));
    out.close();
    CHECK_THROWS_WITH_AS(readLidarCloud((dir / "4.0.bin").string()),
                         doctest::Contains("byte offset 16"), LoadError);
  }
  SUBCASE("ascii fallback") {
    std::ofstream(dir / "5.0.txt") << "# cloud\n1 2 3 0.25\n4 5 6 0.75\n";
    const auto cloud = readLidarCloud((dir / "5.0.txt").string());
    REQUIRE(cloud.size() == 2);
    CHECK(cloud[1].position == Eigen::Vector3d(4, 5, 6));
    std::ofstream(dir / "6.0.txt") << "1 2 bad\n";
    CHECK_THROWS_WITH_AS(readLidarCloud((dir / "6.0.txt").string()),
                         doctest::Contains("line 1"), LoadError);
  }
  fs::remove_all(dir);
}

namespace {

std::shared_ptr<const Keyframe> renderedKeyframe(std::size_t id, const Scene& scene,
                                                 const Isometry3& pose) {
  auto kf  = std::make_shared<Keyframe>();
  kf->id   = id;
  kf->pose = pose;
  PyramidConfig config = roomPyramidConfig();
  config.scales        = {1};  // keep exact per-ray surface hits
  kf->pyramid          = renderPyramid(scene, pose, roomCamera(), config, id * 1.0);
  return kf;
}

std::vector<Eigen::Vector4d> readPlyVertices(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ss(line);
    std::string a, b;
    if (ss >> a >> b && a == "element" && b == "vertex") {
      ss >> count;
    }
  }
  std::vector<Eigen::Vector4d> vertices(count);
  for (auto& v : vertices) {
    REQUIRE(bool(in >> v[0] >> v[1] >> v[2] >> v[3]));
  }
  return vertices;
}

// Unsigned distance to the nearest primitive surface of roomScene-style
// geometry, evaluated analytically.
double sceneDistance(const Scene& scene, const Eigen::Vector3d& p) {
  double best = std::numeric_limits<double>::max();
  for (const ScenePrimitive& prim : scene.primitives) {
    double d = best;
    if (prim.type == ScenePrimitive::Type::Box) {
      const Eigen::Vector3d q =
          (p - (prim.lo + prim.hi) / 2).cwiseAbs() - (prim.hi - prim.lo) / 2;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside  = std::min(q.maxCoeff(), 0.0);
      d = std::abs(outside + inside);
    } else if (prim.type == ScenePrimitive::Type::Sphere) {
      d = std::abs((p - prim.center).norm() - prim.radius);
    }
    best = std::min(best, d);
  }
  return best;
}

}  // namespace

TEST_CASE("ply export") {
  const fs::path dir = freshDir("md_ply_fixture");

  SUBCASE("single valid pixel yields one vertex") {
    auto kf  = std::make_shared<Keyframe>();
    kf->id   = 0;
    kf->pose = Isometry3::Identity();
    PyramidLevel level;
    level.intensity = ScalarImage(2, 2);
    level.range     = ScalarImage(2, 2);
    level.model     = ProjectionModel(ProjectionKind::Pinhole,
                                      {260, 260, 0.5, 0.5}, 2, 2, 0.2, 20.0);
    level.intensity.set(1, 1, 0.5);
    level.range.set(1, 1, 2.0);
    kf->pyramid.levels.push_back(level);
    const fs::path out = dir / "single.ply";
    CHECK(exportPly({kf}, out.string()) == 1);
    CHECK(readPlyVertices(out).size() == 1);
    CHECK_THROWS_AS(exportPly({}, out.string()), PlyError);
  }
  SUBCASE("static keyframes duplicate coincident points") {
    const Scene scene = roomScene();
    auto kf0 = renderedKeyframe(0, scene, Isometry3::Identity());
    auto kf1 = renderedKeyframe(1, scene, Isometry3::Identity());
    const fs::path out = dir / "static.ply";
    const std::size_t n = exportPly({kf0, kf1}, out.string());
    const auto vertices = readPlyVertices(out);
    REQUIRE(vertices.size() == n);
    REQUIRE(n % 2 == 0);
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) {
      CHECK((vertices[i].head<3>() - vertices[half + i].head<3>()).norm() < 1e-6);
    }
    // Voxel thinning collapses the duplicates.
    const std::size_t thinned =
        exportPly({kf0, kf1}, (dir / "thin.ply").string(), {0.01});
    CHECK(thinned <= half);
  }
  SUBCASE("room map lies on the scene geometry") {
    const Scene scene = roomScene();
    std::vector<std::shared_ptr<const Keyframe>> keyframes;
    keyframes.push_back(renderedKeyframe(0, scene, Isometry3::Identity()));
    Isometry3 yawed = Isometry3::Identity();
    yawed.linear() =
        Eigen::AngleAxisd(0.5, Eigen::Vector3d::UnitY()).toRotationMatrix();
    keyframes.push_back(renderedKeyframe(1, scene, yawed));
    const fs::path out = dir / "room.ply";
    exportPly(keyframes, out.string());
    const auto vertices = readPlyVertices(out);
    REQUIRE(vertices.size() > 10000);
    std::size_t close = 0;
    for (const auto& v : vertices) {
      if (sceneDistance(scene, v.head<3>()) < 0.01) {
        ++close;
      }
    }
    CHECK(double(close) / double(vertices.size()) >= 0.95);
  }
  fs::remove_all(dir);
}
