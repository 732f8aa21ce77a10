#include "md/trajectory.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace md {

void Trajectory::push(double timestamp, const Isometry3& pose) {
  if (!poses.empty() && timestamp <= poses.back().timestamp) {
    throw TrajectoryError("trajectory timestamps must be strictly increasing at t=" +
                          std::to_string(timestamp));
  }
  poses.push_back({timestamp, pose});
}

void writeTrajectory(const Trajectory& trajectory, std::ostream& out) {
  char line[256];
  for (const StampedPose& sp : trajectory.poses) {
    const Eigen::Vector3d t = sp.pose.translation();
    Eigen::Quaterniond q(sp.pose.linear());
    if (q.w() < 0) {
      q.coeffs() = -q.coeffs();
    }
    std::snprintf(line, sizeof(line), "%.9f %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                  sp.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out << line;
  }
}

void writeTrajectory(const Trajectory& trajectory, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw TrajectoryError("cannot open trajectory file for writing: " + path);
  }
  writeTrajectory(trajectory, out);
}

Trajectory readTrajectory(std::istream& in) {
  Trajectory trajectory;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first) || first[0] == '#') {
      continue;
    }
    double ts, tx, ty, tz, qx, qy, qz, qw;
    std::istringstream values(line);
    if (!(values >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw TrajectoryError("trajectory parse error at line " +
                            std::to_string(line_no));
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (std::abs(q.norm() - 1.0) > 1e-3) {
      throw TrajectoryError("non-unit quaternion at line " + std::to_string(line_no));
    }
    q.normalize();
    Isometry3 pose = Isometry3::Identity();
    pose.linear() = q.toRotationMatrix();
    pose.translation() = Eigen::Vector3d(tx, ty, tz);
    try {
      trajectory.push(ts, pose);
    } catch (const TrajectoryError&) {
      throw TrajectoryError("non-increasing timestamp at line " +
                            std::to_string(line_no));
    }
  }
  return trajectory;
}

Trajectory readTrajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw TrajectoryError("cannot open trajectory file: " + path);
  }
  return readTrajectory(in);
}

namespace {

// Index of the groundtruth pose nearest in time, or -1 outside max_dt.
int nearestIndex(const std::vector<StampedPose>& poses, double ts, double max_dt) {
  const auto cmp = [](const StampedPose& sp, double t) { return sp.timestamp < t; };
  const auto it  = std::lower_bound(poses.begin(), poses.end(), ts, cmp);
  int best       = -1;
  double best_dt = max_dt;
  for (const auto* cand : {it == poses.end() ? nullptr : &*it,
                           it == poses.begin() ? nullptr : &*(it - 1)}) {
    if (!cand) {
      continue;
    }
    const double dt = std::abs(cand->timestamp - ts);
    if (dt <= best_dt) {
      best_dt = dt;
      best    = static_cast<int>(cand - poses.data());
    }
  }
  return best;
}

}  // namespace

AteResult ateRmse(const Trajectory& estimate, const Trajectory& groundtruth,
                  double max_dt) {
  std::vector<std::pair<int, int>> pairs;  // (estimate idx, groundtruth idx)
  for (std::size_t i = 0; i < estimate.poses.size(); ++i) {
    const int j = nearestIndex(groundtruth.poses, estimate.poses[i].timestamp, max_dt);
    if (j >= 0) {
      pairs.emplace_back(static_cast<int>(i), j);
    }
  }
  if (pairs.size() < 3) {
    throw TrajectoryError("ate: only " + std::to_string(pairs.size()) +
                          " timestamp associations, need at least 3");
  }

  Eigen::Matrix3Xd src(3, pairs.size()), dst(3, pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    src.col(k) = estimate.poses[pairs[k].first].pose.translation();
    dst.col(k) = groundtruth.poses[pairs[k].second].pose.translation();
  }
  const Eigen::Matrix4d horn = Eigen::umeyama(src, dst, false);

  AteResult result;
  result.alignment.linear()      = horn.topLeftCorner<3, 3>();
  result.alignment.translation() = horn.topRightCorner<3, 1>();
  double sum = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double err = (result.alignment * src.col(k) - dst.col(k)).norm();
    result.errors.push_back(err);
    sum += err * err;
  }
  result.rmse = std::sqrt(sum / static_cast<double>(pairs.size()));
  for (const StampedPose& sp : estimate.poses) {
    result.aligned_estimate.push(sp.timestamp, result.alignment * sp.pose);
  }
  return result;
}

}  // namespace md
