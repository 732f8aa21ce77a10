#include "md/ransac.h"

#include <random>

namespace md {

namespace {

bool collinear(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
               const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a;
  const double scale = std::max(ab.norm() * ac.norm(), 1e-12);
  return ab.cross(ac).norm() < 1e-6 * scale;
}

}  // namespace

Isometry3 hornFit(const std::vector<Correspondence>& correspondences) {
  const int n = static_cast<int>(correspondences.size());
  if (n < 3) {
    throw DegenerateFit("hornFit: need at least 3 correspondences");
  }
  Eigen::Matrix3Xd dst(3, n), src(3, n);
  for (int i = 0; i < n; ++i) {
    dst.col(i) = correspondences[i].first;
    src.col(i) = correspondences[i].second;
  }
  if (n == 3 && collinear(src.col(0), src.col(1), src.col(2))) {
    throw DegenerateFit("hornFit: collinear minimal sample");
  }
  const Eigen::Matrix4d m = Eigen::umeyama(src, dst, false);
  Isometry3 out(m);
  if (!isValidIsometry(out)) {
    throw DegenerateFit("hornFit: degenerate point configuration");
  }
  return out;
}

RansacResult ransacAlign(const std::vector<Correspondence>& correspondences,
                         const RansacConfig& config) {
  RansacResult result;
  const int n = static_cast<int>(correspondences.size());
  if (n < 3) {
    result.failure = "insufficient correspondences";
    return result;
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<int> best_inliers;
  bool any_sample = false;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    int a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || a == c || b == c) {
      continue;
    }
    Isometry3 candidate;
    try {
      candidate = hornFit({correspondences[a], correspondences[b], correspondences[c]});
    } catch (const DegenerateFit&) {
      continue;
    }
    any_sample = true;
    std::vector<int> inliers;
    for (int i = 0; i < n; ++i) {
      const double d =
          (correspondences[i].first - candidate * correspondences[i].second).norm();
      if (d < config.inlier_gate) {
        inliers.push_back(i);
      }
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      if (static_cast<int>(best_inliers.size()) == n) {
        break;
      }
    }
  }
  if (!any_sample) {
    result.failure = "all samples degenerate";
    return result;
  }
  if (static_cast<int>(best_inliers.size()) < config.min_inliers ||
      static_cast<double>(best_inliers.size()) < config.min_inlier_fraction * n) {
    result.failure = "insufficient inliers (" + std::to_string(best_inliers.size()) +
                     "/" + std::to_string(n) + ")";
    return result;
  }

  // Refit on the consensus set, then recheck the gate per inlier.
  std::vector<Correspondence> consensus;
  consensus.reserve(best_inliers.size());
  for (int i : best_inliers) {
    consensus.push_back(correspondences[i]);
  }
  try {
    result.transform = hornFit(consensus);
  } catch (const DegenerateFit&) {
    result.failure = "degenerate consensus set";
    return result;
  }
  for (int i : best_inliers) {
    const double d =
        (correspondences[i].first - result.transform * correspondences[i].second).norm();
    if (d < config.inlier_gate) {
      result.inliers.push_back(i);
    }
  }
  if (static_cast<int>(result.inliers.size()) < config.min_inliers) {
    result.failure = "inliers lost in refit";
    return result;
  }
  result.success = true;
  return result;
}

}  // namespace md
