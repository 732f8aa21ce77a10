#include "md/ransac.h"

#include <doctest.h>

#include <random>

using namespace md;

namespace {

Isometry3 randomPose(std::mt19937_64& rng, double tmax, double qmax) {
  std::uniform_real_distribution<double> t(-tmax, tmax), q(-qmax, qmax);
  Vector6d v;
  v << t(rng), t(rng), t(rng), q(rng), q(rng), q(rng);
  return v2t(v);
}

}  // namespace

TEST_CASE("noiseless correspondences recover the transform exactly") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  const Isometry3 truth = randomPose(rng, 1.0, 0.3);
  std::vector<Correspondence> corr;
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d p(coord(rng), coord(rng), coord(rng));
    corr.emplace_back(truth * p, p);
  }
  const RansacResult result = ransacAlign(corr);
  REQUIRE(result.success);
  CHECK(result.inliers.size() == 10);
  const Isometry3 err = truth.inverse() * result.transform;
  CHECK(translationNorm(err) < 1e-9);
  CHECK(rotationAngle(err) < 1e-9);
}

TEST_CASE("30 percent outliers with noise stays within tolerance of the oracle fit") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::uniform_real_distribution<double> junk(-10.0, 10.0);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Isometry3 truth = randomPose(rng, 1.5, 0.3);
    std::vector<Correspondence> corr;
    std::vector<Correspondence> true_inliers;
    for (int i = 0; i < 70; ++i) {
      const Eigen::Vector3d p(coord(rng), coord(rng), coord(rng));
      const Eigen::Vector3d q =
          truth * p + Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
      corr.emplace_back(q, p);
      true_inliers.emplace_back(q, p);
    }
    for (int i = 0; i < 30; ++i) {
      corr.emplace_back(Eigen::Vector3d(junk(rng), junk(rng), junk(rng)),
                        Eigen::Vector3d(junk(rng), junk(rng), junk(rng)));
    }
    RansacConfig config;
    config.seed = 1000 + trial;
    const RansacResult result = ransacAlign(corr, config);
    REQUIRE(result.success);
    // Oracle: closed-form fit on the true inliers.
    const Isometry3 oracle = hornFit(true_inliers);
    const Isometry3 err    = oracle.inverse() * result.transform;
    if (translationNorm(err) >= 0.02 || rotationAngle(err) >= 0.5 * M_PI / 180.0) {
      ++failures;
    }
    for (int i : result.inliers) {
      CHECK((corr[i].first - result.transform * corr[i].second).norm() <
            config.inlier_gate);
    }
    CHECK(isValidIsometry(result.transform));
  }
  CHECK(failures == 0);
}

TEST_CASE("collinear minimal sample is a degeneracy") {
  std::vector<Correspondence> corr;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d p(i, 2.0 * i, -i);
    corr.emplace_back(p, p);
  }
  CHECK_THROWS_AS(hornFit(corr), DegenerateFit);
  const RansacResult result = ransacAlign(corr);
  CHECK(!result.success);
  CHECK(result.failure == "all samples degenerate");
}

TEST_CASE("too few correspondences or inliers are staged rejections") {
  std::vector<Correspondence> two = {{{0, 0, 0}, {0, 0, 0}}, {{1, 0, 0}, {1, 0, 0}}};
  CHECK(ransacAlign(two).failure == "insufficient correspondences");

  // Pure junk: no consensus reaches the minimum count.
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> junk(-50.0, 50.0);
  std::vector<Correspondence> noise;
  for (int i = 0; i < 40; ++i) {
    noise.emplace_back(Eigen::Vector3d(junk(rng), junk(rng), junk(rng)),
                       Eigen::Vector3d(junk(rng), junk(rng), junk(rng)));
  }
  const RansacResult result = ransacAlign(noise);
  CHECK(!result.success);
  CHECK(result.failure.find("insufficient inliers") == 0);
}
