#include "md/features.h"

#include <doctest.h>

#include "fixtures.h"

using namespace md;
using namespace md::fixtures;

namespace {

ScalarImage checkerImage(int rows = 160, int cols = 200, int period = 16) {
  // Smoothed checkerboard: product of sines gives well-defined corners at
  // the sign crossings without aliasing.
  ScalarImage image(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = std::sin(2 * M_PI * r / period) * std::sin(2 * M_PI * c / period);
      image.set(r, c, 0.5 + 0.5 * v);
    }
  }
  return image;
}

ScalarImage rotate90(const ScalarImage& in) {
  // Counter-clockwise: (r, c) -> (rows-1-c', r') with output dims swapped.
  ScalarImage out(in.cols(), in.rows());
  for (int r = 0; r < in.rows(); ++r) {
    for (int c = 0; c < in.cols(); ++c) {
      if (in.isValid(r, c)) {
        out.set(in.cols() - 1 - c, r, in.data(r, c));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("uniform image yields no features") {
  ScalarImage flat(100, 100);
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 100; ++c) {
      flat.set(r, c, 0.5);
    }
  }
  CHECK(extractFeatures(flat).empty());
}

TEST_CASE("keypoints sit on corner-score maxima found by exhaustive scan") {
  const ScalarImage image    = checkerImage();
  const ScalarImage response = cornerResponse(image);

  // Brute-force local maxima above the default floor.
  FeatureConfig config;
  std::vector<std::pair<int, int>> oracle;
  for (int r = 3; r + 3 < image.rows(); ++r) {
    for (int c = 3; c + 3 < image.cols(); ++c) {
      if (!response.isValid(r, c) || response.data(r, c) < config.min_response) {
        continue;
      }
      bool maximal = true;
      for (int dr = -1; dr <= 1 && maximal; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr || dc) && response.isValid(r + dr, c + dc) &&
              response.data(r + dr, c + dc) > response.data(r, c)) {
            maximal = false;
            break;
          }
        }
      }
      if (maximal) {
        oracle.emplace_back(r, c);
      }
    }
  }
  REQUIRE(!oracle.empty());

  config.max_features = 10000;  // no bucketing pressure
  const auto features = extractFeatures(image, config);
  REQUIRE(!features.empty());
  for (const auto& f : features) {
    const int r = static_cast<int>(f.keypoint.uv.v);
    const int c = static_cast<int>(f.keypoint.uv.u);
    CHECK(std::count(oracle.begin(), oracle.end(), std::make_pair(r, c)) == 1);
  }
}

TEST_CASE("mask-invalid regions produce no keypoints") {
  ScalarImage image = checkerImage();
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols() / 2; ++c) {
      image.valid(r, c) = 0;
    }
  }
  for (const auto& f : extractFeatures(image)) {
    CHECK(f.keypoint.uv.u >= image.cols() / 2.0);
  }
}

TEST_CASE("descriptors survive a 90 degree rotation") {
  // Textured synthetic render, not a perfectly periodic pattern, so
  // correspondences are unambiguous.
  const CuePyramid pyramid =
      renderPyramid(roomScene(), Isometry3::Identity(), roomCamera(),
                    roomPyramidConfig());
  const ScalarImage& image = pyramid.finest().intensity;
  const ScalarImage rotated = rotate90(image);

  FeatureConfig config;
  config.max_features = 300;
  const auto original = extractFeatures(image, config);
  const auto turned   = extractFeatures(rotated, config);
  REQUIRE(original.size() > 30);
  REQUIRE(!turned.empty());

  int matched = 0, tested = 0;
  for (const auto& f : original) {
    // Ground-truth location of this keypoint in the rotated image.
    const double ru = f.keypoint.uv.v;
    const double rv = image.cols() - 1 - f.keypoint.uv.u;
    const BinaryDescriptor* counterpart = nullptr;
    double best = 3.0;  // pixel tolerance
    for (const auto& g : turned) {
      const double d = std::hypot(g.keypoint.uv.u - ru, g.keypoint.uv.v - rv);
      if (d < best) {
        best        = d;
        counterpart = &g;
      }
    }
    if (counterpart == nullptr) {
      continue;
    }
    ++tested;
    if (hammingDistance(f.bits, counterpart->bits) <= 40) {
      ++matched;
    }
  }
  REQUIRE(tested > 20);
  CHECK(matched >= 0.7 * tested);
}
