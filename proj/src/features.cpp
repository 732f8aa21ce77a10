#include "md/features.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace md {

namespace {

// Fixed comparison pattern, generated once from a constant seed: 256 point
// pairs inside the patch radius, biased toward the center.
struct Pattern {
  std::array<Eigen::Vector2d, 256> a, b;
};

const Pattern& pattern(int radius) {
  static const Pattern p = [radius] {
    Pattern out;
    std::mt19937_64 rng(0x5eedf00dULL);
    std::normal_distribution<double> gauss(0.0, radius / 2.5);
    auto draw = [&] {
      for (;;) {
        Eigen::Vector2d q(gauss(rng), gauss(rng));
        if (q.norm() <= radius - 1.0) {
          return q;
        }
      }
    };
    for (int i = 0; i < 256; ++i) {
      out.a[i] = draw();
      out.b[i] = draw();
    }
    return out;
  }();
  return p;
}

bool windowValid(const ScalarImage& image, int r, int c, int radius) {
  if (r - radius < 0 || c - radius < 0 || r + radius >= image.rows() ||
      c + radius >= image.cols()) {
    return false;
  }
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (!image.isValid(r + dr, c + dc)) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

ScalarImage cornerResponse(const ScalarImage& intensity) {
  const int rows = intensity.rows(), cols = intensity.cols();
  ScalarImage response(rows, cols);
  // Central-difference gradients where both neighbors exist.
  Grid<double> gx(rows, cols), gy(rows, cols);
  Mask gvalid(rows, cols, 0);
  for (int r = 1; r + 1 < rows; ++r) {
    for (int c = 1; c + 1 < cols; ++c) {
      if (intensity.isValid(r, c - 1) && intensity.isValid(r, c + 1) &&
          intensity.isValid(r - 1, c) && intensity.isValid(r + 1, c)) {
        gx(r, c)     = 0.5 * (intensity.data(r, c + 1) - intensity.data(r, c - 1));
        gy(r, c)     = 0.5 * (intensity.data(r + 1, c) - intensity.data(r - 1, c));
        gvalid(r, c) = 1;
      }
    }
  }
  for (int r = 2; r + 2 < rows; ++r) {
    for (int c = 2; c + 2 < cols; ++c) {
      double a = 0, bb = 0, d = 0;
      bool ok = true;
      for (int dr = -1; dr <= 1 && ok; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (!gvalid(r + dr, c + dc)) {
            ok = false;
            break;
          }
          const double x = gx(r + dr, c + dc), y = gy(r + dr, c + dc);
          a += x * x;
          bb += y * y;
          d += x * y;
        }
      }
      if (!ok) {
        continue;
      }
      const double det = a * bb - d * d, trace = a + bb;
      response.set(r, c, det - 0.04 * trace * trace);
    }
  }
  return response;
}

std::vector<BinaryDescriptor> extractFeatures(const ScalarImage& intensity,
                                              const FeatureConfig& config) {
  const ScalarImage response = cornerResponse(intensity);
  const int rows = intensity.rows(), cols = intensity.cols();

  // Local maxima of the response above the floor.
  std::vector<Keypoint> candidates;
  for (int r = 3; r + 3 < rows; ++r) {
    for (int c = 3; c + 3 < cols; ++c) {
      if (!response.isValid(r, c) || response.data(r, c) < config.min_response) {
        continue;
      }
      const double v = response.data(r, c);
      bool maximal   = true;
      for (int dr = -1; dr <= 1 && maximal; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) {
            continue;
          }
          if (response.isValid(r + dr, c + dc) && response.data(r + dr, c + dc) > v) {
            maximal = false;
            break;
          }
        }
      }
      if (maximal) {
        candidates.push_back({{double(c), double(r)}, v, 0.0});
      }
    }
  }

  // Spatial bucketing: strongest first, capped per grid cell.
  std::sort(candidates.begin(), candidates.end(),
            [](const Keypoint& x, const Keypoint& y) { return x.response > y.response; });
  const int per_cell = std::max(
      1, config.max_features / std::max(1, config.grid_rows * config.grid_cols));
  Grid<int> cell_count(config.grid_rows, config.grid_cols, 0);
  std::vector<Keypoint> selected;
  for (const Keypoint& kp : candidates) {
    if (static_cast<int>(selected.size()) >= config.max_features) {
      break;
    }
    const int gr = std::min(config.grid_rows - 1,
                            static_cast<int>(kp.uv.v * config.grid_rows / rows));
    const int gc = std::min(config.grid_cols - 1,
                            static_cast<int>(kp.uv.u * config.grid_cols / cols));
    if (cell_count(gr, gc) >= per_cell) {
      continue;
    }
    ++cell_count(gr, gc);
    selected.push_back(kp);
  }

  // Orientation + descriptor.
  const Pattern& pat = pattern(config.patch_radius);
  std::vector<BinaryDescriptor> out;
  out.reserve(selected.size());
  for (Keypoint kp : selected) {
    const int r = static_cast<int>(kp.uv.v), c = static_cast<int>(kp.uv.u);
    if (!windowValid(intensity, r, c, config.patch_radius)) {
      continue;
    }
    // Intensity centroid within the circular support.
    double m01 = 0, m10 = 0;
    for (int dr = -config.centroid_radius; dr <= config.centroid_radius; ++dr) {
      for (int dc = -config.centroid_radius; dc <= config.centroid_radius; ++dc) {
        if (dr * dr + dc * dc > config.centroid_radius * config.centroid_radius) {
          continue;
        }
        const double w = intensity.data(r + dr, c + dc);
        m01 += dr * w;
        m10 += dc * w;
      }
    }
    kp.orientation = std::atan2(m01, m10);
    const double cs = std::cos(kp.orientation), sn = std::sin(kp.orientation);

    BinaryDescriptor desc;
    desc.keypoint = kp;
    bool usable   = true;
    for (int i = 0; i < 256 && usable; ++i) {
      auto sampleAt = [&](const Eigen::Vector2d& q, double& value) {
        const double u = kp.uv.u + cs * q.x() - sn * q.y();
        const double v = kp.uv.v + sn * q.x() + cs * q.y();
        const ScalarSample s = sampleBilinear(intensity, u, v);
        value                = s.value;
        return s.valid;
      };
      double va = 0, vb = 0;
      if (!sampleAt(pat.a[i], va) || !sampleAt(pat.b[i], vb)) {
        usable = false;
        break;
      }
      desc.bits[i] = va > vb;
    }
    if (usable) {
      out.push_back(std::move(desc));
    }
  }
  return out;
}

}  // namespace md
