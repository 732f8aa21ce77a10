#include "md/cues.h"

#include <algorithm>
#include <cmath>

namespace md {

namespace {

// Mean-pooling (intensity) or min-pooling (range) over integer blocks.
enum class PoolRule { Mean, Min };

ScalarImage poolScalar(const ScalarImage& in, int row_factor, int col_factor,
                       PoolRule rule) {
  if (in.rows() % row_factor != 0 || in.cols() % col_factor != 0) {
    throw DimensionError("poolScalar: dimensions not divisible by factor");
  }
  ScalarImage out(in.rows() / row_factor, in.cols() / col_factor);
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      double acc = rule == PoolRule::Min ? std::numeric_limits<double>::infinity() : 0;
      int n      = 0;
      for (int dr = 0; dr < row_factor; ++dr) {
        for (int dc = 0; dc < col_factor; ++dc) {
          const int rr = r * row_factor + dr;
          const int cc = c * col_factor + dc;
          if (!in.isValid(rr, cc)) {
            continue;
          }
          if (rule == PoolRule::Min) {
            acc = std::min(acc, in.data(rr, cc));
          } else {
            acc += in.data(rr, cc);
          }
          ++n;
        }
      }
      if (n > 0) {
        out.set(r, c, rule == PoolRule::Min ? acc : acc / n);
      }
    }
  }
  return out;
}

NormalImage poolNormals(const NormalImage& in, int row_factor, int col_factor) {
  if (in.rows() % row_factor != 0 || in.cols() % col_factor != 0) {
    throw DimensionError("poolNormals: dimensions not divisible by factor");
  }
  NormalImage out(in.rows() / row_factor, in.cols() / col_factor);
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      int n               = 0;
      for (int dr = 0; dr < row_factor; ++dr) {
        for (int dc = 0; dc < col_factor; ++dc) {
          const int rr = r * row_factor + dr;
          const int cc = c * col_factor + dc;
          if (in.isValid(rr, cc)) {
            acc += in.data(rr, cc);
            ++n;
          }
        }
      }
      if (n > 0 && acc.norm() > 1e-9) {
        out.set(r, c, acc.normalized());
      }
    }
  }
  return out;
}

}  // namespace

NormalImage computeNormals(const ScalarImage& range, const ProjectionModel& model,
                           const NormalConfig& config) {
  NormalImage normals(range.rows(), range.cols());
  std::vector<Eigen::Vector3d> points;
  for (int r = 0; r < range.rows(); ++r) {
    for (int c = 0; c < range.cols(); ++c) {
      if (!range.isValid(r, c)) {
        continue;
      }
      const double rho = range.data(r, c);
      const double tau =
          std::clamp(config.radius_scale / rho, config.min_radius, config.max_radius);
      const int w         = static_cast<int>(std::ceil(tau));
      const double gate   = config.range_gate_abs + config.range_gate_rel * rho;
      points.clear();
      for (int dr = -w; dr <= w; ++dr) {
        for (int dc = -w; dc <= w; ++dc) {
          if (dr * dr + dc * dc > tau * tau) {
            continue;
          }
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= range.rows() || cc < 0 || cc >= range.cols() ||
              !range.isValid(rr, cc)) {
            continue;
          }
          const double rho_n = range.data(rr, cc);
          if (std::abs(rho_n - rho) > gate) {
            continue;
          }
          points.push_back(model.unproject({double(cc), double(rr)}, rho_n));
        }
      }
      if (static_cast<int>(points.size()) < config.min_neighbors) {
        continue;
      }
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& p : points) {
        mean += p;
      }
      mean /= static_cast<double>(points.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& p : points) {
        const Eigen::Vector3d d = p - mean;
        cov += d * d.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
      const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
      if (lambda(1) < 1e-12 || lambda(0) / lambda(1) > config.degeneracy) {
        continue;
      }
      Eigen::Vector3d n       = eig.eigenvectors().col(0);
      const Eigen::Vector3d p = model.unproject({double(c), double(r)}, rho);
      if (n.dot(p) > 0) {
        n = -n;
      }
      normals.set(r, c, n);
    }
  }
  return normals;
}

std::pair<ScalarImage, ScalarImage> cloudToImage(const std::vector<LidarPoint>& points,
                                                 const ProjectionModel& model,
                                                 double intensity_percentile) {
  if (points.empty()) {
    throw EmptyFrame("cloudToImage: empty cloud");
  }
  ScalarImage intensity(model.rows(), model.cols());
  ScalarImage range(model.rows(), model.cols());
  for (const auto& point : points) {
    const ProjectionResult prj = model.project(point.position);
    if (!prj.valid) {
      continue;
    }
    const int c = static_cast<int>(std::lround(prj.uv.u));
    const int r = static_cast<int>(std::lround(prj.uv.v));
    if (c < 0 || c >= model.cols() || r < 0 || r >= model.rows()) {
      continue;
    }
    if (!range.isValid(r, c) || prj.range < range.data(r, c)) {
      range.set(r, c, prj.range);
      intensity.set(r, c, point.intensity);
    }
  }
  // Percentile clip, then scale to [0, 1].
  std::vector<double> values;
  values.reserve(points.size());
  for (int r = 0; r < intensity.rows(); ++r) {
    for (int c = 0; c < intensity.cols(); ++c) {
      if (intensity.isValid(r, c)) {
        values.push_back(intensity.data(r, c));
      }
    }
  }
  if (!values.empty()) {
    std::sort(values.begin(), values.end());
    const std::size_t idx = std::min(
        values.size() - 1,
        static_cast<std::size_t>(intensity_percentile * (values.size() - 1)));
    const double cap = std::max(values[idx], 1e-12);
    for (int r = 0; r < intensity.rows(); ++r) {
      for (int c = 0; c < intensity.cols(); ++c) {
        if (intensity.isValid(r, c)) {
          intensity.data(r, c) = std::min(intensity.data(r, c), cap) / cap;
        }
      }
    }
  }
  return {std::move(intensity), std::move(range)};
}

void computeGradients(PyramidLevel& level) {
  const int rows = level.rows();
  const int cols = level.cols();
  level.intensity_grad = Grid<Eigen::Vector2d>(rows, cols, Eigen::Vector2d::Zero());
  level.range_grad     = Grid<Eigen::Vector2d>(rows, cols, Eigen::Vector2d::Zero());
  auto fill = [&](const ScalarImage& img, Grid<Eigen::Vector2d>& grad) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (!img.isValid(r, c)) {
          continue;
        }
        Eigen::Vector2d g = Eigen::Vector2d::Zero();
        if (c > 0 && c + 1 < cols && img.isValid(r, c - 1) && img.isValid(r, c + 1)) {
          g.x() = 0.5 * (img.data(r, c + 1) - img.data(r, c - 1));
        }
        if (r > 0 && r + 1 < rows && img.isValid(r - 1, c) && img.isValid(r + 1, c)) {
          g.y() = 0.5 * (img.data(r + 1, c) - img.data(r - 1, c));
        }
        grad(r, c) = g;
      }
    }
  };
  fill(level.intensity, level.intensity_grad);
  fill(level.range, level.range_grad);
}

PyramidLevel downscaleLevel(const PyramidLevel& level, int row_factor, int col_factor) {
  PyramidLevel out;
  out.intensity = poolScalar(level.intensity, row_factor, col_factor, PoolRule::Mean);
  out.range     = poolScalar(level.range, row_factor, col_factor, PoolRule::Min);
  out.normals   = poolNormals(level.normals, row_factor, col_factor);
  out.model     = level.model.scaled(row_factor, col_factor);
  computeGradients(out);
  return out;
}

CuePyramid buildPyramid(const ScalarImage& intensity, const ScalarImage& range,
                        const ProjectionModel& model, const PyramidConfig& config,
                        double timestamp) {
  if (intensity.rows() != range.rows() || intensity.cols() != range.cols()) {
    throw DimensionError("buildPyramid: intensity and range sizes differ");
  }
  if (config.scales.empty()) {
    throw DimensionError("buildPyramid: need at least one level");
  }
  for (std::size_t i = 1; i < config.scales.size(); ++i) {
    if (config.scales[i] <= config.scales[i - 1]) {
      throw DimensionError("buildPyramid: scales must be strictly increasing");
    }
  }

  ScalarImage base_i = intensity;
  ScalarImage base_r = range;
  ProjectionModel base_model = model;
  if (config.pre_downscale_rows > 1 || config.pre_downscale_cols > 1) {
    base_i = poolScalar(base_i, config.pre_downscale_rows, config.pre_downscale_cols,
                        PoolRule::Mean);
    base_r = poolScalar(base_r, config.pre_downscale_rows, config.pre_downscale_cols,
                        PoolRule::Min);
    base_model = base_model.scaled(config.pre_downscale_rows, config.pre_downscale_cols);
  }

  auto halvings = [](int from, int to) {
    int k = 0;
    while (from < to) {
      from *= 2;
      ++k;
    }
    if (from != to) {
      throw DimensionError("buildPyramid: scales must differ by powers of two");
    }
    return k;
  };

  // Finest level first: pool the base down to scales[0], fit normals there,
  // then derive the coarser levels from it.
  PyramidLevel finest;
  finest.intensity = base_i;
  finest.range     = base_r;
  finest.model     = base_model;
  for (int k = 0; k < halvings(1, config.scales.front()); ++k) {
    finest.intensity = poolScalar(finest.intensity, 2, 2, PoolRule::Mean);
    finest.range     = poolScalar(finest.range, 2, 2, PoolRule::Min);
    finest.model     = finest.model.scaled(2, 2);
  }
  finest.normals = computeNormals(finest.range, finest.model, config.normals);
  computeGradients(finest);

  std::vector<PyramidLevel> fine_to_coarse;
  fine_to_coarse.push_back(std::move(finest));
  for (std::size_t i = 1; i < config.scales.size(); ++i) {
    PyramidLevel next = fine_to_coarse.back();
    for (int k = 0; k < halvings(config.scales[i - 1], config.scales[i]); ++k) {
      next = downscaleLevel(next);
    }
    fine_to_coarse.push_back(std::move(next));
  }

  CuePyramid pyramid;
  pyramid.timestamp = timestamp;
  pyramid.levels.assign(fine_to_coarse.rbegin(), fine_to_coarse.rend());
  return pyramid;
}

}  // namespace md
