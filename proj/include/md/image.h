// Dense row-major grids with validity masks and masked bilinear sampling.
#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <cstdint>
#include <vector>

namespace md {

template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, const T& fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  const T& operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

template <typename T>
struct MaskedImage {
  Grid<T> data;
  Mask valid;

  MaskedImage() = default;
  MaskedImage(int rows, int cols) : data(rows, cols), valid(rows, cols, 0) {}

  int rows() const { return data.rows(); }
  int cols() const { return data.cols(); }
  bool isValid(int r, int c) const { return valid(r, c) != 0; }
  void set(int r, int c, const T& value) {
    data(r, c)  = value;
    valid(r, c) = 1;
  }
};

using ScalarImage = MaskedImage<double>;
using NormalImage = MaskedImage<Eigen::Vector3d>;

// Bilinear interpolation requiring all four neighbors valid. deriv is the
// exact gradient of the interpolant at (u, v), so analytic jacobians match
// finite differences of the sampled value.
template <typename T>
struct Sample {
  bool valid = false;
  T value{};
  Eigen::Matrix<double, 1, 2> du;  // only for scalar samples
};

struct ScalarSample {
  bool valid   = false;
  double value = 0;
  Eigen::Matrix<double, 1, 2> deriv = Eigen::Matrix<double, 1, 2>::Zero();  // [d/du d/dv]
};

struct VectorSample {
  bool valid = false;
  Eigen::Vector3d value = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 3, 2> deriv = Eigen::Matrix<double, 3, 2>::Zero();
};

ScalarSample sampleBilinear(const ScalarImage& image, double u, double v);
VectorSample sampleBilinear(const NormalImage& image, double u, double v);

}  // namespace md
