#include "md/image.h"

#include <cmath>

namespace md {

namespace {

struct Cell {
  bool valid = false;
  int r0 = 0, c0 = 0;
  double fu = 0, fv = 0;  // fractional parts
};

template <typename T>
Cell locate(const MaskedImage<T>& image, double u, double v) {
  Cell cell;
  if (!std::isfinite(u) || !std::isfinite(v)) {
    return cell;
  }
  const double cf = std::floor(u);
  const double rf = std::floor(v);
  cell.c0 = static_cast<int>(cf);
  cell.r0 = static_cast<int>(rf);
  if (cell.c0 < 0 || cell.c0 + 1 >= image.cols() || cell.r0 < 0 ||
      cell.r0 + 1 >= image.rows()) {
    return cell;
  }
  if (!image.isValid(cell.r0, cell.c0) || !image.isValid(cell.r0, cell.c0 + 1) ||
      !image.isValid(cell.r0 + 1, cell.c0) || !image.isValid(cell.r0 + 1, cell.c0 + 1)) {
    return cell;
  }
  cell.fu    = u - cf;
  cell.fv    = v - rf;
  cell.valid = true;
  return cell;
}

}  // namespace

ScalarSample sampleBilinear(const ScalarImage& image, double u, double v) {
  ScalarSample s;
  const Cell cell = locate(image, u, v);
  if (!cell.valid) {
    return s;
  }
  const double i00 = image.data(cell.r0, cell.c0);
  const double i01 = image.data(cell.r0, cell.c0 + 1);
  const double i10 = image.data(cell.r0 + 1, cell.c0);
  const double i11 = image.data(cell.r0 + 1, cell.c0 + 1);
  const double fu = cell.fu, fv = cell.fv;
  s.value = (1 - fv) * ((1 - fu) * i00 + fu * i01) + fv * ((1 - fu) * i10 + fu * i11);
  s.deriv(0, 0) = (1 - fv) * (i01 - i00) + fv * (i11 - i10);
  s.deriv(0, 1) = (1 - fu) * (i10 - i00) + fu * (i11 - i01);
  s.valid = true;
  return s;
}

VectorSample sampleBilinear(const NormalImage& image, double u, double v) {
  VectorSample s;
  const Cell cell = locate(image, u, v);
  if (!cell.valid) {
    return s;
  }
  const Eigen::Vector3d& i00 = image.data(cell.r0, cell.c0);
  const Eigen::Vector3d& i01 = image.data(cell.r0, cell.c0 + 1);
  const Eigen::Vector3d& i10 = image.data(cell.r0 + 1, cell.c0);
  const Eigen::Vector3d& i11 = image.data(cell.r0 + 1, cell.c0 + 1);
  const double fu = cell.fu, fv = cell.fv;
  s.value = (1 - fv) * ((1 - fu) * i00 + fu * i01) + fv * ((1 - fu) * i10 + fu * i11);
  s.deriv.col(0) = (1 - fv) * (i01 - i00) + fv * (i11 - i10);
  s.deriv.col(1) = (1 - fu) * (i10 - i00) + fu * (i11 - i01);
  s.valid = true;
  return s;
}

}  // namespace md
