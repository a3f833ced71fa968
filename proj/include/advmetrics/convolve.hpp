#pragma once

#include <Eigen/Dense>

#include "advmetrics/error.hpp"

namespace advmetrics {

/// Valid-region 2D cross-correlation: out(i, j) = sum over the kernel of
/// image(i+u, j+v) * kernel(u, v). No padding; an output dimension of zero
/// means the kernel does not fit. Every kernel used in this library is
/// symmetric, so correlation and convolution coincide.
template <typename DerivedI, typename DerivedK>
Eigen::ArrayXXd filter2_valid(const Eigen::ArrayBase<DerivedI>& image,
                              const Eigen::ArrayBase<DerivedK>& kernel) {
  const Eigen::ArrayXXd img = image.derived();
  const Eigen::ArrayXXd ker = kernel.derived();
  const Eigen::Index out_rows = img.rows() - ker.rows() + 1;
  const Eigen::Index out_cols = img.cols() - ker.cols() + 1;
  if (out_rows <= 0 || out_cols <= 0) return Eigen::ArrayXXd(0, 0);
  Eigen::ArrayXXd out(out_rows, out_cols);
  for (Eigen::Index j = 0; j < out_cols; ++j) {
    for (Eigen::Index i = 0; i < out_rows; ++i) {
      out(i, j) = (img.block(i, j, ker.rows(), ker.cols()) * ker).sum();
    }
  }
  return out;
}

/// Keep every second row and column, starting at (0, 0).
template <typename Derived>
Eigen::ArrayXXd decimate2(const Eigen::ArrayBase<Derived>& image) {
  const Eigen::ArrayXXd img = image.derived();
  const Eigen::Index rows = (img.rows() + 1) / 2;
  const Eigen::Index cols = (img.cols() + 1) / 2;
  Eigen::ArrayXXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      out(i, j) = img(2 * i, 2 * j);
    }
  }
  return out;
}

/// size x size Gaussian kernel with the given standard deviation,
/// normalized to sum 1.
inline Eigen::ArrayXXd gaussian_kernel(Eigen::Index size, double sigma) {
  if (size <= 0 || sigma <= 0.0) {
    throw Error("gaussian_kernel: size and sigma must be positive");
  }
  Eigen::ArrayXXd k(size, size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  for (Eigen::Index j = 0; j < size; ++j) {
    for (Eigen::Index i = 0; i < size; ++i) {
      const double di = static_cast<double>(i) - center;
      const double dj = static_cast<double>(j) - center;
      k(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  }
  return k / k.sum();
}

/// Sums of all w x w windows at stride 1 via a summed-area table.
/// out(i, j) is the sum of image.block(i, j, w, w).
template <typename Derived>
Eigen::ArrayXXd window_sums(const Eigen::ArrayBase<Derived>& image,
                            Eigen::Index w) {
  const Eigen::ArrayXXd img = image.derived();
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  if (w <= 0 || w > rows || w > cols) {
    throw Error("window_sums: window does not fit the image");
  }
  // sat(i, j) = sum of img.block(0, 0, i, j)
  Eigen::ArrayXXd sat = Eigen::ArrayXXd::Zero(rows + 1, cols + 1);
  for (Eigen::Index j = 0; j < cols; ++j) {
    double col_running = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      col_running += img(i, j);
      sat(i + 1, j + 1) = sat(i + 1, j) + col_running;
    }
  }
  Eigen::ArrayXXd out(rows - w + 1, cols - w + 1);
  for (Eigen::Index j = 0; j + w <= cols; ++j) {
    for (Eigen::Index i = 0; i + w <= rows; ++i) {
      out(i, j) = sat(i + w, j + w) - sat(i, j + w) - sat(i + w, j) + sat(i, j);
    }
  }
  return out;
}

}  // namespace advmetrics
