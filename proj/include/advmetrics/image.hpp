#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "advmetrics/error.hpp"

namespace advmetrics {

using RowMajorArrayXXd =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Read-only H x W view of one channel of an interleaved image buffer.
using ConstChannelMap =
    Eigen::Map<const RowMajorArrayXXd, 0,
               Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

/// H x W x C raster of pixel intensities in [0, 255], stored flat in
/// row-major (h, w, c) order. Immutable after construction and safe to
/// share across threads.
class ImageTensor {
 public:
  ImageTensor(Eigen::Index height, Eigen::Index width, Eigen::Index channels,
              Eigen::ArrayXd values);

  static ImageTensor constant(Eigen::Index height, Eigen::Index width,
                              Eigen::Index channels, double value);

  Eigen::Index height() const noexcept { return height_; }
  Eigen::Index width() const noexcept { return width_; }
  Eigen::Index channels() const noexcept { return channels_; }
  Eigen::Index size() const noexcept { return values_.size(); }

  const Eigen::ArrayXd& values() const noexcept { return values_; }

  double operator()(Eigen::Index h, Eigen::Index w,
                    Eigen::Index c) const noexcept {
    return values_[(h * width_ + w) * channels_ + c];
  }

  /// H x W view of channel c (no copy).
  ConstChannelMap channel(Eigen::Index c) const {
    return ConstChannelMap(
        values_.data() + c, height_, width_,
        Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(width_ * channels_,
                                                      channels_));
  }

  /// C-vector of one spatial pixel's channel intensities (contiguous).
  Eigen::Map<const Eigen::VectorXd> pixel(Eigen::Index flat_pixel) const {
    return Eigen::Map<const Eigen::VectorXd>(
        values_.data() + flat_pixel * channels_, channels_);
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

 private:
  Eigen::Index height_;
  Eigen::Index width_;
  Eigen::Index channels_;
  Eigen::ArrayXd values_;
};

/// An original image and its perturbed counterpart. Both share one shape;
/// the constructor enforces it.
struct ImagePair {
  ImagePair(ImageTensor original_img, ImageTensor adversarial_img,
            std::string id);

  ImageTensor original;
  ImageTensor adversarial;
  std::string pair_id;
};

/// Signed per-coordinate difference adversarial - original, flattened in
/// (h, w, c) order.
Eigen::ArrayXd diff(const ImagePair& pair);

}  // namespace advmetrics
