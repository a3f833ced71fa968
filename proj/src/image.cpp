#include "advmetrics/image.hpp"

#include <cmath>

namespace advmetrics {

ImageTensor::ImageTensor(Eigen::Index height, Eigen::Index width,
                         Eigen::Index channels, Eigen::ArrayXd values)
    : height_(height),
      width_(width),
      channels_(channels),
      values_(std::move(values)) {
  if (height_ <= 0 || width_ <= 0 || channels_ <= 0) {
    throw FormatError("ImageTensor: dimensions must be positive");
  }
  if (values_.size() != height_ * width_ * channels_) {
    throw FormatError("ImageTensor: value count does not match h*w*c");
  }
  if (!values_.isFinite().all() || (values_ < 0.0).any() ||
      (values_ > 255.0).any()) {
    throw FormatError("ImageTensor: intensities must be finite in [0, 255]");
  }
}

ImageTensor ImageTensor::constant(Eigen::Index height, Eigen::Index width,
                                  Eigen::Index channels, double value) {
  return ImageTensor(height, width, channels,
                     Eigen::ArrayXd::Constant(height * width * channels, value));
}

ImagePair::ImagePair(ImageTensor original_img, ImageTensor adversarial_img,
                     std::string id)
    : original(std::move(original_img)),
      adversarial(std::move(adversarial_img)),
      pair_id(std::move(id)) {
  if (!original.same_shape(adversarial)) {
    throw ShapeMismatch("ImagePair '" + pair_id +
                        "': original and adversarial shapes differ");
  }
}

Eigen::ArrayXd diff(const ImagePair& pair) {
  return pair.adversarial.values() - pair.original.values();
}

}  // namespace advmetrics
