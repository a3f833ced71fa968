#pragma once

#include <stdexcept>
#include <string>

namespace advmetrics {

/// Base class for every error raised by this library. The CLI maps these
/// to exit code 2 (data error); anything else is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input file exists but is not in an accepted format
/// (non-PNG, bit depth != 8, palette or alpha images, bad CSV cell, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Two images that must share (height, width, channels) do not.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Input is structurally valid but carries no usable signal
/// (zero-variance series, every quality window skipped, one-class split, ...).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// A feature required by a trained model is absent from the input row.
class MissingFeature : public Error {
 public:
  using Error::Error;
};

/// A perturbation spec cannot be applied to the given image.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// A model or CSV document could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The requested detector label column does not exist.
class UnknownLabel : public Error {
 public:
  using Error::Error;
};

}  // namespace advmetrics
