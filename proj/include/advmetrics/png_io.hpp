#pragma once

#include <filesystem>

#include "advmetrics/image.hpp"

namespace advmetrics {

/// Decode an 8-bit grayscale or RGB PNG. Samples are returned as reals on
/// the native [0, 255] scale; grayscale gives channels=1, RGB channels=3.
/// Palette images, alpha channels, and bit depths other than 8 are rejected
/// with FormatError rather than converted.
ImageTensor load_png(const std::filesystem::path& path);

/// Encode as 8-bit grayscale (channels=1) or RGB (channels=3) PNG.
/// Intensities are rounded to the nearest integer sample.
void save_png(const ImageTensor& image, const std::filesystem::path& path);

/// Round every intensity to the nearest 8-bit level, as save_png would
/// store it. Useful for computing on exactly what a written file holds.
ImageTensor quantize_to_8bit(const ImageTensor& image);

}  // namespace advmetrics
