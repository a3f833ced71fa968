#include "advmetrics/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace advmetrics {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

}  // namespace

ImageTensor load_png(const std::filesystem::path& path) {
  FileHandle file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    throw IoError("load_png: cannot open '" + path.string() + "'");
  }

  png_byte header[8] = {};
  if (std::fread(header, 1, 8, file.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0) {
    throw FormatError("load_png: '" + path.string() + "' is not a PNG file");
  }

  PngReader reader;
  reader.png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!reader.png) throw IoError("load_png: libpng init failed");
  reader.info = png_create_info_struct(reader.png);
  if (!reader.info) throw IoError("load_png: libpng init failed");

  if (setjmp(png_jmpbuf(reader.png))) {
    throw FormatError("load_png: '" + path.string() + "' failed to decode");
  }

  png_init_io(reader.png, file.get());
  png_set_sig_bytes(reader.png, 8);
  png_read_info(reader.png, reader.info);

  const png_uint_32 width = png_get_image_width(reader.png, reader.info);
  const png_uint_32 height = png_get_image_height(reader.png, reader.info);
  const int bit_depth = png_get_bit_depth(reader.png, reader.info);
  const int color_type = png_get_color_type(reader.png, reader.info);

  if (bit_depth != 8) {
    throw FormatError("load_png: '" + path.string() + "' has bit depth " +
                      std::to_string(bit_depth) + ", only 8 is supported");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    throw FormatError("load_png: '" + path.string() +
                      "' is palette-based, only grayscale/RGB are supported");
  }
  if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA ||
      color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
      png_get_valid(reader.png, reader.info, PNG_INFO_tRNS)) {
    throw FormatError("load_png: '" + path.string() +
                      "' carries an alpha channel, which is rejected");
  }
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
    throw FormatError("load_png: '" + path.string() +
                      "' has unsupported color type");
  }

  const Eigen::Index channels = color_type == PNG_COLOR_TYPE_GRAY ? 1 : 3;
  png_set_interlace_handling(reader.png);
  png_read_update_info(reader.png, reader.info);

  const std::size_t row_bytes = png_get_rowbytes(reader.png, reader.info);
  std::vector<png_byte> pixels(static_cast<std::size_t>(height) * row_bytes);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r) {
    rows[r] = pixels.data() + static_cast<std::size_t>(r) * row_bytes;
  }
  png_read_image(reader.png, rows.data());
  png_read_end(reader.png, nullptr);

  Eigen::ArrayXd values(static_cast<Eigen::Index>(height) *
                        static_cast<Eigen::Index>(width) * channels);
  Eigen::Index i = 0;
  for (png_uint_32 r = 0; r < height; ++r) {
    const png_bytep row = rows[r];
    const Eigen::Index n = static_cast<Eigen::Index>(width) * channels;
    for (Eigen::Index k = 0; k < n; ++k) {
      values[i++] = static_cast<double>(row[k]);
    }
  }
  return ImageTensor(static_cast<Eigen::Index>(height),
                     static_cast<Eigen::Index>(width), channels,
                     std::move(values));
}

void save_png(const ImageTensor& image, const std::filesystem::path& path) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw FormatError("save_png: only 1- or 3-channel images can be encoded");
  }

  FileHandle file(std::fopen(path.c_str(), "wb"));
  if (!file) {
    throw IoError("save_png: cannot open '" + path.string() + "' for writing");
  }

  PngWriter writer;
  writer.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                       nullptr);
  if (!writer.png) throw IoError("save_png: libpng init failed");
  writer.info = png_create_info_struct(writer.png);
  if (!writer.info) throw IoError("save_png: libpng init failed");

  const Eigen::Index h = image.height();
  const Eigen::Index w = image.width();
  const Eigen::Index c = image.channels();
  std::vector<png_byte> pixels(static_cast<std::size_t>(h) * w * c);
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const double v = std::min(255.0, std::max(0.0, image.values()[i]));
    pixels[static_cast<std::size_t>(i)] =
        static_cast<png_byte>(std::llround(v));
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (Eigen::Index r = 0; r < h; ++r) {
    rows[static_cast<std::size_t>(r)] =
        pixels.data() + static_cast<std::size_t>(r) * w * c;
  }

  if (setjmp(png_jmpbuf(writer.png))) {
    throw IoError("save_png: '" + path.string() + "' failed to encode");
  }

  png_init_io(writer.png, file.get());
  png_set_IHDR(writer.png, writer.info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(writer.png, writer.info);
  png_write_image(writer.png, rows.data());
  png_write_end(writer.png, nullptr);
}

ImageTensor quantize_to_8bit(const ImageTensor& image) {
  Eigen::ArrayXd q = image.values();
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    q[i] = static_cast<double>(
        std::llround(std::min(255.0, std::max(0.0, q[i]))));
  }
  return ImageTensor(image.height(), image.width(), image.channels(),
                     std::move(q));
}

}  // namespace advmetrics
