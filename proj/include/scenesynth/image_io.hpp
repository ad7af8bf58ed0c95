#pragma once

#include "scenesynth/common.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace scenesynth {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

namespace detail {

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;

  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw FormatError("png_create_write_struct failed");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw FormatError("png_create_info_struct failed");
    }
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;
};

inline void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

inline void png_flush_noop(png_structp) {}

/// Encodes rows of `bit_depth`-bit samples; `rows` holds big-endian data as
/// libpng expects.
inline std::vector<std::uint8_t> encode_png(int width, int height, int color_type, int bit_depth,
                                            const std::vector<std::uint8_t>& raw, std::size_t row_bytes) {
  std::vector<std::uint8_t> out;
  PngWriter w;
  if (setjmp(png_jmpbuf(w.png))) throw FormatError("libpng failed while encoding");
  png_set_write_fn(w.png, &out, png_append, png_flush_noop);
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  for (int y = 0; y < height; ++y) {
    png_write_row(w.png, const_cast<png_bytep>(raw.data() + static_cast<std::size_t>(y) * row_bytes));
  }
  png_write_end(w.png, nullptr);
  return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png_rgb(const RgbImage& img) {
  return detail::encode_png(img.width, img.height, PNG_COLOR_TYPE_RGB, 8, img.pixels,
                            static_cast<std::size_t>(img.width) * 3);
}

/// 16-bit grayscale, e.g. depth in millimeters or instance ids.
inline std::vector<std::uint8_t> encode_png_gray16(int width, int height,
                                                   const std::vector<std::uint16_t>& values) {
  std::vector<std::uint8_t> raw(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    raw[2 * i] = static_cast<std::uint8_t>(values[i] >> 8);
    raw[2 * i + 1] = static_cast<std::uint8_t>(values[i] & 0xFF);
  }
  return detail::encode_png(width, height, PNG_COLOR_TYPE_GRAY, 16, raw,
                            static_cast<std::size_t>(width) * 2);
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw FormatError(fmt::format("cannot write '{}'", path.string()));
  const std::size_t n = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (n != bytes.size()) throw FormatError(fmt::format("short write to '{}'", path.string()));
}

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == data.size()) {
    const std::uint32_t v = data[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

}  // namespace scenesynth
