#pragma once

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "mosaic/errors.hpp"
#include "mosaic/image.hpp"

namespace mosaic {

// PNG frames load as RGB float in [0,1]; 8/16-bit samples rescale by
// 1/(2^bits - 1). Alpha is dropped, palette and gray expand to RGB.
inline Image read_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw io_error("cannot open PNG file: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw io_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw io_error("failed to decode PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // to native little-endian
  png_read_update_info(png, info);

  const int out_depth = (bit_depth == 16) ? 16 : 8;
  const double norm = (out_depth == 16) ? 65535.0 : 255.0;
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  Image img(static_cast<int>(w), static_cast<int>(h), 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    if (out_depth == 8) {
      for (png_uint_32 x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          img.at(static_cast<int>(x), static_cast<int>(y), c) =
              static_cast<float>(row[x * 3 + c] / norm);
    } else {
      const std::uint16_t* r16 = reinterpret_cast<const std::uint16_t*>(row.data());
      for (png_uint_32 x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          img.at(static_cast<int>(x), static_cast<int>(y), c) =
              static_cast<float>(r16[x * 3 + c] / norm);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

// Writes 8-bit PNG: RGB for 3-channel images, grayscale for 1-channel.
// Values are clamped to [0,1] and quantized with rounding.
inline void write_png(const std::string& path, const Image& img) {
  require(img.channels == 1 || img.channels == 3, "write_png: 1 or 3 channels only");
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw io_error("cannot write PNG file: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw io_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw io_error("failed to encode PNG: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        float v = std::clamp(img.at(x, y, c), 0.f, 1.f);
        row[static_cast<std::size_t>(x) * img.channels + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

} // namespace mosaic
