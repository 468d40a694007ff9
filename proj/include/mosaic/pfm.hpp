#pragma once

#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "mosaic/errors.hpp"
#include "mosaic/image.hpp"

namespace mosaic {

// PFM float images: "Pf" = 1 channel, "PF" = 3 channels, plus the "P2f"
// 2-channel variant used for warp and flow fields. Rows are stored
// bottom-up; a negative scale marks little-endian data, as usual.

namespace detail {

inline void pfm_skip_ws(std::istream& in) {
  while (std::isspace(in.peek())) in.get();
}

inline std::string pfm_token(std::istream& in) {
  pfm_skip_ws(in);
  std::string tok;
  while (in.good() && !std::isspace(in.peek())) tok.push_back(static_cast<char>(in.get()));
  return tok;
}

} // namespace detail

inline Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open PFM file: " + path);
  std::string magic = detail::pfm_token(in);
  int channels = 0;
  if (magic == "Pf") channels = 1;
  else if (magic == "P2f") channels = 2;
  else if (magic == "PF") channels = 3;
  else throw io_error("not a PFM file (bad magic '" + magic + "'): " + path);

  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(detail::pfm_token(in));
    h = std::stoi(detail::pfm_token(in));
    scale = std::stod(detail::pfm_token(in));
  } catch (const std::exception&) {
    throw io_error("malformed PFM header: " + path);
  }
  if (w <= 0 || h <= 0 || scale == 0.0) throw io_error("malformed PFM header: " + path);
  in.get();  // single whitespace byte after the header

  const bool little = scale < 0.0;
  Image img(w, h, channels);
  std::vector<float> row(static_cast<std::size_t>(w) * channels);
  for (int y = h - 1; y >= 0; --y) {  // bottom-up
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw io_error("truncated PFM data: " + path);
    if (little != (std::endian::native == std::endian::little)) {
      for (auto& v : row) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&v, &u, 4);
      }
    }
    std::memcpy(&img.data[img.index(0, y, 0)], row.data(), row.size() * sizeof(float));
  }
  return img;
}

inline void write_pfm(const std::string& path, const Image& img) {
  const char* magic = nullptr;
  switch (img.channels) {
    case 1: magic = "Pf"; break;
    case 2: magic = "P2f"; break;
    case 3: magic = "PF"; break;
    default: throw io_error("write_pfm: unsupported channel count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write PFM file: " + path);
  const double scale = (std::endian::native == std::endian::little) ? -1.0 : 1.0;
  out << magic << "\n" << img.width << " " << img.height << "\n" << scale << "\n";
  for (int y = img.height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(&img.data[img.index(0, y, 0)]),
              static_cast<std::streamsize>(img.width) * img.channels * sizeof(float));
  if (!out) throw io_error("failed writing PFM data: " + path);
}

} // namespace mosaic
