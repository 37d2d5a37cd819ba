#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>

#include "lrt/core.hpp"

namespace lrt {

namespace detail {

// next token after whitespace and # comments
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

inline long pnm_int(std::istream& in, const std::string& what) {
  const std::string tok = pnm_token(in);
  if (tok.empty()) throw IoError("pnm: missing " + what);
  std::size_t pos = 0;
  long value = 0;
  try {
    value = std::stol(tok, &pos);
  } catch (const std::exception&) {
    throw IoError("pnm: malformed " + what + " '" + tok + "'");
  }
  if (pos != tok.size() || value < 0)
    throw IoError("pnm: malformed " + what + " '" + tok + "'");
  return value;
}

}  // namespace detail

// PGM (P2/P5) and PPM (P3/P6) reader; color converts to luminance with
// weights 0.299/0.587/0.114. Intensities scale to [0, 1] by maxval.
// 16-bit binary samples are big-endian per the netpbm convention.
inline GrayImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path);
  const std::string magic = detail::pnm_token(in);
  const bool ascii = magic == "P2" || magic == "P3";
  const bool color = magic == "P3" || magic == "P6";
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    throw IoError("unsupported image format '" + magic + "' in " + path);

  const long width = detail::pnm_int(in, "width");
  const long height = detail::pnm_int(in, "height");
  const long maxval = detail::pnm_int(in, "maxval");
  if (width <= 0 || height <= 0)
    throw IoError("pnm: empty image in " + path);
  if (maxval <= 0 || maxval > 65535)
    throw IoError("pnm: unsupported maxval in " + path);

  const int channels = color ? 3 : 1;
  const long samples = width * height * channels;
  std::vector<double> raw(samples);
  if (ascii) {
    for (long k = 0; k < samples; ++k)
      raw[k] = static_cast<double>(detail::pnm_int(in, "sample"));
  } else {
    // single whitespace byte after maxval was consumed by pnm_int
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(samples * bytes);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw IoError("pnm: truncated raster in " + path);
    for (long k = 0; k < samples; ++k)
      raw[k] = bytes == 1 ? buf[k]
                          : 256.0 * buf[2 * k] + buf[2 * k + 1];
  }

  GrayImage img(height, width);
  for (long y = 0; y < height; ++y)
    for (long x = 0; x < width; ++x) {
      const long base = (y * width + x) * channels;
      double v = raw[base];
      if (color)
        v = 0.299 * raw[base] + 0.587 * raw[base + 1] +
            0.114 * raw[base + 2];
      img(y, x) = v / static_cast<double>(maxval);
    }
  return img;
}

// binary PGM, intensities clamped to [0, 1] and quantized to maxval 255
inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image file: " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const double v = std::min(1.0, std::max(0.0, img(y, x)));
      out.put(static_cast<char>(std::lround(v * 255.0)));
    }
  if (!out) throw IoError("write failed: " + path);
}

// min-max rescale to [0, 1]; constant images map to 0. Returns the original
// (min, max) so the scaling is recoverable.
inline std::pair<double, double> rescale_unit(GrayImage& img) {
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  if (hi > lo)
    img = (img.array() - lo) / (hi - lo);
  else
    img.setZero();
  return {lo, hi};
}

}  // namespace lrt
