#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"

namespace mhdm::io {

// Intensities are handled on the 8-bit scale [0, 255] regardless of storage:
// a PGM sample s with maxval M reads as s * 255 / M.

namespace detail {

inline void skip_space_and_comments(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline std::size_t read_header_number(std::istream& in, const std::string& path) {
  skip_space_and_comments(in);
  long long v = -1;
  in >> v;
  if (!in || v <= 0) throw ValidationError("pgm: malformed header in " + path);
  return static_cast<std::size_t>(v);
}

inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

}  // namespace detail

struct PgmImage {
  ImageGrid pixels;  ///< on the [0, 255] scale
  int maxval = 255;
};

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') throw ValidationError(path + ": not a binary PGM (P5)");
  const std::size_t w = detail::read_header_number(in, path);
  const std::size_t h = detail::read_header_number(in, path);
  const std::size_t maxval = detail::read_header_number(in, path);
  if (maxval > 65535) throw ValidationError(path + ": unsupported maxval " + std::to_string(maxval));
  in.get();  // single whitespace before the raster
  const bool wide = maxval > 255;
  std::vector<unsigned char> raw(w * h * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw ValidationError(path + ": truncated raster");
  ImageGrid g(w, h);
  const double scale = 255.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const unsigned s = wide ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
    if (s > maxval) throw ValidationError(path + ": sample exceeds maxval");
    g[i] = s * scale;
  }
  return PgmImage{std::move(g), static_cast<int>(maxval)};
}

/// Writes [0, 255]-scale intensities as 8-bit (maxval 255) or 16-bit
/// (maxval 65535) P5; values are clamped to [0, 255] and rounded.
inline void write_pgm(const std::string& path, const ImageGrid& img, int bits = 8) {
  if (bits != 8 && bits != 16) throw ValidationError("write_pgm: bit depth must be 8 or 16");
  const unsigned maxval = bits == 8 ? 255u : 65535u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  const double scale = static_cast<double>(maxval) / 255.0;
  std::vector<unsigned char> raw;
  raw.reserve(img.size() * (bits / 8));
  for (double v : img.values()) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 255.0) : 0.0;
    const auto s = static_cast<unsigned>(std::lround(c * scale));
    if (bits == 16) raw.push_back(static_cast<unsigned char>(s >> 8));
    raw.push_back(static_cast<unsigned char>(s & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw ValidationError("write failed: " + path);
}

/// Grayscale PFM ("Pf"), little-endian float32, rows stored bottom to top.
inline void write_pfm(const std::string& path, const ImageGrid& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "Pf\n" << img.width() << ' ' << img.height() << "\n-1.0\n";
  const bool little = detail::host_is_little_endian();
  for (std::size_t r = img.height(); r-- > 0;) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      const float f = static_cast<float>(img(r, c));
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      if (!little) std::reverse(b, b + 4);
      out.write(reinterpret_cast<const char*>(b), 4);
    }
  }
  if (!out) throw ValidationError("write failed: " + path);
}

inline ImageGrid read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw ValidationError(path + ": not a grayscale PFM");
  std::size_t w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (!in || w == 0 || h == 0 || scale == 0.0) throw ValidationError(path + ": malformed PFM header");
  in.get();
  const bool file_little = scale < 0.0;
  const bool swap = file_little != detail::host_is_little_endian();
  ImageGrid g(w, h);
  for (std::size_t r = h; r-- > 0;) {
    for (std::size_t c = 0; c < w; ++c) {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      if (!in) throw ValidationError(path + ": truncated raster");
      if (swap) std::reverse(b, b + 4);
      float f;
      std::memcpy(&f, b, 4);
      g(r, c) = f;
    }
  }
  return g;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Dispatch on extension: .pfm is float, anything else binary PGM.
inline ImageGrid read_image(const std::string& path) {
  if (has_suffix(path, ".pfm")) return read_pfm(path);
  return read_pgm(path).pixels;
}

inline void write_image(const std::string& path, const ImageGrid& img, int bits = 8) {
  if (has_suffix(path, ".pfm")) {
    write_pfm(path, img);
  } else {
    write_pgm(path, img, bits);
  }
}

}  // namespace mhdm::io
