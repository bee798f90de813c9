#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "poic/geometry.hpp"

namespace poic {

/// Interleaved 8-bit raster, 1 (gray) or 3 (rgb) channels.
struct Image {
  int w = 0;
  int h = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int width, int height, int ch, std::uint8_t fill = 0)
      : w(width), h(height), channels(ch),
        data(static_cast<size_t>(width) * height * ch, fill) {}

  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * w + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * w + x) * channels + c];
  }
  FrameSize size() const { return {w, h}; }
  bool empty() const { return data.empty(); }
};

namespace detail {
inline int pnm_next_int(std::istream& in) {
  // skips whitespace and '#' comments
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      in.unget();
      break;
    }
  }
  int v;
  if (!(in >> v)) throw Error("pnm: malformed header");
  return v;
}
}  // namespace detail

/// Reads binary PGM (P5) or PPM (P6), maxval 255.
inline Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("pnm: cannot open " + path);
  std::string magic;
  in >> magic;
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw Error("pnm: unsupported magic '" + magic + "' in " + path);
  int w = detail::pnm_next_int(in);
  int h = detail::pnm_next_int(in);
  int maxval = detail::pnm_next_int(in);
  if (w <= 0 || h <= 0) throw Error("pnm: bad dimensions in " + path);
  if (maxval != 255) throw Error("pnm: only maxval 255 supported, got " + std::to_string(maxval));
  in.get();  // single whitespace byte after maxval
  Image img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw Error("pnm: truncated pixel data in " + path);
  return img;
}

inline void write_pnm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("pnm: cannot write " + path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n" << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw Error("pnm: write failed for " + path);
}

inline Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image g(img.w, img.h, 1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      int r = img.at(x, y, 0), gg = img.at(x, y, 1), b = img.at(x, y, 2);
      g.at(x, y) = static_cast<std::uint8_t>((r * 299 + gg * 587 + b * 114) / 1000);
    }
  return g;
}

/// Nearest-neighbor resample of src_rect (clamped samples) into out_w x out_h.
inline Image resize_nearest(const Image& img, const Rect& src_rect, int out_w, int out_h) {
  Image out(out_w, out_h, img.channels);
  for (int v = 0; v < out_h; ++v) {
    int sy = src_rect.y + static_cast<int>((v + 0.5) * src_rect.h / out_h);
    sy = std::clamp(sy, 0, img.h - 1);
    for (int u = 0; u < out_w; ++u) {
      int sx = src_rect.x + static_cast<int>((u + 0.5) * src_rect.w / out_w);
      sx = std::clamp(sx, 0, img.w - 1);
      for (int c = 0; c < img.channels; ++c) out.at(u, v, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

inline Image resize_bilinear(const Image& img, const Rect& src_rect, int out_w, int out_h) {
  Image out(out_w, out_h, img.channels);
  for (int v = 0; v < out_h; ++v) {
    double fy = src_rect.y + (v + 0.5) * src_rect.h / out_h - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int ya = std::clamp(y0, 0, img.h - 1), yb = std::clamp(y0 + 1, 0, img.h - 1);
    for (int u = 0; u < out_w; ++u) {
      double fx = src_rect.x + (u + 0.5) * src_rect.w / out_w - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int xa = std::clamp(x0, 0, img.w - 1), xb = std::clamp(x0 + 1, 0, img.w - 1);
      for (int c = 0; c < img.channels; ++c) {
        double top = img.at(xa, ya, c) * (1 - wx) + img.at(xb, ya, c) * wx;
        double bot = img.at(xa, yb, c) * (1 - wx) + img.at(xb, yb, c) * wx;
        out.at(u, v, c) = static_cast<std::uint8_t>(round_half_up(top * (1 - wy) + bot * wy));
      }
    }
  }
  return out;
}

}  // namespace poic
