#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "poic/image.hpp"
#include "poic/scaling.hpp"

namespace poic {

/// Row-major boolean raster marking foreground pixels.
struct BinaryMask {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1

  BinaryMask() = default;
  BinaryMask(int width, int height) : w(width), h(height), bits(static_cast<size_t>(width) * height, 0) {}

  bool test(int x, int y) const { return bits[static_cast<size_t>(y) * w + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<size_t>(y) * w + x] = v ? 1 : 0; }
};

/// Nonzero pixels of a grayscale raster become foreground.
inline BinaryMask mask_from_image(const Image& img) {
  Image g = to_gray(img);
  BinaryMask m(g.w, g.h);
  for (size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = g.data[i] != 0 ? 1 : 0;
  return m;
}

inline Image mask_to_image(const BinaryMask& m) {
  Image img(m.w, m.h, 1);
  for (size_t i = 0; i < m.bits.size(); ++i) img.data[i] = m.bits[i] ? 255 : 0;
  return img;
}

/// Absolute frame difference thresholded into a mask: |a-b| >= threshold.
inline BinaryMask frame_difference(const Image& frame_a, const Image& frame_b, int threshold) {
  if (frame_a.w != frame_b.w || frame_a.h != frame_b.h)
    throw Error("frame_difference: dimension mismatch");
  Image a = to_gray(frame_a), b = to_gray(frame_b);
  BinaryMask m(a.w, a.h);
  for (size_t i = 0; i < m.bits.size(); ++i)
    m.bits[i] = std::abs(static_cast<int>(a.data[i]) - static_cast<int>(b.data[i])) >= threshold;
  return m;
}

namespace detail {

// 3x3 box element, split into a horizontal and a vertical 3-tap pass so the
// inner loops vectorize. Pixels outside the mask count as background.
inline BinaryMask erode3(const BinaryMask& m) {
  BinaryMask tmp(m.w, m.h);
  BinaryMask out(m.w, m.h);
  if (m.w < 3 || m.h < 3) return out;  // every pixel touches the border
  for (int y = 0; y < m.h; ++y) {
    const std::uint8_t* row = m.bits.data() + static_cast<size_t>(y) * m.w;
    std::uint8_t* t = tmp.bits.data() + static_cast<size_t>(y) * m.w;
    for (int x = 1; x + 1 < m.w; ++x) t[x] = row[x - 1] & row[x] & row[x + 1];
  }
  for (int y = 1; y + 1 < m.h; ++y) {
    const std::uint8_t* a = tmp.bits.data() + static_cast<size_t>(y - 1) * m.w;
    const std::uint8_t* b = tmp.bits.data() + static_cast<size_t>(y) * m.w;
    const std::uint8_t* c = tmp.bits.data() + static_cast<size_t>(y + 1) * m.w;
    std::uint8_t* o = out.bits.data() + static_cast<size_t>(y) * m.w;
    for (int x = 0; x < m.w; ++x) o[x] = a[x] & b[x] & c[x];
  }
  return out;
}

inline BinaryMask dilate3(const BinaryMask& m) {
  BinaryMask tmp(m.w, m.h);
  BinaryMask out(m.w, m.h);
  if (m.w == 0 || m.h == 0) return out;
  for (int y = 0; y < m.h; ++y) {
    const std::uint8_t* row = m.bits.data() + static_cast<size_t>(y) * m.w;
    std::uint8_t* t = tmp.bits.data() + static_cast<size_t>(y) * m.w;
    for (int x = 1; x + 1 < m.w; ++x) t[x] = row[x - 1] | row[x] | row[x + 1];
    t[0] = m.w > 1 ? row[0] | row[1] : row[0];
    t[m.w - 1] = m.w > 1 ? row[m.w - 2] | row[m.w - 1] : row[m.w - 1];
  }
  for (int y = 0; y < m.h; ++y) {
    const std::uint8_t* a = tmp.bits.data() + static_cast<size_t>(y > 0 ? y - 1 : y) * m.w;
    const std::uint8_t* b = tmp.bits.data() + static_cast<size_t>(y) * m.w;
    const std::uint8_t* c =
        tmp.bits.data() + static_cast<size_t>(y + 1 < m.h ? y + 1 : y) * m.w;
    std::uint8_t* o = out.bits.data() + static_cast<size_t>(y) * m.w;
    for (int x = 0; x < m.w; ++x) o[x] = a[x] | b[x] | c[x];
  }
  return out;
}

}  // namespace detail

/// Opening (erode, dilate) then closing (dilate, erode), 3x3 box element.
inline BinaryMask morphological_filter(const BinaryMask& mask, int open_iterations,
                                       int close_iterations) {
  BinaryMask m = mask;
  for (int i = 0; i < open_iterations; ++i) m = detail::erode3(m);
  for (int i = 0; i < open_iterations; ++i) m = detail::dilate3(m);
  for (int i = 0; i < close_iterations; ++i) m = detail::dilate3(m);
  for (int i = 0; i < close_iterations; ++i) m = detail::erode3(m);
  return m;
}

/// 8-connectivity labeling. Returns tight bounding boxes of components with
/// at least min_component_area pixels, ordered by top-left row-major.
inline std::vector<Rect> connected_components(const BinaryMask& mask,
                                              int min_component_area = 1) {
  std::vector<Rect> boxes;
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<int> stack;
  for (int y0 = 0; y0 < mask.h; ++y0)
    for (int x0 = 0; x0 < mask.w; ++x0) {
      size_t idx0 = static_cast<size_t>(y0) * mask.w + x0;
      if (!mask.bits[idx0] || seen[idx0]) continue;
      int minx = x0, maxx = x0, miny = y0, maxy = y0, count = 0;
      seen[idx0] = 1;
      stack.push_back(static_cast<int>(idx0));
      while (!stack.empty()) {
        int idx = stack.back();
        stack.pop_back();
        int x = idx % mask.w, y = idx / mask.w;
        ++count;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= mask.w || ny >= mask.h) continue;
            size_t nidx = static_cast<size_t>(ny) * mask.w + nx;
            if (mask.bits[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.push_back(static_cast<int>(nidx));
            }
          }
      }
      if (count >= min_component_area)
        boxes.push_back({minx, miny, maxx - minx + 1, maxy - miny + 1});
    }
  std::sort(boxes.begin(), boxes.end(), [](const Rect& a, const Rect& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    if (a.w != b.w) return a.w < b.w;
    return a.h < b.h;
  });
  return boxes;
}

/// Expands boxes by the margin, clamps to the frame, merges overlapping
/// expansions into their union bbox, and assigns betas at each final rect's
/// vertical center. Ids are sequential in row-major order.
inline std::vector<Patch> make_patches(const std::vector<Rect>& boxes,
                                       const ScalingProfile& profile, FrameSize frame,
                                       int margin = 3) {
  std::vector<Rect> rects;
  rects.reserve(boxes.size());
  for (const Rect& b : boxes) {
    int x1 = std::max(0, b.x - margin), y1 = std::max(0, b.y - margin);
    int x2 = std::min(frame.w, b.x2() + margin), y2 = std::min(frame.h, b.y2() + margin);
    if (x2 > x1 && y2 > y1) rects.push_back({x1, y1, x2 - x1, y2 - y1});
  }
  // merge to a fixpoint: result is pairwise disjoint
  bool merged = true;
  while (merged) {
    merged = false;
    for (size_t i = 0; i < rects.size() && !merged; ++i)
      for (size_t j = i + 1; j < rects.size() && !merged; ++j)
        if (intersects(rects[i], rects[j])) {
          rects[i] = union_bbox(rects[i], rects[j]);
          rects.erase(rects.begin() + static_cast<long>(j));
          merged = true;
        }
  }
  std::sort(rects.begin(), rects.end(), [](const Rect& a, const Rect& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    if (a.w != b.w) return a.w < b.w;
    return a.h < b.h;
  });
  std::vector<Patch> patches;
  patches.reserve(rects.size());
  for (size_t i = 0; i < rects.size(); ++i) {
    double beta = beta_for(profile, rects[i].y + rects[i].h / 2.0);
    patches.push_back({static_cast<int>(i), rects[i], beta});
  }
  return patches;
}

// ---- patch CSV (id,x,y,w,h,beta; header required) ----

inline void write_patches_csv(const std::vector<Patch>& patches, std::ostream& out) {
  out << "id,x,y,w,h,beta\n";
  char buf[64];
  for (const Patch& p : patches) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.beta);
    out << p.id << ',' << p.rect.x << ',' << p.rect.y << ',' << p.rect.w << ',' << p.rect.h
        << ',' << buf << '\n';
  }
}

inline std::vector<Patch> read_patches_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("patches csv: empty file");
  if (line.size() && line.back() == '\r') line.pop_back();
  if (line != "id,x,y,w,h,beta") throw Error("patches csv: expected header 'id,x,y,w,h,beta'");
  std::vector<Patch> patches;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Patch p;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%d,%lf", &p.id, &p.rect.x, &p.rect.y, &p.rect.w,
                    &p.rect.h, &p.beta) != 6)
      throw Error("patches csv: malformed line " + std::to_string(lineno));
    patches.push_back(p);
  }
  return patches;
}

}  // namespace poic
