#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace poic {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when an input patch cannot fit into any detector window.
struct InfeasibleError : Error {
  using Error::Error;
};

/// Raised on detector wire-protocol violations (child death, bad line, timeout).
struct DetectorError : Error {
  using Error::Error;
};

/// Axis-aligned integer rectangle. Origin top-left, y grows downward.
/// Valid rects have w > 0 and h > 0.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int x2() const { return x + w; }
  int y2() const { return y + h; }
  long long area() const { return static_cast<long long>(w) * h; }
  bool valid() const { return w > 0 && h > 0; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Real-valued rectangle, used in detector coordinates where scale factors
/// make edges non-integral.
struct RectF {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double area() const { return w * h; }
  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }

  friend bool operator==(const RectF&, const RectF&) = default;
};

inline RectF to_rectf(const Rect& r) {
  return {static_cast<double>(r.x), static_cast<double>(r.y),
          static_cast<double>(r.w), static_cast<double>(r.h)};
}

struct FrameSize {
  int w = 0;
  int h = 0;
  friend bool operator==(const FrameSize&, const FrameSize&) = default;
};

/// Closed containment: edges touching counts.
inline bool contains(const Rect& outer, const Rect& inner) {
  return inner.x >= outer.x && inner.y >= outer.y && inner.x2() <= outer.x2() &&
         inner.y2() <= outer.y2();
}

inline bool intersects(const Rect& a, const Rect& b) {
  return a.x < b.x2() && b.x < a.x2() && a.y < b.y2() && b.y < a.y2();
}

inline Rect intersection(const Rect& a, const Rect& b) {
  int x1 = std::max(a.x, b.x), y1 = std::max(a.y, b.y);
  int x2 = std::min(a.x2(), b.x2()), y2 = std::min(a.y2(), b.y2());
  return {x1, y1, x2 - x1, y2 - y1};  // invalid (w or h <= 0) when disjoint
}

inline Rect union_bbox(const Rect& a, const Rect& b) {
  int x1 = std::min(a.x, b.x), y1 = std::min(a.y, b.y);
  int x2 = std::max(a.x2(), b.x2()), y2 = std::max(a.y2(), b.y2());
  return {x1, y1, x2 - x1, y2 - y1};
}

inline double iou(const RectF& a, const RectF& b) {
  double x1 = std::max(a.x, b.x), y1 = std::max(a.y, b.y);
  double x2 = std::min(a.x2(), b.x2()), y2 = std::min(a.y2(), b.y2());
  double iw = x2 - x1, ih = y2 - y1;
  if (iw <= 0 || ih <= 0) return 0.0;
  double inter = iw * ih;
  double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// round-half-up; pixel rounding happens here and nowhere else.
inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

/// Foreground rectangle in original-frame coordinates, margin already
/// applied, with its perspective scaling factor.
struct Patch {
  int id = 0;
  Rect rect;
  double beta = 1.0;

  double scaled_area() const { return static_cast<double>(rect.area()) * beta; }
};

/// Candidate detector window. Center in original-frame pixels; the original
/// extent spans detector_size / beta per side and the detector extent is
/// always detector_size x detector_size.
struct SubFrame {
  double cx = 0;
  double cy = 0;
  double beta = 1.0;
  int detector_size = 300;

  friend bool operator==(const SubFrame&, const SubFrame&) = default;
};

/// Original-coords extent of a sub-frame, clamped into the frame. Clamping
/// shifts the window; only a side longer than the frame dimension shrinks
/// to that dimension.
inline Rect subframe_rect(const SubFrame& f, FrameSize frame) {
  double side = f.detector_size / f.beta;
  int side_i = std::max(1, round_half_up(side));
  int w = std::min(side_i, frame.w);
  int h = std::min(side_i, frame.h);
  int x = round_half_up(f.cx - w / 2.0);
  int y = round_half_up(f.cy - h / 2.0);
  x = std::clamp(x, 0, frame.w - w);
  y = std::clamp(y, 0, frame.h - h);
  return {x, y, w, h};
}

enum class PlaceMode { InSitu, Relocated };

/// One patch's placement inside the composed output: either covered where it
/// sits (InSitu, dst is the image of src under the host's crop transform) or
/// moved into a blank rectangle (Relocated). dst is kept real-valued; pixels
/// are rounded only when rastering.
struct Placement {
  int patch_id = 0;
  PlaceMode mode = PlaceMode::InSitu;
  int host = 0;  // index into CompositionPlan::sub_frames
  Rect src;      // original coordinates
  RectF dst;     // detector coordinates of the host sub-frame
  double scale_x = 1.0;
  double scale_y = 1.0;
};

inline RectF forward_map_f(const Placement& p, const RectF& box) {
  return {p.dst.x + (box.x - p.src.x) * p.scale_x,
          p.dst.y + (box.y - p.src.y) * p.scale_y,
          box.w * p.scale_x, box.h * p.scale_y};
}

inline RectF inverse_map_f(const Placement& p, const RectF& box) {
  return {p.src.x + (box.x - p.dst.x) / p.scale_x,
          p.src.y + (box.y - p.dst.y) / p.scale_y,
          box.w / p.scale_x, box.h / p.scale_y};
}

inline Rect round_rect(const RectF& r) {
  int x1 = round_half_up(r.x), y1 = round_half_up(r.y);
  int x2 = round_half_up(r.x2()), y2 = round_half_up(r.y2());
  return {x1, y1, std::max(1, x2 - x1), std::max(1, y2 - y1)};
}

inline Rect forward_map(const Placement& p, const Rect& box) {
  return round_rect(forward_map_f(p, to_rectf(box)));
}

inline bool dst_contains_center(const Placement& p, const RectF& box) {
  double cx = box.cx(), cy = box.cy();
  return cx >= p.dst.x && cx < p.dst.x2() && cy >= p.dst.y && cy < p.dst.y2();
}

/// Maps a detector-coords box back to original coordinates. Empty when the
/// box center lies outside the placement's dst region.
inline std::optional<Rect> inverse_map(const Placement& p, const Rect& box) {
  RectF b = to_rectf(box);
  if (!dst_contains_center(p, b)) return std::nullopt;
  return round_rect(inverse_map_f(p, b));
}

/// Identity-in-detector-space placement describing a sub-frame's own crop
/// transform: src is the clamped original extent, dst the full detector
/// square. InSitu placements are derived from this.
inline Placement crop_placement(const SubFrame& f, int host, FrameSize frame) {
  Rect r = subframe_rect(f, frame);
  double d = static_cast<double>(f.detector_size);
  Placement p;
  p.patch_id = -1;
  p.mode = PlaceMode::InSitu;
  p.host = host;
  p.src = r;
  p.dst = {0.0, 0.0, d, d};
  p.scale_x = d / r.w;
  p.scale_y = d / r.h;
  return p;
}

/// Final sub-frame set plus one placement per input patch.
struct CompositionPlan {
  FrameSize frame_size;
  int detector_size = 300;
  std::vector<SubFrame> sub_frames;
  std::vector<Placement> placements;
};

}  // namespace poic
