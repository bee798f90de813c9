#pragma once

#include <algorithm>
#include <vector>

#include "poic/geometry.hpp"

namespace poic {

/// Maintains the set of maximal empty rectangles inside a w x h region as
/// obstacles are inserted. Classic MaxRects bookkeeping: every free rectangle
/// intersecting a new obstacle is replaced by up to four slabs (left, right,
/// top, bottom), then rectangles contained in another are pruned.
class EmptyRectSet {
 public:
  EmptyRectSet(int w, int h) : w_(w), h_(h) {
    if (w > 0 && h > 0) free_.push_back(Rect{0, 0, w, h});
  }

  void insert(const Rect& obstacle) {
    if (obstacle.w <= 0 || obstacle.h <= 0) return;
    std::vector<Rect> next;
    next.reserve(free_.size() + 4);
    for (const Rect& f : free_) {
      if (!intersects(f, obstacle)) {
        next.push_back(f);
        continue;
      }
      if (obstacle.x > f.x) next.push_back(Rect{f.x, f.y, obstacle.x - f.x, f.h});
      if (obstacle.x2() < f.x2()) next.push_back(Rect{obstacle.x2(), f.y, f.x2() - obstacle.x2(), f.h});
      if (obstacle.y > f.y) next.push_back(Rect{f.x, f.y, f.w, obstacle.y - f.y});
      if (obstacle.y2() < f.y2()) next.push_back(Rect{f.x, obstacle.y2(), f.w, f.y2() - obstacle.y2()});
    }
    prune(next);
    free_ = std::move(next);
  }

  const std::vector<Rect>& rects() const { return free_; }

  /// Up to n largest empty rectangles, ordered by (area desc, y, x, w, h).
  std::vector<Rect> largest(size_t n) const {
    std::vector<Rect> out = free_;
    std::sort(out.begin(), out.end(), [](const Rect& a, const Rect& b) {
      if (a.area() != b.area()) return a.area() > b.area();
      if (a.y != b.y) return a.y < b.y;
      if (a.x != b.x) return a.x < b.x;
      if (a.w != b.w) return a.w < b.w;
      return a.h < b.h;
    });
    if (out.size() > n) out.resize(n);
    return out;
  }

  int width() const { return w_; }
  int height() const { return h_; }

 private:
  static void prune(std::vector<Rect>& rects) {
    for (size_t i = 0; i < rects.size(); ++i) {
      for (size_t j = 0; j < rects.size(); ++j) {
        if (i == j) continue;
        if (contains(rects[j], rects[i]) && !(rects[i] == rects[j] && j > i)) {
          rects.erase(rects.begin() + static_cast<long>(i));
          --i;
          break;
        }
      }
    }
  }

  int w_ = 0, h_ = 0;
  std::vector<Rect> free_;
};

}  // namespace poic
