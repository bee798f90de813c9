#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <tuple>
#include <vector>

#include "poic/poic.hpp"

using namespace poic;

namespace {

bool hits_any(const Rect& r, const std::vector<Rect>& obstacles) {
  for (const Rect& o : obstacles)
    if (intersects(r, o)) return true;
  return false;
}

/// Reference enumeration of maximal empty rectangles: every candidate with
/// edges on obstacle or canvas boundaries that is empty and cannot grow by
/// one pixel in any direction.
std::vector<Rect> brute_force_maximal(int w, int h, const std::vector<Rect>& obstacles) {
  std::set<int> xs{0, w}, ys{0, h};
  for (const Rect& o : obstacles) {
    xs.insert(std::clamp(o.x, 0, w));
    xs.insert(std::clamp(o.x2(), 0, w));
    ys.insert(std::clamp(o.y, 0, h));
    ys.insert(std::clamp(o.y2(), 0, h));
  }
  std::vector<int> vx(xs.begin(), xs.end()), vy(ys.begin(), ys.end());
  std::vector<Rect> out;
  for (size_t a = 0; a < vx.size(); ++a)
    for (size_t b = a + 1; b < vx.size(); ++b)
      for (size_t c = 0; c < vy.size(); ++c)
        for (size_t d = c + 1; d < vy.size(); ++d) {
          Rect r{vx[a], vy[c], vx[b] - vx[a], vy[d] - vy[c]};
          if (hits_any(r, obstacles)) continue;
          bool grow_left = r.x > 0 && !hits_any(Rect{r.x - 1, r.y, 1, r.h}, obstacles);
          bool grow_right = r.x2() < w && !hits_any(Rect{r.x2(), r.y, 1, r.h}, obstacles);
          bool grow_up = r.y > 0 && !hits_any(Rect{r.x, r.y - 1, r.w, 1}, obstacles);
          bool grow_down = r.y2() < h && !hits_any(Rect{r.x, r.y2(), r.w, 1}, obstacles);
          if (!grow_left && !grow_right && !grow_up && !grow_down) out.push_back(r);
        }
  return out;
}

std::multiset<std::tuple<int, int, int, int>> as_set(const std::vector<Rect>& rects) {
  std::multiset<std::tuple<int, int, int, int>> s;
  for (const Rect& r : rects) s.insert({r.x, r.y, r.w, r.h});
  return s;
}

}  // namespace

TEST_CASE("fresh set holds the whole region") {
  EmptyRectSet s(300, 200);
  REQUIRE(s.rects().size() == 1);
  CHECK(s.rects()[0] == Rect{0, 0, 300, 200});
  CHECK(s.width() == 300);
  CHECK(s.height() == 200);
}

TEST_CASE("centered obstacle leaves four maximal slabs") {
  EmptyRectSet s(300, 300);
  s.insert(Rect{100, 100, 100, 100});
  auto top4 = s.largest(4);
  REQUIRE(s.rects().size() == 4);
  REQUIRE(top4.size() == 4);
  CHECK(top4[0] == Rect{0, 0, 100, 300});
  CHECK(top4[1] == Rect{0, 0, 300, 100});
  CHECK(top4[2] == Rect{200, 0, 100, 300});
  CHECK(top4[3] == Rect{0, 200, 300, 100});
}

TEST_CASE("corner obstacle leaves two slabs") {
  EmptyRectSet s(300, 300);
  s.insert(Rect{0, 0, 100, 100});
  auto got = as_set(s.rects());
  auto want = as_set({Rect{100, 0, 200, 300}, Rect{0, 100, 300, 200}});
  CHECK(got == want);
}

TEST_CASE("full-width obstacle splits the region in two") {
  EmptyRectSet s(100, 100);
  s.insert(Rect{0, 40, 100, 20});
  auto got = as_set(s.rects());
  auto want = as_set({Rect{0, 0, 100, 40}, Rect{0, 60, 100, 40}});
  CHECK(got == want);
}

TEST_CASE("invalid obstacles are ignored") {
  EmptyRectSet s(50, 50);
  s.insert(Rect{10, 10, 0, 5});
  CHECK(s.rects().size() == 1);
}

TEST_CASE("largest truncates after ordering by area") {
  EmptyRectSet s(300, 300);
  s.insert(Rect{0, 0, 100, 100});
  auto top1 = s.largest(1);
  REQUIRE(top1.size() == 1);
  CHECK(top1[0].area() == 200 * 300);
}

TEST_CASE("obstacle covering everything empties the set") {
  EmptyRectSet s(40, 40);
  s.insert(Rect{0, 0, 40, 40});
  CHECK(s.rects().empty());
}

TEST_CASE("maximal rectangles match brute force on random obstacle sets") {
  Rng rng(20240816);
  for (int trial = 0; trial < 40; ++trial) {
    int w = rng.range(10, 48), h = rng.range(10, 48);
    int n = rng.range(1, 4);
    std::vector<Rect> obstacles;
    EmptyRectSet s(w, h);
    for (int i = 0; i < n; ++i) {
      Rect o{rng.range(0, w - 2), rng.range(0, h - 2), 0, 0};
      o.w = rng.range(1, w - o.x);
      o.h = rng.range(1, h - o.y);
      obstacles.push_back(o);
      s.insert(o);
    }
    auto want = as_set(brute_force_maximal(w, h, obstacles));
    auto got = as_set(s.rects());
    INFO("trial " << trial << ": " << got.size() << " vs " << want.size() << " rects");
    CHECK(got == want);
  }
}
