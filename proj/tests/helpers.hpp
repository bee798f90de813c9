#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "poic/poic.hpp"

namespace test_util {

inline poic::Patch make_patch(int id, int x, int y, int w, int h, double beta = 1.0) {
  return poic::Patch{id, poic::Rect{x, y, w, h}, beta};
}

/// Random instance whose patches respect the detector capacity and carry the
/// profile's beta at their vertical center.
inline std::vector<poic::Patch> random_instance(poic::Rng& rng, poic::FrameSize frame,
                                                const poic::ScalingProfile& profile, int n,
                                                int min_side, int max_side, int detector_size) {
  std::vector<poic::Patch> patches;
  patches.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int tries = 0; tries < 100; ++tries) {
      int w = rng.range(min_side, max_side);
      int h = rng.range(min_side, max_side);
      if (w > frame.w || h > frame.h) continue;
      int x = rng.range(0, frame.w - w);
      int y = rng.range(0, frame.h - h);
      double beta = poic::beta_for(profile, y + h / 2.0);
      if (w * beta > detector_size || h * beta > detector_size) continue;
      patches.push_back(poic::Patch{i, poic::Rect{x, y, w, h}, beta});
      break;
    }
  }
  return patches;
}

/// Structural validation of a composition plan against its input patches.
/// Returns an empty string when the plan holds every invariant, otherwise a
/// description of the first violation.
inline std::string check_plan(const poic::CompositionPlan& plan,
                              const std::vector<poic::Patch>& patches) {
  const int d = plan.detector_size;
  const int n_f = static_cast<int>(plan.sub_frames.size());
  std::ostringstream err;

  std::vector<poic::Rect> rects(plan.sub_frames.size());
  std::vector<poic::Placement> crops(plan.sub_frames.size());
  for (size_t j = 0; j < plan.sub_frames.size(); ++j) {
    rects[j] = poic::subframe_rect(plan.sub_frames[j], plan.frame_size);
    crops[j] = poic::crop_placement(plan.sub_frames[j], static_cast<int>(j), plan.frame_size);
    if (!poic::contains(poic::Rect{0, 0, plan.frame_size.w, plan.frame_size.h}, rects[j])) {
      err << "sub-frame " << j << " extends outside the frame";
      return err.str();
    }
  }

  std::vector<int> seen(patches.size(), 0);
  auto patch_index = [&](int id) -> int {
    for (size_t i = 0; i < patches.size(); ++i)
      if (patches[i].id == id) return static_cast<int>(i);
    return -1;
  };

  for (const poic::Placement& pl : plan.placements) {
    int pi = patch_index(pl.patch_id);
    if (pi < 0) {
      err << "placement references unknown patch " << pl.patch_id;
      return err.str();
    }
    ++seen[static_cast<size_t>(pi)];
    const poic::Patch& p = patches[static_cast<size_t>(pi)];
    if (pl.host < 0 || pl.host >= n_f) {
      err << "patch " << pl.patch_id << " hosted by invalid sub-frame " << pl.host;
      return err.str();
    }
    if (pl.src != p.rect) {
      err << "patch " << pl.patch_id << " placement src differs from the patch rect";
      return err.str();
    }
    size_t h = static_cast<size_t>(pl.host);
    if (pl.mode == poic::PlaceMode::InSitu) {
      if (!poic::contains(rects[h], p.rect)) {
        err << "patch " << pl.patch_id << " in situ but not inside sub-frame " << pl.host;
        return err.str();
      }
      for (int j = 0; j < pl.host; ++j)
        if (poic::contains(rects[static_cast<size_t>(j)], p.rect)) {
          err << "patch " << pl.patch_id << " in situ in " << pl.host
              << " but already covered by " << j;
          return err.str();
        }
      poic::RectF expect = poic::forward_map_f(crops[h], poic::to_rectf(p.rect));
      if (pl.dst != expect || pl.scale_x != crops[h].scale_x || pl.scale_y != crops[h].scale_y) {
        err << "patch " << pl.patch_id << " in-situ dst is not the crop image of src";
        return err.str();
      }
    } else {
      int fw = std::max(1, static_cast<int>(std::ceil(p.rect.w * p.beta - 1e-9)));
      int fh = std::max(1, static_cast<int>(std::ceil(p.rect.h * p.beta - 1e-9)));
      if (pl.dst.x != std::floor(pl.dst.x) || pl.dst.y != std::floor(pl.dst.y) ||
          pl.dst.w != fw || pl.dst.h != fh) {
        err << "patch " << pl.patch_id << " relocated slot is not the integer footprint";
        return err.str();
      }
      if (pl.dst.x < 0 || pl.dst.y < 0 || pl.dst.x2() > d || pl.dst.y2() > d) {
        err << "patch " << pl.patch_id << " relocated outside the detector square";
        return err.str();
      }
      if (pl.scale_x != static_cast<double>(fw) / p.rect.w ||
          pl.scale_y != static_cast<double>(fh) / p.rect.h) {
        err << "patch " << pl.patch_id << " relocation scales inconsistent with footprint";
        return err.str();
      }
    }
  }

  for (size_t i = 0; i < patches.size(); ++i)
    if (seen[i] != 1) {
      err << "patch " << patches[i].id << " placed " << seen[i] << " times";
      return err.str();
    }

  // Relocated slots must avoid every patch image visible in the host window
  // and every other slot there.
  for (int j = 0; j < n_f; ++j) {
    std::vector<poic::Rect> occupied;
    for (const poic::Patch& p : patches) {
      if (!poic::contains(rects[static_cast<size_t>(j)], p.rect)) continue;
      poic::RectF f = poic::forward_map_f(crops[static_cast<size_t>(j)], poic::to_rectf(p.rect));
      int x0 = std::clamp(static_cast<int>(std::floor(f.x)), 0, d);
      int y0 = std::clamp(static_cast<int>(std::floor(f.y)), 0, d);
      int x1 = std::clamp(static_cast<int>(std::ceil(f.x + f.w)), 0, d);
      int y1 = std::clamp(static_cast<int>(std::ceil(f.y + f.h)), 0, d);
      if (x1 > x0 && y1 > y0) occupied.push_back(poic::Rect{x0, y0, x1 - x0, y1 - y0});
    }
    std::vector<poic::Rect> slots;
    for (const poic::Placement& pl : plan.placements) {
      if (pl.host != j || pl.mode != poic::PlaceMode::Relocated) continue;
      slots.push_back(poic::Rect{static_cast<int>(pl.dst.x), static_cast<int>(pl.dst.y),
                                 static_cast<int>(pl.dst.w), static_cast<int>(pl.dst.h)});
    }
    for (size_t a = 0; a < slots.size(); ++a) {
      for (const poic::Rect& o : occupied)
        if (poic::intersects(slots[a], o)) {
          err << "relocated slot overlaps a patch image in sub-frame " << j;
          return err.str();
        }
      for (size_t b2 = a + 1; b2 < slots.size(); ++b2)
        if (poic::intersects(slots[a], slots[b2])) {
          err << "relocated slots overlap each other in sub-frame " << j;
          return err.str();
        }
    }
  }
  return "";
}

}  // namespace test_util
