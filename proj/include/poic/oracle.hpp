#pragma once

#include <array>
#include <map>
#include <variant>
#include <vector>

#include "poic/geometry.hpp"
#include "poic/optimizer.hpp"

namespace poic {

struct OracleResult {
  int n_min = 0;
  CompositionPlan witness;
};

namespace detail {

inline double combination_count(size_t p, size_t n, double limit) {
  double c = 1;
  for (size_t i = 0; i < n; ++i) {
    c = c * static_cast<double>(p - i) / static_cast<double>(i + 1);
    if (c > limit) return c;
  }
  return c;
}

}  // namespace detail

/// Exhaustive minimum sub-frame count over grid-placed candidates, using the
/// same verify_and_relocate feasibility as the optimizer. beta must be 1
/// everywhere and the combination count must stay within max_combinations per
/// n, which limits this to tiny instances; that is its purpose.
inline OracleResult brute_force_min_subframes(const std::vector<Patch>& patches, int detector_size,
                                              FrameSize frame, int grid_stride, int n_r = 10,
                                              double max_combinations = 1e7) {
  if (grid_stride <= 0) throw Error("grid stride must be positive");
  for (const Patch& p : patches) {
    if (p.beta != 1.0) throw Error("oracle supports beta 1 only");
    if (p.rect.w > detector_size || p.rect.h > detector_size)
      throw InfeasibleError("patch exceeds detector capacity");
  }
  if (patches.empty()) {
    OracleResult r;
    r.witness.frame_size = frame;
    r.witness.detector_size = detector_size;
    return r;
  }

  // Distinct clamped windows only; grid points that clamp to the same
  // rectangle are interchangeable.
  std::vector<SubFrame> positions;
  std::map<std::array<int, 4>, bool> seen;
  for (int gy = 0; gy <= frame.h / grid_stride; ++gy)
    for (int gx = 0; gx <= frame.w / grid_stride; ++gx) {
      SubFrame f{static_cast<double>(gx * grid_stride), static_cast<double>(gy * grid_stride), 1.0,
                 detector_size};
      Rect r = subframe_rect(f, frame);
      std::array<int, 4> key{r.x, r.y, r.w, r.h};
      if (seen.emplace(key, true).second) positions.push_back(f);
    }

  size_t np = positions.size();
  for (size_t n = 1; n <= np; ++n) {
    if (detail::combination_count(np, n, max_combinations) > max_combinations)
      throw Error("instance too large for oracle");
    std::vector<size_t> c(n);
    for (size_t i = 0; i < n; ++i) c[i] = i;
    for (;;) {
      std::vector<SubFrame> subs;
      subs.reserve(n);
      for (size_t i : c) subs.push_back(positions[i]);
      auto res = verify_and_relocate(subs, patches, frame, detector_size, n_r);
      if (std::holds_alternative<CompositionPlan>(res))
        return OracleResult{static_cast<int>(n), std::get<CompositionPlan>(std::move(res))};
      // next combination in lexicographic order
      size_t i = n;
      while (i > 0 && c[i - 1] == np - n + (i - 1)) --i;
      if (i == 0) break;
      ++c[i - 1];
      for (size_t k = i; k < n; ++k) c[k] = c[k - 1] + 1;
    }
  }
  throw Error("no feasible cover found by oracle");
}

}  // namespace poic
