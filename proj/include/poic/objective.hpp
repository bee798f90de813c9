#pragma once

#include <cmath>
#include <vector>

#include "poic/geometry.hpp"

namespace poic {

/// Constants of the composition objective. delta must dominate every
/// attainable location/distribution value so that capacity-violating
/// candidates always rank below satisfying ones.
struct ObjectiveConfig {
  double alpha = 1.0;        // weight of the location term
  double delta = 1e6;        // capacity penalty magnitude
  double k_count = 1.0;      // count term slope
  double b_count = 0.5;      // count term offset; keeps H(1) > 0
  double psi_epsilon = 1e-9; // full-coverage singularity guard
};

/// cover[i][j] == true iff sub-frame j fully contains patch i.
struct CoverageMatrix {
  int n_p = 0;
  int n_f = 0;
  std::vector<std::uint8_t> cover;  // row-major n_p x n_f

  bool at(int i, int j) const { return cover[static_cast<size_t>(i) * n_f + j] != 0; }
};

inline CoverageMatrix coverage(const std::vector<Patch>& patches,
                               const std::vector<SubFrame>& sub_frames, FrameSize frame) {
  CoverageMatrix m;
  m.n_p = static_cast<int>(patches.size());
  m.n_f = static_cast<int>(sub_frames.size());
  m.cover.assign(static_cast<size_t>(m.n_p) * m.n_f, 0);
  std::vector<Rect> rects(sub_frames.size());
  for (size_t j = 0; j < sub_frames.size(); ++j) rects[j] = subframe_rect(sub_frames[j], frame);
  for (int i = 0; i < m.n_p; ++i)
    for (int j = 0; j < m.n_f; ++j)
      m.cover[static_cast<size_t>(i) * m.n_f + j] = contains(rects[j], patches[i].rect);
  return m;
}

/// Location term: rewards covering a large share of the scaled patch area.
/// With A_total = sum of h*w*beta over all patches and A_cov the same sum
/// over patches covered by at least one sub-frame, returns
/// ln(1 / max(A_total/A_cov - 1, psi_epsilon) + e); zero coverage gives
/// ln(e) = 1 and full coverage the capped maximum ln(1/psi_epsilon + e).
inline double psi(const std::vector<Patch>& patches, const CoverageMatrix& cov,
                  const ObjectiveConfig& cfg) {
  double total = 0, covered = 0;
  for (int i = 0; i < cov.n_p; ++i) {
    double a = patches[i].scaled_area();
    total += a;
    for (int j = 0; j < cov.n_f; ++j)
      if (cov.at(i, j)) {
        covered += a;
        break;
      }
  }
  if (covered <= 0) return 1.0;
  double ratio = total / covered - 1.0;
  return std::log(1.0 / std::max(ratio, cfg.psi_epsilon) + std::exp(1.0));
}

/// Distribution term for one sub-frame: mean over its covered patches of
/// sqrt(|dx * dy|) * sqrt(h * w), where (dx, dy) is the offset between patch
/// center and sub-frame center. Larger values mean patches sit nearer the
/// window corners, leaving more blank space for relocations.
inline double phi(const std::vector<Patch>& patches, const SubFrame& f, FrameSize frame,
                  const CoverageMatrix& cov, int j) {
  Rect r = subframe_rect(f, frame);
  double fx = r.x + r.w / 2.0, fy = r.y + r.h / 2.0;
  double sum = 0;
  int count = 0;
  for (int i = 0; i < cov.n_p; ++i) {
    if (!cov.at(i, j)) continue;
    const Rect& pr = patches[i].rect;
    double dx = (pr.x + pr.w / 2.0) - fx;
    double dy = (pr.y + pr.h / 2.0) - fy;
    sum += std::sqrt(std::fabs(dx * dy)) * std::sqrt(static_cast<double>(pr.area()));
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

/// Count term H(N_F) = k * N_F + b, strictly increasing.
inline double h_count(int n_f, const ObjectiveConfig& cfg) {
  return cfg.k_count * n_f + cfg.b_count;
}

/// Capacity penalty: 0 when the scaled sub-frame area sum covers the scaled
/// patch area sum (inclusive), 1 otherwise.
inline int g_penalty(const std::vector<Patch>& patches, const std::vector<SubFrame>& sub_frames,
                     FrameSize frame) {
  double patch_area = 0, frame_area = 0;
  for (const Patch& p : patches) patch_area += p.scaled_area();
  for (const SubFrame& f : sub_frames) {
    Rect r = subframe_rect(f, frame);
    frame_area += static_cast<double>(r.area()) * f.beta;
  }
  return frame_area >= patch_area ? 0 : 1;
}

/// Combined objective, maximized by the optimizer:
/// (alpha * psi + sum_j phi_j) / H(N_F) - delta * G. An empty candidate
/// scores -delta.
inline double score(const std::vector<Patch>& patches, const std::vector<SubFrame>& sub_frames,
                    FrameSize frame, const ObjectiveConfig& cfg) {
  if (sub_frames.empty()) return -cfg.delta;
  CoverageMatrix cov = coverage(patches, sub_frames, frame);
  double phi_sum = 0;
  for (int j = 0; j < cov.n_f; ++j) phi_sum += phi(patches, sub_frames[j], frame, cov, j);
  double val = (cfg.alpha * psi(patches, cov, cfg) + phi_sum) / h_count(cov.n_f, cfg);
  return val - cfg.delta * g_penalty(patches, sub_frames, frame);
}

}  // namespace poic
