#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <variant>
#include <vector>

#include "poic/empty_rect.hpp"
#include "poic/geometry.hpp"
#include "poic/objective.hpp"
#include "poic/scaling.hpp"

namespace poic {

struct Bounds {
  int l_min = 1;
  int l_max = 1;
};

struct GaConfig {
  double alpha3 = 4.0;       // population size multiplier
  int grid_stride = 16;      // center search grid, original-frame pixels
  int tournament_size = 2;
  double crossover_rate = 0.9;
  double mutation_rate = 0.2;
  int elite_count = 2;
  int patience = 4;          // stop after this many stagnant generations
  int local_search_radius = 8;
  double local_search_top_fraction = 0.25;
  int n_r = 10;              // blank rectangles kept per sub-frame
  int max_verification_retries = 3;
  int max_generations = 200;
  std::uint64_t rng_seed = 0;
};

struct Candidate {
  std::vector<SubFrame> sub_frames;
  double score = 0.0;
  bool local_opt = false;  // local search already found no improving move
};

struct VerificationFailure {
  int patch_id = -1;
};

struct ComposeStats {
  Bounds initial_bounds{};
  Bounds final_bounds{};
  int retries = 0;
  bool fallback_used = false;
  int eliminated = 0;  // sub-frames removed by the reduction pass
  std::vector<std::vector<double>> best_score_history;  // per attempt, per generation
};

/// Deterministic RNG used for every stochastic choice. Avoids
/// std::uniform_*_distribution on purpose: their outputs differ across
/// standard library implementations, and plans must be reproducible from the
/// seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t next() { return eng_(); }
  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  int range(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

 private:
  std::mt19937_64 eng_;
};

namespace detail {

inline int snap_to_grid(double v, int stride, int limit) {
  int g = static_cast<int>(round_half_up(v / stride));
  g = std::clamp(g, 0, limit / stride);
  return g * stride;
}

inline bool covers_any(const std::vector<Patch>& patches, const SubFrame& f, FrameSize frame) {
  Rect r = subframe_rect(f, frame);
  for (const Patch& p : patches)
    if (contains(r, p.rect)) return true;
  return false;
}

inline SubFrame grid_subframe(int gx, int gy, const ScalingProfile& profile, int detector_size) {
  double cy = gy;
  return SubFrame{static_cast<double>(gx), cy, beta_for(profile, cy), detector_size};
}

inline SubFrame random_grid_subframe(Rng& rng, const GaConfig& cfg, const ScalingProfile& profile,
                                     FrameSize frame, int detector_size) {
  int nx = frame.w / cfg.grid_stride + 1;
  int ny = frame.h / cfg.grid_stride + 1;
  int gx = static_cast<int>(rng.below(static_cast<std::uint64_t>(nx))) * cfg.grid_stride;
  int gy = static_cast<int>(rng.below(static_cast<std::uint64_t>(ny))) * cfg.grid_stride;
  return grid_subframe(gx, gy, profile, detector_size);
}

/// Incrementally maintained objective value for one candidate. A sub-frame
/// move touches only that sub-frame's coverage and distribution term, so
/// evaluating a local-search probe is O(N_P) instead of O(N_P * N_F).
class ScoreState {
 public:
  ScoreState(const std::vector<Patch>& patches, FrameSize frame, const ObjectiveConfig& cfg,
             std::vector<SubFrame> sub_frames)
      : patches_(&patches), frame_(frame), cfg_(cfg), subs_(std::move(sub_frames)) {
    a_total_ = 0;
    for (const Patch& p : patches) a_total_ += p.scaled_area();
    rects_.resize(subs_.size());
    cover_count_.assign(patches.size(), 0);
    phi_.assign(subs_.size(), 0.0);
    for (size_t j = 0; j < subs_.size(); ++j) {
      rects_[j] = subframe_rect(subs_[j], frame_);
      capacity_ += static_cast<double>(rects_[j].area()) * subs_[j].beta;
    }
    for (size_t i = 0; i < patches.size(); ++i)
      for (size_t j = 0; j < subs_.size(); ++j)
        if (contains(rects_[j], patches[i].rect) && cover_count_[i]++ == 0)
          a_cov_ += patches[i].scaled_area();
    for (size_t j = 0; j < subs_.size(); ++j) {
      phi_[j] = phi_of(rects_[j]);
      phi_sum_ += phi_[j];
    }
  }

  double score() const { return combine(a_cov_, phi_sum_, capacity_); }

  double move_score(size_t j, const SubFrame& nf) const {
    Rect nr = subframe_rect(nf, frame_);
    double a_cov = a_cov_;
    double capacity = capacity_ - static_cast<double>(rects_[j].area()) * subs_[j].beta +
                      static_cast<double>(nr.area()) * nf.beta;
    const auto& ps = *patches_;
    for (size_t i = 0; i < ps.size(); ++i) {
      bool was = contains(rects_[j], ps[i].rect);
      bool now = contains(nr, ps[i].rect);
      if (was == now) continue;
      if (was && cover_count_[i] == 1) a_cov -= ps[i].scaled_area();
      if (now && cover_count_[i] == 0) a_cov += ps[i].scaled_area();
    }
    return combine(a_cov, phi_sum_ - phi_[j] + phi_of(nr), capacity);
  }

  void apply(size_t j, const SubFrame& nf) {
    Rect nr = subframe_rect(nf, frame_);
    const auto& ps = *patches_;
    capacity_ += static_cast<double>(nr.area()) * nf.beta -
                 static_cast<double>(rects_[j].area()) * subs_[j].beta;
    for (size_t i = 0; i < ps.size(); ++i) {
      bool was = contains(rects_[j], ps[i].rect);
      bool now = contains(nr, ps[i].rect);
      if (was == now) continue;
      if (was && --cover_count_[i] == 0) a_cov_ -= ps[i].scaled_area();
      if (now && cover_count_[i]++ == 0) a_cov_ += ps[i].scaled_area();
    }
    phi_sum_ += phi_of(nr) - phi_[j];
    phi_[j] = phi_of(nr);
    rects_[j] = nr;
    subs_[j] = nf;
  }

  const std::vector<SubFrame>& sub_frames() const { return subs_; }

 private:
  double phi_of(const Rect& r) const {
    double fx = r.x + r.w / 2.0, fy = r.y + r.h / 2.0;
    double sum = 0;
    int count = 0;
    for (const Patch& p : *patches_) {
      if (!contains(r, p.rect)) continue;
      double dx = (p.rect.x + p.rect.w / 2.0) - fx;
      double dy = (p.rect.y + p.rect.h / 2.0) - fy;
      sum += std::sqrt(std::fabs(dx * dy)) * std::sqrt(static_cast<double>(p.rect.area()));
      ++count;
    }
    return count > 0 ? sum / count : 0.0;
  }

  double combine(double a_cov, double phi_sum, double capacity) const {
    if (subs_.empty()) return -cfg_.delta;
    double psi_val;
    if (a_cov <= 0) {
      psi_val = 1.0;
    } else {
      double ratio = a_total_ / a_cov - 1.0;
      psi_val = std::log(1.0 / std::max(ratio, cfg_.psi_epsilon) + std::exp(1.0));
    }
    double h = cfg_.k_count * static_cast<double>(subs_.size()) + cfg_.b_count;
    int g = capacity >= a_total_ ? 0 : 1;
    return (cfg_.alpha * psi_val + phi_sum) / h - cfg_.delta * g;
  }

  const std::vector<Patch>* patches_;
  FrameSize frame_;
  ObjectiveConfig cfg_;
  std::vector<SubFrame> subs_;
  std::vector<Rect> rects_;
  std::vector<int> cover_count_;
  std::vector<double> phi_;
  double a_total_ = 0, a_cov_ = 0, phi_sum_ = 0, capacity_ = 0;
};

}  // namespace detail

/// Greedy pass over patches in descending scaled-area order. Each uncovered
/// patch gets a sub-frame at its center; l_min fires when cumulative scaled
/// sub-frame area reaches the total scaled patch area, l_max at twice that.
/// Thresholds that never fire collapse to the final count.
inline std::pair<Bounds, std::vector<SubFrame>> greedy_bounds(const std::vector<Patch>& patches,
                                                              const ScalingProfile& profile,
                                                              int detector_size, FrameSize frame) {
  if (patches.empty()) throw Error("nothing to compose");
  std::vector<size_t> order(patches.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    double sa = patches[a].scaled_area(), sb = patches[b].scaled_area();
    if (sa != sb) return sa > sb;
    return patches[a].id < patches[b].id;
  });
  double total = 0;
  for (const Patch& p : patches) total += p.scaled_area();

  std::vector<char> covered(patches.size(), 0);
  std::vector<SubFrame> seed;
  double cum = 0;
  Bounds b{0, 0};
  for (size_t idx : order) {
    if (covered[idx]) continue;
    const Rect& pr = patches[idx].rect;
    double cy = pr.y + pr.h / 2.0;
    SubFrame f{pr.x + pr.w / 2.0, cy, beta_for(profile, cy), detector_size};
    Rect fr = subframe_rect(f, frame);
    for (size_t i = 0; i < patches.size(); ++i)
      if (!covered[i] && contains(fr, patches[i].rect)) covered[i] = 1;
    seed.push_back(f);
    cum += static_cast<double>(fr.area()) * f.beta;
    int n = static_cast<int>(seed.size());
    if (b.l_min == 0 && cum >= total) b.l_min = n;
    if (b.l_max == 0 && cum >= 2 * total) b.l_max = n;
  }
  int n = static_cast<int>(seed.size());
  if (b.l_min == 0) b.l_min = n;
  if (b.l_max == 0) b.l_max = n;
  b.l_min = std::max(b.l_min, 1);
  b.l_max = std::max(b.l_max, b.l_min);
  return {b, seed};
}

/// Population of ceil(alpha3 * (l_max^2 - (l_min-1)^2)) candidates with
/// lengths uniform in [l_min, l_max] and centers on the coarse grid. The
/// greedy seed, snapped to the grid, replaces candidate 0.
inline std::vector<Candidate> init_population(const Bounds& b, const std::vector<Patch>& patches,
                                              const GaConfig& cfg, FrameSize frame,
                                              const ScalingProfile& profile, int detector_size,
                                              const ObjectiveConfig& obj,
                                              const std::vector<SubFrame>& seed, Rng& rng) {
  double lo = static_cast<double>(b.l_min) - 1.0;
  int n_g = static_cast<int>(
      std::ceil(cfg.alpha3 * (static_cast<double>(b.l_max) * b.l_max - lo * lo)));
  n_g = std::max(n_g, 1);
  std::vector<Candidate> pop(static_cast<size_t>(n_g));
  for (Candidate& c : pop) {
    int len = rng.range(b.l_min, b.l_max);
    c.sub_frames.reserve(static_cast<size_t>(len));
    for (int k = 0; k < len; ++k)
      c.sub_frames.push_back(detail::random_grid_subframe(rng, cfg, profile, frame, detector_size));
    c.score = score(patches, c.sub_frames, frame, obj);
  }
  Candidate seeded;
  for (const SubFrame& f : seed) {
    int gx = detail::snap_to_grid(f.cx, cfg.grid_stride, frame.w);
    int gy = detail::snap_to_grid(f.cy, cfg.grid_stride, frame.h);
    seeded.sub_frames.push_back(detail::grid_subframe(gx, gy, profile, detector_size));
    if (static_cast<int>(seeded.sub_frames.size()) == b.l_max) break;
  }
  while (static_cast<int>(seeded.sub_frames.size()) < b.l_min)
    seeded.sub_frames.push_back(detail::random_grid_subframe(rng, cfg, profile, frame, detector_size));
  seeded.score = score(patches, seeded.sub_frames, frame, obj);
  pop[0] = std::move(seeded);
  return pop;
}

namespace detail {

inline size_t tournament_pick(const std::vector<Candidate>& pop, const GaConfig& cfg, Rng& rng) {
  size_t best = rng.below(pop.size());
  for (int t = 1; t < cfg.tournament_size; ++t) {
    size_t k = rng.below(pop.size());
    if (pop[k].score > pop[best].score || (pop[k].score == pop[best].score && k < best)) best = k;
  }
  return best;
}

inline void mutate(Candidate& c, const std::vector<Patch>& patches, const GaConfig& cfg,
                   const Bounds& b, FrameSize frame, const ScalingProfile& profile,
                   int detector_size, Rng& rng) {
  int window = std::max(1, 4 * cfg.local_search_radius / cfg.grid_stride);
  for (SubFrame& f : c.sub_frames) {
    if (rng.unit() >= cfg.mutation_rate) continue;
    int gx = snap_to_grid(f.cx + rng.range(-window, window) * cfg.grid_stride, cfg.grid_stride,
                          frame.w);
    int gy = snap_to_grid(f.cy + rng.range(-window, window) * cfg.grid_stride, cfg.grid_stride,
                          frame.h);
    SubFrame nf = grid_subframe(gx, gy, profile, detector_size);
    if (covers_any(patches, nf, frame)) {
      f = nf;
      c.local_opt = false;
    }
  }
  if (rng.unit() < cfg.mutation_rate) {
    int len = static_cast<int>(c.sub_frames.size());
    if (rng.below(2) == 0) {
      if (len < b.l_max) {
        for (int t = 0; t < 8; ++t) {
          SubFrame nf = random_grid_subframe(rng, cfg, profile, frame, detector_size);
          if (covers_any(patches, nf, frame)) {
            c.sub_frames.push_back(nf);
            c.local_opt = false;
            break;
          }
        }
      }
    } else if (len > b.l_min) {
      c.sub_frames.erase(c.sub_frames.begin() +
                         static_cast<long>(rng.below(static_cast<std::uint64_t>(len))));
      c.local_opt = false;
    }
  }
}

}  // namespace detail

/// One generation: elites copied unchanged, remainder bred by tournament
/// selection, one-point crossover on the sub-frame lists, and mutation.
/// Mutations producing a sub-frame that covers no patch are discarded.
inline std::vector<Candidate> evolve_step(const std::vector<Candidate>& pop,
                                          const std::vector<Patch>& patches, const GaConfig& cfg,
                                          const Bounds& b, FrameSize frame,
                                          const ScalingProfile& profile, int detector_size,
                                          const ObjectiveConfig& obj, Rng& rng) {
  std::vector<size_t> rank(pop.size());
  std::iota(rank.begin(), rank.end(), size_t{0});
  std::sort(rank.begin(), rank.end(), [&](size_t a, size_t b2) {
    if (pop[a].score != pop[b2].score) return pop[a].score > pop[b2].score;
    return a < b2;
  });
  std::vector<Candidate> next;
  next.reserve(pop.size());
  for (size_t e = 0; e < std::min<size_t>(static_cast<size_t>(std::max(cfg.elite_count, 0)),
                                          pop.size());
       ++e)
    next.push_back(pop[rank[e]]);

  while (next.size() < pop.size()) {
    const Candidate& pa = pop[detail::tournament_pick(pop, cfg, rng)];
    const Candidate& pb = pop[detail::tournament_pick(pop, cfg, rng)];
    Candidate ca = pa, cb = pb;
    size_t min_len = std::min(pa.sub_frames.size(), pb.sub_frames.size());
    if (rng.unit() < cfg.crossover_rate && min_len >= 2) {
      int cut = rng.range(1, static_cast<int>(min_len) - 1);
      ca.sub_frames.assign(pa.sub_frames.begin(), pa.sub_frames.begin() + cut);
      ca.sub_frames.insert(ca.sub_frames.end(), pb.sub_frames.begin() + cut, pb.sub_frames.end());
      cb.sub_frames.assign(pb.sub_frames.begin(), pb.sub_frames.begin() + cut);
      cb.sub_frames.insert(cb.sub_frames.end(), pa.sub_frames.begin() + cut, pa.sub_frames.end());
      ca.local_opt = cb.local_opt = false;
    }
    detail::mutate(ca, patches, cfg, b, frame, profile, detector_size, rng);
    detail::mutate(cb, patches, cfg, b, frame, profile, detector_size, rng);
    if (!ca.local_opt) ca.score = score(patches, ca.sub_frames, frame, obj);
    next.push_back(std::move(ca));
    if (next.size() < pop.size()) {
      if (!cb.local_opt) cb.score = score(patches, cb.sub_frames, frame, obj);
      next.push_back(std::move(cb));
    }
  }
  return next;
}

/// Hill climbing on sub-frame centers: probes the 8 neighbors at radius r and
/// the 8 at 2r, adopting the best strictly improving move per sub-frame,
/// until a sweep finds nothing (at most 10 sweeps).
inline Candidate local_search(Candidate c, const std::vector<Patch>& patches, const GaConfig& cfg,
                              FrameSize frame, const ScalingProfile& profile,
                              const ObjectiveConfig& obj) {
  if (c.local_opt || c.sub_frames.empty()) return c;
  detail::ScoreState state(patches, frame, obj, c.sub_frames);
  double current = state.score();
  static const int dirs[8][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                 {1, 1},  {1, -1}, {-1, 1}, {-1, -1}};
  for (int sweep = 0; sweep < 10; ++sweep) {
    bool improved = false;
    for (size_t j = 0; j < c.sub_frames.size(); ++j) {
      const SubFrame& f = state.sub_frames()[j];
      double best = current;
      std::optional<SubFrame> best_move;
      for (int ring = 1; ring <= 2; ++ring) {
        int r = ring * cfg.local_search_radius;
        for (const auto& d : dirs) {
          double cx = std::clamp(f.cx + d[0] * r, 0.0, static_cast<double>(frame.w));
          double cy = std::clamp(f.cy + d[1] * r, 0.0, static_cast<double>(frame.h));
          SubFrame nf{cx, cy, beta_for(profile, cy), f.detector_size};
          double s = state.move_score(j, nf);
          if (s > best) {
            best = s;
            best_move = nf;
          }
        }
      }
      if (best_move) {
        state.apply(j, *best_move);
        current = best;
        improved = true;
      }
    }
    if (!improved) break;
  }
  c.sub_frames = state.sub_frames();
  c.score = score(patches, c.sub_frames, frame, obj);
  c.local_opt = true;
  return c;
}

/// Turns a scored candidate into a concrete plan. Patches fully inside a
/// sub-frame stay in place (first covering sub-frame hosts them); every
/// contained patch footprint becomes an obstacle in detector coordinates;
/// remaining patches are placed largest-first into the smallest adequate
/// blank rectangle among each sub-frame's n_r largest.
inline std::variant<CompositionPlan, VerificationFailure> verify_and_relocate(
    const std::vector<SubFrame>& sub_frames, const std::vector<Patch>& patches, FrameSize frame,
    int detector_size, int n_r) {
  CompositionPlan plan;
  plan.frame_size = frame;
  plan.detector_size = detector_size;
  plan.sub_frames = sub_frames;
  const int d = detector_size;

  std::vector<Rect> rects(sub_frames.size());
  std::vector<Placement> crops(sub_frames.size());
  for (size_t j = 0; j < sub_frames.size(); ++j) {
    rects[j] = subframe_rect(sub_frames[j], frame);
    crops[j] = crop_placement(sub_frames[j], static_cast<int>(j), frame);
  }

  std::vector<char> covered(patches.size(), 0);
  for (size_t i = 0; i < patches.size(); ++i) {
    for (size_t j = 0; j < sub_frames.size(); ++j) {
      if (!contains(rects[j], patches[i].rect)) continue;
      covered[i] = 1;
      RectF dst = forward_map_f(crops[j], to_rectf(patches[i].rect));
      plan.placements.push_back(Placement{patches[i].id, PlaceMode::InSitu, static_cast<int>(j),
                                          patches[i].rect, dst, crops[j].scale_x,
                                          crops[j].scale_y});
      break;
    }
  }

  std::vector<EmptyRectSet> blanks(sub_frames.size(), EmptyRectSet(d, d));
  for (size_t j = 0; j < sub_frames.size(); ++j) {
    for (const Patch& p : patches) {
      if (!contains(rects[j], p.rect)) continue;
      RectF f = forward_map_f(crops[j], to_rectf(p.rect));
      int x0 = std::clamp(static_cast<int>(std::floor(f.x)), 0, d);
      int y0 = std::clamp(static_cast<int>(std::floor(f.y)), 0, d);
      int x1 = std::clamp(static_cast<int>(std::ceil(f.x + f.w)), 0, d);
      int y1 = std::clamp(static_cast<int>(std::ceil(f.y + f.h)), 0, d);
      if (x1 > x0 && y1 > y0) blanks[j].insert(Rect{x0, y0, x1 - x0, y1 - y0});
    }
  }

  std::vector<size_t> order;
  for (size_t i = 0; i < patches.size(); ++i)
    if (!covered[i]) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    double sa = patches[a].scaled_area(), sb = patches[b].scaled_area();
    if (sa != sb) return sa > sb;
    const Rect &ra = patches[a].rect, &rb = patches[b].rect;
    if (ra.y != rb.y) return ra.y < rb.y;
    if (ra.x != rb.x) return ra.x < rb.x;
    if (ra.w != rb.w) return ra.w < rb.w;
    if (ra.h != rb.h) return ra.h < rb.h;
    return patches[a].id < patches[b].id;
  });

  for (size_t idx : order) {
    const Patch& p = patches[idx];
    int fw = std::max(1, static_cast<int>(std::ceil(p.rect.w * p.beta - 1e-9)));
    int fh = std::max(1, static_cast<int>(std::ceil(p.rect.h * p.beta - 1e-9)));
    int best_j = -1;
    Rect best_blank{};
    for (size_t j = 0; j < sub_frames.size(); ++j) {
      for (const Rect& blank : blanks[j].largest(static_cast<size_t>(n_r))) {
        if (blank.w < fw || blank.h < fh) continue;
        bool better = best_j < 0 || blank.area() < best_blank.area() ||
                      (blank.area() == best_blank.area() &&
                       (static_cast<int>(j) < best_j ||
                        (static_cast<int>(j) == best_j &&
                         (blank.y < best_blank.y ||
                          (blank.y == best_blank.y && blank.x < best_blank.x)))));
        if (better) {
          best_j = static_cast<int>(j);
          best_blank = blank;
        }
      }
    }
    if (best_j < 0) return VerificationFailure{p.id};
    Rect dst_i{best_blank.x, best_blank.y, fw, fh};
    plan.placements.push_back(Placement{
        p.id, PlaceMode::Relocated, best_j, p.rect,
        RectF{static_cast<double>(dst_i.x), static_cast<double>(dst_i.y),
              static_cast<double>(dst_i.w), static_cast<double>(dst_i.h)},
        static_cast<double>(fw) / p.rect.w, static_cast<double>(fh) / p.rect.h});
    blanks[static_cast<size_t>(best_j)].insert(dst_i);
  }
  return plan;
}

/// Deterministic tiling plan: one sub-frame per tile that touches a patch,
/// tiled per vertical band at that band's scale. Patches the tiling still
/// cannot place get a dedicated sub-frame centered on them, which always
/// contains them (input validation caps scaled patch sides at detector_size).
inline CompositionPlan fallback_plan(const std::vector<Patch>& patches,
                                     const ScalingProfile& profile, FrameSize frame,
                                     int detector_size, int n_r) {
  std::vector<SubFrame> subs;
  for (const Band& band : profile.bands) {
    int side = std::max(1, static_cast<int>(round_half_up(detector_size / band.beta)));
    for (int y0 = band.y_min; y0 < band.y_max; y0 += side)
      for (int x0 = 0; x0 < frame.w; x0 += side) {
        double cy = y0 + side / 2.0;
        SubFrame t{x0 + side / 2.0, cy, beta_for(profile, cy), detector_size};
        Rect r = subframe_rect(t, frame);
        for (const Patch& p : patches)
          if (intersects(r, p.rect)) {
            subs.push_back(t);
            break;
          }
      }
  }
  for (size_t round = 0; round <= patches.size(); ++round) {
    auto res = verify_and_relocate(subs, patches, frame, detector_size, n_r);
    if (std::holds_alternative<CompositionPlan>(res)) return std::get<CompositionPlan>(res);
    int fail_id = std::get<VerificationFailure>(res).patch_id;
    const Patch* p = nullptr;
    for (const Patch& q : patches)
      if (q.id == fail_id) p = &q;
    if (!p) throw Error("verification failed for unknown patch");
    subs.push_back(SubFrame{p->rect.x + p->rect.w / 2.0, p->rect.y + p->rect.h / 2.0, p->beta,
                            detector_size});
  }
  throw Error("fallback tiling failed to converge");
}

/// Drops sub-frames that host nothing, then greedily tries removing one
/// sub-frame at a time (fewest placements first), keeping any reduction that
/// still verifies. Runs to a fixpoint.
inline CompositionPlan reduce_plan(CompositionPlan plan, const std::vector<Patch>& patches,
                                   FrameSize frame, int detector_size, int n_r,
                                   int* eliminated = nullptr) {
  for (;;) {
    size_t n = plan.sub_frames.size();
    if (n <= 1) break;
    std::vector<int> hosted(n, 0);
    for (const Placement& pl : plan.placements) hosted[static_cast<size_t>(pl.host)]++;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (hosted[a] != hosted[b]) return hosted[a] < hosted[b];
      return a < b;
    });

    bool reduced = false;
    for (size_t drop : order) {
      std::vector<SubFrame> trial;
      trial.reserve(n - 1);
      for (size_t j = 0; j < n; ++j)
        if (j != drop) trial.push_back(plan.sub_frames[j]);
      auto res = verify_and_relocate(trial, patches, frame, detector_size, n_r);
      if (std::holds_alternative<CompositionPlan>(res)) {
        plan = std::get<CompositionPlan>(std::move(res));
        if (eliminated) ++*eliminated;
        reduced = true;
        break;
      }
    }
    if (!reduced) break;
  }
  return plan;
}

/// Full solve: greedy bounds, seeded GA with local refinement and patience
/// termination, verification with bound-bump restarts, tiling fallback, and
/// a final reduction pass.
inline CompositionPlan compose(const std::vector<Patch>& patches, const ScalingProfile& profile,
                               const ObjectiveConfig& obj, const GaConfig& cfg, int detector_size,
                               FrameSize frame, ComposeStats* stats = nullptr) {
  if (frame.w <= 0 || frame.h <= 0 || detector_size <= 0) throw Error("bad frame geometry");
  for (const Patch& p : patches) {
    if (!p.rect.valid()) throw Error("invalid patch rectangle");
    if (!contains(Rect{0, 0, frame.w, frame.h}, p.rect)) throw Error("patch outside frame");
    if (p.beta <= 0) throw Error("non-positive patch beta");
    if (p.rect.w * p.beta > detector_size + 1e-9 || p.rect.h * p.beta > detector_size + 1e-9)
      throw InfeasibleError("patch exceeds detector capacity");
  }
  ComposeStats local_stats;
  ComposeStats& st = stats ? *stats : local_stats;
  st = ComposeStats{};
  if (patches.empty()) {
    CompositionPlan plan;
    plan.frame_size = frame;
    plan.detector_size = detector_size;
    return plan;
  }

  auto [bounds, seed] = greedy_bounds(patches, profile, detector_size, frame);
  st.initial_bounds = bounds;
  Bounds b = bounds;
  int n_p = static_cast<int>(patches.size());
  Rng rng(cfg.rng_seed);
  std::optional<CompositionPlan> plan;

  for (int attempt = 0; attempt <= cfg.max_verification_retries; ++attempt) {
    auto pop = init_population(b, patches, cfg, frame, profile, detector_size, obj, seed, rng);
    st.best_score_history.emplace_back();
    auto& history = st.best_score_history.back();

    Candidate best;
    best.score = -std::numeric_limits<double>::infinity();
    int stall = 0;
    for (int gen = 0; gen < cfg.max_generations; ++gen) {
      pop = evolve_step(pop, patches, cfg, b, frame, profile, detector_size, obj, rng);

      size_t top = std::max<size_t>(
          1, static_cast<size_t>(std::ceil(cfg.local_search_top_fraction *
                                           static_cast<double>(pop.size()))));
      std::vector<size_t> rank(pop.size());
      std::iota(rank.begin(), rank.end(), size_t{0});
      std::partial_sort(rank.begin(), rank.begin() + static_cast<long>(std::min(top, rank.size())),
                        rank.end(), [&](size_t a, size_t c) {
                          if (pop[a].score != pop[c].score) return pop[a].score > pop[c].score;
                          return a < c;
                        });
      for (size_t k = 0; k < std::min(top, pop.size()); ++k)
        pop[rank[k]] = local_search(std::move(pop[rank[k]]), patches, cfg, frame, profile, obj);

      size_t gi = 0;
      for (size_t k = 1; k < pop.size(); ++k)
        if (pop[k].score > pop[gi].score) gi = k;
      if (pop[gi].score > best.score) {
        best = pop[gi];
        stall = 0;
      } else {
        ++stall;
      }
      history.push_back(best.score);
      if (stall >= cfg.patience) break;
    }

    auto res = verify_and_relocate(best.sub_frames, patches, frame, detector_size, cfg.n_r);
    if (std::holds_alternative<CompositionPlan>(res)) {
      plan = std::get<CompositionPlan>(std::move(res));
      break;
    }
    st.retries = attempt + 1;
    b.l_min = std::min(b.l_min + 1, n_p);
    b.l_max = std::min(std::max(b.l_max + 1, b.l_min), n_p);
  }

  if (!plan) {
    plan = fallback_plan(patches, profile, frame, detector_size, cfg.n_r);
    st.fallback_used = true;
  }
  st.final_bounds = b;
  *plan = reduce_plan(std::move(*plan), patches, frame, detector_size, cfg.n_r, &st.eliminated);
  return *plan;
}

}  // namespace poic
