// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Run directly or through ctest; takes well under a minute on one core.
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "poic/poic.hpp"

#ifndef POIC_CLI_PATH
#error "POIC_CLI_PATH must point at the command line binary"
#endif

using namespace poic;
using test_util::check_plan;
using test_util::make_patch;
using test_util::random_instance;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

const FrameSize kHd{1280, 720};

ScalingProfile banded_profile(int n_bands, int frame_height) {
  return make_profile(700.0, 100.0, 120.0, 30.0, 1.0 / 120.0, n_bands, frame_height);
}

const ScalingProfile& profile_for(int i, int frame_height) {
  static const ScalingProfile flat = uniform_profile(kHd.h, 1.0);
  static const ScalingProfile two = banded_profile(2, kHd.h);
  static const ScalingProfile three = banded_profile(3, kHd.h);
  (void)frame_height;
  switch (i % 3) {
    case 0: return flat;
    case 1: return two;
    default: return three;
  }
}

std::vector<Patch> hd_instance(std::uint64_t seed, int max_patches, int min_side, int max_side,
                               const ScalingProfile& profile) {
  Rng rng(seed);
  int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_patches)));
  return random_instance(rng, kHd, profile, n, min_side, max_side, 300);
}

// 1. every seeded instance yields a plan placing every patch, under a time cap
bool feasibility(std::string& detail) {
  auto t0 = Clock::now();
  ObjectiveConfig obj;
  int valid = 0;
  std::string first_error;
  for (int i = 0; i < 1000; ++i) {
    const ScalingProfile& prof = profile_for(i, kHd.h);
    std::vector<Patch> patches = hd_instance(1000 + i, 40, 8, 120, prof);
    GaConfig cfg;
    cfg.rng_seed = 1000 + i;
    CompositionPlan plan = compose(patches, prof, obj, cfg, 300, kHd);
    std::string err = check_plan(plan, patches);
    if (err.empty())
      ++valid;
    else if (first_error.empty())
      first_error = fmt("instance %d: %s", i, err.c_str());
  }
  double secs = seconds_since(t0);
  detail = fmt("%d/1000 valid plans in %.1f s", valid, secs);
  if (!first_error.empty()) detail += "; first failure: " + first_error;
  return valid == 1000 && secs < 60.0;
}

// 2. grid-restricted search matches the exhaustive minimum almost always and
//    never beats it
bool oracle_optimality(std::string& detail) {
  FrameSize frame{64, 64};
  ScalingProfile flat = uniform_profile(frame.h, 1.0);
  ObjectiveConfig obj;
  int equal = 0, below = 0;
  for (int i = 0; i < 200; ++i) {
    Rng rng(7000 + i);
    int n = 1 + static_cast<int>(rng.below(5));
    std::vector<Patch> patches = random_instance(rng, frame, flat, n, 4, 14, 32);
    GaConfig cfg;
    cfg.grid_stride = 8;
    cfg.local_search_radius = 8;
    cfg.max_verification_retries = 6;
    cfg.rng_seed = 7000 + i;
    CompositionPlan plan = compose(patches, flat, obj, cfg, 32, frame);
    OracleResult oracle = brute_force_min_subframes(patches, 32, frame, 8, cfg.n_r);
    int got = static_cast<int>(plan.sub_frames.size());
    if (got == oracle.n_min) ++equal;
    if (got < oracle.n_min) ++below;
  }
  detail = fmt("%d/200 equal to the exhaustive minimum, %d below", equal, below);
  return equal >= 190 && below == 0;
}

// 3. synthetic ground truth through compose, render, oracle detector and
//    map-back lands within one pixel per coordinate; recall is exactly 1
bool round_trip(std::string& detail) {
  ScalingProfile flat = uniform_profile(kHd.h, 1.0);
  ObjectiveConfig obj;
  std::vector<FrameDetection> all_preds;
  std::vector<Annotation> all_gts;
  const char* labels[] = {"car", "bus", "person"};
  int worst_dev = 0;
  int boxes_checked = 0;
  for (int f = 0; f < 100; ++f) {
    std::string frame_id = fmt("frame_%03d", f);
    Rng rng(3000 + f);
    int n = 1 + static_cast<int>(rng.below(12));
    std::vector<Patch> patches = random_instance(rng, kHd, flat, n, 16, 100, 300);
    std::vector<Annotation> gts;
    for (const Patch& p : patches)
      gts.push_back(Annotation{frame_id, labels[p.id % 3], p.rect});

    GaConfig cfg;
    cfg.rng_seed = 3000 + f;
    CompositionPlan plan = compose(patches, flat, obj, cfg, 300, kHd);

    Image frame(kHd.w, kHd.h, 1, 90);
    std::vector<Image> rasters = render_subframes(frame, plan);
    OracleDetector det(gts);
    std::vector<std::vector<DetectionBox>> per_sub(plan.sub_frames.size());
    for (size_t j = 0; j < plan.sub_frames.size(); ++j) {
      RasterContext ctx{frame_id, static_cast<int>(j), {}};
      for (const Placement& pl : plan.placements)
        if (pl.host == static_cast<int>(j)) ctx.placements.push_back(pl);
      per_sub[j] = det.detect(rasters[j], ctx);
    }
    std::vector<DetectionBox> mapped = map_back(plan, per_sub);
    for (const DetectionBox& b : mapped)
      all_preds.push_back(FrameDetection{frame_id, b});

    for (const Annotation& gt : gts) {
      bool hit = false;
      for (const DetectionBox& b : mapped) {
        if (b.label != gt.label) continue;
        Rect r = round_rect(b.rect);
        int dev = std::max(std::max(std::abs(r.x - gt.rect.x), std::abs(r.y - gt.rect.y)),
                           std::max(std::abs(r.w - gt.rect.w), std::abs(r.h - gt.rect.h)));
        if (dev <= 1) {
          hit = true;
          if (dev > worst_dev) worst_dev = dev;
          break;
        }
      }
      if (!hit) {
        detail = fmt("frame %d: ground truth (%d,%d,%d,%d) has no mapped box within 1 px", f,
                     gt.rect.x, gt.rect.y, gt.rect.w, gt.rect.h);
        return false;
      }
      ++boxes_checked;
    }
    for (const Annotation& gt : gts) all_gts.push_back(gt);
  }
  EvalReport report = evaluate_frames(all_preds, all_gts, 0.5);
  detail = fmt("%d boxes within 1 px (worst deviation %d px), recall %.6f", boxes_checked,
               worst_dev, report.recall);
  return report.recall == 1.0;
}

// 4. sparse scenes need far fewer sub-frames than the 15-tile grid and never
//    more
bool economy(std::string& detail) {
  ScalingProfile flat = uniform_profile(kHd.h, 1.0);
  ObjectiveConfig obj;
  const int tile_count = div_tile_count(kHd, 300);
  const long long budget = static_cast<long long>(kHd.w) * kHd.h / 10;
  int under = 0, over = 0, worst = 0;
  for (int i = 0; i < 500; ++i) {
    Rng rng(4000 + i);
    int want = 10 + static_cast<int>(rng.below(31));
    std::vector<Patch> patches;
    long long area = 0;
    for (int k = 0; k < want; ++k) {
      int w = static_cast<int>(rng.range(8, 60));
      int h = static_cast<int>(rng.range(8, 60));
      if (area + static_cast<long long>(w) * h > budget) break;
      int x = static_cast<int>(rng.range(0, kHd.w - w));
      int y = static_cast<int>(rng.range(0, kHd.h - h));
      patches.push_back(Patch{k, Rect{x, y, w, h}, 1.0});
      area += static_cast<long long>(w) * h;
    }
    GaConfig cfg;
    cfg.rng_seed = 4000 + i;
    CompositionPlan plan = compose(patches, flat, obj, cfg, 300, kHd);
    int got = static_cast<int>(plan.sub_frames.size());
    if (got < tile_count) ++under;
    if (got > tile_count) ++over;
    if (got > worst) worst = got;
  }
  detail = fmt("%d/500 below the %d-tile grid, worst plan %d sub-frames, %d above", under,
               tile_count, worst, over);
  return under >= 450 && over == 0;
}

// 5. composition and extraction latency on one core
bool latency(std::string& detail) {
  ScalingProfile flat = uniform_profile(kHd.h, 1.0);
  ObjectiveConfig obj;
  double compose_total = 0;
  const int n_compose = 100;
  for (int i = 0; i < n_compose; ++i) {
    std::vector<Patch> patches = hd_instance(5000 + i, 30, 8, 120, flat);
    GaConfig cfg;
    cfg.rng_seed = 5000 + i;
    auto t0 = Clock::now();
    compose(patches, flat, obj, cfg, 300, kHd);
    compose_total += seconds_since(t0) * 1000.0;
  }
  double compose_mean = compose_total / n_compose;

  double extract_total = 0;
  const int n_extract = 30;
  for (int i = 0; i < n_extract; ++i) {
    Rng rng(6000 + i);
    Image prev(kHd.w, kHd.h, 1, 10);
    Image cur(kHd.w, kHd.h, 1, 10);
    int blobs = 6 + static_cast<int>(rng.below(8));
    for (int k = 0; k < blobs; ++k) {
      int w = static_cast<int>(rng.range(20, 80));
      int h = static_cast<int>(rng.range(20, 60));
      int x = static_cast<int>(rng.range(0, kHd.w - w));
      int y = static_cast<int>(rng.range(0, kHd.h - h));
      for (int yy = y; yy < y + h; ++yy)
        for (int xx = x; xx < x + w; ++xx) cur.at(xx, yy) = 200;
    }
    auto t0 = Clock::now();
    BinaryMask diff = frame_difference(prev, cur, 25);
    BinaryMask clean = morphological_filter(diff, 1, 1);
    std::vector<Rect> boxes = connected_components(clean, 16);
    make_patches(boxes, flat, kHd, 3);
    extract_total += seconds_since(t0) * 1000.0;
  }
  double extract_mean = extract_total / n_extract;

  detail = fmt("compose mean %.2f ms (cap 10), extraction mean %.2f ms (cap 20)", compose_mean,
               extract_mean);
  return compose_mean <= 10.0 && extract_mean <= 20.0;
}

bool close_to(double got, double want, double rel) {
  return std::abs(got - want) <= rel * std::max(std::abs(want), 1e-300);
}

// 6. objective hand values and the border-vs-center ordering
bool objective_values(std::string& detail) {
  const FrameSize frame300{300, 300};
  const SubFrame full{150, 150, 1.0, 300};
  ObjectiveConfig cfg;
  int bad = 0;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) {
      ++bad;
      if (detail.empty()) detail = std::string("first mismatch: ") + what;
    }
  };

  {
    std::vector<Patch> half = {make_patch(0, 10, 10, 10, 10), make_patch(1, 400, 10, 10, 10)};
    FrameSize frame{600, 300};
    CoverageMatrix cov = coverage(half, {full}, frame);
    expect(close_to(psi(half, cov, cfg), std::log(1.0 + std::exp(1.0)), 1e-9),
           "half coverage location term");
    std::vector<Patch> none = {make_patch(0, 400, 10, 10, 10)};
    CoverageMatrix cov0 = coverage(none, {full}, frame);
    expect(psi(none, cov0, cfg) == 1.0, "zero coverage location term");
    std::vector<Patch> all = {make_patch(0, 10, 10, 10, 10)};
    CoverageMatrix cov1 = coverage(all, {full}, frame);
    expect(close_to(psi(all, cov1, cfg), std::log(1e9 + std::exp(1.0)), 1e-9),
           "full coverage location term");
  }
  {
    std::vector<Patch> offset = {make_patch(0, 175, 175, 10, 10)};
    CoverageMatrix cov = coverage(offset, {full}, frame300);
    expect(close_to(phi(offset, full, frame300, cov, 0), 300.0, 1e-9),
           "distribution term hand value");
    std::vector<Patch> centered = {make_patch(0, 145, 145, 10, 10)};
    CoverageMatrix covc = coverage(centered, {full}, frame300);
    expect(phi(centered, full, frame300, covc, 0) == 0.0, "centered distribution term");
  }
  expect(close_to(h_count(1, cfg), 1.5, 1e-9), "count term at one sub-frame");
  expect(close_to(h_count(3, cfg), 3.5, 1e-9), "count term at three sub-frames");
  {
    FrameSize tiny_frame{10, 10};
    SubFrame tiny{5, 5, 1.0, 10};
    std::vector<Patch> exact = {make_patch(0, 0, 0, 10, 10)};
    expect(g_penalty(exact, {tiny}, tiny_frame) == 0, "capacity boundary inclusive");
    std::vector<Patch> over = {make_patch(0, 0, 0, 10, 10), make_patch(1, 0, 0, 1, 1)};
    expect(g_penalty(over, {tiny}, tiny_frame) == 1, "capacity overflow counted");
  }
  {
    std::vector<Patch> one = {make_patch(0, 145, 145, 10, 10)};
    expect(close_to(score(one, {full}, frame300, cfg), std::log(1e9 + std::exp(1.0)) / 1.5, 1e-9),
           "combined score hand value");
    std::vector<Patch> near_border = {make_patch(0, 10, 10, 10, 10)};
    expect(score(near_border, {full}, frame300, cfg) > score(one, {full}, frame300, cfg),
           "border-near scores higher than centered");
  }
  if (bad == 0) detail = "9 hand values and the border ordering hold at 1e-9";
  return bad == 0;
}

// 7. perspective scale law hand values and band affinity
bool scaling_values(std::string& detail) {
  ScalingProfile p = banded_profile(1, 720);
  int bad = 0;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) {
      ++bad;
      if (detail.empty()) detail = std::string("first mismatch: ") + what;
    }
  };
  expect(std::abs(beta_continuous(p, 400.0) - 0.625) <= 1e-12, "scale at the midline");
  expect(std::abs(beta_continuous(p, 700.0) - 1.0) <= 1e-12, "scale at the near line");
  expect(std::abs(beta_continuous(p, 100.0) - 0.25) <= 1e-12, "scale at the far line");
  // affine law: equally spaced rows have equally spaced scales
  expect(std::abs((beta_continuous(p, 200.0) + beta_continuous(p, 600.0)) -
                  2.0 * beta_continuous(p, 400.0)) <= 1e-9,
         "affinity of the scale law");
  ScalingProfile three = banded_profile(3, 720);
  expect(three.bands.size() == 3, "three bands requested");
  for (size_t b = 0; b < three.bands.size(); ++b) {
    double mid = (three.bands[b].y_min + three.bands[b].y_max) / 2.0;
    if (!(std::abs(three.bands[b].beta - beta_continuous(three, mid)) <= 1e-9)) {
      ++bad;
      if (detail.empty()) detail = fmt("band %zu does not sample its midpoint", b);
    }
  }
  if (bad == 0) detail = "hand values at 1e-12, band midpoints and affinity at 1e-9";
  return bad == 0;
}

// 8. identical seeds give byte-identical plans, in process and through the CLI
bool determinism(std::string& detail) {
  ObjectiveConfig obj;
  for (int i = 0; i < 1000; ++i) {
    const ScalingProfile& prof = profile_for(i, kHd.h);
    std::vector<Patch> patches = hd_instance(1000 + i, 40, 8, 120, prof);
    GaConfig cfg;
    cfg.rng_seed = 1000 + i;
    std::string a = write_plan_json(compose(patches, prof, obj, cfg, 300, kHd));
    std::string b = write_plan_json(compose(patches, prof, obj, cfg, 300, kHd));
    if (a != b) {
      detail = fmt("instance %d serialized differently across two runs", i);
      return false;
    }
  }

  std::string tag = std::to_string(getpid());
  std::string csv = "/tmp/poic_accept_" + tag + ".csv";
  std::string out_a = "/tmp/poic_accept_" + tag + "_a.json";
  std::string out_b = "/tmp/poic_accept_" + tag + "_b.json";
  for (int i = 0; i < 5; ++i) {
    std::vector<Patch> patches = hd_instance(8000 + i, 20, 8, 120, profile_for(0, kHd.h));
    {
      std::ofstream out(csv);
      write_patches_csv(patches, out);
    }
    std::string base = std::string(POIC_CLI_PATH) + " compose --patches " + csv +
                       " --width 1280 --height 720 --seed " + std::to_string(100 + i);
    if (std::system((base + " --out " + out_a + " >/dev/null 2>&1").c_str()) != 0 ||
        std::system((base + " --out " + out_b + " >/dev/null 2>&1").c_str()) != 0) {
      detail = fmt("cli run %d exited nonzero", i);
      return false;
    }
    std::ifstream fa(out_a), fb(out_b);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str().empty() || sa.str() != sb.str()) {
      detail = fmt("cli run %d produced differing plan files", i);
      return false;
    }
  }
  std::remove(csv.c_str());
  std::remove(out_a.c_str());
  std::remove(out_b.c_str());
  detail = "1000 in-process recomposes and 5 cli double-runs byte-identical";
  return true;
}

// 9. search bookkeeping: monotone best score, bounded generations and
//    retries, fallback still feasible on an adversarial layout
bool search_sanity(std::string& detail) {
  ObjectiveConfig obj;
  int runs = 0;
  for (int i = 0; i < 200; ++i) {
    const ScalingProfile& prof = profile_for(i, kHd.h);
    std::vector<Patch> patches = hd_instance(9000 + i, 40, 8, 120, prof);
    GaConfig cfg;
    cfg.rng_seed = 9000 + i;
    ComposeStats stats;
    compose(patches, prof, obj, cfg, 300, kHd, &stats);
    if (stats.best_score_history.empty()) {
      detail = fmt("instance %d logged no generations", i);
      return false;
    }
    if (static_cast<int>(stats.best_score_history.size()) > cfg.max_verification_retries + 1) {
      detail = fmt("instance %d ran more attempts than the retry cap", i);
      return false;
    }
    for (const std::vector<double>& attempt : stats.best_score_history) {
      if (static_cast<int>(attempt.size()) > cfg.max_generations) {
        detail = fmt("instance %d exceeded the generation cap", i);
        return false;
      }
      for (size_t g = 1; g < attempt.size(); ++g)
        if (attempt[g] < attempt[g - 1]) {
          detail = fmt("instance %d best score decreased at generation %zu", i, g);
          return false;
        }
    }
    ++runs;
  }

  // four corner patches in a huge frame: no window arrangement within the
  // bumped bounds covers all four, so the tiling fallback must fire
  std::vector<Patch> corners = {make_patch(0, 20, 20, 160, 160),
                                make_patch(1, 1820, 20, 160, 160),
                                make_patch(2, 20, 1820, 160, 160),
                                make_patch(3, 1820, 1820, 160, 160)};
  FrameSize big{2000, 2000};
  ScalingProfile flat = uniform_profile(big.h, 1.0);
  GaConfig cfg;
  cfg.rng_seed = 17;
  cfg.max_verification_retries = 0;
  ComposeStats stats;
  CompositionPlan plan = compose(corners, flat, obj, cfg, 300, big, &stats);
  std::string err = check_plan(plan, corners);
  if (!stats.fallback_used) {
    detail = "adversarial layout did not reach the fallback";
    return false;
  }
  if (!err.empty()) {
    detail = "fallback plan invalid: " + err;
    return false;
  }
  detail = fmt("%d monotone bounded runs; fallback fired and stayed feasible", runs);
  return true;
}

struct Criterion {
  const char* name;
  bool (*run)(std::string&);
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"feasibility", feasibility},
      {"oracle optimality", oracle_optimality},
      {"round-trip exactness", round_trip},
      {"economy vs tiling", economy},
      {"latency", latency},
      {"objective hand values", objective_values},
      {"scaling hand values", scaling_values},
      {"determinism", determinism},
      {"search sanity", search_sanity},
  };
  int failures = 0;
  for (size_t i = 0; i < sizeof(criteria) / sizeof(criteria[0]); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("%s  %zu %-22s %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].name,
                detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
