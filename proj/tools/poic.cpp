// Patch-of-interest composition tool: extracts foreground patches from
// high-resolution frames, packs them into a minimal set of detector-sized
// sub-frames, runs a detector, and maps results back to frame coordinates.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "poic/poic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitDetectorFailure = 3;
constexpr int kExitInfeasible = 4;

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct StageTimes {
  std::vector<double> extract, compose, render, detect, map_back;
};

json stage_stats(std::vector<double> samples) {
  json j;
  if (samples.empty()) {
    j["mean_ms"] = 0.0;
    j["p95_ms"] = 0.0;
    j["samples"] = 0;
    return j;
  }
  double sum = 0;
  for (double s : samples) sum += s;
  std::sort(samples.begin(), samples.end());
  size_t p95 = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(samples.size())));
  p95 = std::min(std::max<size_t>(p95, 1), samples.size()) - 1;
  j["mean_ms"] = sum / static_cast<double>(samples.size());
  j["p95_ms"] = samples[p95];
  j["samples"] = samples.size();
  return j;
}

poic::Config load_config_opt(const std::string& path) {
  if (path.empty()) return poic::Config{};
  return poic::load_config(path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw poic::Error("cannot write " + path);
  out << text;
}

std::vector<fs::path> list_frames(const std::string& dir, const std::string& mask_suffix) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw poic::Error("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    std::string ext = entry.path().extension().string();
    if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm") continue;
    if (name.size() >= mask_suffix.size() &&
        name.compare(name.size() - mask_suffix.size(), mask_suffix.size(), mask_suffix) == 0)
      continue;
    out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Runs fn(i) for i in [0, n) on `jobs` threads; first exception wins.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> workers;
  size_t count = std::min<size_t>(static_cast<size_t>(jobs), n);
  workers.reserve(count);
  for (size_t t = 0; t < count; ++t)
    workers.emplace_back([&] {
      for (size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  for (auto& w : workers) w.join();
  if (err) std::rethrow_exception(err);
}

std::vector<poic::Patch> extract_for_frame(const poic::Image& frame, const fs::path& frame_path,
                                           const std::optional<poic::Image>& prev,
                                           const poic::Config& cfg,
                                           const poic::ScalingProfile& profile) {
  fs::path mask_path = frame_path.parent_path() /
                       (frame_path.stem().string() + cfg.mask_suffix);
  poic::BinaryMask mask;
  if (fs::exists(mask_path)) {
    mask = poic::mask_from_image(poic::read_pnm(mask_path.string()));
  } else if (prev) {
    mask = poic::frame_difference(poic::to_gray(frame), poic::to_gray(*prev),
                                  cfg.diff_threshold);
  } else {
    return {};
  }
  mask = poic::morphological_filter(mask, cfg.open_iterations, cfg.close_iterations);
  auto boxes = poic::connected_components(mask, cfg.min_component_area);
  return poic::make_patches(boxes, profile, poic::FrameSize{frame.w, frame.h},
                            cfg.patch_margin);
}

json report_json(const poic::EvalReport& r) {
  json j;
  j["one_minus_precision"] = r.one_minus_precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["frames_per_second"] = r.frames_per_second;
  j["true_positives"] = r.true_positives;
  j["false_positives"] = r.false_positives;
  j["false_negatives"] = r.false_negatives;
  j["pr_curve"] = json::array();
  for (const auto& [omp, rec] : r.pr_curve) j["pr_curve"].push_back({omp, rec});
  return j;
}

int cmd_extract(const std::string& frame_path, const std::string& prev_path,
                const std::string& mask_path, const std::string& config_path,
                const std::string& out_path) {
  poic::Config cfg = load_config_opt(config_path);
  poic::Image frame = poic::read_pnm(frame_path);
  poic::ScalingProfile profile = poic::profile_from_config(cfg, frame.h);
  poic::BinaryMask mask;
  if (!mask_path.empty()) {
    mask = poic::mask_from_image(poic::read_pnm(mask_path));
  } else if (!prev_path.empty()) {
    mask = poic::frame_difference(poic::to_gray(frame), poic::to_gray(poic::read_pnm(prev_path)),
                                  cfg.diff_threshold);
  } else {
    throw poic::Error("extract needs --mask or --prev");
  }
  mask = poic::morphological_filter(mask, cfg.open_iterations, cfg.close_iterations);
  auto boxes = poic::connected_components(mask, cfg.min_component_area);
  auto patches = poic::make_patches(boxes, profile, poic::FrameSize{frame.w, frame.h},
                                    cfg.patch_margin);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw poic::Error("cannot write " + out_path);
  poic::write_patches_csv(patches, out);
  std::cerr << "extracted " << patches.size() << " patches\n";
  return 0;
}

int cmd_compose(const std::string& patches_path, const std::string& config_path,
                std::optional<std::uint64_t> seed, int width, int height,
                const std::string& out_path, const std::string& svg_path) {
  poic::Config cfg = load_config_opt(config_path);
  if (seed) cfg.ga.rng_seed = *seed;
  std::ifstream in(patches_path);
  if (!in) throw poic::Error("cannot open patches: " + patches_path);
  auto patches = poic::read_patches_csv(in);
  poic::FrameSize frame{width, height};
  poic::ScalingProfile profile = poic::profile_from_config(cfg, height);
  poic::ComposeStats stats;
  poic::CompositionPlan plan =
      poic::compose(patches, profile, cfg.objective, cfg.ga, cfg.detector_size, frame, &stats);
  write_text(out_path, poic::write_plan_json(plan));
  if (!svg_path.empty()) write_text(svg_path, poic::write_plan_svg(plan, patches));
  std::cerr << "plan: " << plan.sub_frames.size() << " sub-frames, " << plan.placements.size()
            << " placements" << (stats.fallback_used ? " (fallback)" : "") << "\n";
  return 0;
}

int cmd_render(const std::string& frame_path, const std::string& plan_path,
               const std::string& outdir, const std::string& config_path) {
  poic::Config cfg = load_config_opt(config_path);
  poic::Image frame = poic::read_pnm(frame_path);
  poic::CompositionPlan plan = poic::read_plan_file(plan_path);
  auto rasters = poic::render_subframes(frame, plan, cfg.render_bilinear != 0);
  fs::create_directories(outdir);
  for (size_t j = 0; j < rasters.size(); ++j) {
    char name[32];
    std::snprintf(name, sizeof(name), "sub_%03zu.%s", j,
                  rasters[j].channels == 1 ? "pgm" : "ppm");
    poic::write_pnm(rasters[j], (fs::path(outdir) / name).string());
  }
  std::cerr << "wrote " << rasters.size() << " sub-frame rasters to " << outdir << "\n";
  return 0;
}

struct FrameOutcome {
  std::string frame_id;
  poic::FrameSize size{0, 0};
  size_t patches = 0;
  size_t sub_frames = 0;
  std::vector<poic::FrameDetection> detections;
  int dropped = 0;
  bool detector_failed = false;
  bool attempted_detection = false;
};

int cmd_run(const std::string& frames_dir, const std::string& config_path,
            const std::string& detector_cmd, const std::string& annotations_path,
            const std::string& report_path, const std::string& pred_path,
            std::optional<std::uint64_t> seed, int jobs) {
  poic::Config cfg = load_config_opt(config_path);
  if (seed) cfg.ga.rng_seed = *seed;
  auto frame_paths = list_frames(frames_dir, cfg.mask_suffix);
  if (frame_paths.empty()) throw poic::Error("no frames found in " + frames_dir);
  std::vector<poic::Annotation> annotations;
  if (!annotations_path.empty()) annotations = poic::read_annotations(annotations_path);

  std::unique_ptr<poic::DetectorAdapter> detector;
  if (detector_cmd == "oracle")
    detector = std::make_unique<poic::OracleDetector>(annotations);
  else
    detector = std::make_unique<poic::ExternalDetector>(detector_cmd, cfg.detector_timeout_s);

  std::vector<FrameOutcome> outcomes(frame_paths.size());
  std::mutex log_mu;
  double t0 = now_ms();
  parallel_for(frame_paths.size(), jobs, [&](size_t i) {
    const fs::path& path = frame_paths[i];
    FrameOutcome& res = outcomes[i];
    res.frame_id = path.stem().string();
    poic::Image frame = poic::read_pnm(path.string());
    res.size = poic::FrameSize{frame.w, frame.h};
    poic::ScalingProfile profile = poic::profile_from_config(cfg, frame.h);
    std::optional<poic::Image> prev;
    if (i > 0) prev = poic::read_pnm(frame_paths[i - 1].string());
    auto patches = extract_for_frame(frame, path, prev, cfg, profile);
    res.patches = patches.size();
    poic::CompositionPlan plan = poic::compose(patches, profile, cfg.objective, cfg.ga,
                                               cfg.detector_size,
                                               poic::FrameSize{frame.w, frame.h});
    res.sub_frames = plan.sub_frames.size();
    auto rasters = poic::render_subframes(frame, plan, cfg.render_bilinear != 0);
    std::vector<std::vector<poic::DetectionBox>> per_sub(rasters.size());
    res.attempted_detection = !rasters.empty();
    try {
      for (size_t j = 0; j < rasters.size(); ++j) {
        poic::RasterContext ctx;
        ctx.frame_id = res.frame_id;
        ctx.sub_frame = static_cast<int>(j);
        for (const poic::Placement& pl : plan.placements)
          if (pl.host == static_cast<int>(j)) ctx.placements.push_back(pl);
        per_sub[j] = detector->detect(rasters[j], ctx);
      }
    } catch (const poic::DetectorError& e) {
      std::lock_guard<std::mutex> lock(log_mu);
      std::cerr << "warning: skipping frame " << res.frame_id << ": " << e.what() << "\n";
      res.detector_failed = true;
      return;
    }
    auto boxes = poic::map_back(plan, per_sub, &res.dropped);
    boxes = poic::suppress_duplicates(std::move(boxes), cfg.duplicate_iou);
    for (poic::DetectionBox& b : boxes)
      res.detections.push_back(poic::FrameDetection{res.frame_id, std::move(b)});
  });
  double elapsed_ms = now_ms() - t0;

  std::vector<poic::FrameDetection> all;
  size_t failed = 0, attempted = 0, sub_total = 0;
  int dropped = 0;
  for (const FrameOutcome& res : outcomes) {
    if (res.attempted_detection) ++attempted;
    if (res.detector_failed) {
      ++failed;
      continue;
    }
    all.insert(all.end(), res.detections.begin(), res.detections.end());
    sub_total += res.sub_frames;
    dropped += res.dropped;
  }
  if (attempted > 0 && failed == attempted) throw poic::DetectorError("every frame failed");

  poic::EvalReport report = poic::evaluate_frames(all, annotations, cfg.iou_threshold);
  report.frames_per_second =
      elapsed_ms > 0 ? 1000.0 * static_cast<double>(frame_paths.size()) / elapsed_ms : 0.0;

  json j = report_json(report);
  j["frames"] = frame_paths.size();
  j["frames_skipped"] = failed;
  j["sub_frames_total"] = sub_total;
  j["div_tile_count"] = poic::div_tile_count(outcomes.front().size, cfg.detector_size);
  j["dropped_boxes"] = dropped;
  j["per_frame"] = json::array();
  for (const FrameOutcome& res : outcomes)
    j["per_frame"].push_back({{"frame_id", res.frame_id},
                              {"patches", res.patches},
                              {"sub_frames", res.sub_frames},
                              {"detections", res.detections.size()},
                              {"dropped", res.dropped},
                              {"skipped", res.detector_failed}});
  write_text(report_path, j.dump(2) + "\n");
  if (!pred_path.empty()) poic::write_detections(pred_path, all);
  std::cerr << "f1 " << report.f1 << ", recall " << report.recall << ", 1-precision "
            << report.one_minus_precision << ", " << report.frames_per_second << " fps\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, double iou,
             const std::string& report_path) {
  auto preds = poic::read_detections(pred_path);
  auto gt = poic::read_annotations(gt_path);
  poic::EvalReport report = poic::evaluate_frames(preds, gt, iou);
  json j = report_json(report);
  std::string text = j.dump(2) + "\n";
  if (!report_path.empty())
    write_text(report_path, text);
  else
    std::cout << text;
  return 0;
}

int cmd_bench(const std::string& frames_dir, const std::string& config_path, int repeat,
              std::optional<std::uint64_t> seed, int jobs) {
  poic::Config cfg = load_config_opt(config_path);
  if (seed) cfg.ga.rng_seed = *seed;
  auto frame_paths = list_frames(frames_dir, cfg.mask_suffix);
  if (frame_paths.empty()) throw poic::Error("no frames found in " + frames_dir);
  poic::OracleDetector detector({});

  StageTimes times;
  std::mutex times_mu;
  parallel_for(frame_paths.size(), jobs, [&](size_t i) {
    const fs::path& path = frame_paths[i];
    poic::Image frame = poic::read_pnm(path.string());
    poic::ScalingProfile profile = poic::profile_from_config(cfg, frame.h);
    std::optional<poic::Image> prev;
    if (i > 0) prev = poic::read_pnm(frame_paths[i - 1].string());
    StageTimes local;
    for (int rep = 0; rep < repeat; ++rep) {
      double t = now_ms();
      auto patches = extract_for_frame(frame, path, prev, cfg, profile);
      local.extract.push_back(now_ms() - t);

      t = now_ms();
      poic::CompositionPlan plan = poic::compose(patches, profile, cfg.objective, cfg.ga,
                                                 cfg.detector_size,
                                                 poic::FrameSize{frame.w, frame.h});
      local.compose.push_back(now_ms() - t);

      t = now_ms();
      auto rasters = poic::render_subframes(frame, plan, cfg.render_bilinear != 0);
      local.render.push_back(now_ms() - t);

      t = now_ms();
      std::vector<std::vector<poic::DetectionBox>> per_sub(rasters.size());
      for (size_t j = 0; j < rasters.size(); ++j) {
        poic::RasterContext ctx;
        ctx.frame_id = path.stem().string();
        ctx.sub_frame = static_cast<int>(j);
        per_sub[j] = detector.detect(rasters[j], ctx);
      }
      local.detect.push_back(now_ms() - t);

      t = now_ms();
      auto boxes = poic::map_back(plan, per_sub);
      poic::suppress_duplicates(std::move(boxes), cfg.duplicate_iou);
      local.map_back.push_back(now_ms() - t);
    }
    std::lock_guard<std::mutex> lock(times_mu);
    auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    append(times.extract, local.extract);
    append(times.compose, local.compose);
    append(times.render, local.render);
    append(times.detect, local.detect);
    append(times.map_back, local.map_back);
  });

  json j;
  j["frames"] = frame_paths.size();
  j["repeat"] = repeat;
  j["extraction"] = stage_stats(times.extract);
  j["composition"] = stage_stats(times.compose);
  j["render"] = stage_stats(times.render);
  j["detect"] = stage_stats(times.detect);
  j["map_back"] = stage_stats(times.map_back);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_oracle(const std::string& patches_path, const std::string& config_path, int width,
               int height) {
  poic::Config cfg = load_config_opt(config_path);
  std::ifstream in(patches_path);
  if (!in) throw poic::Error("cannot open patches: " + patches_path);
  auto patches = poic::read_patches_csv(in);
  poic::OracleResult res = poic::brute_force_min_subframes(
      patches, cfg.detector_size, poic::FrameSize{width, height}, cfg.ga.grid_stride, cfg.ga.n_r);
  json j;
  j["n_min"] = res.n_min;
  j["witness"] = json::parse(poic::write_plan_json(res.witness));
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patch-of-interest composition for detection on high-resolution frames"};
  app.require_subcommand(0, 1);
  bool print_default_config = false;
  app.add_flag("--print-default-config", print_default_config,
               "print the default configuration and exit");

  std::string frame_path, prev_path, mask_path, config_path, out_path, svg_path;
  std::string patches_path, plan_path, outdir, frames_dir, detector_cmd, annotations_path;
  std::string report_path, pred_path, gt_path;
  int width = 0, height = 0, repeat = 1;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  double iou = 0.5;
  std::optional<std::uint64_t> seed;
  std::uint64_t seed_value = 0;

  auto* extract = app.add_subcommand("extract", "foreground patches from a frame");
  extract->add_option("--frame", frame_path, "frame image (pgm/ppm)")->required();
  extract->add_option("--prev", prev_path, "previous frame for differencing");
  extract->add_option("--mask", mask_path, "binary foreground mask image");
  extract->add_option("--config", config_path, "config file");
  extract->add_option("--out", out_path, "output patches csv")->required();

  auto* compose = app.add_subcommand("compose", "pack patches into sub-frames");
  compose->add_option("--patches", patches_path, "patches csv")->required();
  compose->add_option("--config", config_path, "config file");
  auto* seed_opt = compose->add_option("--seed", seed_value, "rng seed (overrides config)");
  compose->add_option("--width", width, "frame width")->required();
  compose->add_option("--height", height, "frame height")->required();
  compose->add_option("--out", out_path, "output plan json")->required();
  compose->add_option("--svg", svg_path, "also write an svg layout sketch");

  auto* render = app.add_subcommand("render", "render a plan's sub-frame rasters");
  render->add_option("--frame", frame_path, "frame image")->required();
  render->add_option("--plan", plan_path, "plan json")->required();
  render->add_option("--outdir", outdir, "output directory")->required();
  render->add_option("--config", config_path, "config file");

  auto* run = app.add_subcommand("run", "extract, compose, detect and evaluate a frame set");
  run->add_option("--frames", frames_dir, "directory of frame images")->required();
  run->add_option("--config", config_path, "config file");
  run->add_option("--detector", detector_cmd, "detector command line, or 'oracle'")->required();
  run->add_option("--annotations", annotations_path, "ground truth csv");
  run->add_option("--report", report_path, "output report json")->required();
  run->add_option("--pred", pred_path, "also write detections csv");
  auto* run_seed = run->add_option("--seed", seed_value, "rng seed (overrides config)");
  run->add_option("--jobs", jobs, "worker threads");

  auto* eval = app.add_subcommand("eval", "score detections against ground truth");
  eval->add_option("--pred", pred_path, "detections csv")->required();
  eval->add_option("--gt", gt_path, "ground truth csv")->required();
  eval->add_option("--iou", iou, "matching iou threshold");
  eval->add_option("--report", report_path, "write report json here instead of stdout");

  auto* bench = app.add_subcommand("bench", "per-stage timing breakdown");
  bench->add_option("--frames", frames_dir, "directory of frame images")->required();
  bench->add_option("--config", config_path, "config file");
  bench->add_option("--repeat", repeat, "repetitions per frame");
  auto* bench_seed = bench->add_option("--seed", seed_value, "rng seed (overrides config)");
  bench->add_option("--jobs", jobs, "worker threads");

  auto* oracle = app.add_subcommand("oracle", "brute-force minimum sub-frame count");
  oracle->add_option("--patches", patches_path, "patches csv")->required();
  oracle->add_option("--config", config_path, "config file");
  oracle->add_option("--width", width, "frame width")->required();
  oracle->add_option("--height", height, "frame height")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (print_default_config) {
      std::cout << poic::default_config_text();
      return 0;
    }
    if (seed_opt->count() || run_seed->count() || bench_seed->count()) seed = seed_value;
    if (extract->parsed())
      return cmd_extract(frame_path, prev_path, mask_path, config_path, out_path);
    if (compose->parsed())
      return cmd_compose(patches_path, config_path, seed, width, height, out_path, svg_path);
    if (render->parsed()) return cmd_render(frame_path, plan_path, outdir, config_path);
    if (run->parsed())
      return cmd_run(frames_dir, config_path, detector_cmd, annotations_path, report_path,
                     pred_path, seed, jobs);
    if (eval->parsed()) return cmd_eval(pred_path, gt_path, iou, report_path);
    if (bench->parsed()) return cmd_bench(frames_dir, config_path, repeat, seed, jobs);
    if (oracle->parsed()) return cmd_oracle(patches_path, config_path, width, height);
    std::cout << app.help();
    return 0;
  } catch (const poic::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const poic::DetectorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDetectorFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
}
