#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "poic/geometry.hpp"
#include "poic/objective.hpp"
#include "poic/optimizer.hpp"
#include "poic/scaling.hpp"

namespace poic {

/// Every tunable constant, one flat key=value file. Unknown keys are errors
/// so typos cannot silently fall back to defaults.
struct Config {
  // scaling calibration
  int use_calibration = 0;  // 0: uniform beta_uniform everywhere
  double beta_uniform = 1.0;
  double y_ab = 0.0;
  double y_cd = 100.0;
  double l_ab = 100.0;
  double l_cd = 100.0;
  double k_cal = 0.01;
  int n_bands = 1;

  // patch extraction
  int diff_threshold = 25;
  int open_iterations = 1;
  int close_iterations = 1;
  int min_component_area = 16;
  int patch_margin = 3;
  std::string mask_suffix = ".mask.pgm";

  ObjectiveConfig objective;
  GaConfig ga;

  // pipeline
  int detector_size = 300;
  double iou_threshold = 0.5;
  double duplicate_iou = 0.5;
  double detector_timeout_s = 10.0;
  int render_bilinear = 0;
};

namespace detail {

inline const std::map<std::string, std::string>& config_docs() {
  static const std::map<std::string, std::string> docs = {
      {"use_calibration", "1: derive beta from the two reference lines; 0: beta_uniform"},
      {"beta_uniform", "scaling factor used when use_calibration=0"},
      {"y_ab", "vertical position of the near reference line"},
      {"y_cd", "vertical position of the far reference line"},
      {"l_ab", "object length on the near reference line, pixels"},
      {"l_cd", "object length on the far reference line, pixels"},
      {"k_cal", "calibration constant"},
      {"n_bands", "vertical bands with fixed beta (1-3)"},
      {"diff_threshold", "abs gray difference marking motion foreground"},
      {"open_iterations", "morphological opening passes on the mask"},
      {"close_iterations", "morphological closing passes on the mask"},
      {"min_component_area", "drop components below this pixel count"},
      {"patch_margin", "pixels added around each component box"},
      {"mask_suffix", "per-frame mask filename suffix looked up next to the frame"},
      {"alpha", "weight of the location term"},
      {"delta", "penalty for plans below capacity"},
      {"k_count", "count term slope"},
      {"b_count", "count term offset"},
      {"psi_epsilon", "full-coverage guard in the location term"},
      {"alpha3", "population size multiplier"},
      {"grid_stride", "center search grid step, pixels"},
      {"tournament_size", "selection tournament size"},
      {"crossover_rate", "probability of one-point crossover"},
      {"mutation_rate", "per-gene mutation probability"},
      {"elite_count", "candidates copied unchanged each generation"},
      {"patience", "stop after this many stagnant generations"},
      {"local_search_radius", "hill-climb probe radius, pixels"},
      {"local_search_top_fraction", "fraction of population refined per generation"},
      {"n_r", "blank rectangles kept per sub-frame during relocation"},
      {"max_verification_retries", "bound bumps before the tiling fallback"},
      {"max_generations", "hard cap on generations"},
      {"rng_seed", "seed for all stochastic choices"},
      {"detector_size", "detector input side, pixels"},
      {"iou_threshold", "IoU for prediction/ground-truth matching"},
      {"duplicate_iou", "IoU for cross-sub-frame duplicate suppression"},
      {"detector_timeout_s", "seconds to wait for an external detector reply"},
      {"render_bilinear", "1: bilinear resampling; 0: nearest neighbor"},
  };
  return docs;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value);

template <>
inline int parse_number<int>(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw Error("");
    return v;
  } catch (const std::exception&) {
    throw Error("config: bad integer for " + key + ": '" + value + "'");
  }
}

template <>
inline double parse_number<double>(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw Error("");
    return v;
  } catch (const std::exception&) {
    throw Error("config: bad number for " + key + ": '" + value + "'");
  }
}

template <>
inline std::uint64_t parse_number<std::uint64_t>(const std::string& key,
                                                 const std::string& value) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw Error("");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw Error("config: bad integer for " + key + ": '" + value + "'");
  }
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void apply_config_entry(Config& c, const std::string& key, const std::string& value) {
  auto i = [&] { return detail::parse_number<int>(key, value); };
  auto d = [&] { return detail::parse_number<double>(key, value); };
  if (key == "use_calibration") c.use_calibration = i();
  else if (key == "beta_uniform") c.beta_uniform = d();
  else if (key == "y_ab") c.y_ab = d();
  else if (key == "y_cd") c.y_cd = d();
  else if (key == "l_ab") c.l_ab = d();
  else if (key == "l_cd") c.l_cd = d();
  else if (key == "k_cal") c.k_cal = d();
  else if (key == "n_bands") c.n_bands = i();
  else if (key == "diff_threshold") c.diff_threshold = i();
  else if (key == "open_iterations") c.open_iterations = i();
  else if (key == "close_iterations") c.close_iterations = i();
  else if (key == "min_component_area") c.min_component_area = i();
  else if (key == "patch_margin") c.patch_margin = i();
  else if (key == "mask_suffix") c.mask_suffix = value;
  else if (key == "alpha") c.objective.alpha = d();
  else if (key == "delta") c.objective.delta = d();
  else if (key == "k_count") c.objective.k_count = d();
  else if (key == "b_count") c.objective.b_count = d();
  else if (key == "psi_epsilon") c.objective.psi_epsilon = d();
  else if (key == "alpha3") c.ga.alpha3 = d();
  else if (key == "grid_stride") c.ga.grid_stride = i();
  else if (key == "tournament_size") c.ga.tournament_size = i();
  else if (key == "crossover_rate") c.ga.crossover_rate = d();
  else if (key == "mutation_rate") c.ga.mutation_rate = d();
  else if (key == "elite_count") c.ga.elite_count = i();
  else if (key == "patience") c.ga.patience = i();
  else if (key == "local_search_radius") c.ga.local_search_radius = i();
  else if (key == "local_search_top_fraction") c.ga.local_search_top_fraction = d();
  else if (key == "n_r") c.ga.n_r = i();
  else if (key == "max_verification_retries") c.ga.max_verification_retries = i();
  else if (key == "max_generations") c.ga.max_generations = i();
  else if (key == "rng_seed") c.ga.rng_seed = detail::parse_number<std::uint64_t>(key, value);
  else if (key == "detector_size") c.detector_size = i();
  else if (key == "iou_threshold") c.iou_threshold = d();
  else if (key == "duplicate_iou") c.duplicate_iou = d();
  else if (key == "detector_timeout_s") c.detector_timeout_s = d();
  else if (key == "render_bilinear") c.render_bilinear = i();
  else throw Error("config: unknown key '" + key + "'");
}

inline void validate_config(const Config& c) {
  if (c.n_bands < 1 || c.n_bands > 3) throw Error("config: n_bands must be 1, 2 or 3");
  if (c.beta_uniform <= 0) throw Error("config: beta_uniform must be positive");
  if (c.detector_size <= 0) throw Error("config: detector_size must be positive");
  if (c.patch_margin < 0) throw Error("config: patch_margin must be non-negative");
  if (c.min_component_area < 1) throw Error("config: min_component_area must be >= 1");
  if (c.objective.delta <= 0) throw Error("config: delta must be positive");
  if (c.objective.psi_epsilon <= 0) throw Error("config: psi_epsilon must be positive");
  if (c.ga.alpha3 <= 0) throw Error("config: alpha3 must be positive");
  if (c.ga.grid_stride < 1) throw Error("config: grid_stride must be >= 1");
  if (c.ga.tournament_size < 1) throw Error("config: tournament_size must be >= 1");
  if (c.ga.crossover_rate < 0 || c.ga.crossover_rate > 1)
    throw Error("config: crossover_rate must be in [0,1]");
  if (c.ga.mutation_rate < 0 || c.ga.mutation_rate > 1)
    throw Error("config: mutation_rate must be in [0,1]");
  if (c.ga.elite_count < 1) throw Error("config: elite_count must be >= 1");
  if (c.ga.patience < 1) throw Error("config: patience must be >= 1");
  if (c.ga.local_search_radius < 1) throw Error("config: local_search_radius must be >= 1");
  if (c.ga.local_search_top_fraction < 0 || c.ga.local_search_top_fraction > 1)
    throw Error("config: local_search_top_fraction must be in [0,1]");
  if (c.ga.n_r < 1) throw Error("config: n_r must be >= 1");
  if (c.ga.max_verification_retries < 0)
    throw Error("config: max_verification_retries must be >= 0");
  if (c.ga.max_generations < 1) throw Error("config: max_generations must be >= 1");
  if (c.iou_threshold <= 0 || c.iou_threshold > 1)
    throw Error("config: iou_threshold must be in (0,1]");
  if (c.duplicate_iou <= 0 || c.duplicate_iou > 1)
    throw Error("config: duplicate_iou must be in (0,1]");
  if (c.detector_timeout_s <= 0) throw Error("config: detector_timeout_s must be positive");
}

/// key=value lines; blank lines and '#' comments allowed.
inline Config parse_config(std::istream& in) {
  Config c;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    apply_config_entry(c, key, value);
  }
  validate_config(c);
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  return parse_config(in);
}

inline std::string default_config_text() {
  Config c;
  std::ostringstream out;
  out << "# composition engine configuration; key=value, '#' starts a comment\n";
  auto emit_d = [&](const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << " = " << buf << "    # " << detail::config_docs().at(key) << '\n';
  };
  auto emit_i = [&](const std::string& key, long long v) {
    out << key << " = " << v << "    # " << detail::config_docs().at(key) << '\n';
  };
  out << "\n# perspective scaling\n";
  emit_i("use_calibration", c.use_calibration);
  emit_d("beta_uniform", c.beta_uniform);
  emit_d("y_ab", c.y_ab);
  emit_d("y_cd", c.y_cd);
  emit_d("l_ab", c.l_ab);
  emit_d("l_cd", c.l_cd);
  emit_d("k_cal", c.k_cal);
  emit_i("n_bands", c.n_bands);
  out << "\n# patch extraction\n";
  emit_i("diff_threshold", c.diff_threshold);
  emit_i("open_iterations", c.open_iterations);
  emit_i("close_iterations", c.close_iterations);
  emit_i("min_component_area", c.min_component_area);
  emit_i("patch_margin", c.patch_margin);
  out << "mask_suffix = " << c.mask_suffix << "    # "
      << detail::config_docs().at("mask_suffix") << '\n';
  out << "\n# composition objective\n";
  emit_d("alpha", c.objective.alpha);
  emit_d("delta", c.objective.delta);
  emit_d("k_count", c.objective.k_count);
  emit_d("b_count", c.objective.b_count);
  emit_d("psi_epsilon", c.objective.psi_epsilon);
  out << "\n# genetic search\n";
  emit_d("alpha3", c.ga.alpha3);
  emit_i("grid_stride", c.ga.grid_stride);
  emit_i("tournament_size", c.ga.tournament_size);
  emit_d("crossover_rate", c.ga.crossover_rate);
  emit_d("mutation_rate", c.ga.mutation_rate);
  emit_i("elite_count", c.ga.elite_count);
  emit_i("patience", c.ga.patience);
  emit_i("local_search_radius", c.ga.local_search_radius);
  emit_d("local_search_top_fraction", c.ga.local_search_top_fraction);
  emit_i("n_r", c.ga.n_r);
  emit_i("max_verification_retries", c.ga.max_verification_retries);
  emit_i("max_generations", c.ga.max_generations);
  emit_i("rng_seed", static_cast<long long>(c.ga.rng_seed));
  out << "\n# pipeline\n";
  emit_i("detector_size", c.detector_size);
  emit_d("iou_threshold", c.iou_threshold);
  emit_d("duplicate_iou", c.duplicate_iou);
  emit_d("detector_timeout_s", c.detector_timeout_s);
  emit_i("render_bilinear", c.render_bilinear);
  return out.str();
}

/// Scaling profile for a frame of the given height, from the calibration
/// keys or the uniform default.
inline ScalingProfile profile_from_config(const Config& c, int frame_height) {
  if (!c.use_calibration) return uniform_profile(frame_height, c.beta_uniform);
  return make_profile(c.y_ab, c.y_cd, c.l_ab, c.l_cd, c.k_cal, c.n_bands, frame_height);
}

}  // namespace poic
