#pragma once

#include <cmath>
#include <vector>

#include "poic/geometry.hpp"

namespace poic {

/// One vertical band [y_min, y_max) with a fixed scaling factor.
struct Band {
  int y_min = 0;
  int y_max = 0;
  double beta = 1.0;
};

/// Perspective scale calibration. Two reference lines at y_ab (near) and
/// y_cd (far) with measured object heights l_ab and l_cd give an affine
/// scaling law; k_cal is the overall calibration constant. The continuous
/// law is quantized into 1-3 vertical bands covering the frame height.
///
/// Convention used throughout: detector-space size = original size * beta,
/// and a sub-frame's original-space side = detector_size / beta.
struct ScalingProfile {
  double y_ab = 0;
  double y_cd = 0;
  double l_ab = 0;
  double l_cd = 0;
  double k_cal = 1.0;
  std::vector<Band> bands;
};

/// Continuous scaling factor at vertical position y_input. May extrapolate
/// outside [y_cd, y_ab]. Errors when the calibration yields beta <= 0 at the
/// query point.
inline double beta_continuous(const ScalingProfile& p, double y_input) {
  double dy = p.y_ab - p.y_cd;
  double beta =
      p.k_cal * ((p.l_ab - p.l_cd) / dy * y_input + (p.y_ab * p.l_cd - p.y_cd * p.l_ab) / dy);
  if (!(beta > 0))
    throw Error("scaling: beta <= 0 at y=" + std::to_string(y_input) +
                " (calibration inconsistent with query point)");
  return beta;
}

/// Splits the frame height into n_bands equal intervals; each band carries
/// the continuous beta sampled at its vertical midpoint.
inline std::vector<Band> build_bands(const ScalingProfile& core, int n_bands, int frame_height) {
  if (n_bands < 1 || n_bands > 3) throw Error("scaling: n_bands must be 1, 2 or 3");
  if (frame_height <= 0) throw Error("scaling: frame height must be positive");
  std::vector<Band> bands;
  bands.reserve(n_bands);
  for (int i = 0; i < n_bands; ++i) {
    int y0 = static_cast<int>(static_cast<long long>(frame_height) * i / n_bands);
    int y1 = static_cast<int>(static_cast<long long>(frame_height) * (i + 1) / n_bands);
    double mid = (y0 + y1) / 2.0;
    bands.push_back({y0, y1, beta_continuous(core, mid)});
  }
  return bands;
}

inline ScalingProfile make_profile(double y_ab, double y_cd, double l_ab, double l_cd,
                                   double k_cal, int n_bands, int frame_height) {
  if (y_ab == y_cd) throw Error("scaling: y_ab and y_cd must differ");
  if (l_ab <= 0 || l_cd <= 0) throw Error("scaling: reference lengths must be positive");
  if (k_cal <= 0) throw Error("scaling: k_cal must be positive");
  ScalingProfile p{y_ab, y_cd, l_ab, l_cd, k_cal, {}};
  p.bands = build_bands(p, n_bands, frame_height);
  return p;
}

/// Uncalibrated default: one band, fixed beta. Composition then degenerates
/// to pure packing.
inline ScalingProfile uniform_profile(int frame_height, double beta = 1.0) {
  ScalingProfile p;
  p.y_ab = frame_height;
  p.y_cd = 0;
  p.l_ab = beta;
  p.l_cd = beta;
  p.k_cal = 1.0;
  p.bands = {{0, frame_height, beta}};
  return p;
}

/// Band lookup. Positions outside [0, frame height) fall into the nearest band.
inline double beta_for(const ScalingProfile& p, double y) {
  if (p.bands.empty()) throw Error("scaling: profile has no bands");
  for (const Band& b : p.bands)
    if (y >= b.y_min && y < b.y_max) return b.beta;
  return y < p.bands.front().y_min ? p.bands.front().beta : p.bands.back().beta;
}

}  // namespace poic
