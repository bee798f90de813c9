#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "poic/detector.hpp"
#include "poic/geometry.hpp"
#include "poic/image.hpp"

namespace poic {

struct EvalReport {
  double one_minus_precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double frames_per_second = 0.0;
  std::vector<std::pair<double, double>> pr_curve;  // (1-precision, recall) per threshold
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

namespace detail {

inline void blit(Image& dst, const Image& src, int x0, int y0) {
  for (int y = 0; y < src.h; ++y) {
    int ty = y0 + y;
    if (ty < 0 || ty >= dst.h) continue;
    for (int x = 0; x < src.w; ++x) {
      int tx = x0 + x;
      if (tx < 0 || tx >= dst.w) continue;
      for (int c = 0; c < dst.channels; ++c)
        dst.at(tx, ty, c) = src.at(x, y, std::min(c, src.channels - 1));
    }
  }
}

inline Image resize_crop(const Image& frame, const Rect& src, int out_w, int out_h,
                         bool bilinear) {
  return bilinear ? resize_bilinear(frame, src, out_w, out_h)
                  : resize_nearest(frame, src, out_w, out_h);
}

}  // namespace detail

/// One detector-input raster per sub-frame: the window crop resized to
/// detector_size (so in-situ patches arrive at the window's scale), then each
/// relocated patch resized by its own factors and pasted at its slot.
inline std::vector<Image> render_subframes(const Image& frame, const CompositionPlan& plan,
                                           bool bilinear = false) {
  if (frame.w != plan.frame_size.w || frame.h != plan.frame_size.h)
    throw Error("frame size does not match plan");
  const int d = plan.detector_size;
  std::vector<Image> rasters;
  rasters.reserve(plan.sub_frames.size());
  for (size_t j = 0; j < plan.sub_frames.size(); ++j) {
    Placement crop = crop_placement(plan.sub_frames[j], static_cast<int>(j), plan.frame_size);
    Image raster;
    raster.w = d;
    raster.h = d;
    raster.channels = frame.channels;
    raster.data.assign(static_cast<size_t>(d) * d * frame.channels, 128);
    detail::blit(raster, detail::resize_crop(frame, crop.src, d, d, bilinear), 0, 0);
    for (const Placement& pl : plan.placements) {
      if (pl.host != static_cast<int>(j) || pl.mode != PlaceMode::Relocated) continue;
      int w = std::max(1, static_cast<int>(round_half_up(pl.dst.w)));
      int h = std::max(1, static_cast<int>(round_half_up(pl.dst.h)));
      detail::blit(raster, detail::resize_crop(frame, pl.src, w, h, bilinear),
                   static_cast<int>(round_half_up(pl.dst.x)),
                   static_cast<int>(round_half_up(pl.dst.y)));
    }
    rasters.push_back(std::move(raster));
  }
  return rasters;
}

/// Sub-frame-space detections back to original coordinates. A box belongs to
/// the relocated placement whose slot contains its center (relocations are
/// pasted over the crop), otherwise to the window crop itself; boxes centered
/// outside the raster are dropped and tallied.
inline std::vector<DetectionBox> map_back(const CompositionPlan& plan,
                                          const std::vector<std::vector<DetectionBox>>& per_sub,
                                          int* dropped = nullptr) {
  std::vector<DetectionBox> out;
  const double d = plan.detector_size;
  for (size_t j = 0; j < plan.sub_frames.size() && j < per_sub.size(); ++j) {
    Placement crop = crop_placement(plan.sub_frames[j], static_cast<int>(j), plan.frame_size);
    for (const DetectionBox& box : per_sub[j]) {
      double cx = box.rect.cx(), cy = box.rect.cy();
      const Placement* owner = nullptr;
      for (const Placement& pl : plan.placements) {
        if (pl.host != static_cast<int>(j) || pl.mode != PlaceMode::Relocated) continue;
        if (dst_contains_center(pl, box.rect)) {
          owner = &pl;
          break;
        }
      }
      if (!owner && (cx < 0 || cx > d || cy < 0 || cy > d)) {
        if (dropped) ++*dropped;
        continue;
      }
      DetectionBox mapped = box;
      mapped.rect = inverse_map_f(owner ? *owner : crop, box.rect);
      mapped.sub_frame = -1;
      out.push_back(std::move(mapped));
    }
  }
  return out;
}

/// Greedy same-label IoU suppression, keeping the higher-scored box.
/// Idempotent; ordering of equal-score boxes is made deterministic first.
inline std::vector<DetectionBox> suppress_duplicates(std::vector<DetectionBox> boxes,
                                                     double iou_threshold = 0.5) {
  std::sort(boxes.begin(), boxes.end(), [](const DetectionBox& a, const DetectionBox& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.label != b.label) return a.label < b.label;
    if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
    if (a.rect.x != b.rect.x) return a.rect.x < b.rect.x;
    if (a.rect.w != b.rect.w) return a.rect.w < b.rect.w;
    return a.rect.h < b.rect.h;
  });
  std::vector<DetectionBox> kept;
  for (const DetectionBox& box : boxes) {
    bool duplicate = false;
    for (const DetectionBox& k : kept)
      if (k.label == box.label && iou(k.rect, box.rect) >= iou_threshold) {
        duplicate = true;
        break;
      }
    if (!duplicate) kept.push_back(box);
  }
  return kept;
}

namespace detail {

struct MatchCounts {
  int tp = 0, fp = 0, fn = 0;
};

inline MatchCounts match_at(const std::vector<DetectionBox>& preds_sorted,
                            const std::vector<Annotation>& gt, double iou_threshold,
                            double score_min) {
  MatchCounts m;
  std::vector<char> taken(gt.size(), 0);
  for (const DetectionBox& p : preds_sorted) {
    if (p.score < score_min - 1e-9) continue;
    int best = -1;
    double best_iou = iou_threshold;
    for (size_t g = 0; g < gt.size(); ++g) {
      if (taken[g] || gt[g].label != p.label) continue;
      double v = iou(p.rect, to_rectf(gt[g].rect));
      if (v > best_iou || (best < 0 && v >= iou_threshold && v >= best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[static_cast<size_t>(best)] = 1;
      ++m.tp;
    } else {
      ++m.fp;
    }
  }
  for (char t : taken)
    if (!t) ++m.fn;
  return m;
}

}  // namespace detail

/// Greedy score-descending matching at the given IoU threshold, and a PR
/// curve swept over 20 uniform score thresholds (0, 0.05, ..., 0.95).
/// Zero predictions count as precision 1 by convention.
inline EvalReport evaluate(std::vector<DetectionBox> predictions,
                           const std::vector<Annotation>& ground_truth,
                           double iou_threshold = 0.5) {
  std::sort(predictions.begin(), predictions.end(),
            [](const DetectionBox& a, const DetectionBox& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.label != b.label) return a.label < b.label;
              if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
              if (a.rect.x != b.rect.x) return a.rect.x < b.rect.x;
              if (a.rect.w != b.rect.w) return a.rect.w < b.rect.w;
              return a.rect.h < b.rect.h;
            });
  EvalReport r;
  auto m = detail::match_at(predictions, ground_truth, iou_threshold, 0.0);
  r.true_positives = m.tp;
  r.false_positives = m.fp;
  r.false_negatives = m.fn;
  double precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 1.0;
  r.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 1.0;
  r.one_minus_precision = 1.0 - precision;
  r.f1 = precision + r.recall > 0 ? 2 * precision * r.recall / (precision + r.recall) : 0.0;
  for (int i = 0; i < 20; ++i) {
    auto mi = detail::match_at(predictions, ground_truth, iou_threshold, i / 20.0);
    double pi = mi.tp + mi.fp > 0 ? static_cast<double>(mi.tp) / (mi.tp + mi.fp) : 1.0;
    double ri = mi.tp + mi.fn > 0 ? static_cast<double>(mi.tp) / (mi.tp + mi.fn) : 1.0;
    r.pr_curve.emplace_back(1.0 - pi, ri);
  }
  return r;
}

// ---- annotation / detection CSV ----

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail


inline std::vector<Annotation> read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotations: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty annotations file: " + path);
  auto header = detail::split_csv_line(line);
  if (header != std::vector<std::string>{"frame_id", "label", "x", "y", "w", "h"})
    throw Error("bad annotations header in " + path);
  std::vector<Annotation> out;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = detail::split_csv_line(line);
    if (cols.size() != 6)
      throw Error(path + ":" + std::to_string(line_no) + ": expected 6 columns");
    try {
      out.push_back(Annotation{cols[0], cols[1],
                               Rect{std::stoi(cols[2]), std::stoi(cols[3]), std::stoi(cols[4]),
                                    std::stoi(cols[5])}});
    } catch (const std::exception&) {
      throw Error(path + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

/// Detections CSV, one row per box. The score column is optional on read so
/// ground-truth files double as perfect predictions.
struct FrameDetection {
  std::string frame_id;
  DetectionBox box;
};

inline void write_detections(const std::string& path, const std::vector<FrameDetection>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write detections: " + path);
  out << "frame_id,label,score,x,y,w,h\n";
  for (const FrameDetection& r : rows) {
    Rect b = round_rect(r.box.rect);
    char score[32];
    std::snprintf(score, sizeof(score), "%.6g", r.box.score);
    out << r.frame_id << ',' << r.box.label << ',' << score << ',' << b.x << ',' << b.y << ','
        << b.w << ',' << b.h << '\n';
  }
}

inline std::vector<FrameDetection> read_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open detections: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty detections file: " + path);
  auto header = detail::split_csv_line(line);
  bool with_score;
  if (header == std::vector<std::string>{"frame_id", "label", "score", "x", "y", "w", "h"})
    with_score = true;
  else if (header == std::vector<std::string>{"frame_id", "label", "x", "y", "w", "h"})
    with_score = false;
  else
    throw Error("bad detections header in " + path);
  std::vector<FrameDetection> out;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = detail::split_csv_line(line);
    if (cols.size() != (with_score ? 7u : 6u))
      throw Error(path + ":" + std::to_string(line_no) + ": wrong column count");
    try {
      size_t k = 2;
      double score = with_score ? std::stod(cols[k++]) : 1.0;
      double x = std::stod(cols[k]);
      double y = std::stod(cols[k + 1]);
      double w = std::stod(cols[k + 2]);
      double h = std::stod(cols[k + 3]);
      out.push_back(FrameDetection{cols[0], DetectionBox{cols[1], score, RectF{x, y, w, h}, -1}});
    } catch (const std::exception&) {
      throw Error(path + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

/// Multi-frame evaluation: matching never crosses frame boundaries; counts
/// are summed over frames and the metrics computed from the sums.
inline EvalReport evaluate_frames(const std::vector<FrameDetection>& predictions,
                                  const std::vector<Annotation>& ground_truth,
                                  double iou_threshold = 0.5) {
  std::map<std::string, std::vector<DetectionBox>> pred_by_frame;
  std::map<std::string, std::vector<Annotation>> gt_by_frame;
  for (const FrameDetection& p : predictions) pred_by_frame[p.frame_id].push_back(p.box);
  for (const Annotation& a : ground_truth) gt_by_frame[a.frame_id].push_back(a);

  std::vector<std::string> frames;
  for (const auto& [id, unused] : pred_by_frame) frames.push_back(id);
  for (const auto& [id, unused] : gt_by_frame)
    if (!pred_by_frame.count(id)) frames.push_back(id);

  auto cmp = [](const DetectionBox& a, const DetectionBox& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.label != b.label) return a.label < b.label;
    if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
    if (a.rect.x != b.rect.x) return a.rect.x < b.rect.x;
    if (a.rect.w != b.rect.w) return a.rect.w < b.rect.w;
    return a.rect.h < b.rect.h;
  };
  static const std::vector<Annotation> no_gt;
  EvalReport r;
  detail::MatchCounts total;
  std::vector<detail::MatchCounts> per_threshold(20);
  for (const std::string& id : frames) {
    auto pit = pred_by_frame.find(id);
    std::vector<DetectionBox> preds = pit == pred_by_frame.end() ? std::vector<DetectionBox>{}
                                                                 : pit->second;
    std::sort(preds.begin(), preds.end(), cmp);
    auto git = gt_by_frame.find(id);
    const std::vector<Annotation>& gt = git == gt_by_frame.end() ? no_gt : git->second;
    auto m = detail::match_at(preds, gt, iou_threshold, 0.0);
    total.tp += m.tp;
    total.fp += m.fp;
    total.fn += m.fn;
    for (int i = 0; i < 20; ++i) {
      auto mi = detail::match_at(preds, gt, iou_threshold, i / 20.0);
      per_threshold[static_cast<size_t>(i)].tp += mi.tp;
      per_threshold[static_cast<size_t>(i)].fp += mi.fp;
      per_threshold[static_cast<size_t>(i)].fn += mi.fn;
    }
  }
  r.true_positives = total.tp;
  r.false_positives = total.fp;
  r.false_negatives = total.fn;
  double precision = total.tp + total.fp > 0 ? static_cast<double>(total.tp) / (total.tp + total.fp)
                                             : 1.0;
  r.recall = total.tp + total.fn > 0 ? static_cast<double>(total.tp) / (total.tp + total.fn) : 1.0;
  r.one_minus_precision = 1.0 - precision;
  r.f1 = precision + r.recall > 0 ? 2 * precision * r.recall / (precision + r.recall) : 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto& m = per_threshold[static_cast<size_t>(i)];
    double pi = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 1.0;
    double ri = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 1.0;
    r.pr_curve.emplace_back(1.0 - pi, ri);
  }
  return r;
}

// ---- baselines ----

inline int div_tile_count(FrameSize frame, int tile) {
  return ((frame.w + tile - 1) / tile) * ((frame.h + tile - 1) / tile);
}

/// Whole frame squeezed into one detector input, boxes scaled back.
inline std::vector<DetectionBox> run_ds(const Image& frame, const std::string& frame_id,
                                        DetectorAdapter& detector, int detector_size,
                                        bool bilinear = false) {
  Placement pl;
  pl.patch_id = -1;
  pl.mode = PlaceMode::InSitu;
  pl.host = 0;
  pl.src = Rect{0, 0, frame.w, frame.h};
  pl.dst = RectF{0, 0, static_cast<double>(detector_size), static_cast<double>(detector_size)};
  pl.scale_x = static_cast<double>(detector_size) / frame.w;
  pl.scale_y = static_cast<double>(detector_size) / frame.h;
  Image raster = detail::resize_crop(frame, pl.src, detector_size, detector_size, bilinear);
  RasterContext ctx{frame_id, 0, {pl}};
  std::vector<DetectionBox> out;
  for (DetectionBox box : detector.detect(raster, ctx)) {
    box.rect = inverse_map_f(pl, box.rect);
    box.sub_frame = -1;
    out.push_back(std::move(box));
  }
  return out;
}

/// Fixed non-overlapping tiling; edge tiles are clamped to the frame and
/// stretched to detector size. Results are duplicate-suppressed.
inline std::vector<DetectionBox> run_div(const Image& frame, const std::string& frame_id,
                                         DetectorAdapter& detector, int detector_size,
                                         bool bilinear = false, double dup_iou = 0.5) {
  std::vector<DetectionBox> all;
  int tile_index = 0;
  for (int y0 = 0; y0 < frame.h; y0 += detector_size)
    for (int x0 = 0; x0 < frame.w; x0 += detector_size, ++tile_index) {
      Placement pl;
      pl.patch_id = -1;
      pl.mode = PlaceMode::InSitu;
      pl.host = tile_index;
      pl.src = Rect{x0, y0, std::min(detector_size, frame.w - x0),
                    std::min(detector_size, frame.h - y0)};
      pl.dst = RectF{0, 0, static_cast<double>(detector_size),
                     static_cast<double>(detector_size)};
      pl.scale_x = static_cast<double>(detector_size) / pl.src.w;
      pl.scale_y = static_cast<double>(detector_size) / pl.src.h;
      Image raster = detail::resize_crop(frame, pl.src, detector_size, detector_size, bilinear);
      RasterContext ctx{frame_id, tile_index, {pl}};
      for (DetectionBox box : detector.detect(raster, ctx)) {
        box.rect = inverse_map_f(pl, box.rect);
        box.sub_frame = -1;
        all.push_back(std::move(box));
      }
    }
  return suppress_duplicates(std::move(all), dup_iou);
}

}  // namespace poic
