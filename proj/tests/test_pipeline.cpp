#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "helpers.hpp"
#include "poic/poic.hpp"

using namespace poic;
using test_util::make_patch;

namespace {

Image ramp_image(int w, int h) {
  Image img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y, 0) = static_cast<std::uint8_t>((x * 7 + y * 13) % 251);
  return img;
}

/// Replays a fixed box list for every raster it is shown.
class StubDetector : public DetectorAdapter {
 public:
  explicit StubDetector(std::vector<DetectionBox> boxes) : boxes_(std::move(boxes)) {}
  std::vector<DetectionBox> detect(const Image&, const RasterContext& ctx) override {
    ++calls;
    std::vector<DetectionBox> out = boxes_;
    for (DetectionBox& b : out) b.sub_frame = ctx.sub_frame;
    return out;
  }
  int calls = 0;

 private:
  std::vector<DetectionBox> boxes_;
};

std::string temp_csv_path(const char* tag) {
  return "/tmp/poic_test_" + std::string(tag) + "_" + std::to_string(getpid()) + ".csv";
}

}  // namespace

TEST_CASE("rendering pastes windows and relocations at unit scale") {
  FrameSize frame{64, 64};
  Image img = ramp_image(64, 64);
  std::vector<Patch> patches = {make_patch(0, 4, 4, 8, 8), make_patch(1, 40, 40, 8, 8)};
  auto res = verify_and_relocate({SubFrame{16, 16, 1.0, 32}}, patches, frame, 32, 10);
  REQUIRE(std::holds_alternative<CompositionPlan>(res));
  CompositionPlan plan = std::get<CompositionPlan>(res);
  REQUIRE(plan.placements[1].mode == PlaceMode::Relocated);

  auto rasters = render_subframes(img, plan);
  REQUIRE(rasters.size() == 1);
  CHECK(rasters[0].w == 32);
  CHECK(rasters[0].h == 32);
  CHECK(rasters[0].channels == 1);

  // window crop is the identity here: raster pixel == frame pixel + offset
  Rect win = subframe_rect(plan.sub_frames[0], frame);
  CHECK(rasters[0].at(5, 5, 0) == img.at(win.x + 5, win.y + 5, 0));

  // relocated content equals the source patch content
  const Placement& rel = plan.placements[1];
  int dx = static_cast<int>(rel.dst.x), dy = static_cast<int>(rel.dst.y);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      CHECK(rasters[0].at(dx + x, dy + y, 0) == img.at(rel.src.x + x, rel.src.y + y, 0));
}

TEST_CASE("rendering rejects mismatched frames") {
  CompositionPlan plan;
  plan.frame_size = FrameSize{64, 64};
  Image img = ramp_image(32, 32);
  CHECK_THROWS_AS(render_subframes(img, plan), Error);
}

TEST_CASE("map back routes boxes to relocations, windows, or the floor") {
  FrameSize frame{1280, 720};
  std::vector<Patch> patches = {make_patch(0, 10, 10, 20, 20), make_patch(1, 600, 400, 24, 16)};
  auto res = verify_and_relocate({SubFrame{150, 150, 1.0, 300}}, patches, frame, 300, 10);
  REQUIRE(std::holds_alternative<CompositionPlan>(res));
  CompositionPlan plan = std::get<CompositionPlan>(res);
  const Placement& rel = plan.placements[1];

  DetectionBox on_relocation{"car", 0.9,
                             RectF{rel.dst.x + 2, rel.dst.y + 2, rel.dst.w - 4, rel.dst.h - 4},
                             0};
  DetectionBox on_window{"bus", 0.8, RectF{100, 100, 40, 40}, 0};
  DetectionBox outside{"car", 0.7, RectF{310, 310, 30, 30}, 0};
  int dropped = 0;
  auto mapped = map_back(plan, {{on_relocation, on_window, outside}}, &dropped);
  REQUIRE(mapped.size() == 2);
  CHECK(dropped == 1);

  // scale 1 everywhere: relocation undoes the slot offset, window crop is identity
  CHECK(mapped[0].rect == RectF{rel.src.x + 2.0, rel.src.y + 2.0, rel.dst.w - 4, rel.dst.h - 4});
  CHECK(mapped[0].sub_frame == -1);
  CHECK(mapped[1].rect == RectF{100, 100, 40, 40});
}

TEST_CASE("duplicate suppression keeps the strongest same-label box") {
  std::vector<DetectionBox> boxes = {{"car", 0.6, RectF{0, 0, 10, 10}, -1},
                                     {"car", 0.9, RectF{1, 1, 10, 10}, -1},
                                     {"bus", 0.2, RectF{0, 0, 10, 10}, -1},
                                     {"car", 0.5, RectF{100, 100, 10, 10}, -1}};
  auto kept = suppress_duplicates(boxes, 0.5);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].score == 0.9);
  CHECK(kept[1].score == 0.5);
  CHECK(kept[2].label == "bus");
  auto again = suppress_duplicates(kept, 0.5);
  CHECK(again.size() == kept.size());
}

TEST_CASE("evaluation hand values for one hit and one miss") {
  std::vector<Annotation> gt = {{"f", "car", Rect{0, 0, 20, 20}},
                                {"f", "car", Rect{100, 100, 20, 20}}};
  std::vector<DetectionBox> preds = {{"car", 0.9, RectF{0, 0, 20, 20}, -1},
                                     {"car", 0.8, RectF{300, 300, 20, 20}, -1}};
  EvalReport r = evaluate(preds, gt, 0.5);
  CHECK(r.true_positives == 1);
  CHECK(r.false_positives == 1);
  CHECK(r.false_negatives == 1);
  CHECK(r.one_minus_precision == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(r.recall == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(r.f1 == Catch::Approx(0.5).epsilon(1e-12));
  REQUIRE(r.pr_curve.size() == 20);
  // every prediction scores above 0.95 threshold except none; curve is flat
  CHECK(r.pr_curve[0].second == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evaluation conventions at the extremes") {
  std::vector<Annotation> gt = {{"f", "car", Rect{0, 0, 20, 20}}};
  EvalReport none = evaluate({}, gt, 0.5);
  CHECK(none.one_minus_precision == 0.0);  // zero predictions count as precision 1
  CHECK(none.recall == 0.0);
  EvalReport empty = evaluate({}, {}, 0.5);
  CHECK(empty.recall == 1.0);
  CHECK(empty.f1 == 1.0);
}

TEST_CASE("labels must match for a true positive") {
  std::vector<Annotation> gt = {{"f", "car", Rect{0, 0, 20, 20}}};
  std::vector<DetectionBox> preds = {{"bus", 0.9, RectF{0, 0, 20, 20}, -1}};
  EvalReport r = evaluate(preds, gt, 0.5);
  CHECK(r.true_positives == 0);
  CHECK(r.false_positives == 1);
  CHECK(r.false_negatives == 1);
}

TEST_CASE("greedy matching assigns the best remaining ground truth") {
  std::vector<Annotation> gt = {{"f", "car", Rect{0, 0, 10, 10}},
                                {"f", "car", Rect{4, 0, 10, 10}}};
  // the strong prediction overlaps both; it must take the better match and
  // leave the other for the weak prediction
  std::vector<DetectionBox> preds = {{"car", 0.9, RectF{4, 0, 10, 10}, -1},
                                     {"car", 0.5, RectF{0, 0, 10, 10}, -1}};
  EvalReport r = evaluate(preds, gt, 0.3);
  CHECK(r.true_positives == 2);
  CHECK(r.false_positives == 0);
}

TEST_CASE("frame-grouped evaluation never matches across frames") {
  std::vector<Annotation> gt = {{"a", "car", Rect{0, 0, 20, 20}}};
  std::vector<FrameDetection> preds = {{"b", {"car", 0.9, RectF{0, 0, 20, 20}, -1}}};
  EvalReport r = evaluate_frames(preds, gt, 0.5);
  CHECK(r.true_positives == 0);
  CHECK(r.false_positives == 1);
  CHECK(r.false_negatives == 1);

  std::vector<FrameDetection> same = {{"a", {"car", 0.9, RectF{0, 0, 20, 20}, -1}}};
  EvalReport r2 = evaluate_frames(same, gt, 0.5);
  CHECK(r2.true_positives == 1);
  CHECK(r2.f1 == 1.0);
}

TEST_CASE("annotation and detection csv round trips") {
  std::string gt_path = temp_csv_path("gt");
  {
    std::ofstream out(gt_path);
    out << "frame_id,label,x,y,w,h\nf0,car,1,2,3,4\nf1,bus,5,6,7,8\n";
  }
  auto gt = read_annotations(gt_path);
  REQUIRE(gt.size() == 2);
  CHECK(gt[0].frame_id == "f0");
  CHECK(gt[1].rect == Rect{5, 6, 7, 8});

  // ground-truth files also load as perfect-score predictions
  auto as_preds = read_detections(gt_path);
  REQUIRE(as_preds.size() == 2);
  CHECK(as_preds[0].box.score == 1.0);

  std::string det_path = temp_csv_path("det");
  std::vector<FrameDetection> rows = {{"f0", {"car", 0.875, RectF{1, 2, 3, 4}, -1}}};
  write_detections(det_path, rows);
  auto back = read_detections(det_path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].frame_id == "f0");
  CHECK(back[0].box.label == "car");
  CHECK(back[0].box.score == Catch::Approx(0.875).epsilon(1e-9));
  CHECK(back[0].box.rect == RectF{1, 2, 3, 4});

  std::remove(gt_path.c_str());
  std::remove(det_path.c_str());
}

TEST_CASE("annotation csv rejects unknown headers") {
  std::string path = temp_csv_path("bad");
  {
    std::ofstream out(path);
    out << "frame,label,x,y,w,h\n";
  }
  CHECK_THROWS_AS(read_annotations(path), Error);
  std::remove(path.c_str());
}

TEST_CASE("whole-frame baseline maps boxes through the squeeze") {
  Image img = ramp_image(600, 600);
  StubDetector det({{"car", 0.9, RectF{10, 10, 20, 20}, -1}});
  auto boxes = run_ds(img, "f0", det, 300);
  REQUIRE(boxes.size() == 1);
  CHECK(det.calls == 1);
  CHECK(boxes[0].rect == RectF{20, 20, 40, 40});
  CHECK(boxes[0].sub_frame == -1);
}

TEST_CASE("tiling baseline visits every tile and maps offsets") {
  CHECK(div_tile_count(FrameSize{1280, 720}, 300) == 15);
  Image img = ramp_image(1280, 720);
  StubDetector det({});
  run_div(img, "f0", det, 300);
  CHECK(det.calls == 15);

  // interior tiles translate; clamped edge tiles also rescale (the 200px-wide
  // edge tile stretched to 300 shrinks box widths by 2/3 on the way back)
  Image small = ramp_image(500, 300);
  StubDetector one({{"car", 0.9, RectF{0, 0, 75, 75}, -1}});
  auto boxes = run_div(small, "f0", one, 300);
  CHECK(one.calls == 2);
  REQUIRE(boxes.size() == 2);
  bool found_interior = false, found_edge = false;
  for (const DetectionBox& b : boxes) {
    if (b.rect == RectF{0, 0, 75, 75}) found_interior = true;
    if (b.rect == RectF{300, 0, 50, 75}) found_edge = true;
  }
  CHECK(found_interior);
  CHECK(found_edge);
}
