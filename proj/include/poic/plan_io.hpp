#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "poic/geometry.hpp"

namespace poic {

namespace detail {

inline nlohmann::json rect_json(const Rect& r) {
  return nlohmann::json{{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
}

inline nlohmann::json rectf_json(const RectF& r) {
  return nlohmann::json{{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
}

inline Rect rect_from_json(const nlohmann::json& j) {
  return Rect{j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(),
              j.at("h").get<int>()};
}

inline RectF rectf_from_json(const nlohmann::json& j) {
  return RectF{j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
               j.at("h").get<double>()};
}

}  // namespace detail

/// Serializes a plan with alphabetically ordered keys, so identical plans
/// always produce identical bytes.
inline std::string write_plan_json(const CompositionPlan& plan) {
  nlohmann::json j;
  j["detector_size"] = plan.detector_size;
  j["frame_size"] = {{"w", plan.frame_size.w}, {"h", plan.frame_size.h}};
  j["sub_frames"] = nlohmann::json::array();
  for (const SubFrame& f : plan.sub_frames) {
    nlohmann::json sf;
    sf["cx"] = f.cx;
    sf["cy"] = f.cy;
    sf["beta"] = f.beta;
    sf["rect"] = detail::rect_json(subframe_rect(f, plan.frame_size));
    j["sub_frames"].push_back(sf);
  }
  j["placements"] = nlohmann::json::array();
  for (const Placement& p : plan.placements) {
    nlohmann::json pj;
    pj["patch_id"] = p.patch_id;
    pj["mode"] = p.mode == PlaceMode::InSitu ? "in_situ" : "relocated";
    pj["host"] = p.host;
    pj["src"] = detail::rect_json(p.src);
    pj["dst"] = detail::rectf_json(p.dst);
    pj["scale_x"] = p.scale_x;
    pj["scale_y"] = p.scale_y;
    j["placements"].push_back(pj);
  }
  return j.dump(2) + "\n";
}

inline CompositionPlan read_plan_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("bad plan json: ") + e.what());
  }
  CompositionPlan plan;
  try {
    plan.detector_size = j.at("detector_size").get<int>();
    plan.frame_size = FrameSize{j.at("frame_size").at("w").get<int>(),
                                j.at("frame_size").at("h").get<int>()};
    for (const auto& sf : j.at("sub_frames")) {
      SubFrame f{sf.at("cx").get<double>(), sf.at("cy").get<double>(), sf.at("beta").get<double>(),
                 plan.detector_size};
      if (sf.contains("rect") && !(detail::rect_from_json(sf.at("rect")) ==
                                   subframe_rect(f, plan.frame_size)))
        throw Error("sub-frame rect does not match its center and scale");
      plan.sub_frames.push_back(f);
    }
    for (const auto& pj : j.at("placements")) {
      Placement p;
      p.patch_id = pj.at("patch_id").get<int>();
      std::string mode = pj.at("mode").get<std::string>();
      if (mode == "in_situ")
        p.mode = PlaceMode::InSitu;
      else if (mode == "relocated")
        p.mode = PlaceMode::Relocated;
      else
        throw Error("unknown placement mode: " + mode);
      p.host = pj.at("host").get<int>();
      p.src = detail::rect_from_json(pj.at("src"));
      p.dst = detail::rectf_from_json(pj.at("dst"));
      p.scale_x = pj.at("scale_x").get<double>();
      p.scale_y = pj.at("scale_y").get<double>();
      if (p.host < 0 || p.host >= static_cast<int>(plan.sub_frames.size()))
        throw Error("placement host out of range");
      plan.placements.push_back(p);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(std::string("bad plan json: ") + e.what());
  }
  return plan;
}

inline CompositionPlan read_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open plan: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return read_plan_json(ss.str());
}

/// Layout sketch: patches in blue, sub-frame windows in yellow, relocations
/// as red arrows from the patch to where its slot lands in the original
/// frame.
inline std::string write_plan_svg(const CompositionPlan& plan, const std::vector<Patch>& patches) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << plan.frame_size.w << ' '
      << plan.frame_size.h << "\">\n";
  svg << "  <defs><marker id=\"tip\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" "
         "markerWidth=\"6\" markerHeight=\"6\" orient=\"auto\">"
         "<path d=\"M0,0 L10,5 L0,10 z\" fill=\"#c0392b\"/></marker></defs>\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << plan.frame_size.w << "\" height=\""
      << plan.frame_size.h << "\" fill=\"#fafafa\" stroke=\"#555\"/>\n";
  for (size_t j = 0; j < plan.sub_frames.size(); ++j) {
    Rect r = subframe_rect(plan.sub_frames[j], plan.frame_size);
    svg << "  <rect x=\"" << r.x << "\" y=\"" << r.y << "\" width=\"" << r.w << "\" height=\""
        << r.h << "\" fill=\"#f1c40f\" fill-opacity=\"0.25\" stroke=\"#b7950b\"/>\n";
    svg << "  <text x=\"" << r.x + 4 << "\" y=\"" << r.y + 16
        << "\" font-size=\"14\" fill=\"#7d6608\">F" << j << "</text>\n";
  }
  for (const Patch& p : patches)
    svg << "  <rect x=\"" << p.rect.x << "\" y=\"" << p.rect.y << "\" width=\"" << p.rect.w
        << "\" height=\"" << p.rect.h
        << "\" fill=\"#2980b9\" fill-opacity=\"0.45\" stroke=\"#1a5276\"/>\n";
  for (const Placement& pl : plan.placements) {
    if (pl.mode != PlaceMode::Relocated) continue;
    Placement crop = crop_placement(plan.sub_frames[static_cast<size_t>(pl.host)], pl.host,
                                    plan.frame_size);
    RectF slot = inverse_map_f(crop, pl.dst);
    svg << "  <rect x=\"" << slot.x << "\" y=\"" << slot.y << "\" width=\"" << slot.w
        << "\" height=\"" << slot.h
        << "\" fill=\"none\" stroke=\"#c0392b\" stroke-dasharray=\"4 3\"/>\n";
    svg << "  <line x1=\"" << pl.src.x + pl.src.w / 2.0 << "\" y1=\"" << pl.src.y + pl.src.h / 2.0
        << "\" x2=\"" << slot.cx() << "\" y2=\"" << slot.cy()
        << "\" stroke=\"#c0392b\" marker-end=\"url(#tip)\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace poic
