#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "tasp/hybrid.hpp"
#include "tasp/world.hpp"

namespace tasp::svg {

struct RenderOptions {
  double scale = 60.0;  // pixels per meter
  bool show_regions = true;
  bool show_objects = true;
  bool show_surfaces = true;
  bool show_robot = true;
  bool show_trajectories = true;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

class Canvas {
 public:
  Canvas(const geo::Bounds& bounds, double scale)
      : bounds_(bounds), scale_(scale) {}

  double px(double x) const { return (x - bounds_.xmin) * scale_; }
  double py(double y) const { return (bounds_.ymax - y) * scale_; }

  std::string point(const geo::Vec2& p) const { return num(px(p.x)) + "," + num(py(p.y)); }

  std::string polygon(const geo::Polygon& poly, const std::string& style) const {
    std::string s = "<polygon points=\"";
    for (std::size_t i = 0; i < poly.size(); ++i) {
      if (i > 0) s += " ";
      s += point(poly[i]);
    }
    s += "\" " + style + "/>\n";
    return s;
  }

  std::string circle(const geo::Vec2& c, double r, const std::string& style) const {
    return "<circle cx=\"" + num(px(c.x)) + "\" cy=\"" + num(py(c.y)) + "\" r=\"" +
           num(r * scale_) + "\" " + style + "/>\n";
  }

  std::string line(const geo::Vec2& a, const geo::Vec2& b, const std::string& style) const {
    return "<line x1=\"" + num(px(a.x)) + "\" y1=\"" + num(py(a.y)) + "\" x2=\"" + num(px(b.x)) +
           "\" y2=\"" + num(py(b.y)) + "\" " + style + "/>\n";
  }

  std::string text(const geo::Vec2& p, const std::string& label) const {
    return "<text x=\"" + num(px(p.x)) + "\" y=\"" + num(py(p.y)) +
           "\" font-size=\"11\" font-family=\"monospace\" fill=\"#333\">" + label + "</text>\n";
  }

  std::string polyline(const std::vector<geo::Configuration>& configs,
                       const std::string& cls, const std::string& style) const {
    if (configs.size() < 2) return "";
    std::string s = "<polyline class=\"" + cls + "\" points=\"";
    for (std::size_t i = 0; i < configs.size(); ++i) {
      if (i > 0) s += " ";
      s += point(configs[i].base.position());
    }
    s += "\" " + style + "/>\n";
    return s;
  }

 private:
  geo::Bounds bounds_;
  double scale_;
};

}  // namespace detail

// Renders the workspace, world state and (optionally) a refined plan and an
// execution trace to SVG. Output is deterministic: fixed float formatting,
// stable iteration order.
inline std::string render(const sim::Workspace& ws, const sim::WorldState& world,
                          const planner::HybridPlan* plan = nullptr,
                          const RenderOptions& opt = {},
                          const std::vector<planner::TraceEvent>* trace = nullptr) {
  const geo::Bounds& b = ws.scene.bounds;
  detail::Canvas c(b, opt.scale);
  const double w = (b.xmax - b.xmin) * opt.scale;
  const double h = (b.ymax - b.ymin) * opt.scale;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(w) + "\" height=\"" +
         detail::num(h) + "\" viewBox=\"0 0 " + detail::num(w) + " " + detail::num(h) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + detail::num(w) + "\" height=\"" + detail::num(h) +
         "\" fill=\"#fafafa\" stroke=\"#222\" stroke-width=\"2\"/>\n";

  if (opt.show_regions) {
    out += "<g id=\"regions\">\n";
    for (const auto& r : ws.regions) {
      out += c.polygon(r.polygon,
                       "fill=\"#e8f0fe\" fill-opacity=\"0.5\" stroke=\"#7a9cc6\" "
                       "stroke-dasharray=\"6,4\" stroke-width=\"1\"");
      out += c.text(r.polygon[0] + geo::Vec2{0.05, 0.05}, r.id);
    }
    out += "</g>\n";
  }

  out += "<g id=\"obstacles\">\n";
  const geo::Scene scene = sim::active_scene(ws, world);
  for (const auto& ob : scene.obstacles) {
    if (!ob.modes.empty()) {
      for (const auto& [label, poly] : ob.modes) {
        if (label == *ob.active_mode) continue;
        out += c.polygon(poly,
                         "fill=\"none\" stroke=\"#b08968\" stroke-width=\"1.5\" "
                         "stroke-dasharray=\"5,5\"");
      }
    }
    out += c.polygon(ob.active_polygon(), "fill=\"#9a8c98\" stroke=\"#4a4e69\" stroke-width=\"1.5\"");
  }
  out += "</g>\n";

  if (opt.show_surfaces) {
    out += "<g id=\"surfaces\">\n";
    for (const auto& [owner, grid] : world.surfaces) {
      for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const double t0 = static_cast<double>(i) / static_cast<double>(grid.cells.size());
        const double t1 = static_cast<double>(i + 1) / static_cast<double>(grid.cells.size());
        const geo::Vec2 a = grid.a + (grid.b - grid.a) * t0;
        const geo::Vec2 bb = grid.a + (grid.b - grid.a) * t1;
        out += c.line(a, bb, std::string("stroke-width=\"5\" stroke=\"") +
                                 (grid.cells[i] ? "#d62828" : "#70a37f") + "\"");
      }
    }
    out += "</g>\n";
  }

  if (opt.show_objects) {
    out += "<g id=\"objects\">\n";
    for (const auto& [id, obj] : world.objects) {
      const double r = std::holds_alternative<double>(obj.shape) ? obj.disc_radius() : 0.05;
      const bool attached = world.attached.count(id) > 0;
      out += c.circle(obj.pose.position(), std::max(r, 0.04),
                      std::string("fill=\"") + (attached ? "#f4a261" : "#2a9d8f") +
                          "\" stroke=\"#1d3557\" stroke-width=\"1\"");
      out += c.text(obj.pose.position() + geo::Vec2{0.08, 0.08}, id);
    }
    out += "</g>\n";
  }

  if (opt.show_trajectories && plan != nullptr) {
    out += "<g id=\"trajectories\">\n";
    for (std::size_t k = 0; k < plan->steps.size(); ++k) {
      const auto& step = plan->steps[k];
      out += "<g id=\"step" + std::to_string(k) + "\">\n";
      out += c.polyline(step.head.waypoints, "head",
                        "fill=\"none\" stroke=\"#1d6fb8\" stroke-width=\"2\"");
      out += c.polyline(step.policy_trace, "policy",
                        "fill=\"none\" stroke=\"#e76f51\" stroke-width=\"2.5\"");
      out += c.polyline(step.tail.waypoints, "tail",
                        "fill=\"none\" stroke=\"#2a9d8f\" stroke-width=\"2\" "
                        "stroke-dasharray=\"4,3\"");
      out += "</g>\n";
    }
    out += "</g>\n";
  }

  if (trace != nullptr) {
    out += "<g id=\"trace\">\n";
    for (const auto& e : *trace) {
      if (!e.config) continue;
      const char* color = "#999999";
      if (e.kind == "entry") color = "#1d6fb8";
      if (e.kind == "policy") color = "#e76f51";
      if (e.kind == "exit") color = "#2a9d8f";
      out += c.circle(e.config->base.position(), 0.06,
                      std::string("fill=\"") + color + "\" fill-opacity=\"0.9\"");
    }
    out += "</g>\n";
  }

  if (opt.show_robot) {
    out += "<g id=\"robot\">\n";
    const geo::Vec2 base = world.robot.base.position();
    const geo::Pose2 ee = geo::end_effector(world.robot, ws.footprint);
    out += c.circle(base, ws.footprint.base_radius,
                    "fill=\"#457b9d\" fill-opacity=\"0.8\" stroke=\"#1d3557\" stroke-width=\"2\"");
    out += c.line(base, base + world.robot.base.heading() * ws.footprint.base_radius,
                  "stroke=\"#f1faee\" stroke-width=\"2\"");
    if (world.robot.arm > 0.0)
      out += c.line(base + world.robot.base.heading() * ws.footprint.base_radius, ee.position(),
                    "stroke=\"#1d3557\" stroke-width=\"3\"");
    out += "</g>\n";
  }

  out += "</svg>\n";
  return out;
}

}  // namespace tasp::svg
