#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tasp/geometry.hpp"

namespace tasp::sim {

using AttrValue = std::variant<bool, double>;

class SimError : public std::runtime_error {
 public:
  enum class Code {
    Parse,
    Validation,
    UnknownEntity,
    UnknownAttribute,
    UnknownMode,
    GripperOccupied,
    OutOfReach,
    NotAttached,
    CollisionDuringExecution,
    TransitionWouldCollide,
  };

  SimError(Code code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct Tolerances {
  double grasp = 0.1;
  double place = 0.1;
};

struct Region {
  std::string id;
  geo::Polygon polygon;

  bool contains(const geo::Vec2& p) const { return geo::point_in_polygon(p, polygon); }
};

// Static side of a loaded scene: geometry, robot footprint, named regions.
struct Workspace {
  geo::Scene scene;  // obstacles hold every articulation mode; active modes live in WorldState
  geo::Footprint footprint;
  Tolerances tolerances;
  std::vector<Region> regions;
  std::string robot_id = "robot";

  const Region* find_region(const std::string& id) const {
    for (const auto& r : regions)
      if (r.id == id) return &r;
    return nullptr;
  }
};

// 1D row of erasable cells along a wall segment.
struct SurfaceGrid {
  std::string owner;
  geo::Vec2 a, b;
  std::vector<bool> cells;  // true = dirty
  double contact_tolerance = 0.05;

  geo::Vec2 cell_center(std::size_t i) const {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(cells.size());
    return a + (b - a) * t;
  }

  bool any_dirty() const {
    for (bool c : cells)
      if (c) return true;
    return false;
  }

  double distance_to(const geo::Vec2& p) const {
    return geo::distance_point_segment(p, a, b);
  }
};

struct ObjectRecord {
  std::string id;
  std::string type;
  geo::Pose2 pose;
  std::variant<double, geo::Polygon> shape = 0.05;  // disc radius or polygon
  std::map<std::string, AttrValue> attributes;
  std::optional<std::string> container;
  std::optional<std::string> articulation;           // obstacle id carrying the modes
  std::optional<std::string> articulation_mode;      // current mode, mirrors "open"
  std::optional<geo::Vec2> place_point;              // drop pose for surface objects

  double disc_radius() const {
    if (const double* r = std::get_if<double>(&shape)) return *r;
    throw SimError(SimError::Code::Validation, "object " + id + " has no disc shape");
  }

  geo::Vec2 anchor() const { return place_point ? *place_point : pose.position(); }
};

struct Event {
  std::string kind;    // "surface_contact"
  std::string target;  // surface owner
  std::size_t step = 0;
};

// Full low-level state. A value type: operations return new states.
struct WorldState {
  std::map<std::string, ObjectRecord> objects;
  geo::Configuration robot;
  std::set<std::string> attached;  // at most one entry (single gripper)
  std::map<std::string, SurfaceGrid> surfaces;

  const ObjectRecord& object(const std::string& id) const {
    auto it = objects.find(id);
    if (it == objects.end()) throw SimError(SimError::Code::UnknownEntity, "unknown object " + id);
    return it->second;
  }

  ObjectRecord& object(const std::string& id) {
    auto it = objects.find(id);
    if (it == objects.end()) throw SimError(SimError::Code::UnknownEntity, "unknown object " + id);
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Derived views.

// Scene with each articulated obstacle switched to the mode recorded in the
// world state.
inline geo::Scene active_scene(const Workspace& ws, const WorldState& world) {
  geo::Scene scene = ws.scene;
  for (const auto& [id, obj] : world.objects) {
    if (!obj.articulation) continue;
    geo::Obstacle* ob = scene.find(*obj.articulation);
    if (ob != nullptr && obj.articulation_mode) ob->active_mode = *obj.articulation_mode;
  }
  return scene;
}

inline std::vector<double> attachment_radii(const WorldState& world) {
  std::vector<double> radii;
  for (const auto& id : world.attached) radii.push_back(world.object(id).disc_radius());
  return radii;
}

inline bool robot_collision_free(const Workspace& ws, const WorldState& world) {
  const auto radii = attachment_radii(world);
  return geo::collision_free(active_scene(ws, world), world.robot, ws.footprint, radii);
}

// Region containing the robot base, if any. Regions are disjoint by
// validation, so at most one matches.
inline std::optional<std::string> robot_region(const Workspace& ws, const WorldState& world) {
  for (const auto& r : ws.regions)
    if (r.contains(world.robot.base.position())) return r.id;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Invariant checks shared by the loader and the mutating operations.

inline void validate_world(const Workspace& ws, const WorldState& world) {
  if (world.attached.size() > 1)
    throw SimError(SimError::Code::Validation, "more than one object attached to the gripper");
  const geo::Pose2 ee = geo::end_effector(world.robot, ws.footprint);
  for (const auto& id : world.attached) {
    const ObjectRecord& obj = world.object(id);
    if (std::hypot(obj.pose.x - ee.x, obj.pose.y - ee.y) > 1e-9)
      throw SimError(SimError::Code::Validation,
                     "attached object " + id + " pose must equal the end-effector pose");
  }
  for (const auto& [id, obj] : world.objects) {
    if (obj.container && !world.objects.count(*obj.container))
      throw SimError(SimError::Code::Validation,
                     "object " + id + " is contained in unknown object " + *obj.container);
    if (obj.articulation) {
      const geo::Obstacle* ob = ws.scene.find(*obj.articulation);
      if (ob == nullptr || ob->modes.empty())
        throw SimError(SimError::Code::Validation,
                       "object " + id + " references missing articulated obstacle");
      if (!obj.articulation_mode || !ob->modes.count(*obj.articulation_mode))
        throw SimError(SimError::Code::Validation,
                       "object " + id + " has no valid articulation mode");
      const auto open_attr = obj.attributes.find("open");
      if (open_attr == obj.attributes.end() || !std::holds_alternative<bool>(open_attr->second) ||
          std::get<bool>(open_attr->second) != (*obj.articulation_mode == "open"))
        throw SimError(SimError::Code::Validation,
                       "object " + id + ": 'open' attribute inconsistent with articulation mode");
    }
  }
  for (const auto& [owner, grid] : world.surfaces) {
    if (grid.cells.empty())
      throw SimError(SimError::Code::Validation, "surface " + owner + " has no cells");
    const ObjectRecord& obj = world.object(owner);
    const auto dirty_attr = obj.attributes.find("dirty");
    if (dirty_attr == obj.attributes.end() || !std::holds_alternative<bool>(dirty_attr->second) ||
        std::get<bool>(dirty_attr->second) != grid.any_dirty())
      throw SimError(SimError::Code::Validation,
                     "surface " + owner + ": 'dirty' attribute must equal OR over grid cells");
  }
  for (std::size_t i = 0; i < ws.regions.size(); ++i)
    for (std::size_t j = i + 1; j < ws.regions.size(); ++j)
      for (const auto& v : ws.regions[i].polygon)
        if (ws.regions[j].contains(v))
          throw SimError(SimError::Code::Validation, "regions " + ws.regions[i].id + " and " +
                                                         ws.regions[j].id + " overlap");
}

// ---------------------------------------------------------------------------
// Scene file loading. JSON with top-level keys: bounds, robot, tolerances,
// regions, obstacles, objects, surfaces. Lengths in meters, angles in radians.

struct LoadedScene {
  Workspace workspace;
  WorldState world;
};

namespace detail {

inline geo::Vec2 to_vec2(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline geo::Polygon to_polygon(const nlohmann::json& j) {
  geo::Polygon poly;
  for (const auto& v : j) poly.push_back(to_vec2(v));
  return poly;
}

inline geo::Pose2 to_pose(const nlohmann::json& j) {
  return geo::Pose2(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace detail

inline LoadedScene load_scene(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SimError(SimError::Code::Parse, std::string("scene parse error: ") + e.what());
  }

  LoadedScene out;
  try {
    const auto& b = j.at("bounds");
    out.workspace.scene.bounds = {b.at(0).get<double>(), b.at(1).get<double>(),
                                  b.at(2).get<double>(), b.at(3).get<double>()};

    const auto& robot = j.at("robot");
    out.world.robot.base = detail::to_pose(robot.at("pose"));
    out.world.robot.arm = robot.value("arm", 0.0);
    if (robot.contains("footprint")) {
      out.workspace.footprint.base_radius = robot.at("footprint").at("base_radius").get<double>();
      out.workspace.footprint.arm_max_reach =
          robot.at("footprint").at("arm_max_reach").get<double>();
    }
    out.workspace.footprint.validate();
    if (robot.contains("id")) out.workspace.robot_id = robot.at("id").get<std::string>();

    if (j.contains("tolerances")) {
      out.workspace.tolerances.grasp = j.at("tolerances").value("grasp", 0.1);
      out.workspace.tolerances.place = j.at("tolerances").value("place", 0.1);
    }

    for (const auto& r : j.value("regions", nlohmann::json::array())) {
      Region region;
      region.id = r.at("id").get<std::string>();
      if (r.contains("rect")) {
        const auto& q = r.at("rect");
        const double x0 = q.at(0).get<double>(), y0 = q.at(1).get<double>();
        const double x1 = q.at(2).get<double>(), y1 = q.at(3).get<double>();
        region.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
      } else {
        region.polygon = detail::to_polygon(r.at("polygon"));
      }
      geo::validate_polygon(region.polygon, "region " + region.id);
      out.workspace.regions.push_back(std::move(region));
    }

    for (const auto& o : j.value("obstacles", nlohmann::json::array())) {
      geo::Obstacle ob;
      ob.id = o.at("id").get<std::string>();
      if (o.contains("modes")) {
        for (const auto& [label, poly] : o.at("modes").items())
          ob.modes[label] = detail::to_polygon(poly);
        ob.active_mode = o.at("active_mode").get<std::string>();
        ob.polygon = o.contains("polygon") ? detail::to_polygon(o.at("polygon"))
                                           : ob.modes.at(*ob.active_mode);
      } else {
        ob.polygon = detail::to_polygon(o.at("polygon"));
      }
      ob.validate();
      out.workspace.scene.obstacles.push_back(std::move(ob));
    }

    for (const auto& o : j.value("objects", nlohmann::json::array())) {
      ObjectRecord obj;
      obj.id = o.at("id").get<std::string>();
      obj.type = o.at("type").get<std::string>();
      obj.pose = detail::to_pose(o.at("pose"));
      if (o.contains("shape")) {
        if (o.at("shape").contains("disc"))
          obj.shape = o.at("shape").at("disc").get<double>();
        else
          obj.shape = detail::to_polygon(o.at("shape").at("polygon"));
      }
      const nlohmann::json attrs = o.value("attributes", nlohmann::json::object());
      for (const auto& [name, value] : attrs.items()) {
        if (value.is_boolean())
          obj.attributes[name] = value.get<bool>();
        else
          obj.attributes[name] = value.get<double>();
      }
      if (o.contains("container")) obj.container = o.at("container").get<std::string>();
      if (o.contains("articulation")) {
        obj.articulation = o.at("articulation").get<std::string>();
        const geo::Obstacle* ob = out.workspace.scene.find(*obj.articulation);
        if (ob != nullptr && ob->active_mode) obj.articulation_mode = *ob->active_mode;
      }
      if (o.contains("place_point")) obj.place_point = detail::to_vec2(o.at("place_point"));
      out.world.objects[obj.id] = std::move(obj);
    }

    for (const auto& s : j.value("surfaces", nlohmann::json::array())) {
      SurfaceGrid grid;
      grid.owner = s.at("owner").get<std::string>();
      grid.a = detail::to_vec2(s.at("segment").at(0));
      grid.b = detail::to_vec2(s.at("segment").at(1));
      const auto n = s.at("cells").get<std::size_t>();
      grid.cells.assign(n, true);
      if (s.contains("dirty")) {
        const auto& mask = s.at("dirty");
        if (mask.size() != n)
          throw SimError(SimError::Code::Validation,
                         "surface " + grid.owner + ": dirty mask length mismatch");
        for (std::size_t i = 0; i < n; ++i) grid.cells[i] = mask.at(i).get<bool>();
      }
      grid.contact_tolerance = s.value("contact_tolerance", 0.05);
      out.world.surfaces[grid.owner] = std::move(grid);
    }

    if (j.contains("attached")) {
      for (const auto& id : j.at("attached")) out.world.attached.insert(id.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw SimError(SimError::Code::Parse, std::string("scene parse error: ") + e.what());
  }

  validate_world(out.workspace, out.world);
  if (!robot_collision_free(out.workspace, out.world))
    throw SimError(SimError::Code::Validation, "robot starts in collision");
  return out;
}

// ---------------------------------------------------------------------------
// Observation and manipulation.

inline AttrValue observe(const WorldState& world, const std::string& id,
                         const std::string& attribute) {
  const ObjectRecord& obj = world.object(id);
  auto it = obj.attributes.find(attribute);
  if (it == obj.attributes.end())
    throw SimError(SimError::Code::UnknownAttribute,
                   "object " + id + " declares no attribute " + attribute);
  return it->second;
}

inline bool observe_bool(const WorldState& world, const std::string& id,
                         const std::string& attribute) {
  const AttrValue v = observe(world, id, attribute);
  if (!std::holds_alternative<bool>(v))
    throw SimError(SimError::Code::UnknownAttribute, "attribute " + attribute + " is not boolean");
  return std::get<bool>(v);
}

inline WorldState attach(const Workspace& ws, const WorldState& world, const std::string& id) {
  if (!world.attached.empty())
    throw SimError(SimError::Code::GripperOccupied,
                   "gripper already holds " + *world.attached.begin());
  WorldState next = world;
  ObjectRecord& obj = next.object(id);
  const geo::Pose2 ee = geo::end_effector(world.robot, ws.footprint);
  if (std::hypot(obj.pose.x - ee.x, obj.pose.y - ee.y) > ws.tolerances.grasp)
    throw SimError(SimError::Code::OutOfReach, "end effector is not within grasp tolerance of " + id);
  obj.pose = ee;
  obj.container.reset();
  next.attached.insert(id);
  return next;
}

inline WorldState detach(const Workspace& ws, const WorldState& world, const std::string& id,
                         const std::string& support) {
  if (!world.attached.count(id))
    throw SimError(SimError::Code::NotAttached, "object " + id + " is not attached");
  WorldState next = world;
  const ObjectRecord& sup = next.object(support);
  const geo::Pose2 ee = geo::end_effector(world.robot, ws.footprint);
  const geo::Vec2 target = sup.anchor();
  if (std::hypot(target.x - ee.x, target.y - ee.y) > ws.tolerances.place)
    throw SimError(SimError::Code::OutOfReach,
                   "support " + support + " is not within place tolerance");
  ObjectRecord& obj = next.object(id);
  obj.pose = ee;  // frozen at the release pose
  obj.container = support;
  next.attached.erase(id);
  return next;
}

// Keeps the dirty attribute of the owning object equal to OR over the cells.
inline WorldState set_surface_cell(const WorldState& world, const std::string& owner,
                                   std::size_t cell, bool dirty) {
  WorldState next = world;
  auto it = next.surfaces.find(owner);
  if (it == next.surfaces.end())
    throw SimError(SimError::Code::UnknownEntity, "no surface owned by " + owner);
  if (cell >= it->second.cells.size())
    throw SimError(SimError::Code::UnknownEntity, "surface cell index out of range");
  it->second.cells[cell] = dirty;
  next.object(owner).attributes["dirty"] = it->second.any_dirty();
  return next;
}

struct StepResult {
  WorldState world;
  std::vector<Event> events;
};

// Replays a trajectory through the world: moves the robot, drags attached
// objects, records surface contacts. The trajectory must have been validated;
// a collision here is an error, not a planning outcome.
inline StepResult step_trajectory(const Workspace& ws, const WorldState& world,
                                  const geo::Trajectory& traj, double resolution) {
  StepResult out{world, {}};
  const geo::Scene scene = active_scene(ws, world);
  const auto radii = attachment_radii(world);

  std::map<std::string, bool> in_contact;
  std::size_t step_index = 0;

  auto visit = [&](const geo::Configuration& c) {
    if (!geo::collision_free(scene, c, ws.footprint, radii))
      throw SimError(SimError::Code::CollisionDuringExecution,
                     "collision during trajectory execution");
    const geo::Pose2 ee = geo::end_effector(c, ws.footprint);
    for (const auto& [owner, grid] : out.world.surfaces) {
      const bool touching = grid.distance_to(ee.position()) <= grid.contact_tolerance;
      bool& prev = in_contact[owner];
      if (touching && !prev) out.events.push_back({"surface_contact", owner, step_index});
      prev = touching;
    }
    ++step_index;
  };

  visit(traj.waypoints.front());
  for (std::size_t i = 0; i + 1 < traj.waypoints.size(); ++i) {
    const auto& a = traj.waypoints[i];
    const auto& b = traj.waypoints[i + 1];
    double attach_reach = 0.0;
    for (double r : radii) attach_reach = std::max(attach_reach, r);
    const double bound = geo::max_body_displacement(a, b, ws.footprint, attach_reach);
    const auto steps = static_cast<std::size_t>(std::ceil(bound / resolution));
    for (std::size_t s = 1; s <= std::max<std::size_t>(steps, 1); ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(std::max<std::size_t>(steps, 1));
      visit(geo::interpolate(a, b, t));
    }
  }

  out.world.robot = traj.waypoints.back();
  const geo::Pose2 ee = geo::end_effector(out.world.robot, ws.footprint);
  for (const auto& id : out.world.attached) out.world.object(id).pose = ee;
  return out;
}

// Switches an articulated object to `mode`, updating the open attribute and
// the active obstacle polygon atomically. The robot (and anything attached)
// must be collision-free under the new mode.
inline WorldState set_articulation(const Workspace& ws, const WorldState& world,
                                   const std::string& id, const std::string& mode) {
  WorldState next = world;
  ObjectRecord& obj = next.object(id);
  if (!obj.articulation)
    throw SimError(SimError::Code::UnknownMode, "object " + id + " is not articulated");
  const geo::Obstacle* ob = ws.scene.find(*obj.articulation);
  if (ob == nullptr || !ob->modes.count(mode))
    throw SimError(SimError::Code::UnknownMode, "object " + id + " has no mode " + mode);
  if (obj.articulation_mode == mode) return next;  // idempotent
  obj.articulation_mode = mode;
  obj.attributes["open"] = (mode == "open");
  if (!robot_collision_free(ws, next))
    throw SimError(SimError::Code::TransitionWouldCollide,
                   "articulating " + id + " to " + mode + " would collide with the robot");
  return next;
}

}  // namespace tasp::sim
