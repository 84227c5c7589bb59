#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tasp/motion.hpp"
#include "tasp/rng.hpp"
#include "tasp/symbolic.hpp"
#include "tasp/world.hpp"

namespace tasp::skills {

class SkillError : public std::runtime_error {
 public:
  enum class Code { InitiationViolated, PolicyFailure };
  SkillError(Code code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// ---------------------------------------------------------------------------
// Conditions: a conjunction of primitive spatial constraints over
// (configuration, object poses, attachment) plus observational attribute
// literals. The kinematic envelope drops the observational part.

struct WithinDistance {  // base center within [min, max] of an anchor point
  geo::Vec2 anchor;
  double min_dist = 0.0;
  double max_dist = 0.0;
};

struct FacingPoint {  // heading within tolerance of the bearing to the anchor
  geo::Vec2 anchor;
  double tolerance = 0.3;
};

struct ArmBetween {
  double lo = 0.0;
  double hi = 1.0;
};

struct InRegion {
  std::string region;
  geo::Polygon polygon;
};

struct EeWithin {  // end effector within tolerance of an anchor point
  geo::Vec2 anchor;
  double tolerance = 0.1;
};

struct EeNearSegment {  // end effector within tolerance of a wall segment
  geo::Vec2 a, b;
  double tolerance = 0.05;
};

struct AttachedIs {  // gripper state: nullopt = empty, otherwise that object
  std::optional<std::string> object;
};

using SpatialConstraint = std::variant<WithinDistance, FacingPoint, ArmBetween, InRegion, EeWithin,
                                       EeNearSegment, AttachedIs>;

struct ObservationLiteral {
  std::string object;
  std::string attribute;
  bool value = true;
};

struct Condition {
  std::vector<SpatialConstraint> spatial;
  std::vector<ObservationLiteral> observational;
};

// Projection onto the kinematic envelope: observational conjuncts drop,
// spatial conjuncts stay. Idempotent.
inline Condition kinematic_envelope(const Condition& c) { return Condition{c.spatial, {}}; }

inline bool spatial_holds(const Condition& c, const sim::Workspace& ws,
                          const geo::Configuration& config, const sim::WorldState& world) {
  const geo::Vec2 base = config.base.position();
  const geo::Pose2 ee = geo::end_effector(config, ws.footprint);
  for (const auto& constraint : c.spatial) {
    const bool ok = std::visit(
        [&](const auto& k) -> bool {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, WithinDistance>) {
            const double d = geo::distance(base, k.anchor);
            return d >= k.min_dist && d <= k.max_dist;
          } else if constexpr (std::is_same_v<T, FacingPoint>) {
            const double bearing = std::atan2(k.anchor.y - base.y, k.anchor.x - base.x);
            return geo::ang_diff(bearing, config.base.theta) <= k.tolerance;
          } else if constexpr (std::is_same_v<T, ArmBetween>) {
            return config.arm >= k.lo - 1e-12 && config.arm <= k.hi + 1e-12;
          } else if constexpr (std::is_same_v<T, InRegion>) {
            return geo::point_in_polygon(base, k.polygon);
          } else if constexpr (std::is_same_v<T, EeWithin>) {
            return geo::distance(ee.position(), k.anchor) <= k.tolerance;
          } else if constexpr (std::is_same_v<T, EeNearSegment>) {
            return geo::distance_point_segment(ee.position(), k.a, k.b) <= k.tolerance;
          } else {
            static_assert(std::is_same_v<T, AttachedIs>);
            if (k.object.has_value()) return world.attached.count(*k.object) > 0;
            return world.attached.empty();
          }
        },
        constraint);
    if (!ok) return false;
  }
  return true;
}

// Full condition check on a world state: spatial conjuncts on the current
// configuration and poses, observational conjuncts through observe.
inline bool check(const Condition& c, const sim::Workspace& ws, const sim::WorldState& world) {
  if (!spatial_holds(c, ws, world.robot, world)) return false;
  for (const auto& lit : c.observational)
    if (sim::observe_bool(world, lit.object, lit.attribute) != lit.value) return false;
  return true;
}

// Satisfaction test used on termination envelopes: a termination condition
// with no spatial conjuncts has an empty envelope, which no configuration
// satisfies (there is nothing to escape from).
inline bool termination_envelope_satisfied(const Condition& envelope, const sim::Workspace& ws,
                                           const geo::Configuration& config,
                                           const sim::WorldState& world) {
  if (envelope.spatial.empty()) return false;
  return spatial_holds(envelope, ws, config, world);
}

// ---------------------------------------------------------------------------
// Skill registry: maps symbolic action names to skill kinds, parameter
// bindings and envelope constraint parameters.

enum class SkillKind { GoTo, Pick, Place, Articulate, Erase };

struct SkillSpec {
  std::string action;      // symbolic schema name
  std::string skill_name;  // object-centric skill this action refines to
  SkillKind kind = SkillKind::GoTo;
  std::vector<std::string> skill_args;  // schema variables shown in the skill grounding
  std::string target_param;             // acted-on object (anchor source)
  std::string zone_param;               // schema variable naming the region
  std::string held_param;               // object that must be attached (Place, Erase)
  std::string mode;                     // articulation target mode
  double annulus_min = 0.5, annulus_max = 1.0;
  double facing_tol = 0.3;
  double arm_min = 0.0, arm_max = 1.0;
  double reach_tol = 0.25;
  bool require_handempty = false;
};

struct GroundedSkill {
  SkillSpec spec;
  std::map<std::string, std::string> binding;  // schema variable -> object

  std::string arg(const std::string& param) const {
    auto it = binding.find(param);
    if (it == binding.end())
      throw std::invalid_argument("skill " + spec.skill_name + ": unbound parameter " + param);
    return it->second;
  }

  std::string str() const {
    std::string s = spec.skill_name + "(";
    for (std::size_t i = 0; i < spec.skill_args.size(); ++i) {
      if (i > 0) s += ",";
      s += arg(spec.skill_args[i]);
    }
    return s + ")";
  }
};

struct SkillRegistry {
  std::map<std::string, SkillSpec> by_action;

  const SkillSpec* find(const std::string& action) const {
    auto it = by_action.find(action);
    return it == by_action.end() ? nullptr : &it->second;
  }

  GroundedSkill ground(const sym::GroundAction& action, const sym::Domain& domain) const {
    const SkillSpec* spec = find(action.name);
    if (spec == nullptr)
      throw std::invalid_argument("no skill registered for action " + action.name);
    const sym::ActionSchema* schema = nullptr;
    for (const auto& s : domain.schemas)
      if (s.name == action.name) schema = &s;
    if (schema == nullptr || schema->parameters.size() != action.args.size())
      throw std::invalid_argument("schema/action mismatch for " + action.name);
    GroundedSkill g;
    g.spec = *spec;
    for (std::size_t i = 0; i < schema->parameters.size(); ++i)
      g.binding[schema->parameters[i]] = action.args[i];
    return g;
  }
};

inline SkillRegistry parse_registry(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw sim::SimError(sim::SimError::Code::Parse, std::string("registry parse error: ") + e.what());
  }
  SkillRegistry reg;
  static const std::map<std::string, SkillKind> kinds{{"goto", SkillKind::GoTo},
                                                      {"pick", SkillKind::Pick},
                                                      {"place", SkillKind::Place},
                                                      {"articulate", SkillKind::Articulate},
                                                      {"erase", SkillKind::Erase}};
  for (const auto& [action, e] : j.items()) {
    SkillSpec s;
    s.action = action;
    s.skill_name = e.at("skill").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    auto it = kinds.find(kind);
    if (it == kinds.end())
      throw sim::SimError(sim::SimError::Code::Parse, "unknown skill kind " + kind);
    s.kind = it->second;
    for (const auto& a : e.value("skill_args", nlohmann::json::array()))
      s.skill_args.push_back(a.get<std::string>());
    s.target_param = e.value("target", std::string{});
    s.zone_param = e.value("zone", std::string{});
    s.held_param = e.value("held", std::string{});
    s.mode = e.value("mode", std::string{});
    if (e.contains("annulus")) {
      s.annulus_min = e.at("annulus").at(0).get<double>();
      s.annulus_max = e.at("annulus").at(1).get<double>();
    }
    s.facing_tol = e.value("facing_tol", 0.3);
    if (e.contains("arm_range")) {
      s.arm_min = e.at("arm_range").at(0).get<double>();
      s.arm_max = e.at("arm_range").at(1).get<double>();
    }
    s.reach_tol = e.value("reach_tol", 0.25);
    s.require_handempty = e.value("handempty", false);
    reg.by_action[action] = std::move(s);
  }
  return reg;
}

// ---------------------------------------------------------------------------
// Initiation / termination conditions for a grounded skill, built against the
// current world (anchor points resolve to current object poses).

namespace detail {

inline InRegion region_constraint(const sim::Workspace& ws, const std::string& region_id) {
  const sim::Region* r = ws.find_region(region_id);
  if (r == nullptr)
    throw std::invalid_argument("scene declares no region named " + region_id);
  return InRegion{r->id, r->polygon};
}

inline geo::Vec2 target_anchor(const GroundedSkill& g, const sim::WorldState& world) {
  return world.object(g.arg(g.spec.target_param)).anchor();
}

}  // namespace detail

inline Condition initiation(const GroundedSkill& g, const sim::Workspace& ws,
                            const sim::WorldState& world) {
  const SkillSpec& s = g.spec;
  Condition c;
  if (!s.zone_param.empty())
    c.spatial.push_back(detail::region_constraint(ws, g.arg(s.zone_param)));
  switch (s.kind) {
    case SkillKind::GoTo:
      c.spatial.push_back(ArmBetween{s.arm_min, s.arm_max});
      break;
    case SkillKind::Pick: {
      const geo::Vec2 anchor = world.object(g.arg(s.target_param)).pose.position();
      c.spatial.push_back(EeWithin{anchor, ws.tolerances.grasp});
      c.spatial.push_back(WithinDistance{anchor, s.annulus_min, s.annulus_max});
      c.spatial.push_back(FacingPoint{anchor, s.facing_tol});
      c.spatial.push_back(ArmBetween{s.arm_min, s.arm_max});
      c.spatial.push_back(AttachedIs{std::nullopt});
      break;
    }
    case SkillKind::Place: {
      const geo::Vec2 anchor = detail::target_anchor(g, world);
      c.spatial.push_back(EeWithin{anchor, ws.tolerances.place});
      c.spatial.push_back(WithinDistance{anchor, s.annulus_min, s.annulus_max});
      c.spatial.push_back(FacingPoint{anchor, s.facing_tol});
      c.spatial.push_back(ArmBetween{s.arm_min, s.arm_max});
      c.spatial.push_back(AttachedIs{g.arg(s.held_param)});
      break;
    }
    case SkillKind::Articulate: {
      const geo::Vec2 anchor = detail::target_anchor(g, world);
      c.spatial.push_back(WithinDistance{anchor, s.annulus_min, s.annulus_max});
      c.spatial.push_back(FacingPoint{anchor, s.facing_tol});
      c.spatial.push_back(ArmBetween{s.arm_min, s.arm_max});
      if (s.require_handempty) c.spatial.push_back(AttachedIs{std::nullopt});
      // The object must still be in the source state.
      c.observational.push_back({g.arg(s.target_param), "open", s.mode != "open"});
      break;
    }
    case SkillKind::Erase: {
      const std::string board = g.arg(s.target_param);
      auto it = world.surfaces.find(board);
      if (it == world.surfaces.end())
        throw std::invalid_argument("no surface grid for board " + board);
      c.spatial.push_back(EeNearSegment{it->second.a, it->second.b, it->second.contact_tolerance});
      c.spatial.push_back(ArmBetween{s.arm_min, s.arm_max});
      c.spatial.push_back(AttachedIs{g.arg(s.held_param)});
      c.observational.push_back({board, "dirty", true});
      break;
    }
  }
  return c;
}

// Termination condition, anchored in the world at skill entry (before the
// policy runs) so that site anchors stay put even when the object moves.
// Takes the workspace to mirror initiation(), though none of the built-in
// termination conditions need it.
inline Condition termination(const GroundedSkill& g, const sim::Workspace& /*ws*/,
                             const sim::WorldState& world_at_entry) {
  const SkillSpec& s = g.spec;
  Condition c;
  switch (s.kind) {
    case SkillKind::GoTo:
      break;  // empty condition: trivially terminal, empty envelope
    case SkillKind::Pick: {
      const geo::Vec2 site = world_at_entry.object(g.arg(s.target_param)).pose.position();
      c.spatial.push_back(WithinDistance{site, 0.0, s.annulus_max});
      c.spatial.push_back(ArmBetween{s.arm_min, 1.0});
      c.spatial.push_back(AttachedIs{g.arg(s.target_param)});
      break;
    }
    case SkillKind::Place: {
      const geo::Vec2 site = detail::target_anchor(g, world_at_entry);
      c.spatial.push_back(WithinDistance{site, 0.0, s.annulus_max});
      c.spatial.push_back(ArmBetween{s.arm_min, 1.0});
      c.spatial.push_back(AttachedIs{std::nullopt});
      break;
    }
    case SkillKind::Articulate: {
      const geo::Vec2 anchor = detail::target_anchor(g, world_at_entry);
      c.spatial.push_back(WithinDistance{anchor, 0.0, s.annulus_max});
      if (s.require_handempty) c.spatial.push_back(AttachedIs{std::nullopt});
      c.observational.push_back({g.arg(s.target_param), "open", s.mode == "open"});
      break;
    }
    case SkillKind::Erase: {
      const std::string board = g.arg(s.target_param);
      const auto& grid = world_at_entry.surfaces.at(board);
      c.spatial.push_back(EeNearSegment{grid.a, grid.b, grid.contact_tolerance});
      c.spatial.push_back(AttachedIs{g.arg(s.held_param)});
      c.observational.push_back({board, "dirty", false});
      break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Pose generators (the inverse abstraction): deterministic seeded streams of
// configurations satisfying the kinematic envelope of the initiation
// condition, collision checked against the current world.

class EntrySampler {
 public:
  EntrySampler(GroundedSkill g, const sim::Workspace& ws, const sim::WorldState& world,
               std::size_t max_attempts = 400)
      : g_(std::move(g)),
        ws_(&ws),
        world_(&world),
        scene_(sim::active_scene(ws, world)),
        radii_(sim::attachment_radii(world)),
        envelope_(kinematic_envelope(initiation(g_, ws, world))),
        attempts_left_(max_attempts) {}

  const Condition& envelope() const { return envelope_; }

  // Samples drawn and rejected (envelope miss or collision) so far.
  std::size_t rejections() const { return rejections_; }

  // Next valid entry configuration, or nullopt once the attempt budget is
  // spent. The stream is deterministic given the rng.
  std::optional<geo::Configuration> next(Rng& rng) {
    while (attempts_left_ > 0) {
      --attempts_left_;
      const auto candidate = propose(rng);
      if (!candidate) continue;
      if (!spatial_holds(envelope_, *ws_, *candidate, *world_) ||
          !geo::collision_free(scene_, *candidate, ws_->footprint, radii_)) {
        ++rejections_;
        continue;
      }
      return candidate;
    }
    return std::nullopt;
  }

 private:
  std::optional<geo::Configuration> propose(Rng& rng) {
    const SkillSpec& s = g_.spec;
    switch (s.kind) {
      case SkillKind::GoTo: {
        const sim::Region* r = ws_->find_region(g_.arg(s.zone_param));
        if (r == nullptr) return std::nullopt;
        geo::Bounds bb{r->polygon[0].x, r->polygon[0].y, r->polygon[0].x, r->polygon[0].y};
        for (const auto& v : r->polygon) {
          bb.xmin = std::min(bb.xmin, v.x);
          bb.ymin = std::min(bb.ymin, v.y);
          bb.xmax = std::max(bb.xmax, v.x);
          bb.ymax = std::max(bb.ymax, v.y);
        }
        geo::Configuration c;
        c.base.x = rng.uniform(bb.xmin, bb.xmax);
        c.base.y = rng.uniform(bb.ymin, bb.ymax);
        c.base.theta = rng.uniform(-geo::kPi, geo::kPi);
        c.arm = rng.uniform(s.arm_min, s.arm_max);
        return c;
      }
      case SkillKind::Pick:
      case SkillKind::Place: {
        const geo::Vec2 anchor = s.kind == SkillKind::Pick
                                     ? world_->object(g_.arg(s.target_param)).pose.position()
                                     : detail::target_anchor(g_, *world_);
        const double tol =
            (s.kind == SkillKind::Pick ? ws_->tolerances.grasp : ws_->tolerances.place) * 0.8;
        const double off_r = rng.uniform(0.0, tol);
        const double off_a = rng.uniform(-geo::kPi, geo::kPi);
        const geo::Vec2 ee{anchor.x + off_r * std::cos(off_a), anchor.y + off_r * std::sin(off_a)};
        const double arm = rng.uniform(s.arm_min, s.arm_max);
        const double reach = ws_->footprint.base_radius + arm * ws_->footprint.arm_max_reach;
        const double approach = rng.uniform(-geo::kPi, geo::kPi);
        geo::Configuration c;
        c.base.theta = geo::normalize_angle(approach + geo::kPi);  // face the target
        c.base.x = ee.x - reach * std::cos(c.base.theta);
        c.base.y = ee.y - reach * std::sin(c.base.theta);
        c.arm = arm;
        return c;
      }
      case SkillKind::Articulate: {
        const geo::Vec2 anchor = detail::target_anchor(g_, *world_);
        const double r = rng.uniform(s.annulus_min, s.annulus_max);
        const double psi = rng.uniform(-geo::kPi, geo::kPi);
        geo::Configuration c;
        c.base.x = anchor.x + r * std::cos(psi);
        c.base.y = anchor.y + r * std::sin(psi);
        const double bearing = std::atan2(anchor.y - c.base.y, anchor.x - c.base.x);
        c.base.theta =
            geo::normalize_angle(bearing + rng.uniform(-s.facing_tol, s.facing_tol) * 0.8);
        c.arm = rng.uniform(s.arm_min, s.arm_max);
        return c;
      }
      case SkillKind::Erase: {
        auto it = world_->surfaces.find(g_.arg(s.target_param));
        if (it == world_->surfaces.end()) return std::nullopt;
        const sim::SurfaceGrid& grid = it->second;
        const double t = rng.uniform(0.0, 1.0);
        const geo::Vec2 on = grid.a + (grid.b - grid.a) * t;
        geo::Vec2 tangent = grid.b - grid.a;
        const double len = tangent.norm();
        if (len == 0.0) return std::nullopt;
        tangent = tangent * (1.0 / len);
        const geo::Vec2 normal{-tangent.y, tangent.x};
        const double side = rng.chance(0.5) ? 1.0 : -1.0;
        const double arm = rng.uniform(s.arm_min, s.arm_max);
        const double reach = ws_->footprint.base_radius + arm * ws_->footprint.arm_max_reach;
        geo::Configuration c;
        c.base.x = on.x + side * normal.x * reach;
        c.base.y = on.y + side * normal.y * reach;
        c.base.theta = geo::normalize_angle(std::atan2(-side * normal.y, -side * normal.x));
        c.arm = arm;
        return c;
      }
    }
    return std::nullopt;
  }

  GroundedSkill g_;
  const sim::Workspace* ws_;
  const sim::WorldState* world_;
  geo::Scene scene_;
  std::vector<double> radii_;
  Condition envelope_;
  std::size_t attempts_left_;
  std::size_t rejections_ = 0;
};

// Exit configurations: collision-free, outside the termination envelope, and
// (when the skill is zone-bound) still inside the zone so the symbolic state
// stays faithful. Arm retraction is tried first, then radial back-away.
class ExitSampler {
 public:
  ExitSampler(const GroundedSkill& g, const sim::Workspace& ws, const sim::WorldState& world_after,
              Condition termination_envelope, std::size_t max_attempts = 200)
      : ws_(&ws),
        world_(&world_after),
        scene_(sim::active_scene(ws, world_after)),
        radii_(sim::attachment_radii(world_after)),
        envelope_(std::move(termination_envelope)),
        attempts_left_(max_attempts) {
    if (!g.spec.zone_param.empty()) {
      const sim::Region* r = ws.find_region(g.arg(g.spec.zone_param));
      if (r != nullptr) zone_ = InRegion{r->id, r->polygon};
    }
  }

  std::optional<geo::Configuration> next(Rng& rng) {
    while (attempts_left_ > 0) {
      --attempts_left_;
      geo::Configuration c = world_->robot;
      if (first_) {
        first_ = false;
        c.arm = 0.0;  // stow
      } else {
        c.arm = rng.uniform(0.0, 0.2);
        const double back = rng.uniform(0.2, 0.9);
        const double drift = rng.uniform(-0.6, 0.6);
        c.base.x -= back * std::cos(c.base.theta) - drift * std::sin(c.base.theta);
        c.base.y -= back * std::sin(c.base.theta) + drift * std::cos(c.base.theta);
      }
      if (!accept(c)) continue;
      return c;
    }
    return std::nullopt;
  }

  bool accept(const geo::Configuration& c) const {
    if (termination_envelope_satisfied(envelope_, *ws_, c, *world_)) return false;
    if (zone_ && !geo::point_in_polygon(c.base.position(), zone_->polygon)) return false;
    return geo::collision_free(scene_, c, ws_->footprint, radii_);
  }

 private:
  const sim::Workspace* ws_;
  const sim::WorldState* world_;
  geo::Scene scene_;
  std::vector<double> radii_;
  Condition envelope_;
  std::optional<InRegion> zone_;
  bool first_ = true;
  std::size_t attempts_left_;
};

// ---------------------------------------------------------------------------
// Policies: deterministic world transformers standing in for the platform
// controllers. Each returns the successor world plus a configuration trace
// and a log of attribute changes.

struct PolicyOutcome {
  sim::WorldState world;
  std::vector<geo::Configuration> trace;
  std::vector<std::string> attribute_changes;
};

namespace detail {

inline void require_collision_free(const sim::Workspace& ws, const sim::WorldState& world,
                                   const geo::Configuration& c, const char* what) {
  if (!geo::collision_free(sim::active_scene(ws, world), c, ws.footprint,
                           sim::attachment_radii(world)))
    throw SkillError(SkillError::Code::PolicyFailure, std::string(what) + ": trace in collision");
}

}  // namespace detail

inline PolicyOutcome execute_policy(const GroundedSkill& g, const sim::Workspace& ws,
                                    const sim::WorldState& world) {
  if (!check(initiation(g, ws, world), ws, world))
    throw SkillError(SkillError::Code::InitiationViolated,
                     "initiation condition does not hold for " + g.str());

  const SkillSpec& s = g.spec;
  PolicyOutcome out{world, {world.robot}, {}};
  switch (s.kind) {
    case SkillKind::GoTo:
      break;  // navigation happens in the head plan; the policy is identity
    case SkillKind::Pick: {
      out.world = sim::attach(ws, out.world, g.arg(s.target_param));
      break;
    }
    case SkillKind::Place: {
      out.world = sim::detach(ws, out.world, g.arg(s.held_param), g.arg(s.target_param));
      break;
    }
    case SkillKind::Articulate: {
      // Scripted approach: extend the arm to the handle, retract, then switch
      // the articulation mode.
      const geo::Vec2 anchor = detail::target_anchor(g, out.world);
      geo::Configuration c = out.world.robot;
      const double start_arm = c.arm;
      bool reached = false;
      for (double arm = start_arm; arm <= 1.0 + 1e-9; arm += 0.05) {
        geo::Configuration probe = c;
        probe.arm = std::min(arm, 1.0);
        if (!geo::collision_free(sim::active_scene(ws, out.world), probe, ws.footprint,
                                 sim::attachment_radii(out.world)))
          break;
        c = probe;
        out.trace.push_back(c);
        const geo::Pose2 ee = geo::end_effector(c, ws.footprint);
        if (geo::distance(ee.position(), anchor) <= s.reach_tol) {
          reached = true;
          break;
        }
      }
      if (!reached)
        throw SkillError(SkillError::Code::PolicyFailure,
                         g.str() + ": handle out of reach along the approach ray");
      geo::Configuration back = c;
      back.arm = start_arm;
      out.trace.push_back(back);
      out.world.robot = back;
      try {
        out.world = sim::set_articulation(ws, out.world, g.arg(s.target_param), s.mode);
      } catch (const sim::SimError& e) {
        throw SkillError(SkillError::Code::PolicyFailure, g.str() + ": " + e.what());
      }
      out.attribute_changes.push_back(g.arg(s.target_param) + ".open=" +
                                      (s.mode == "open" ? "true" : "false"));
      break;
    }
    case SkillKind::Erase: {
      const std::string board = g.arg(s.target_param);
      const sim::SurfaceGrid grid = out.world.surfaces.at(board);
      const geo::Pose2 ee0 = geo::end_effector(out.world.robot, ws.footprint);
      // Sweep from the nearer end to the farther one.
      const bool forward = geo::distance(ee0.position(), grid.a) <=
                           geo::distance(ee0.position(), grid.b);
      const double arm = out.world.robot.arm;
      const double theta = out.world.robot.base.theta;
      const double reach = ws.footprint.base_radius + arm * ws.footprint.arm_max_reach;
      for (std::size_t k = 0; k < grid.cells.size(); ++k) {
        const std::size_t cell = forward ? k : grid.cells.size() - 1 - k;
        const geo::Vec2 target = grid.cell_center(cell);
        geo::Configuration c;
        c.base.theta = theta;
        c.base.x = target.x - reach * std::cos(theta);
        c.base.y = target.y - reach * std::sin(theta);
        c.arm = arm;
        detail::require_collision_free(ws, out.world, c, "Erase");
        const geo::Pose2 ee = geo::end_effector(c, ws.footprint);
        if (grid.distance_to(ee.position()) > grid.contact_tolerance)
          throw SkillError(SkillError::Code::PolicyFailure, g.str() + ": contact lost");
        out.world.robot = c;
        out.world = sim::set_surface_cell(out.world, board, cell, false);
        out.trace.push_back(c);
      }
      out.attribute_changes.push_back(board + ".dirty=false");
      break;
    }
  }
  const geo::Pose2 ee = geo::end_effector(out.world.robot, ws.footprint);
  for (const auto& id : out.world.attached) out.world.object(id).pose = ee;
  return out;
}

// ---------------------------------------------------------------------------
// CIP construction: head motion plan into the initiation envelope, policy
// rollout, tail motion plan out of the termination envelope.

enum class CipStage { EntrySampling, HeadPlan, Policy, ExitSampling, TailPlan };

inline const char* to_string(CipStage s) {
  switch (s) {
    case CipStage::EntrySampling: return "entry-sampling";
    case CipStage::HeadPlan: return "head-plan";
    case CipStage::Policy: return "policy";
    case CipStage::ExitSampling: return "exit-sampling";
    case CipStage::TailPlan: return "tail-plan";
  }
  return "?";
}

struct CipInstance {
  GroundedSkill skill;
  Condition initiation_condition;
  Condition termination_condition;
  geo::Trajectory head{std::vector<geo::Configuration>{geo::Configuration{}}};
  geo::Trajectory tail{std::vector<geo::Configuration>{geo::Configuration{}}};
  geo::Configuration entry_config;
  geo::Configuration exit_config;
  std::vector<geo::Configuration> policy_trace;
  std::vector<std::string> attribute_changes;
  sim::WorldState world_after;  // deterministic rollout result
  std::vector<sim::Event> events;
};

struct CipFailure {
  CipStage stage = CipStage::EntrySampling;
  std::string detail;
};

struct CipResult {
  std::optional<CipInstance> instance;
  std::optional<CipFailure> failure;
  std::size_t entry_rejections = 0;  // sampled entry poses that had to be discarded

  bool ok() const { return instance.has_value(); }
};

struct RefineBudgets {
  std::size_t sampler_attempts = 400;
  std::size_t entry_goal_count = 6;
  mp::MotionParams motion;  // seed is overridden per call
};

inline CipResult build_cip(const GroundedSkill& g, const sim::Workspace& ws,
                           const sim::WorldState& world, Rng& rng, const RefineBudgets& budgets) {
  CipResult result;
  const Condition init_cond = initiation(g, ws, world);
  const Condition init_env = kinematic_envelope(init_cond);

  CipInstance cip;
  cip.skill = g;
  cip.initiation_condition = init_cond;

  sim::WorldState current = world;

  // Head: zero-length when the initiation condition already holds.
  if (check(init_cond, ws, current)) {
    cip.head = geo::Trajectory({current.robot});
  } else {
    EntrySampler sampler(g, ws, current, budgets.sampler_attempts);
    std::vector<geo::Configuration> entries;
    Rng sample_rng = rng.fork(0x656e747279ULL);
    while (entries.size() < budgets.entry_goal_count) {
      auto c = sampler.next(sample_rng);
      if (!c) break;
      entries.push_back(*c);
    }
    result.entry_rejections = sampler.rejections();
    if (entries.empty()) {
      result.failure = CipFailure{CipStage::EntrySampling, g.str() + ": no valid entry pose"};
      return result;
    }

    mp::MotionQuery q;
    q.start = current.robot;
    const geo::Scene scene = sim::active_scene(ws, current);
    q.scene = &scene;
    q.footprint = ws.footprint;
    q.attachments = sim::attachment_radii(current);
    q.params = budgets.motion;
    q.params.seed = rng.fork(0x68656164ULL).next_u64();
    mp::RegionGoal goal;
    const sim::WorldState world_snapshot = current;
    goal.predicate = [&, world_snapshot](const geo::Configuration& c) {
      return spatial_holds(init_env, ws, c, world_snapshot);
    };
    std::size_t cursor = 0;
    goal.sample = [&entries, &sampler, cursor](Rng& r) mutable -> std::optional<geo::Configuration> {
      if (cursor < entries.size()) return entries[cursor++];
      return sampler.next(r);
    };
    q.goal = goal;
    const auto motion = mp::plan_motion(q);
    result.entry_rejections = sampler.rejections();
    if (motion.status != mp::MotionStatus::Found) {
      result.failure = CipFailure{CipStage::HeadPlan, g.str() + ": no head motion plan"};
      return result;
    }
    cip.head = *motion.trajectory;
    auto stepped = sim::step_trajectory(ws, current, cip.head, budgets.motion.resolution);
    current = std::move(stepped.world);
    for (auto& e : stepped.events) cip.events.push_back(e);
  }
  cip.entry_config = cip.head.end();

  // The entry must satisfy the full initiation condition, observational
  // conjuncts included (those are the symbolic layer's responsibility).
  if (!check(init_cond, ws, current)) {
    result.failure =
        CipFailure{CipStage::Policy, g.str() + ": initiation condition unsatisfied at entry"};
    return result;
  }

  const Condition term_cond = termination(g, ws, current);
  cip.termination_condition = term_cond;

  PolicyOutcome policy;
  try {
    policy = execute_policy(g, ws, current);
  } catch (const SkillError& e) {
    result.failure = CipFailure{CipStage::Policy, e.what()};
    return result;
  } catch (const sim::SimError& e) {
    result.failure = CipFailure{CipStage::Policy, e.what()};
    return result;
  }
  current = policy.world;
  cip.policy_trace = policy.trace;
  cip.attribute_changes = policy.attribute_changes;

  if (!check(term_cond, ws, current)) {
    result.failure =
        CipFailure{CipStage::Policy, g.str() + ": termination condition unsatisfied after policy"};
    return result;
  }

  // Tail: leave the termination envelope (nothing to do if already outside).
  const Condition term_env = kinematic_envelope(term_cond);
  if (!termination_envelope_satisfied(term_env, ws, current.robot, current)) {
    cip.tail = geo::Trajectory({current.robot});
  } else {
    ExitSampler exits(g, ws, current, term_env, budgets.sampler_attempts);
    std::vector<geo::Configuration> outs;
    Rng exit_rng = rng.fork(0x65786974ULL);
    while (outs.size() < budgets.entry_goal_count) {
      auto c = exits.next(exit_rng);
      if (!c) break;
      outs.push_back(*c);
    }
    if (outs.empty()) {
      result.failure = CipFailure{CipStage::ExitSampling, g.str() + ": no valid exit pose"};
      return result;
    }
    mp::MotionQuery q;
    q.start = current.robot;
    const geo::Scene scene = sim::active_scene(ws, current);
    q.scene = &scene;
    q.footprint = ws.footprint;
    q.attachments = sim::attachment_radii(current);
    q.params = budgets.motion;
    q.params.seed = rng.fork(0x7461696cULL).next_u64();
    mp::RegionGoal goal;
    ExitSampler accept_view(g, ws, current, term_env, 1);
    goal.predicate = [&, accept_view](const geo::Configuration& c) { return accept_view.accept(c); };
    std::size_t cursor = 0;
    goal.sample = [&outs, &exits, cursor](Rng& r) mutable -> std::optional<geo::Configuration> {
      if (cursor < outs.size()) return outs[cursor++];
      return exits.next(r);
    };
    q.goal = goal;
    const auto motion = mp::plan_motion(q);
    if (motion.status != mp::MotionStatus::Found) {
      result.failure = CipFailure{CipStage::TailPlan, g.str() + ": no tail motion plan"};
      return result;
    }
    cip.tail = *motion.trajectory;
    auto stepped = sim::step_trajectory(ws, current, cip.tail, budgets.motion.resolution);
    current = std::move(stepped.world);
    for (auto& e : stepped.events) cip.events.push_back(e);
  }
  cip.exit_config = cip.tail.end();
  cip.world_after = current;
  result.instance = std::move(cip);
  return result;
}

}  // namespace tasp::skills
