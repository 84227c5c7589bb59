#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tasp::geo {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Normalize an angle into (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r = kPi;
  return r;
}

// Absolute angular difference, wrapped to [0, pi].
inline double ang_diff(double a, double b) {
  return std::fabs(normalize_angle(a - b));
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

inline double distance_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

// SE(2) pose; theta is kept normalized in (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(theta), std::sin(theta)}; }
};

// A point in C-space: SE(2) base pose plus arm extension fraction in [0, 1].
struct Configuration {
  Pose2 base;
  double arm = 0.0;

  Configuration() = default;
  Configuration(double x, double y, double theta, double arm_) : base(x, y, theta), arm(arm_) {
    if (arm < 0.0 || arm > 1.0) throw std::invalid_argument("arm extension must be in [0, 1]");
  }
};

struct Footprint {
  double base_radius = 0.3;
  double arm_max_reach = 0.7;

  void validate() const {
    if (base_radius <= 0.0 || arm_max_reach <= 0.0)
      throw std::invalid_argument("footprint radii must be strictly positive");
  }
};

// Forward kinematics of the single prismatic arm: the end effector sits at
// base_radius + arm * arm_max_reach along the heading.
inline Pose2 end_effector(const Configuration& c, const Footprint& fp) {
  const double r = fp.base_radius + c.arm * fp.arm_max_reach;
  return Pose2(c.base.x + r * std::cos(c.base.theta), c.base.y + r * std::sin(c.base.theta),
               c.base.theta);
}

using Polygon = std::vector<Vec2>;

inline double signed_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.cross(q);
  }
  return 0.5 * a;
}

namespace detail {

inline int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = (b - a).cross(c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  if (orient(a, b, p) != 0) return false;
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

// Closed test: touching counts as intersecting.
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const int o1 = orient(a, b, c);
  const int o2 = orient(a, b, d);
  const int o3 = orient(c, d, a);
  const int o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace detail

// Boundary-inclusive point containment (even-odd rule).
inline bool point_in_polygon(const Vec2& p, const Polygon& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[j];
    const Vec2& b = poly[i];
    if (detail::on_segment(a, b, p)) return true;
    if ((b.y > p.y) != (a.y > p.y)) {
      const double xint = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

inline double dist_point_polygon_boundary(const Vec2& p, const Polygon& poly) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    best = std::min(best, distance_point_segment(p, poly[j], poly[i]));
  return best;
}

inline bool disc_intersects_polygon(const Vec2& center, double radius, const Polygon& poly) {
  if (point_in_polygon(center, poly)) return true;
  return dist_point_polygon_boundary(center, poly) <= radius;
}

inline bool segment_intersects_polygon(const Vec2& p, const Vec2& q, const Polygon& poly) {
  if (point_in_polygon(p, poly) || point_in_polygon(q, poly)) return true;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    if (detail::segments_intersect(p, q, poly[j], poly[i])) return true;
  return false;
}

// A valid obstacle polygon is simple (no self-intersection), counter-clockwise,
// with at least three distinct vertices.
inline void validate_polygon(const Polygon& poly, const std::string& what) {
  if (poly.size() < 3) throw std::invalid_argument(what + ": polygon needs at least 3 vertices");
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (distance(poly[i], poly[(i + 1) % n]) == 0.0)
      throw std::invalid_argument(what + ": polygon has duplicate consecutive vertices");
  }
  if (signed_area(poly) <= 0.0)
    throw std::invalid_argument(what + ": polygon must be counter-clockwise");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (they share an endpoint).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (detail::segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
        throw std::invalid_argument(what + ": polygon is self-intersecting");
    }
  }
}

// Obstacle with optional discrete articulation modes (door open/closed,
// drawer front panel present/absent). Exactly one mode polygon is active.
struct Obstacle {
  std::string id;
  Polygon polygon;
  std::map<std::string, Polygon> modes;
  std::optional<std::string> active_mode;

  const Polygon& active_polygon() const {
    if (modes.empty()) return polygon;
    return modes.at(*active_mode);
  }

  void validate() const {
    validate_polygon(polygon, "obstacle " + id);
    if (modes.empty() != !active_mode.has_value())
      throw std::invalid_argument("obstacle " + id + ": active_mode present iff modes non-empty");
    for (const auto& [label, poly] : modes) validate_polygon(poly, "obstacle " + id + " mode " + label);
    if (active_mode && modes.find(*active_mode) == modes.end())
      throw std::invalid_argument("obstacle " + id + ": unknown active mode " + *active_mode);
  }
};

struct Bounds {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  bool contains(const Vec2& p, double margin) const {
    return p.x - margin > xmin && p.x + margin < xmax && p.y - margin > ymin && p.y + margin < ymax;
  }
};

// Static geometry of one planning problem: world box plus obstacle set.
struct Scene {
  Bounds bounds;
  std::vector<Obstacle> obstacles;

  const Obstacle* find(const std::string& id) const {
    for (const auto& ob : obstacles)
      if (ob.id == id) return &ob;
    return nullptr;
  }

  Obstacle* find(const std::string& id) {
    for (auto& ob : obstacles)
      if (ob.id == id) return &ob;
    return nullptr;
  }
};

// The collision function F. True iff the base disc, the arm segment (when
// extended) and every attached-object disc are strictly inside the world
// bounds and disjoint from every active obstacle polygon. Boundary contact
// counts as collision.
inline bool collision_free(const Scene& scene, const Configuration& c, const Footprint& fp,
                           std::span<const double> attachment_radii = {}) {
  const Vec2 base = c.base.position();
  const Pose2 ee = end_effector(c, fp);
  const Vec2 ee_pos = ee.position();

  if (!scene.bounds.contains(base, fp.base_radius)) return false;
  if (c.arm > 0.0 && !scene.bounds.contains(ee_pos, 0.0)) return false;
  for (double r : attachment_radii)
    if (!scene.bounds.contains(ee_pos, r)) return false;

  const Vec2 arm_start = base + c.base.heading() * fp.base_radius;
  for (const auto& ob : scene.obstacles) {
    const Polygon& poly = ob.active_polygon();
    if (disc_intersects_polygon(base, fp.base_radius, poly)) return false;
    if (c.arm > 0.0 && segment_intersects_polygon(arm_start, ee_pos, poly)) return false;
    for (double r : attachment_radii)
      if (disc_intersects_polygon(ee_pos, r, poly)) return false;
  }
  return true;
}

// C-space metric: Euclidean in the plane, with rotation weighted by the base
// radius and arm extension by the arm reach, so all terms are in meters.
inline double distance(const Configuration& a, const Configuration& b, const Footprint& fp) {
  const double dx = a.base.x - b.base.x;
  const double dy = a.base.y - b.base.y;
  const double dt = fp.base_radius * ang_diff(a.base.theta, b.base.theta);
  const double da = fp.arm_max_reach * (a.arm - b.arm);
  return std::sqrt(dx * dx + dy * dy + dt * dt + da * da);
}

inline Configuration interpolate(const Configuration& a, const Configuration& b, double t) {
  Configuration c;
  c.base.x = a.base.x + t * (b.base.x - a.base.x);
  c.base.y = a.base.y + t * (b.base.y - a.base.y);
  c.base.theta = normalize_angle(a.base.theta + t * normalize_angle(b.base.theta - a.base.theta));
  c.arm = a.arm + t * (b.arm - a.arm);
  return c;
}

// Conservative bound on how far any body point can move between two
// configurations; used to choose the collision-check step count.
inline double max_body_displacement(const Configuration& a, const Configuration& b,
                                    const Footprint& fp, double attachment_reach = 0.0) {
  const double lin = std::hypot(a.base.x - b.base.x, a.base.y - b.base.y);
  const double swing = (fp.base_radius + fp.arm_max_reach + attachment_reach) *
                       ang_diff(a.base.theta, b.base.theta);
  const double arm = fp.arm_max_reach * std::fabs(a.arm - b.arm);
  return lin + swing + arm;
}

// True iff the straight C-space segment from c1 to c2 is collision-free when
// checked at steps no body point crosses faster than `resolution`.
inline bool segment_valid(const Scene& scene, const Configuration& c1, const Configuration& c2,
                          const Footprint& fp, std::span<const double> attachment_radii,
                          double resolution) {
  if (resolution <= 0.0) throw std::invalid_argument("resolution must be positive");
  double attach_reach = 0.0;
  for (double r : attachment_radii) attach_reach = std::max(attach_reach, r);
  const double bound = max_body_displacement(c1, c2, fp, attach_reach);
  const auto steps = static_cast<std::size_t>(std::ceil(bound / resolution));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = steps == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps);
    if (!collision_free(scene, interpolate(c1, c2, t), fp, attachment_radii)) return false;
  }
  return true;
}

// Piecewise-linear trajectory, uniformly parameterized over [0, 1].
struct Trajectory {
  std::vector<Configuration> waypoints;

  Trajectory() = default;
  explicit Trajectory(std::vector<Configuration> wp) : waypoints(std::move(wp)) {
    if (waypoints.empty()) throw std::invalid_argument("trajectory needs at least one waypoint");
  }

  const Configuration& start() const { return waypoints.front(); }
  const Configuration& end() const { return waypoints.back(); }

  Configuration eval(double t) const {
    if (waypoints.size() == 1) return waypoints.front();
    t = std::clamp(t, 0.0, 1.0);
    const double s = t * static_cast<double>(waypoints.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(s), waypoints.size() - 2);
    return interpolate(waypoints[i], waypoints[i + 1], s - static_cast<double>(i));
  }

  double length(const Footprint& fp) const {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
      total += geo::distance(waypoints[i], waypoints[i + 1], fp);
    return total;
  }
};

}  // namespace tasp::geo
