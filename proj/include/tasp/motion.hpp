#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "tasp/geometry.hpp"
#include "tasp/rng.hpp"

namespace tasp::mp {

struct MotionParams {
  double step_size = 0.25;
  double goal_bias = 0.1;
  std::size_t max_iterations = 5000;
  double resolution = 0.01;
  std::size_t shortcut_passes = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (goal_bias < 0.0 || goal_bias > 1.0) throw std::invalid_argument("goal_bias must be in [0,1]");
    if (step_size <= 0.0 || resolution <= 0.0 || max_iterations == 0)
      throw std::invalid_argument("motion parameters must be positive");
  }
};

// Goal region: a predicate over configurations plus a sampler that yields
// only satisfying configurations (or nullopt once exhausted).
struct RegionGoal {
  std::function<bool(const geo::Configuration&)> predicate;
  std::function<std::optional<geo::Configuration>(Rng&)> sample;
};

struct MotionQuery {
  geo::Configuration start;
  std::variant<geo::Configuration, RegionGoal> goal;
  const geo::Scene* scene = nullptr;
  geo::Footprint footprint;
  std::vector<double> attachments;
  MotionParams params;
};

enum class MotionStatus {
  Found,
  InfeasibleWithinBudget,  // budget exhausted; not a proof of infeasibility
  InvalidStart,
};

struct MotionResult {
  MotionStatus status = MotionStatus::InfeasibleWithinBudget;
  std::optional<geo::Trajectory> trajectory;
  std::size_t iterations = 0;
};

inline bool validate(const geo::Trajectory& traj, const geo::Scene& scene,
                     const geo::Footprint& fp, std::span<const double> attachments,
                     double resolution) {
  if (traj.waypoints.size() == 1)
    return geo::collision_free(scene, traj.waypoints[0], fp, attachments);
  for (std::size_t i = 0; i + 1 < traj.waypoints.size(); ++i)
    if (!geo::segment_valid(scene, traj.waypoints[i], traj.waypoints[i + 1], fp, attachments,
                            resolution))
      return false;
  return true;
}

// Random pairwise shortcutting. Endpoints are preserved exactly; the result
// never gets longer and stays valid at the same resolution.
inline geo::Trajectory shortcut(const geo::Trajectory& traj, const geo::Scene& scene,
                                const geo::Footprint& fp, std::span<const double> attachments,
                                const MotionParams& params) {
  std::vector<geo::Configuration> wp = traj.waypoints;
  Rng rng(mix_seed(params.seed, 0x73686f7274ULL));
  for (std::size_t pass = 0; pass < params.shortcut_passes; ++pass) {
    if (wp.size() < 3) break;
    std::size_t i = rng.index(wp.size() - 2);
    std::size_t j = i + 2 + rng.index(wp.size() - i - 2);
    double direct = geo::distance(wp[i], wp[j], fp);
    double through = 0.0;
    for (std::size_t k = i; k < j; ++k) through += geo::distance(wp[k], wp[k + 1], fp);
    if (direct >= through - 1e-12) continue;
    if (!geo::segment_valid(scene, wp[i], wp[j], fp, attachments, params.resolution)) continue;
    wp.erase(wp.begin() + static_cast<std::ptrdiff_t>(i) + 1,
             wp.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return geo::Trajectory(std::move(wp));
}

// RRT with uniform C-space sampling, goal-biased extension and fixed-step
// growth under the C-space metric. Deterministic given the seed. Smoothing
// runs as a final pass when shortcut_passes > 0.
inline MotionResult plan_motion(const MotionQuery& query) {
  query.params.validate();
  const geo::Scene& scene = *query.scene;
  const geo::Footprint& fp = query.footprint;
  const std::span<const double> attach(query.attachments);
  const MotionParams& p = query.params;

  MotionResult result;
  if (!geo::collision_free(scene, query.start, fp, attach)) {
    result.status = MotionStatus::InvalidStart;
    return result;
  }

  const bool point_goal = std::holds_alternative<geo::Configuration>(query.goal);
  const RegionGoal* region = point_goal ? nullptr : &std::get<RegionGoal>(query.goal);

  auto satisfies_goal = [&](const geo::Configuration& c) {
    if (point_goal) return geo::distance(c, std::get<geo::Configuration>(query.goal), fp) <= 1e-9;
    return region->predicate(c);
  };

  if (satisfies_goal(query.start)) {
    result.status = MotionStatus::Found;
    result.trajectory = geo::Trajectory({query.start});
    return result;
  }

  Rng rng(p.seed);
  std::vector<geo::Configuration> goals;
  if (point_goal) {
    goals.push_back(std::get<geo::Configuration>(query.goal));
  } else {
    // Seed a few region members for biased extension; more may be drawn later.
    for (int i = 0; i < 8; ++i) {
      auto g = region->sample(rng);
      if (!g) break;
      goals.push_back(*g);
    }
  }

  struct Node {
    geo::Configuration config;
    int parent;
  };
  std::vector<Node> tree;
  tree.push_back({query.start, -1});

  auto sample_uniform = [&] {
    geo::Configuration c;
    c.base.x = rng.uniform(scene.bounds.xmin, scene.bounds.xmax);
    c.base.y = rng.uniform(scene.bounds.ymin, scene.bounds.ymax);
    c.base.theta = geo::normalize_angle(rng.uniform(-geo::kPi, geo::kPi));
    c.arm = rng.uniform(0.0, 1.0);
    return c;
  };

  auto nearest = [&](const geo::Configuration& c) {
    std::size_t best = 0;
    double best_d = geo::distance(tree[0].config, c, fp);
    for (std::size_t i = 1; i < tree.size(); ++i) {
      const double d = geo::distance(tree[i].config, c, fp);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };

  auto extract = [&](int leaf) {
    std::vector<geo::Configuration> wp;
    for (int n = leaf; n >= 0; n = tree[static_cast<std::size_t>(n)].parent)
      wp.push_back(tree[static_cast<std::size_t>(n)].config);
    std::reverse(wp.begin(), wp.end());
    geo::Trajectory traj(std::move(wp));
    if (p.shortcut_passes > 0) traj = shortcut(traj, scene, fp, attach, p);
    return traj;
  };

  for (std::size_t it = 0; it < p.max_iterations; ++it) {
    result.iterations = it + 1;

    geo::Configuration target;
    if (!goals.empty() && rng.chance(p.goal_bias)) {
      target = goals[rng.index(goals.size())];
      if (region && rng.chance(0.25)) {
        if (auto g = region->sample(rng)) {
          goals.push_back(*g);
          target = goals.back();
        }
      }
    } else {
      target = sample_uniform();
    }

    const std::size_t near = nearest(target);
    const double d = geo::distance(tree[near].config, target, fp);
    geo::Configuration candidate =
        d <= p.step_size ? target : geo::interpolate(tree[near].config, target, p.step_size / d);
    if (!geo::segment_valid(scene, tree[near].config, candidate, fp, attach, p.resolution))
      continue;
    tree.push_back({candidate, static_cast<int>(near)});
    const int node = static_cast<int>(tree.size()) - 1;

    if (satisfies_goal(candidate)) {
      result.status = MotionStatus::Found;
      result.trajectory = extract(node);
      return result;
    }
    // Direct connection attempt when a goal configuration is within reach.
    for (const geo::Configuration& g : goals) {
      if (geo::distance(candidate, g, fp) > p.step_size) continue;
      if (!geo::segment_valid(scene, candidate, g, fp, attach, p.resolution)) continue;
      tree.push_back({g, node});
      result.status = MotionStatus::Found;
      result.trajectory = extract(static_cast<int>(tree.size()) - 1);
      return result;
    }
  }
  result.status = MotionStatus::InfeasibleWithinBudget;
  return result;
}

}  // namespace tasp::mp
