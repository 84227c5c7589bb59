#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "tasp/symbolic.hpp"

namespace tasp::sym {

struct SymbolicPlan {
  std::vector<GroundAction> steps;
  double cost = 0.0;

  std::string key() const {
    std::string k;
    for (const GroundAction& a : steps) {
      k += a.str();
      k += ';';
    }
    return k;
  }
};

enum class PlanMode {
  Exact,     // uniform-cost search; returned plan is cost-optimal
  Additive,  // A* with the (inadmissible) additive heuristic; valid, low-cost
};

enum class PlanStatus { Found, Infeasible, BudgetExhausted };

struct PlanLimits {
  std::size_t max_expansions = 1'000'000;
  double timeout_s = 0.0;  // 0 = no deadline
};

struct PlanResult {
  PlanStatus status = PlanStatus::Infeasible;
  std::optional<SymbolicPlan> plan;
  std::size_t expansions = 0;
};

namespace detail {

// Interned-state search space over the grounded task.
struct SearchSpace {
  explicit SearchSpace(const GroundedTask& task) : task_(task) {
    for (const GroundAction& a : task.actions) {
      Compiled c;
      for (const GroundAtom& x : a.pre_pos) c.pre_pos.push_back(intern(x));
      for (const GroundAtom& x : a.pre_neg) c.pre_neg.push_back(intern(x));
      for (const GroundAtom& x : a.add) c.add.push_back(intern(x));
      for (const GroundAtom& x : a.del) c.del.push_back(intern(x));
      compiled_.push_back(std::move(c));
    }
    for (const Literal& lit : task.goal) {
      const int id = intern(GroundAtom{lit.predicate, lit.terms});
      (lit.positive ? goal_pos_ : goal_neg_).push_back(id);
    }
    std::vector<int> init;
    for (const GroundAtom& a : task.init) init.push_back(intern(a));
    std::sort(init.begin(), init.end());
    init_ = std::move(init);
  }

  int intern(const GroundAtom& a) {
    auto [it, fresh] = atom_ids_.emplace(a, static_cast<int>(atom_ids_.size()));
    if (fresh) atoms_.push_back(a);
    return it->second;
  }

  struct Compiled {
    std::vector<int> pre_pos, pre_neg, add, del;
  };

  static bool contains(const std::vector<int>& sorted, int v) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    return it != sorted.end() && *it == v;
  }

  bool applicable(const std::vector<int>& state, const Compiled& c) const {
    for (int a : c.pre_pos)
      if (!contains(state, a)) return false;
    for (int a : c.pre_neg)
      if (contains(state, a)) return false;
    return true;
  }

  std::vector<int> successor(const std::vector<int>& state, const Compiled& c) const {
    std::vector<int> next;
    next.reserve(state.size() + c.add.size());
    for (int a : state)
      if (!contains_unsorted(c.del, a)) next.push_back(a);
    for (int a : c.add)
      if (!contains(next, a)) next.insert(std::lower_bound(next.begin(), next.end(), a), a);
    return next;
  }

  static bool contains_unsorted(const std::vector<int>& v, int x) {
    for (int e : v)
      if (e == x) return true;
    return false;
  }

  bool is_goal(const std::vector<int>& state) const {
    for (int a : goal_pos_)
      if (!contains(state, a)) return false;
    for (int a : goal_neg_)
      if (contains(state, a)) return false;
    return true;
  }

  // Additive heuristic over the delete relaxation. Negative goal literals
  // and negative preconditions are ignored, so the estimate is inadmissible
  // in general. Infinity means the goal is unreachable even when relaxed.
  double h_add(const std::vector<int>& state) const {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(atoms_.size(), kInf);
    for (int a : state) cost[static_cast<std::size_t>(a)] = 0.0;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < compiled_.size(); ++i) {
        const Compiled& c = compiled_[i];
        double total = task_.actions[i].cost;
        for (int p : c.pre_pos) {
          total += cost[static_cast<std::size_t>(p)];
          if (total == kInf) break;
        }
        if (total == kInf) continue;
        for (int a : c.add) {
          if (total < cost[static_cast<std::size_t>(a)]) {
            cost[static_cast<std::size_t>(a)] = total;
            changed = true;
          }
        }
      }
    }
    double h = 0.0;
    for (int g : goal_pos_) {
      h += cost[static_cast<std::size_t>(g)];
      if (h == kInf) return kInf;
    }
    return h;
  }

  const GroundedTask& task_;
  std::map<GroundAtom, int> atom_ids_;
  std::vector<GroundAtom> atoms_;
  std::vector<Compiled> compiled_;
  std::vector<int> goal_pos_, goal_neg_;
  std::vector<int> init_;
};

}  // namespace detail

// Best-first search over grounded states. Exact mode is uniform-cost and
// cost-optimal; Additive mode trades optimality for speed. Previously
// returned plans can be forbidden, in which case the search yields the best
// plan whose action sequence differs from every forbidden one. Each state may
// be re-expanded up to |forbidden|+1 times so alternate paths stay reachable.
// Expansion order is deterministic: ties break on insertion order, and
// successors are generated in lexicographic grounded-action order.
inline PlanResult plan_symbolic(const GroundedTask& task,
                                const std::vector<SymbolicPlan>& forbidden = {},
                                const PlanLimits& limits = {}, PlanMode mode = PlanMode::Exact) {
  detail::SearchSpace space(task);

  std::map<std::string, int> forbidden_keys;
  for (const SymbolicPlan& p : forbidden) forbidden_keys[p.key()] += 1;
  const std::size_t pop_cap = forbidden.size() + 1;

  struct Node {
    int state_id;
    double g;
    int parent;
    int action;  // index into task.actions, -1 for the root
  };

  std::vector<std::vector<int>> states;
  std::map<std::vector<int>, int> state_ids;
  auto intern_state = [&](const std::vector<int>& s) {
    auto [it, fresh] = state_ids.emplace(s, static_cast<int>(states.size()));
    if (fresh) states.push_back(s);
    return it->second;
  };

  std::vector<Node> nodes;
  std::vector<std::size_t> pops;

  struct Entry {
    double f;
    std::uint64_t tick;
    int node;
    bool operator>(const Entry& o) const {
      if (f != o.f) return f > o.f;
      return tick > o.tick;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  std::uint64_t tick = 0;

  auto heuristic = [&](const std::vector<int>& s) {
    return mode == PlanMode::Additive ? space.h_add(s) : 0.0;
  };

  const int init_id = intern_state(space.init_);
  pops.resize(states.size(), 0);
  const double h0 = heuristic(space.init_);
  nodes.push_back(Node{init_id, 0.0, -1, -1});
  if (h0 != std::numeric_limits<double>::infinity()) open.push(Entry{h0, tick++, 0});

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(limits.timeout_s));

  PlanResult result;
  while (!open.empty()) {
    if (result.expansions >= limits.max_expansions ||
        (limits.timeout_s > 0.0 && std::chrono::steady_clock::now() >= deadline)) {
      result.status = PlanStatus::BudgetExhausted;
      return result;
    }
    const Entry e = open.top();
    open.pop();
    // Copies: both vectors grow while successors are generated below.
    const Node node = nodes[static_cast<std::size_t>(e.node)];
    if (pops[static_cast<std::size_t>(node.state_id)] >= pop_cap) continue;
    pops[static_cast<std::size_t>(node.state_id)] += 1;
    result.expansions += 1;

    const std::vector<int> state = states[static_cast<std::size_t>(node.state_id)];
    if (space.is_goal(state)) {
      SymbolicPlan plan;
      plan.cost = node.g;
      for (int n = e.node; nodes[static_cast<std::size_t>(n)].action >= 0;
           n = nodes[static_cast<std::size_t>(n)].parent)
        plan.steps.push_back(
            task.actions[static_cast<std::size_t>(nodes[static_cast<std::size_t>(n)].action)]);
      std::reverse(plan.steps.begin(), plan.steps.end());
      auto it = forbidden_keys.find(plan.key());
      if (it != forbidden_keys.end() && it->second > 0) {
        it->second -= 1;  // each forbidden sequence can be rejected once
        continue;
      }
      result.status = PlanStatus::Found;
      result.plan = std::move(plan);
      return result;
    }

    for (std::size_t ai = 0; ai < task.actions.size(); ++ai) {
      const auto& c = space.compiled_[ai];
      if (!space.applicable(state, c)) continue;
      std::vector<int> next = space.successor(state, c);
      const int next_id = intern_state(next);
      if (static_cast<std::size_t>(next_id) >= pops.size()) pops.resize(states.size(), 0);
      if (pops[static_cast<std::size_t>(next_id)] >= pop_cap) continue;
      const double g = node.g + task.actions[ai].cost;
      const double h = heuristic(next);
      if (h == std::numeric_limits<double>::infinity()) continue;
      nodes.push_back(Node{next_id, g, e.node, static_cast<int>(ai)});
      open.push(Entry{g + h, tick++, static_cast<int>(nodes.size()) - 1});
    }
  }
  result.status = PlanStatus::Infeasible;
  return result;
}

// Replays a plan from the task's initial state; true iff every step is
// applicable in order and the final state satisfies the goal.
inline bool validate_plan(const GroundedTask& task, const SymbolicPlan& plan) {
  SymbolicState state = task.init;
  for (const GroundAction& a : plan.steps) {
    if (!applicable(state, a)) return false;
    state = sym::apply(state, a);
  }
  return goal_satisfied(state, task.goal);
}

}  // namespace tasp::sym
