#pragma once

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tasp/search.hpp"
#include "tasp/skills.hpp"
#include "tasp/symbolic.hpp"
#include "tasp/world.hpp"

namespace tasp::planner {

class ContractViolation : public std::runtime_error {
 public:
  explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Abstraction function: world state -> symbolic fluent atoms.
//
// Emission rules: holding/handempty from the attachment set; in/on from
// container fields (picking whichever declared predicate the types fit);
// open/closed from articulation modes; dirty/clean plus any other boolean
// attribute by name; at-region(robot, z) from base-pose region membership.

namespace detail {

inline bool predicate_fits(const sym::Domain& d, const std::string& pred,
                           const std::vector<std::string>& arg_types) {
  const sym::Predicate* p = d.find_predicate(pred);
  if (p == nullptr || p->arity() != arg_types.size()) return false;
  for (std::size_t i = 0; i < arg_types.size(); ++i)
    if (!d.is_subtype(arg_types[i], p->parameter_types[i])) return false;
  return true;
}

inline std::optional<std::string> object_type(const sym::SymbolicProblem& p,
                                              const std::string& id) {
  auto it = p.universe.find(id);
  if (it == p.universe.end()) return std::nullopt;
  return it->second;
}

}  // namespace detail

inline sym::SymbolicState abstract_state(const sim::WorldState& world, const sim::Workspace& ws,
                                         const sym::Domain& domain,
                                         const sym::SymbolicProblem& problem) {
  sym::SymbolicState atoms;
  const std::string robot = ws.robot_id;
  const auto robot_type = detail::object_type(problem, robot);

  auto emit = [&](const std::string& pred, std::vector<std::string> args,
                  std::vector<std::string> types) {
    if (detail::predicate_fits(domain, pred, types)) atoms.insert({pred, std::move(args)});
  };

  // Attachment.
  if (robot_type) {
    if (world.attached.empty()) {
      if (domain.find_predicate("handempty") != nullptr &&
          domain.find_predicate("handempty")->arity() == 0)
        atoms.insert({"handempty", {}});
    } else {
      for (const auto& id : world.attached) {
        const auto t = detail::object_type(problem, id);
        if (t) emit("holding", {id}, {*t});
      }
    }
  }

  for (const auto& [id, obj] : world.objects) {
    const auto t = detail::object_type(problem, id);
    if (!t) continue;

    // Containment: in(o, c) or on(o, c), whichever the vocabulary admits.
    if (obj.container && !world.attached.count(id)) {
      const auto ct = detail::object_type(problem, *obj.container);
      if (ct) {
        if (detail::predicate_fits(domain, "in", {*t, *ct}))
          atoms.insert({"in", {id, *obj.container}});
        else if (detail::predicate_fits(domain, "on", {*t, *ct}))
          atoms.insert({"on", {id, *obj.container}});
      }
    }

    // Articulation modes.
    if (obj.articulation_mode) {
      if (*obj.articulation_mode == "open")
        emit("open", {id}, {*t});
      else
        emit("closed", {id}, {*t});
    }

    // Boolean attributes. "open" mirrors articulation and is skipped here;
    // "dirty" emits its complement when false.
    for (const auto& [name, value] : obj.attributes) {
      if (!std::holds_alternative<bool>(value) || name == "open") continue;
      const bool v = std::get<bool>(value);
      if (name == "dirty") {
        emit(v ? "dirty" : "clean", {id}, {*t});
      } else if (v) {
        emit(name, {id}, {*t});
      }
    }
  }

  // Robot region membership.
  if (robot_type) {
    const auto region = sim::robot_region(ws, world);
    if (region) {
      const auto zt = detail::object_type(problem, *region);
      if (zt) emit("at-region", {robot, *region}, {*robot_type, *zt});
    }
  }
  return atoms;
}

// Predicates that occur in some schema effect; everything else is static.
inline std::set<std::string> fluent_predicates(const sym::Domain& domain) {
  std::set<std::string> fluents;
  for (const auto& schema : domain.schemas)
    for (const auto& lit : schema.effects) fluents.insert(lit.predicate);
  return fluents;
}

inline sym::SymbolicState filter_fluents(const sym::SymbolicState& state,
                                         const std::set<std::string>& fluents) {
  sym::SymbolicState out;
  for (const auto& a : state)
    if (fluents.count(a.predicate)) out.insert(a);
  return out;
}

// ---------------------------------------------------------------------------
// Hybrid problem and solver.

struct HybridProblem {
  sim::Workspace workspace;
  sim::WorldState world;
  sym::Domain domain;
  sym::SymbolicProblem problem;  // static atoms + (optional) mirrored fluents + goal
  skills::SkillRegistry registry;
};

struct SolveLimits {
  std::size_t max_backtracks = 25;
  std::size_t max_samples_per_step = 10;
  double timeout_s = 120.0;
  sym::PlanMode mode = sym::PlanMode::Exact;
  sym::PlanLimits symbolic;
  skills::RefineBudgets budgets;
};

struct StepDiagnostics {
  std::size_t samples_tried = 0;      // build_cip attempts
  std::size_t entry_rejections = 0;   // sampled entry poses discarded across attempts
  std::string last_failure_stage;
  std::string last_failure_detail;
};

struct PlanStep {
  sym::GroundAction action;
  skills::GroundedSkill skill;
  geo::Trajectory head{std::vector<geo::Configuration>{geo::Configuration{}}};
  geo::Trajectory tail{std::vector<geo::Configuration>{geo::Configuration{}}};
  std::vector<geo::Configuration> policy_trace;
  std::vector<std::string> attribute_changes;
  StepDiagnostics diagnostics;
};

struct SolveDiagnostics {
  std::size_t backtracks = 0;
  std::size_t resamples = 0;  // failed refinement attempts across the run
  std::string last_failure_action;
  std::string last_failure_stage;
  std::string last_failure_detail;
};

struct HybridPlan {
  std::vector<PlanStep> steps;
  sym::SymbolicPlan symbolic;
  SolveDiagnostics diagnostics;

  std::vector<std::string> skill_sequence() const {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.skill.str());
    return out;
  }

  // The skill groundings with navigation steps dropped.
  std::vector<std::string> skill_sequence_without(const std::string& skill_name) const {
    std::vector<std::string> out;
    for (const auto& s : steps)
      if (s.skill.spec.skill_name != skill_name) out.push_back(s.skill.str());
    return out;
  }
};

enum class SolveStatus { Solved, SymbolicInfeasible, InfeasibleWithinBudget };

struct SolveResult {
  SolveStatus status = SolveStatus::InfeasibleWithinBudget;
  std::optional<HybridPlan> plan;
  SolveDiagnostics diagnostics;
};

// Initial symbolic state: static atoms from the problem file plus fluents
// abstracted from the world. Fluents listed in the problem file must agree
// with the abstraction.
inline sym::SymbolicState initial_symbolic_state(const HybridProblem& hp) {
  const auto fluents = fluent_predicates(hp.domain);
  const sym::SymbolicState abstracted = abstract_state(hp.world, hp.workspace, hp.domain, hp.problem);
  const sym::SymbolicState world_fluents = filter_fluents(abstracted, fluents);
  const sym::SymbolicState file_fluents = filter_fluents(hp.problem.init, fluents);
  if (!file_fluents.empty() && file_fluents != world_fluents) {
    std::string detail;
    for (const auto& a : file_fluents)
      if (!world_fluents.count(a)) detail += " problem-only:" + a.str();
    for (const auto& a : world_fluents)
      if (!file_fluents.count(a)) detail += " scene-only:" + a.str();
    throw InputError("problem :init fluents disagree with the scene abstraction:" + detail);
  }
  sym::SymbolicState init;
  for (const auto& a : hp.problem.init)
    if (!fluents.count(a.predicate)) init.insert(a);
  for (const auto& a : world_fluents) init.insert(a);
  return init;
}

// The ATAM-style loop: symbolic plan, refine each action to a CIP against the
// rolled-forward world, resample on staged failures, and on exhaustion forbid
// the symbolic plan and ask for the next one. Deterministic given the seed.
inline SolveResult solve(const HybridProblem& hp, const SolveLimits& limits, std::uint64_t seed) {
  SolveResult result;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(limits.timeout_s));

  sym::SymbolicProblem grounded_problem = hp.problem;
  grounded_problem.init = initial_symbolic_state(hp);
  const sym::GroundedTask task = sym::ground(hp.domain, grounded_problem);
  const auto fluents = fluent_predicates(hp.domain);

  std::vector<sym::SymbolicPlan> forbidden;
  for (std::size_t backtrack = 0; backtrack <= limits.max_backtracks; ++backtrack) {
    if (std::chrono::steady_clock::now() >= deadline) {
      result.status = SolveStatus::InfeasibleWithinBudget;
      result.diagnostics.last_failure_detail = "timeout";
      return result;
    }
    const auto symbolic = sym::plan_symbolic(task, forbidden, limits.symbolic, limits.mode);
    if (symbolic.status == sym::PlanStatus::Infeasible) {
      result.status =
          forbidden.empty() ? SolveStatus::SymbolicInfeasible : SolveStatus::InfeasibleWithinBudget;
      return result;
    }
    if (symbolic.status == sym::PlanStatus::BudgetExhausted) {
      result.status = SolveStatus::InfeasibleWithinBudget;
      result.diagnostics.last_failure_detail = "symbolic search budget exhausted";
      return result;
    }

    // Refine left to right.
    HybridPlan plan;
    plan.symbolic = *symbolic.plan;
    sim::WorldState world = hp.world;
    sym::SymbolicState sym_state = grounded_problem.init;
    bool refined = true;

    for (std::size_t k = 0; k < symbolic.plan->steps.size(); ++k) {
      const sym::GroundAction& action = symbolic.plan->steps[k];
      skills::GroundedSkill gskill = hp.registry.ground(action, hp.domain);
      PlanStep step;
      step.action = action;
      step.skill = gskill;

      bool step_ok = false;
      for (std::size_t attempt = 0; attempt < limits.max_samples_per_step; ++attempt) {
        if (std::chrono::steady_clock::now() >= deadline) break;
        Rng rng(mix_seed(seed, mix_seed(backtrack * 1000 + k, attempt)));
        auto res = skills::build_cip(gskill, hp.workspace, world, rng, limits.budgets);
        step.diagnostics.samples_tried += 1;
        step.diagnostics.entry_rejections += res.entry_rejections;
        result.diagnostics.resamples += res.entry_rejections;
        if (res.entry_rejections > 0 && step.diagnostics.last_failure_stage.empty())
          step.diagnostics.last_failure_stage = skills::to_string(skills::CipStage::EntrySampling);
        if (!res.ok()) {
          step.diagnostics.last_failure_stage = skills::to_string(res.failure->stage);
          step.diagnostics.last_failure_detail = res.failure->detail;
          result.diagnostics.resamples += 1;
          continue;
        }
        // The symbolic schema must remain a faithful model of the skill.
        sym::SymbolicState predicted = sym::apply(sym_state, action);
        const sym::SymbolicState observed = filter_fluents(
            abstract_state(res.instance->world_after, hp.workspace, hp.domain, hp.problem),
            fluents);
        if (observed != filter_fluents(predicted, fluents)) {
          step.diagnostics.last_failure_stage = "abstraction-mismatch";
          result.diagnostics.resamples += 1;
          continue;
        }
        world = res.instance->world_after;
        sym_state = std::move(predicted);
        step.head = res.instance->head;
        step.tail = res.instance->tail;
        step.policy_trace = res.instance->policy_trace;
        step.attribute_changes = res.instance->attribute_changes;
        step_ok = true;
        break;
      }
      plan.steps.push_back(step);
      if (!step_ok) {
        refined = false;
        result.diagnostics.last_failure_action = action.str();
        result.diagnostics.last_failure_stage = step.diagnostics.last_failure_stage;
        result.diagnostics.last_failure_detail = step.diagnostics.last_failure_detail;
        break;
      }
    }

    if (refined) {
      plan.diagnostics = result.diagnostics;
      plan.diagnostics.backtracks = result.diagnostics.backtracks;
      result.status = SolveStatus::Solved;
      result.plan = std::move(plan);
      return result;
    }
    if (backtrack == limits.max_backtracks) break;  // no replan budget left
    forbidden.push_back(*symbolic.plan);
    result.diagnostics.backtracks += 1;
  }
  result.status = SolveStatus::InfeasibleWithinBudget;
  return result;
}

// ---------------------------------------------------------------------------
// Execution: deterministic replay with the CIP chain monitor.

struct TraceEvent {
  std::string kind;  // step_start, entry, policy, exit, surface_contact, goal
  std::size_t step = 0;
  std::string skill;
  std::optional<geo::Configuration> config;
  std::vector<std::string> changed;
};

struct ExecutionResult {
  sim::WorldState world;
  std::vector<TraceEvent> trace;
};

// Replays a refined plan, asserting the CIP chain contract at every
// boundary. A violation means a planner bug, never an expected outcome.
inline ExecutionResult execute(const HybridPlan& plan, const HybridProblem& hp) {
  ExecutionResult out{hp.world, {}};
  const double resolution = 0.01;
  const auto& ws = hp.workspace;

  auto expect = [](bool ok, const std::string& what) {
    if (!ok) throw ContractViolation(what);
  };

  for (std::size_t k = 0; k < plan.steps.size(); ++k) {
    const PlanStep& step = plan.steps[k];
    const skills::GroundedSkill& g = step.skill;
    out.trace.push_back({"step_start", k, g.str(), out.world.robot, {}});

    const skills::Condition init_cond = skills::initiation(g, ws, out.world);
    expect(geo::distance(step.head.start(), out.world.robot, ws.footprint) <= 1e-9,
           "step " + std::to_string(k) + ": head does not start at the current configuration");
    if (step.head.waypoints.size() > 1)
      expect(!skills::check(init_cond, ws, out.world),
             "step " + std::to_string(k) + ": non-trivial head starts inside the initiation set");

    auto head_step = sim::step_trajectory(ws, out.world, step.head, resolution);
    out.world = head_step.world;
    for (const auto& e : head_step.events)
      out.trace.push_back({e.kind, k, g.str(), std::nullopt, {e.target}});

    expect(skills::spatial_holds(skills::kinematic_envelope(init_cond), ws, out.world.robot,
                                 out.world),
           "step " + std::to_string(k) + ": head ends outside the initiation envelope");
    expect(skills::check(init_cond, ws, out.world),
           "step " + std::to_string(k) + ": initiation condition false at entry");
    out.trace.push_back({"entry", k, g.str(), out.world.robot, {}});

    const skills::Condition term_cond = skills::termination(g, ws, out.world);
    skills::PolicyOutcome policy;
    try {
      policy = skills::execute_policy(g, ws, out.world);
    } catch (const skills::SkillError& e) {
      throw ContractViolation("step " + std::to_string(k) + ": policy failed: " + e.what());
    }
    out.world = policy.world;
    expect(skills::check(term_cond, ws, out.world),
           "step " + std::to_string(k) + ": termination condition false after policy");
    out.trace.push_back({"policy", k, g.str(), out.world.robot, policy.attribute_changes});

    expect(geo::distance(step.tail.start(), out.world.robot, ws.footprint) <= 1e-9,
           "step " + std::to_string(k) + ": tail does not start at the policy terminal");
    auto tail_step = sim::step_trajectory(ws, out.world, step.tail, resolution);
    out.world = tail_step.world;
    for (const auto& e : tail_step.events)
      out.trace.push_back({e.kind, k, g.str(), std::nullopt, {e.target}});
    expect(!skills::termination_envelope_satisfied(skills::kinematic_envelope(term_cond), ws,
                                                   out.world.robot, out.world),
           "step " + std::to_string(k) + ": tail ends inside the termination envelope");
    out.trace.push_back({"exit", k, g.str(), out.world.robot, {}});
  }

  const sym::SymbolicState final_atoms =
      abstract_state(out.world, ws, hp.domain, hp.problem);
  sym::SymbolicState full = hp.problem.init;  // statics
  const auto fluents = fluent_predicates(hp.domain);
  for (auto it = full.begin(); it != full.end();) {
    if (fluents.count(it->predicate))
      it = full.erase(it);
    else
      ++it;
  }
  for (const auto& a : final_atoms) full.insert(a);
  expect(sym::holds(full, hp.problem.goal), "final state does not satisfy the goal");
  out.trace.push_back({"goal", plan.steps.size(), "", std::nullopt, {}});
  return out;
}

}  // namespace tasp::planner
