#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tasp/hybrid.hpp"
#include "tasp/plan_io.hpp"
#include "tasp/render.hpp"

namespace tasp::cli {

// Exit codes: 0 success, 1 input error (including digest mismatch),
// 2 infeasible within budget, 3 contract violation during execution.

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw planner::InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw planner::InputError("cannot write " + path);
  out << content;
}

struct Bundle {
  planner::HybridProblem problem;
  io::InputDigests digests;
};

inline Bundle load_bundle(const std::string& domain_path, const std::string& problem_path,
                          const std::string& scene_path, const std::string& skills_path) {
  Bundle b;
  const std::string domain_text = read_file(domain_path);
  const std::string problem_text = read_file(problem_path);
  const std::string scene_text = read_file(scene_path);
  const std::string skills_text = read_file(skills_path);
  b.digests = {io::digest(domain_text), io::digest(problem_text), io::digest(scene_text),
               io::digest(skills_text)};
  b.problem.domain = sym::parse_domain(domain_text);
  b.problem.problem = sym::parse_problem(problem_text, b.problem.domain);
  b.problem.registry = skills::parse_registry(skills_text);
  auto loaded = sim::load_scene(scene_text);
  b.problem.workspace = std::move(loaded.workspace);
  b.problem.world = std::move(loaded.world);
  // Fail fast: scene/problem fluents must agree, and every schema needs a
  // registered skill before planning starts.
  planner::initial_symbolic_state(b.problem);
  for (const auto& schema : b.problem.domain.schemas)
    if (b.problem.registry.find(schema.name) == nullptr)
      throw planner::InputError("no skill registered for action " + schema.name);
  return b;
}

struct CommonArgs {
  std::string domain, problem, scene, skills;
  std::uint64_t seed = 0;
  std::size_t max_backtracks = 25;
  std::size_t max_samples = 10;
  double timeout_s = 120.0;
  std::string out;
  double svg_scale = 60.0;
};

}  // namespace detail

inline int run(int argc, const char* const* argv) {
  CLI::App app{"tasp: hierarchical task-and-skill planning in a 2D world"};
  app.require_subcommand(1);
  detail::CommonArgs args;

  auto add_inputs = [&](CLI::App* cmd, bool need_scene) {
    cmd->add_option("--domain", args.domain, "PDDL domain file")->required();
    cmd->add_option("--problem", args.problem, "PDDL problem file")->required();
    if (need_scene) {
      cmd->add_option("--scene", args.scene, "scene JSON file")->required();
      cmd->add_option("--skills", args.skills, "skill registry JSON file")->required();
    }
  };

  CLI::App* plan = app.add_subcommand("plan", "compute a hybrid plan");
  add_inputs(plan, true);
  plan->add_option("--seed", args.seed, "random seed");
  plan->add_option("--max-backtracks", args.max_backtracks, "symbolic backtrack budget");
  plan->add_option("--max-samples", args.max_samples, "refinement attempts per step");
  plan->add_option("--timeout-s", args.timeout_s, "wall-clock budget in seconds");
  std::string plan_out = "plan.json";
  plan->add_option("--out", plan_out, "plan output path");

  CLI::App* exec = app.add_subcommand("exec", "execute a plan file and write the trace");
  add_inputs(exec, true);
  std::string exec_plan;
  exec->add_option("--plan", exec_plan, "plan JSON file")->required();
  std::string exec_out = "trace.jsonl";
  exec->add_option("--out", exec_out, "trace output path");

  CLI::App* render =
      app.add_subcommand("render", "render the scene (and optional plan/trace) to SVG");
  render->add_option("--scene", args.scene, "scene JSON file")->required();
  std::string render_plan, render_trace, render_domain, render_problem, render_skills;
  render->add_option("--plan", render_plan, "plan JSON file (draws trajectories)");
  render->add_option("--trace", render_trace, "trace JSON-lines file (draws event markers)");
  render->add_option("--domain", render_domain, "PDDL domain (required with --plan)");
  render->add_option("--problem", render_problem, "PDDL problem (required with --plan)");
  render->add_option("--skills", render_skills, "skill registry (required with --plan)");
  std::string render_out = "scene.svg";
  render->add_option("--out", render_out, "SVG output path");
  render->add_option("--svg-scale", args.svg_scale, "pixels per meter");
  std::string layers;
  render->add_option("--layers", layers,
                     "comma list of layers to draw (regions,objects,surfaces,robot,trajectories)");

  CLI::App* check = app.add_subcommand("check", "parse and validate inputs, then exit");
  add_inputs(check, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (plan->parsed()) {
      const auto bundle =
          detail::load_bundle(args.domain, args.problem, args.scene, args.skills);
      planner::SolveLimits limits;
      limits.max_backtracks = args.max_backtracks;
      limits.max_samples_per_step = args.max_samples;
      limits.timeout_s = args.timeout_s;
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = planner::solve(bundle.problem, limits, args.seed);
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (res.status == planner::SolveStatus::SymbolicInfeasible) {
        std::cerr << "symbolic-infeasible: no task plan exists for this goal\n";
        return 2;
      }
      if (res.status == planner::SolveStatus::InfeasibleWithinBudget) {
        std::cerr << "infeasible-within-budget";
        if (!res.diagnostics.last_failure_action.empty())
          std::cerr << ": last failure at " << res.diagnostics.last_failure_action << " ("
                    << res.diagnostics.last_failure_stage << ")";
        std::cerr << "\n";
        return 2;
      }
      detail::write_file(plan_out, io::write_plan(*res.plan, bundle.digests, args.seed));
      std::cout << "plan: " << res.plan->steps.size() << " steps, symbolic cost "
                << res.plan->symbolic.cost << ", backtracks " << res.plan->diagnostics.backtracks
                << ", resamples " << res.plan->diagnostics.resamples << "\n";
      for (std::size_t k = 0; k < res.plan->steps.size(); ++k) {
        const auto& s = res.plan->steps[k];
        std::cout << "  " << (k + 1) << ". " << s.skill.str() << "  [" << s.action.str()
                  << "]  head " << s.head.waypoints.size() << " wp, policy "
                  << s.policy_trace.size() << " wp, tail " << s.tail.waypoints.size() << " wp\n";
      }
      std::cerr << "planning time: " << elapsed << " s\n";
      return 0;
    }

    if (exec->parsed()) {
      const auto bundle =
          detail::load_bundle(args.domain, args.problem, args.scene, args.skills);
      const std::string plan_text = detail::read_file(exec_plan);
      planner::HybridPlan hplan;
      try {
        hplan = io::read_plan(plan_text, bundle.problem, bundle.digests);
      } catch (const io::PlanFileError& e) {
        std::cerr << e.what() << "\n";
        return 1;
      }
      try {
        const auto exec_res = planner::execute(hplan, bundle.problem);
        detail::write_file(exec_out, io::write_trace(exec_res.trace));
        std::cout << "executed " << hplan.steps.size() << " steps, " << exec_res.trace.size()
                  << " trace events, goal satisfied\n";
        return 0;
      } catch (const planner::ContractViolation& e) {
        std::cerr << "contract-violation: " << e.what() << "\n";
        return 3;
      } catch (const sim::SimError& e) {
        if (e.code() == sim::SimError::Code::CollisionDuringExecution) {
          std::cerr << "contract-violation: " << e.what() << "\n";
          return 3;
        }
        throw;
      }
    }

    if (render->parsed()) {
      svg::RenderOptions opt;
      opt.scale = args.svg_scale;
      if (!layers.empty()) {
        opt.show_regions = layers.find("regions") != std::string::npos;
        opt.show_objects = layers.find("objects") != std::string::npos;
        opt.show_surfaces = layers.find("surfaces") != std::string::npos;
        opt.show_robot = layers.find("robot") != std::string::npos;
        opt.show_trajectories = layers.find("trajectories") != std::string::npos;
      }
      std::vector<planner::TraceEvent> trace;
      if (!render_trace.empty()) trace = io::read_trace(detail::read_file(render_trace));
      const auto* trace_ptr = render_trace.empty() ? nullptr : &trace;
      if (!render_plan.empty()) {
        if (render_domain.empty() || render_problem.empty() || render_skills.empty())
          throw planner::InputError("--plan requires --domain, --problem and --skills");
        auto bundle =
            detail::load_bundle(render_domain, render_problem, args.scene, render_skills);
        const planner::HybridProblem& hp = bundle.problem;
        const planner::HybridPlan hplan =
            io::read_plan(detail::read_file(render_plan), hp, bundle.digests);
        detail::write_file(render_out,
                           svg::render(hp.workspace, hp.world, &hplan, opt, trace_ptr));
      } else {
        const auto loaded = sim::load_scene(detail::read_file(args.scene));
        detail::write_file(render_out,
                           svg::render(loaded.workspace, loaded.world, nullptr, opt, trace_ptr));
      }
      std::cout << "wrote " << render_out << "\n";
      return 0;
    }

    if (check->parsed()) {
      const auto bundle =
          detail::load_bundle(args.domain, args.problem, args.scene, args.skills);
      std::cout << "ok: " << bundle.problem.domain.schemas.size() << " schemas, "
                << bundle.problem.problem.universe.size() << " objects, "
                << bundle.problem.world.objects.size() << " scene objects\n";
      return 0;
    }
  } catch (const sym::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const io::PlanFileError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const sim::SimError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const planner::InputError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace tasp::cli
