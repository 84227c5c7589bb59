#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tasp/hybrid.hpp"

namespace tasp::io {

// FNV-1a 64-bit content digest, hex encoded. Used to pin plan files to the
// exact inputs they were computed from.
inline std::string digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

struct InputDigests {
  std::string domain, problem, scene, skills;
};

namespace detail {

inline nlohmann::json config_json(const geo::Configuration& c) {
  return nlohmann::json::array({c.base.x, c.base.y, c.base.theta, c.arm});
}

inline geo::Configuration config_from(const nlohmann::json& j) {
  return geo::Configuration(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                            j.at(3).get<double>());
}

inline nlohmann::json trajectory_json(const geo::Trajectory& t) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : t.waypoints) out.push_back(config_json(c));
  return out;
}

inline geo::Trajectory trajectory_from(const nlohmann::json& j) {
  std::vector<geo::Configuration> wp;
  for (const auto& c : j) wp.push_back(config_from(c));
  return geo::Trajectory(std::move(wp));
}

}  // namespace detail

inline std::string write_plan(const planner::HybridPlan& plan, const InputDigests& digests,
                              std::uint64_t seed) {
  nlohmann::json j;
  j["format"] = "tasp-plan/1";
  j["seed"] = seed;
  j["inputs"] = {{"domain", digests.domain},
                 {"problem", digests.problem},
                 {"scene", digests.scene},
                 {"skills", digests.skills}};
  j["symbolic_cost"] = plan.symbolic.cost;
  j["diagnostics"] = {{"backtracks", plan.diagnostics.backtracks},
                      {"resamples", plan.diagnostics.resamples}};
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : plan.steps) {
    nlohmann::json step;
    step["action"] = {{"name", s.action.name}, {"args", s.action.args}};
    step["skill"] = s.skill.str();
    step["entry"] = detail::config_json(s.head.end());
    step["exit"] = detail::config_json(s.tail.end());
    step["head"] = detail::trajectory_json(s.head);
    nlohmann::json policy = nlohmann::json::array();
    for (const auto& c : s.policy_trace) policy.push_back(detail::config_json(c));
    step["policy"] = policy;
    step["tail"] = detail::trajectory_json(s.tail);
    step["attribute_changes"] = s.attribute_changes;
    step["diagnostics"] = {{"samples_tried", s.diagnostics.samples_tried},
                           {"entry_rejections", s.diagnostics.entry_rejections},
                           {"last_failure_stage", s.diagnostics.last_failure_stage}};
    steps.push_back(step);
  }
  j["steps"] = steps;
  return j.dump(2) + "\n";
}

class PlanFileError : public std::runtime_error {
 public:
  explicit PlanFileError(const std::string& msg) : std::runtime_error(msg) {}
};

// Reads a plan file back into a replayable HybridPlan against the given
// problem. Digests must match the inputs the plan was computed from.
inline planner::HybridPlan read_plan(const std::string& text, const planner::HybridProblem& hp,
                                     const InputDigests& digests) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PlanFileError(std::string("plan parse error: ") + e.what());
  }
  try {
    if (j.value("format", "") != "tasp-plan/1") throw PlanFileError("unknown plan format");
    const auto& in = j.at("inputs");
    auto check_digest = [&](const char* key, const std::string& expect) {
      if (in.at(key).get<std::string>() != expect)
        throw PlanFileError(std::string("digest mismatch for ") + key +
                            ": the plan was computed against different inputs");
    };
    check_digest("domain", digests.domain);
    check_digest("problem", digests.problem);
    check_digest("scene", digests.scene);
    check_digest("skills", digests.skills);

    planner::HybridPlan plan;
    for (const auto& js : j.at("steps")) {
      planner::PlanStep step;
      step.action.name = js.at("action").at("name").get<std::string>();
      for (const auto& a : js.at("action").at("args")) step.action.args.push_back(a);
      // Recover the grounded action (with effects) from the domain.
      bool found = false;
      for (const auto& schema : hp.domain.schemas) {
        if (schema.name != step.action.name ||
            schema.parameters.size() != step.action.args.size())
          continue;
        std::map<std::string, std::string> bind;
        for (std::size_t i = 0; i < schema.parameters.size(); ++i)
          bind[schema.parameters[i]] = step.action.args[i];
        step.action.cost = schema.cost;
        step.action.pre_pos.clear();
        step.action.pre_neg.clear();
        step.action.add.clear();
        step.action.del.clear();
        for (const auto& lit : schema.preconditions) {
          sym::GroundAtom atom{lit.predicate, {}};
          for (const auto& t : lit.terms)
            atom.args.push_back(!t.empty() && t[0] == '?' ? bind.at(t) : t);
          (lit.positive ? step.action.pre_pos : step.action.pre_neg).push_back(atom);
        }
        for (const auto& lit : schema.effects) {
          sym::GroundAtom atom{lit.predicate, {}};
          for (const auto& t : lit.terms)
            atom.args.push_back(!t.empty() && t[0] == '?' ? bind.at(t) : t);
          (lit.positive ? step.action.add : step.action.del).push_back(atom);
        }
        found = true;
        break;
      }
      if (!found) throw PlanFileError("plan action not in domain: " + step.action.str());
      step.skill = hp.registry.ground(step.action, hp.domain);
      if (step.skill.str() != js.at("skill").get<std::string>())
        throw PlanFileError("plan skill grounding mismatch for " + step.action.str());
      step.head = detail::trajectory_from(js.at("head"));
      step.tail = detail::trajectory_from(js.at("tail"));
      for (const auto& c : js.at("policy")) step.policy_trace.push_back(detail::config_from(c));
      plan.steps.push_back(std::move(step));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw PlanFileError(std::string("plan parse error: ") + e.what());
  }
}

inline std::string write_trace(const std::vector<planner::TraceEvent>& trace) {
  std::string out;
  for (const auto& e : trace) {
    nlohmann::json j;
    j["event"] = e.kind;
    j["step"] = e.step;
    if (!e.skill.empty()) j["skill"] = e.skill;
    if (e.config) j["config"] = detail::config_json(*e.config);
    if (!e.changed.empty()) j["changed"] = e.changed;
    out += j.dump();
    out += "\n";
  }
  return out;
}

inline std::vector<planner::TraceEvent> read_trace(const std::string& text) {
  std::vector<planner::TraceEvent> trace;
  std::size_t begin = 0;
  while (begin < text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(begin, end - begin);
    begin = end + 1;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw PlanFileError(std::string("trace parse error: ") + e.what());
    }
    planner::TraceEvent event;
    event.kind = j.value("event", "");
    event.step = j.value("step", std::size_t{0});
    event.skill = j.value("skill", "");
    if (j.contains("config")) event.config = detail::config_from(j.at("config"));
    if (j.contains("changed"))
      for (const auto& c : j.at("changed")) event.changed.push_back(c.get<std::string>());
    trace.push_back(std::move(event));
  }
  return trace;
}

}  // namespace tasp::io
