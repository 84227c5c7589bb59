#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "tasp/search.hpp"
#include "tasp/symbolic.hpp"

using namespace tasp;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kData = TASP_DATA_DIR;

sym::Domain sandwich_domain() { return sym::parse_domain(slurp(kData + "/sandwich/domain.pddl")); }

sym::SymbolicProblem sandwich_problem(const sym::Domain& d) {
  return sym::parse_problem(slurp(kData + "/sandwich/problem.pddl"), d);
}

std::vector<std::string> plan_strings(const sym::SymbolicPlan& plan) {
  std::vector<std::string> out;
  for (const auto& a : plan.steps) out.push_back(a.str());
  return out;
}

}  // namespace

TEST_CASE("parse minimal domain") {
  const auto d = sym::parse_domain("(define (domain mini) (:predicates (p ?x - object)))");
  CHECK(d.name == "mini");
  CHECK(d.predicates.size() == 1);
  CHECK(d.predicates[0].arity() == 1);
  CHECK(d.schemas.empty());
}

TEST_CASE("parse sandwich domain") {
  const auto d = sandwich_domain();
  REQUIRE(d.schemas.size() == 4);
  std::map<std::string, std::size_t> arity;
  for (const auto& s : d.schemas) arity[s.name] = s.parameters.size();
  CHECK(arity.at("Grasp") == 1);
  CHECK(arity.at("Open") == 1);
  CHECK(arity.at("Scoop") == 2);
  CHECK(arity.at("Spread") == 2);
  CHECK(d.constants.at("k1") == "tool");
  CHECK(d.is_subtype("jar", "graspable"));
  CHECK_FALSE(d.is_subtype("bread", "graspable"));
}

TEST_CASE("semantic domain errors") {
  try {
    sym::parse_domain(
        "(define (domain bad) (:predicates (p ?x - object))\n"
        "  (:action a :parameters (?x - object) :precondition (q ?x) :effect (p ?x)))");
    FAIL("expected ParseError");
  } catch (const sym::ParseError& e) {
    CHECK(std::string(e.what()).find("undeclared predicate 'q'") != std::string::npos);
    CHECK(e.line() == 2);
  }

  // Arity mismatch in an effect.
  CHECK_THROWS_AS(sym::parse_domain("(define (domain bad) (:predicates (p ?x - object))"
                                    " (:action a :parameters (?x - object)"
                                    " :precondition (p ?x) :effect (p ?x ?x)))"),
                  sym::ParseError);
}

TEST_CASE("unsupported constructs are rejected") {
  CHECK_THROWS_AS(
      sym::parse_domain("(define (domain bad) (:predicates (p ?x - object))"
                        " (:action a :parameters (?x - object)"
                        " :precondition (forall (?y - object) (p ?y)) :effect (p ?x)))"),
      sym::ParseError);
  CHECK_THROWS_AS(
      sym::parse_domain("(define (domain bad) (:predicates (p ?x - object))"
                        " (:action a :parameters (?x - object)"
                        " :precondition (p ?x) :effect (when (p ?x) (p ?x))))"),
      sym::ParseError);
  CHECK_THROWS_AS(sym::parse_domain("(define (domain bad) (:requirements :fluents))"),
                  sym::ParseError);
}

TEST_CASE("parse errors carry 1-based positions") {
  try {
    sym::parse_domain("(define (domain x)\n  (:predicates (p ?x - object))");
    FAIL("expected ParseError");
  } catch (const sym::ParseError& e) {
    CHECK(e.line() >= 2);
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
  }
}

TEST_CASE("parse problems") {
  const auto d = sandwich_domain();
  const auto p = sandwich_problem(d);
  CHECK(p.universe.at("j1") == "jar");
  CHECK(p.universe.at("k1") == "tool");  // domain constant joins the universe
  CHECK(p.goal.size() == 1);
  CHECK(p.goal[0].predicate == "covered");

  // Empty goal is satisfied by any state.
  const auto empty = sym::parse_problem(
      "(define (problem e) (:domain sandwich) (:objects j9 - jar) (:goal (and)))", d);
  CHECK(empty.goal.empty());
  CHECK(sym::holds(sym::SymbolicState{}, empty.goal));

  // Wrong arity in init.
  CHECK_THROWS_AS(sym::parse_problem("(define (problem e) (:domain sandwich)"
                                     " (:objects j9 - jar) (:init (sealed j9 j9)))",
                                     d),
                  sym::ParseError);
  // Unknown object type.
  CHECK_THROWS_AS(sym::parse_problem("(define (problem e) (:domain sandwich)"
                                     " (:objects x1 - widget))",
                                     d),
                  sym::ParseError);
  // Goal over an unknown object.
  CHECK_THROWS_AS(sym::parse_problem("(define (problem e) (:domain sandwich)"
                                     " (:goal (covered nosuch)))",
                                     d),
                  sym::ParseError);
}

TEST_CASE("whiteboard problem parses to the documented universe") {
  const auto d = sym::parse_domain(slurp(kData + "/whiteboard/domain.pddl"));
  const auto p = sym::parse_problem(slurp(kData + "/whiteboard/problem.pddl"), d);
  for (const char* obj : {"e1", "c1", "d1", "f1", "w1", "robot"}) CHECK(p.universe.count(obj));
  REQUIRE(p.goal.size() == 1);
  CHECK(p.goal[0].positive);
  CHECK(sym::GroundAtom{p.goal[0].predicate, p.goal[0].terms}.str() == "clean(w1)");
}

TEST_CASE("grounding counts are the product of type-consistent choices") {
  const auto d = sym::parse_domain(
      "(define (domain g) (:types ta tb - object)"
      " (:predicates (p ?x - ta) (q ?x - ta ?y - tb))"
      " (:action one :parameters (?x - ta) :precondition (p ?x) :effect (not (p ?x)))"
      " (:action two :parameters (?x - ta ?y - tb) :precondition (p ?x) :effect (q ?x ?y)))");
  const auto p = sym::parse_problem(
      "(define (problem g1) (:domain g) (:objects a1 a2 a3 - ta b1 b2 - tb) (:goal (and)))", d);
  const auto task = sym::ground(d, p);
  int ones = 0, twos = 0;
  for (const auto& a : task.actions) (a.name == "one" ? ones : twos)++;
  CHECK(ones == 3);
  CHECK(twos == 6);
}

TEST_CASE("sandwich grounding matches exhaustive enumeration oracle") {
  const auto d = sandwich_domain();
  const auto p = sandwich_problem(d);
  const auto task = sym::ground(d, p);

  // Independent enumeration of type-consistent tuples.
  std::size_t expected = 0;
  for (const auto& schema : d.schemas) {
    std::size_t combos = 1;
    for (const auto& type : schema.parameter_types) {
      std::size_t fits = 0;
      for (const auto& [obj, otype] : p.universe)
        if (d.is_subtype(otype, type)) ++fits;
      combos *= fits;
    }
    expected += combos;
  }
  CHECK(task.actions.size() == expected);
  CHECK(expected == 2 + 1 + 1 + 1);  // Grasp x2, Open, Scoop, Spread
}

TEST_CASE("holds evaluates conjunctions of literals") {
  sym::SymbolicState s{{"p", {"a"}}};
  CHECK(sym::holds(s, {}));
  std::vector<sym::Literal> f{{true, "p", {"a"}}, {false, "q", {"a"}}};
  CHECK(sym::holds(s, f));
  s.insert({"q", {"a"}});
  CHECK_FALSE(sym::holds(s, f));
}

TEST_CASE("apply implements add/delete semantics") {
  sym::GroundAction noop;
  noop.name = "noop";
  sym::SymbolicState s{{"p", {"a"}}};
  CHECK(sym::apply(s, noop) == s);

  const auto d = sym::parse_domain(slurp(kData + "/whiteboard/domain.pddl"));
  const auto p = sym::parse_problem(slurp(kData + "/whiteboard/problem.pddl"), d);
  const auto task = sym::ground(d, p);
  const sym::GroundAction* pick = nullptr;
  for (const auto& a : task.actions)
    if (a.str() == "Pick(e1,c1,zdrawer)") pick = &a;
  REQUIRE(pick != nullptr);

  sym::SymbolicState state{{"handempty", {}},
                           {"in", {"e1", "c1"}},
                           {"open", {"c1"}},
                           {"at-region", {"robot", "zdrawer"}},
                           {"at", {"c1", "zdrawer"}}};
  const auto next = sym::apply(state, *pick);
  CHECK(next.count({"holding", {"e1"}}));
  CHECK(next.count({"open", {"c1"}}));
  CHECK_FALSE(next.count({"handempty", {}}));
  CHECK_FALSE(next.count({"in", {"e1", "c1"}}));

  // Precondition violation: drawer closed.
  sym::SymbolicState closed{{"handempty", {}}, {"in", {"e1", "c1"}}};
  CHECK_THROWS_AS(sym::apply(closed, *pick), std::invalid_argument);
}

TEST_CASE("empty plan when the goal already holds") {
  const auto d = sandwich_domain();
  auto p = sandwich_problem(d);
  p.init.insert({"covered", {"b1"}});
  const auto task = sym::ground(d, p);
  const auto res = sym::plan_symbolic(task);
  REQUIRE(res.status == sym::PlanStatus::Found);
  CHECK(res.plan->steps.empty());
  CHECK(res.plan->cost == 0.0);
}

TEST_CASE("sandwich plan is the unique documented sequence") {
  const auto d = sandwich_domain();
  const auto p = sandwich_problem(d);
  const auto task = sym::ground(d, p);

  const std::vector<std::string> expected{"Grasp(j1)", "Open(j1)", "Grasp(k1)", "Scoop(k1,j1)",
                                          "Spread(k1,b1)"};

  for (auto mode : {sym::PlanMode::Exact, sym::PlanMode::Additive}) {
    const auto res = sym::plan_symbolic(task, {}, {}, mode);
    REQUIRE(res.status == sym::PlanStatus::Found);
    CHECK(plan_strings(*res.plan) == expected);
    CHECK(sym::validate_plan(task, *res.plan));
  }

  // Oracle: it is the unique cost-optimal plan.
  const auto all = oracles::enumerate_optimal_plans(task);
  REQUIRE(all.size() == 1);
  CHECK(all[0] == expected);
  CHECK(oracles::bfs_optimal_cost(task).cost == doctest::Approx(5.0));
}

TEST_CASE("plan forbidding returns the next-best distinct plan") {
  const auto d = sandwich_domain();
  const auto p = sandwich_problem(d);
  const auto task = sym::ground(d, p);

  const auto first = sym::plan_symbolic(task);
  REQUIRE(first.status == sym::PlanStatus::Found);

  const auto second = sym::plan_symbolic(task, {*first.plan});
  REQUIRE(second.status == sym::PlanStatus::Found);
  CHECK(second.plan->key() != first.plan->key());
  CHECK(second.plan->cost >= 5.0);
  CHECK(sym::validate_plan(task, *second.plan));

  const auto third = sym::plan_symbolic(task, {*first.plan, *second.plan});
  REQUIRE(third.status == sym::PlanStatus::Found);
  CHECK(third.plan->key() != first.plan->key());
  CHECK(third.plan->key() != second.plan->key());
  CHECK(third.plan->cost >= second.plan->cost - 1e-9);
}

TEST_CASE("infeasible and budget-exhausted are distinct outcomes") {
  const auto d = sandwich_domain();
  auto p = sandwich_problem(d);
  p.init.erase({"has-filling", {"j1"}});  // scooping becomes impossible
  const auto task = sym::ground(d, p);
  CHECK(sym::plan_symbolic(task).status == sym::PlanStatus::Infeasible);

  const auto full = sym::ground(d, sandwich_problem(d));
  sym::PlanLimits tiny;
  tiny.max_expansions = 1;
  CHECK(sym::plan_symbolic(full, {}, tiny).status == sym::PlanStatus::BudgetExhausted);
}

TEST_CASE("whiteboard symbolic plan is optimal and deterministic") {
  const auto d = sym::parse_domain(slurp(kData + "/whiteboard/domain.pddl"));
  const auto p = sym::parse_problem(slurp(kData + "/whiteboard/problem.pddl"), d);
  const auto task = sym::ground(d, p);

  const auto res = sym::plan_symbolic(task);
  REQUIRE(res.status == sym::PlanStatus::Found);
  CHECK(sym::validate_plan(task, *res.plan));

  const auto oracle = oracles::bfs_optimal_cost(task);
  REQUIRE(oracle.solvable);
  CHECK(res.plan->cost == doctest::Approx(oracle.cost));

  const auto rerun = sym::plan_symbolic(task);
  CHECK(rerun.plan->key() == res.plan->key());

  // Every optimal plan shares the non-navigation subsequence.
  const std::vector<std::string> skeleton{"OpenDoor(d1,zdoor1)", "OpenDrawer(c1,zdrawer)",
                                          "Pick(e1,c1,zdrawer)", "Place(e1,f1,zcab)",
                                          "CloseDoor(d1,zcab)",  "PickUp(e1,f1,zcab)",
                                          "Erase(w1,e1,d1,zcab)"};
  const auto all = oracles::enumerate_optimal_plans(task);
  REQUIRE(all.size() >= 1);
  for (const auto& plan : all) {
    std::vector<std::string> filtered;
    for (const auto& step : plan)
      if (step.rfind("GoTo", 0) != 0 && step.rfind("GoThrough", 0) != 0) filtered.push_back(step);
    CHECK(filtered == skeleton);
  }
}

TEST_CASE("non-uniform action costs steer the planner") {
  const auto d = sym::parse_domain(
      "(define (domain costs) (:predicates (a) (b) (g))"
      " (:action jump :parameters () :precondition (a) :effect (and (g) (not (a))) :cost 3.5)"
      " (:action step1 :parameters () :precondition (a) :effect (and (b) (not (a))))"
      " (:action step2 :parameters () :precondition (b) :effect (and (g) (not (b)))))");
  CHECK(d.schemas[0].cost == doctest::Approx(3.5));

  const auto p = sym::parse_problem(
      "(define (problem c1) (:domain costs) (:init (a)) (:goal (g)))", d);
  const auto task = sym::ground(d, p);
  const auto res = sym::plan_symbolic(task);
  REQUIRE(res.status == sym::PlanStatus::Found);
  CHECK(res.plan->steps.size() == 2);  // two unit steps beat the 3.5 jump
  CHECK(res.plan->cost == doctest::Approx(2.0));
  CHECK(oracles::bfs_optimal_cost(task).cost == doctest::Approx(2.0));

  // Forbid the cheap route; the costly jump is next best.
  const auto alt = sym::plan_symbolic(task, {*res.plan});
  REQUIRE(alt.status == sym::PlanStatus::Found);
  CHECK(alt.plan->cost == doctest::Approx(3.5));

  CHECK_THROWS_AS(sym::parse_domain("(define (domain bad) (:predicates (a))"
                                    " (:action x :parameters () :precondition (a)"
                                    " :effect (a) :cost -1))"),
                  sym::ParseError);
}

TEST_CASE("random instances match the BFS oracle cost") {
  // Key-and-door style random navigation domains, <= 10^4 reachable states.
  Rng rng(4242);
  for (int trial = 0; trial < 5; ++trial) {
    sym::Domain d;
    d.type_parents["node"] = "object";
    d.type_parents["key"] = "object";
    d.predicates.push_back({"atn", {"node"}});
    d.predicates.push_back({"edge", {"node", "node"}});
    d.predicates.push_back({"have", {"key"}});
    d.predicates.push_back({"keyat", {"key", "node"}});

    sym::ActionSchema move;
    move.name = "move";
    move.parameters = {"?a", "?b"};
    move.parameter_types = {"node", "node"};
    move.preconditions = {{true, "atn", {"?a"}}, {true, "edge", {"?a", "?b"}}};
    move.effects = {{true, "atn", {"?b"}}, {false, "atn", {"?a"}}};
    d.schemas.push_back(move);

    sym::ActionSchema grab;
    grab.name = "grab";
    grab.parameters = {"?k", "?n"};
    grab.parameter_types = {"key", "node"};
    grab.preconditions = {{true, "atn", {"?n"}}, {true, "keyat", {"?k", "?n"}}};
    grab.effects = {{true, "have", {"?k"}}, {false, "keyat", {"?k", "?n"}}};
    d.schemas.push_back(grab);

    sym::SymbolicProblem p;
    const int n_nodes = 8 + static_cast<int>(rng.index(5));
    const int n_keys = 2 + static_cast<int>(rng.index(3));
    for (int i = 0; i < n_nodes; ++i) p.universe["n" + std::to_string(i)] = "node";
    for (int i = 0; i < n_keys; ++i) p.universe["k" + std::to_string(i)] = "key";
    p.init.insert({"atn", {"n0"}});
    for (int i = 0; i + 1 < n_nodes; ++i) {
      p.init.insert({"edge", {"n" + std::to_string(i), "n" + std::to_string(i + 1)}});
      p.init.insert({"edge", {"n" + std::to_string(i + 1), "n" + std::to_string(i)}});
    }
    for (int i = 0; i < n_nodes; ++i) {
      const auto a = rng.index(static_cast<std::size_t>(n_nodes));
      const auto b = rng.index(static_cast<std::size_t>(n_nodes));
      if (a != b)
        p.init.insert({"edge", {"n" + std::to_string(a), "n" + std::to_string(b)}});
    }
    for (int i = 0; i < n_keys; ++i)
      p.init.insert(
          {"keyat", {"k" + std::to_string(i), "n" + std::to_string(rng.index(n_nodes))}});
    for (int i = 0; i < n_keys; ++i) p.goal.push_back({true, "have", {"k" + std::to_string(i)}});
    p.goal.push_back({true, "atn", {"n" + std::to_string(n_nodes - 1)}});

    const auto task = sym::ground(d, p);
    const auto oracle = oracles::bfs_optimal_cost(task);
    const auto res = sym::plan_symbolic(task);
    REQUIRE(oracle.solvable);
    REQUIRE(res.status == sym::PlanStatus::Found);
    CHECK(res.plan->cost == doctest::Approx(oracle.cost));
    CHECK(sym::validate_plan(task, *res.plan));
  }
}
