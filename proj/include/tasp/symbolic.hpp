#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tasp::sym {

// Parse failure with a 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line_(line),
        col_(col) {}

  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

struct Predicate {
  std::string name;
  std::vector<std::string> parameter_types;

  std::size_t arity() const { return parameter_types.size(); }
};

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;

  auto operator<=>(const GroundAtom&) const = default;

  std::string str() const {
    std::string s = predicate + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i > 0) s += ",";
      s += args[i];
    }
    return s + ")";
  }
};

using SymbolicState = std::set<GroundAtom>;

// One literal of a precondition/effect/goal conjunction. Variables are
// written with a leading '?'; anything else is a constant.
struct Literal {
  bool positive = true;
  std::string predicate;
  std::vector<std::string> terms;
};

struct ActionSchema {
  std::string name;
  std::vector<std::string> parameters;
  std::vector<std::string> parameter_types;
  std::vector<Literal> preconditions;
  std::vector<Literal> effects;  // positive = add, negative = delete
  double cost = 1.0;
};

struct Domain {
  std::string name;
  std::map<std::string, std::string> type_parents;     // type -> parent ("object" is the root)
  std::map<std::string, std::string> constants;        // name -> type
  std::vector<Predicate> predicates;
  std::vector<ActionSchema> schemas;

  const Predicate* find_predicate(const std::string& name) const {
    for (const auto& p : predicates)
      if (p.name == name) return &p;
    return nullptr;
  }

  bool has_type(const std::string& t) const {
    return t == "object" || type_parents.find(t) != type_parents.end();
  }

  // True iff `t` equals `ancestor` or derives from it.
  bool is_subtype(std::string t, const std::string& ancestor) const {
    while (true) {
      if (t == ancestor) return true;
      if (t == "object") return false;
      auto it = type_parents.find(t);
      t = it == type_parents.end() ? "object" : it->second;
    }
  }
};

struct SymbolicProblem {
  std::string name;
  std::map<std::string, std::string> universe;  // object -> type (includes domain constants)
  SymbolicState init;
  std::vector<Literal> goal;  // grounded literals
};

struct GroundAction {
  std::string name;
  std::vector<std::string> args;
  std::vector<GroundAtom> pre_pos;
  std::vector<GroundAtom> pre_neg;
  std::vector<GroundAtom> add;
  std::vector<GroundAtom> del;
  double cost = 1.0;

  std::string str() const {
    std::string s = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i > 0) s += ",";
      s += args[i];
    }
    return s + ")";
  }
};

// ---------------------------------------------------------------------------
// S-expression reader with line/column tracking.

namespace detail {

struct Token {
  enum class Kind { LParen, RParen, Symbol, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string text) : text_(std::move(text)) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= text_.size()) return t;
    const char c = text_[pos_];
    if (c == '(') {
      advance();
      t.kind = Token::Kind::LParen;
      t.text = "(";
      return t;
    }
    if (c == ')') {
      advance();
      t.kind = Token::Kind::RParen;
      t.text = ")";
      return t;
    }
    t.kind = Token::Kind::Symbol;
    while (pos_ < text_.size()) {
      const char s = text_[pos_];
      if (s == '(' || s == ')' || s == ';' || std::isspace(static_cast<unsigned char>(s))) break;
      t.text += s;
      advance();
    }
    return t;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct SExpr {
  // Leaf iff children empty and atom non-empty; "()" is a node with no children.
  std::string atom;
  std::vector<SExpr> children;
  bool is_list = false;
  int line = 1;
  int col = 1;

  bool is_atom() const { return !is_list; }
};

inline SExpr parse_sexpr(Lexer& lex, const Token& first) {
  SExpr e;
  e.line = first.line;
  e.col = first.col;
  if (first.kind == Token::Kind::Symbol) {
    e.atom = first.text;
    return e;
  }
  if (first.kind != Token::Kind::LParen)
    throw ParseError(first.line, first.col, "expected '(' or symbol");
  e.is_list = true;
  while (true) {
    Token t = lex.next();
    if (t.kind == Token::Kind::End) throw ParseError(t.line, t.col, "expected ')', got end of input");
    if (t.kind == Token::Kind::RParen) return e;
    e.children.push_back(parse_sexpr(lex, t));
  }
}

inline SExpr parse_toplevel(const std::string& text) {
  Lexer lex(text);
  Token t = lex.next();
  if (t.kind == Token::Kind::End) throw ParseError(t.line, t.col, "expected '(', got end of input");
  SExpr e = parse_sexpr(lex, t);
  Token rest = lex.next();
  if (rest.kind != Token::Kind::End)
    throw ParseError(rest.line, rest.col, "unexpected trailing content");
  return e;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Reads a typed list "a b - t c d - u ..."; untyped names default to `object`.
inline std::vector<std::pair<std::string, std::string>> read_typed_list(
    const std::vector<SExpr>& items, std::size_t begin, const SExpr& ctx) {
  std::vector<std::pair<std::string, std::string>> out;
  std::vector<std::string> pending;
  for (std::size_t i = begin; i < items.size(); ++i) {
    const SExpr& it = items[i];
    if (!it.is_atom()) throw ParseError(it.line, it.col, "expected name in typed list");
    if (it.atom == "-") {
      if (i + 1 >= items.size() || !items[i + 1].is_atom())
        throw ParseError(it.line, it.col, "expected type name after '-'");
      const std::string& type = items[i + 1].atom;
      for (auto& name : pending) out.emplace_back(name, type);
      pending.clear();
      ++i;
    } else {
      pending.push_back(it.atom);
    }
  }
  for (auto& name : pending) out.emplace_back(name, "object");
  (void)ctx;
  return out;
}

inline Literal read_literal(const SExpr& e) {
  if (!e.is_list || e.children.empty())
    throw ParseError(e.line, e.col, "expected literal");
  Literal lit;
  const SExpr* body = &e;
  if (lower(e.children[0].atom) == "not") {
    if (e.children.size() != 2 || !e.children[1].is_list)
      throw ParseError(e.line, e.col, "malformed (not ...)");
    lit.positive = false;
    body = &e.children[1];
    if (body->children.empty()) throw ParseError(body->line, body->col, "expected literal");
  }
  const SExpr& head = body->children[0];
  if (!head.is_atom()) throw ParseError(head.line, head.col, "expected predicate name");
  const std::string lowered = lower(head.atom);
  if (lowered == "forall" || lowered == "exists" || lowered == "when" || lowered == "or" ||
      lowered == "imply" || lowered == "increase" || lowered == "decrease" || lowered == "assign")
    throw ParseError(head.line, head.col, "unsupported construct '" + head.atom + "'");
  lit.predicate = head.atom;
  for (std::size_t i = 1; i < body->children.size(); ++i) {
    const SExpr& arg = body->children[i];
    if (!arg.is_atom()) throw ParseError(arg.line, arg.col, "expected term");
    lit.terms.push_back(arg.atom);
  }
  return lit;
}

// Accepts a single literal or an (and ...) of literals.
inline std::vector<Literal> read_conjunction(const SExpr& e) {
  std::vector<Literal> out;
  if (!e.is_list) throw ParseError(e.line, e.col, "expected formula");
  if (!e.children.empty() && e.children[0].is_atom() && lower(e.children[0].atom) == "and") {
    for (std::size_t i = 1; i < e.children.size(); ++i) out.push_back(read_literal(e.children[i]));
    return out;
  }
  if (e.children.empty()) return out;  // "()" = empty conjunction
  out.push_back(read_literal(e));
  return out;
}

inline void check_literal(const Domain& d, const Literal& lit,
                          const std::map<std::string, std::string>& scope, const SExpr& at) {
  const Predicate* pred = d.find_predicate(lit.predicate);
  if (pred == nullptr)
    throw ParseError(at.line, at.col, "undeclared predicate '" + lit.predicate + "'");
  if (pred->arity() != lit.terms.size())
    throw ParseError(at.line, at.col,
                     "predicate '" + lit.predicate + "' expects " + std::to_string(pred->arity()) +
                         " arguments, got " + std::to_string(lit.terms.size()));
  for (std::size_t i = 0; i < lit.terms.size(); ++i) {
    const std::string& term = lit.terms[i];
    std::string term_type;
    if (!term.empty() && term[0] == '?') {
      auto it = scope.find(term);
      if (it == scope.end())
        throw ParseError(at.line, at.col, "variable '" + term + "' not declared in parameters");
      term_type = it->second;
    } else {
      auto it = d.constants.find(term);
      if (it == d.constants.end())
        throw ParseError(at.line, at.col, "unknown constant '" + term + "'");
      term_type = it->second;
    }
    if (!d.is_subtype(term_type, pred->parameter_types[i]))
      throw ParseError(at.line, at.col,
                       "term '" + term + "' of type " + term_type + " does not fit parameter type " +
                           pred->parameter_types[i] + " of '" + lit.predicate + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Domain / problem parsing.

// Accepted subset: :types (single inheritance), :constants, :predicates, and
// :action blocks with conjunctive preconditions (positive and negative
// literals), conjunctive add/delete effects, and an optional :cost number.
// Quantifiers, conditional effects and numeric fluents are rejected.
inline Domain parse_domain(const std::string& text) {
  using detail::SExpr;
  const SExpr top = detail::parse_toplevel(text);
  if (!top.is_list || top.children.empty() || detail::lower(top.children[0].atom) != "define")
    throw ParseError(top.line, top.col, "expected (define (domain ...) ...)");

  Domain d;
  bool saw_name = false;
  for (std::size_t i = 1; i < top.children.size(); ++i) {
    const SExpr& sec = top.children[i];
    if (!sec.is_list || sec.children.empty() || !sec.children[0].is_atom())
      throw ParseError(sec.line, sec.col, "expected domain section");
    const std::string key = detail::lower(sec.children[0].atom);

    if (key == "domain") {
      if (sec.children.size() != 2) throw ParseError(sec.line, sec.col, "expected (domain name)");
      d.name = sec.children[1].atom;
      saw_name = true;
    } else if (key == ":requirements") {
      for (std::size_t j = 1; j < sec.children.size(); ++j) {
        const std::string req = detail::lower(sec.children[j].atom);
        if (req != ":strips" && req != ":typing" && req != ":negative-preconditions" &&
            req != ":action-costs")
          throw ParseError(sec.children[j].line, sec.children[j].col,
                           "unsupported requirement '" + sec.children[j].atom + "'");
      }
    } else if (key == ":types") {
      for (auto& [t, parent] : detail::read_typed_list(sec.children, 1, sec)) {
        if (d.type_parents.count(t))
          throw ParseError(sec.line, sec.col, "type '" + t + "' declared twice");
        d.type_parents[t] = parent;
      }
      for (const auto& [t, parent] : d.type_parents) {
        if (parent != "object" && !d.type_parents.count(parent))
          throw ParseError(sec.line, sec.col, "undeclared parent type '" + parent + "'");
      }
    } else if (key == ":constants") {
      for (auto& [name, type] : detail::read_typed_list(sec.children, 1, sec)) {
        if (!d.has_type(type))
          throw ParseError(sec.line, sec.col, "undeclared type '" + type + "'");
        d.constants[name] = type;
      }
    } else if (key == ":predicates") {
      for (std::size_t j = 1; j < sec.children.size(); ++j) {
        const SExpr& pe = sec.children[j];
        if (!pe.is_list || pe.children.empty() || !pe.children[0].is_atom())
          throw ParseError(pe.line, pe.col, "expected predicate declaration");
        Predicate p;
        p.name = pe.children[0].atom;
        if (d.find_predicate(p.name))
          throw ParseError(pe.line, pe.col, "predicate '" + p.name + "' declared twice");
        for (auto& [var, type] : detail::read_typed_list(pe.children, 1, pe)) {
          if (var.empty() || var[0] != '?')
            throw ParseError(pe.line, pe.col, "predicate parameters must be variables");
          if (!d.has_type(type)) throw ParseError(pe.line, pe.col, "undeclared type '" + type + "'");
          p.parameter_types.push_back(type);
        }
        d.predicates.push_back(std::move(p));
      }
    } else if (key == ":action") {
      if (sec.children.size() < 2 || !sec.children[1].is_atom())
        throw ParseError(sec.line, sec.col, "expected action name");
      ActionSchema a;
      a.name = sec.children[1].atom;
      std::map<std::string, std::string> scope;
      std::size_t j = 2;
      while (j < sec.children.size()) {
        const SExpr& kw = sec.children[j];
        if (!kw.is_atom()) throw ParseError(kw.line, kw.col, "expected action keyword");
        const std::string k = detail::lower(kw.atom);
        if (j + 1 >= sec.children.size())
          throw ParseError(kw.line, kw.col, "missing value after '" + kw.atom + "'");
        const SExpr& val = sec.children[j + 1];
        if (k == ":parameters") {
          if (!val.is_list) throw ParseError(val.line, val.col, "expected parameter list");
          for (auto& [var, type] : detail::read_typed_list(val.children, 0, val)) {
            if (var.empty() || var[0] != '?')
              throw ParseError(val.line, val.col, "action parameters must be variables");
            if (!d.has_type(type))
              throw ParseError(val.line, val.col, "undeclared type '" + type + "'");
            if (scope.count(var))
              throw ParseError(val.line, val.col, "duplicate parameter '" + var + "'");
            scope[var] = type;
            a.parameters.push_back(var);
            a.parameter_types.push_back(type);
          }
        } else if (k == ":precondition") {
          a.preconditions = detail::read_conjunction(val);
        } else if (k == ":effect") {
          a.effects = detail::read_conjunction(val);
        } else if (k == ":cost") {
          if (!val.is_atom()) throw ParseError(val.line, val.col, "expected cost number");
          try {
            a.cost = std::stod(val.atom);
          } catch (const std::exception&) {
            throw ParseError(val.line, val.col, "invalid cost '" + val.atom + "'");
          }
          if (a.cost <= 0.0) throw ParseError(val.line, val.col, "cost must be positive");
        } else {
          throw ParseError(kw.line, kw.col, "unsupported action keyword '" + kw.atom + "'");
        }
        j += 2;
      }
      for (const Literal& lit : a.preconditions) detail::check_literal(d, lit, scope, sec);
      for (const Literal& lit : a.effects) detail::check_literal(d, lit, scope, sec);
      for (const auto& other : d.schemas)
        if (other.name == a.name)
          throw ParseError(sec.line, sec.col, "action '" + a.name + "' declared twice");
      d.schemas.push_back(std::move(a));
    } else {
      throw ParseError(sec.line, sec.col, "unsupported domain section '" + sec.children[0].atom + "'");
    }
  }
  if (!saw_name) throw ParseError(top.line, top.col, "domain has no (domain name) section");
  return d;
}

inline SymbolicProblem parse_problem(const std::string& text, const Domain& domain) {
  using detail::SExpr;
  const SExpr top = detail::parse_toplevel(text);
  if (!top.is_list || top.children.empty() || detail::lower(top.children[0].atom) != "define")
    throw ParseError(top.line, top.col, "expected (define (problem ...) ...)");

  SymbolicProblem p;
  p.universe = domain.constants;

  auto ground_literal = [&](const SExpr& e) {
    Literal lit = detail::read_literal(e);
    const Predicate* pred = domain.find_predicate(lit.predicate);
    if (pred == nullptr)
      throw ParseError(e.line, e.col, "undeclared predicate '" + lit.predicate + "'");
    if (pred->arity() != lit.terms.size())
      throw ParseError(e.line, e.col,
                       "predicate '" + lit.predicate + "' expects " +
                           std::to_string(pred->arity()) + " arguments, got " +
                           std::to_string(lit.terms.size()));
    for (std::size_t i = 0; i < lit.terms.size(); ++i) {
      auto it = p.universe.find(lit.terms[i]);
      if (it == p.universe.end())
        throw ParseError(e.line, e.col, "unknown object '" + lit.terms[i] + "'");
      if (!domain.is_subtype(it->second, pred->parameter_types[i]))
        throw ParseError(e.line, e.col,
                         "object '" + lit.terms[i] + "' of type " + it->second +
                             " does not fit parameter type " + pred->parameter_types[i]);
    }
    return lit;
  };

  for (std::size_t i = 1; i < top.children.size(); ++i) {
    const SExpr& sec = top.children[i];
    if (!sec.is_list || sec.children.empty() || !sec.children[0].is_atom())
      throw ParseError(sec.line, sec.col, "expected problem section");
    const std::string key = detail::lower(sec.children[0].atom);

    if (key == "problem") {
      if (sec.children.size() != 2) throw ParseError(sec.line, sec.col, "expected (problem name)");
      p.name = sec.children[1].atom;
    } else if (key == ":domain") {
      if (sec.children.size() != 2 || sec.children[1].atom != domain.name)
        throw ParseError(sec.line, sec.col, "problem references a different domain");
    } else if (key == ":objects") {
      for (auto& [name, type] : detail::read_typed_list(sec.children, 1, sec)) {
        if (!domain.has_type(type))
          throw ParseError(sec.line, sec.col, "unknown object type '" + type + "'");
        if (p.universe.count(name))
          throw ParseError(sec.line, sec.col, "object '" + name + "' declared twice");
        p.universe[name] = type;
      }
    } else if (key == ":init") {
      for (std::size_t j = 1; j < sec.children.size(); ++j) {
        Literal lit = ground_literal(sec.children[j]);
        if (!lit.positive)
          throw ParseError(sec.children[j].line, sec.children[j].col,
                           ":init atoms must be positive");
        p.init.insert(GroundAtom{lit.predicate, lit.terms});
      }
    } else if (key == ":goal") {
      if (sec.children.size() != 2)
        throw ParseError(sec.line, sec.col, "expected a single goal formula");
      for (const SExpr& g : {sec.children[1]}) {
        if (!g.is_list) throw ParseError(g.line, g.col, "expected goal formula");
        if (!g.children.empty() && g.children[0].is_atom() &&
            detail::lower(g.children[0].atom) == "and") {
          for (std::size_t j = 1; j < g.children.size(); ++j)
            p.goal.push_back(ground_literal(g.children[j]));
        } else if (!g.children.empty()) {
          p.goal.push_back(ground_literal(g));
        }
      }
    } else {
      throw ParseError(sec.line, sec.col,
                       "unsupported problem section '" + sec.children[0].atom + "'");
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Grounding and state transitions.

inline bool holds(const SymbolicState& state, const std::vector<Literal>& formula) {
  for (const Literal& lit : formula) {
    const bool present = state.count(GroundAtom{lit.predicate, lit.terms}) > 0;
    if (lit.positive != present) return false;
  }
  return true;
}

struct GroundedTask {
  std::vector<GroundAction> actions;  // sorted by (name, args)
  SymbolicState init;
  std::vector<Literal> goal;
};

namespace detail {

inline GroundAtom substitute(const Literal& lit, const std::map<std::string, std::string>& bind) {
  GroundAtom atom;
  atom.predicate = lit.predicate;
  atom.args.reserve(lit.terms.size());
  for (const std::string& t : lit.terms) {
    if (!t.empty() && t[0] == '?')
      atom.args.push_back(bind.at(t));
    else
      atom.args.push_back(t);
  }
  return atom;
}

}  // namespace detail

// Enumerates every type-consistent grounding of every schema. Static
// reachability pruning is intentionally not applied; counts are exactly the
// product of type-compatible object choices.
inline GroundedTask ground(const Domain& domain, const SymbolicProblem& problem) {
  GroundedTask task;
  task.init = problem.init;
  task.goal = problem.goal;

  for (const ActionSchema& schema : domain.schemas) {
    std::vector<std::vector<std::string>> candidates(schema.parameters.size());
    for (std::size_t i = 0; i < schema.parameters.size(); ++i) {
      for (const auto& [obj, type] : problem.universe)
        if (domain.is_subtype(type, schema.parameter_types[i])) candidates[i].push_back(obj);
    }
    std::vector<std::size_t> idx(schema.parameters.size(), 0);
    while (true) {
      bool overflow = false;
      std::map<std::string, std::string> bind;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (candidates[i].empty()) {
          overflow = true;
          break;
        }
        bind[schema.parameters[i]] = candidates[i][idx[i]];
      }
      if (overflow) break;

      GroundAction ga;
      ga.name = schema.name;
      ga.cost = schema.cost;
      for (const std::string& v : schema.parameters) ga.args.push_back(bind.at(v));
      for (const Literal& lit : schema.preconditions) {
        auto atom = detail::substitute(lit, bind);
        (lit.positive ? ga.pre_pos : ga.pre_neg).push_back(std::move(atom));
      }
      for (const Literal& lit : schema.effects) {
        auto atom = detail::substitute(lit, bind);
        (lit.positive ? ga.add : ga.del).push_back(std::move(atom));
      }
      // Instantiations that add and delete the same atom (e.g. a move with
      // ?from = ?to) violate the schema invariant and are discarded.
      bool conflicting = false;
      for (const GroundAtom& a : ga.add)
        for (const GroundAtom& del_atom : ga.del)
          if (a == del_atom) conflicting = true;
      if (!conflicting) task.actions.push_back(std::move(ga));

      if (idx.empty()) break;
      std::size_t k = idx.size();
      while (k > 0) {
        --k;
        if (++idx[k] < candidates[k].size()) break;
        idx[k] = 0;
        if (k == 0) {
          overflow = true;
          break;
        }
      }
      if (overflow) break;
    }
  }

  std::sort(task.actions.begin(), task.actions.end(),
            [](const GroundAction& a, const GroundAction& b) {
              if (a.name != b.name) return a.name < b.name;
              return a.args < b.args;
            });
  return task;
}

inline bool applicable(const SymbolicState& state, const GroundAction& action) {
  for (const GroundAtom& a : action.pre_pos)
    if (!state.count(a)) return false;
  for (const GroundAtom& a : action.pre_neg)
    if (state.count(a)) return false;
  return true;
}

// result = (state - delete-set) + add-set. Throws if the precondition fails.
inline SymbolicState apply(const SymbolicState& state, const GroundAction& action) {
  if (!applicable(state, action))
    throw std::invalid_argument("precondition violated for action " + action.str());
  SymbolicState next = state;
  for (const GroundAtom& a : action.del) next.erase(a);
  for (const GroundAtom& a : action.add) next.insert(a);
  return next;
}

inline bool goal_satisfied(const SymbolicState& state, const std::vector<Literal>& goal) {
  return holds(state, goal);
}

}  // namespace tasp::sym
