#pragma once

/// \file
/// Causal theories: projection rules, persistence rules, the rule-language
/// parser and the fact-type dependency graph.
///
/// Rule language, one statement per line, `#` starts a comment:
///
///     persist ATDOCK(?t) exp 0.00342
///     persist WAITING(?t) lin 0.125
///     project ALWAYS, ARRIVE(?t) => ATDOCK(?t) @ 1.0
///
/// In a `project` statement every pattern before `=>` except the last is an
/// antecedent fact; the last is the triggering event.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tproj/detail/lexer.hpp"
#include "tproj/error.hpp"

namespace tproj {

inline constexpr std::string_view kAlways = "ALWAYS";

struct Term {
  std::string text;  // variable name without the leading '?', or a constant
  bool variable = false;

  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;
};

/// A fact or event type such as ATDOCK(TRUCK14) or ARRIVE(?t).
struct Pattern {
  std::string name;
  std::vector<Term> args;

  bool ground() const {
    for (const auto& a : args) {
      if (a.variable) return false;
    }
    return true;
  }

  bool is_always() const { return name == kAlways && args.empty(); }

  std::string str() const {
    std::string out = name;
    if (args.empty()) return out;
    out += '(';
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) out += ',';
      if (args[i].variable) out += '?';
      out += args[i].text;
    }
    out += ')';
    return out;
  }

  friend bool operator==(const Pattern&, const Pattern&) = default;
  friend auto operator<=>(const Pattern&, const Pattern&) = default;
};

using Bindings = std::map<std::string, std::string>;

/// Matches a pattern against a ground type, extending bindings. On failure the
/// bindings are left untouched.
inline bool unify(const Pattern& pattern, const Pattern& ground, Bindings& bindings) {
  if (pattern.name != ground.name || pattern.args.size() != ground.args.size()) return false;
  Bindings extended = bindings;
  for (std::size_t i = 0; i < pattern.args.size(); ++i) {
    const Term& p = pattern.args[i];
    const Term& g = ground.args[i];
    if (g.variable) return false;
    if (!p.variable) {
      if (p.text != g.text) return false;
      continue;
    }
    auto [it, inserted] = extended.emplace(p.text, g.text);
    if (!inserted && it->second != g.text) return false;
  }
  bindings = std::move(extended);
  return true;
}

inline Pattern substitute(const Pattern& pattern, const Bindings& bindings) {
  Pattern out{pattern.name, {}};
  out.args.reserve(pattern.args.size());
  for (const auto& a : pattern.args) {
    if (!a.variable) {
      out.args.push_back(a);
      continue;
    }
    const auto it = bindings.find(a.text);
    out.args.push_back(it == bindings.end() ? a : Term{it->second, false});
  }
  return out;
}

/// Pattern text with variables renamed by first occurrence, so that
/// ATDOCK(?t) and ATDOCK(?x) compare equal.
inline std::string canonical_key(const Pattern& p) {
  std::map<std::string, std::size_t> index;
  std::string out = p.name + '(';
  for (const auto& a : p.args) {
    if (a.variable) {
      const auto [it, _] = index.emplace(a.text, index.size());
      out += "?" + std::to_string(it->second);
    } else {
      out += a.text;
    }
    out += ',';
  }
  return out + ')';
}

enum class SurvivorFamily { exponential, linear };

inline std::string_view to_string(SurvivorFamily f) { return f == SurvivorFamily::exponential ? "exponential" : "linear"; }

/// Survivor function: exp(-rate*t) for the exponential family, max(0, 1 - rate*t) for linear.
struct Survivor {
  SurvivorFamily family = SurvivorFamily::exponential;
  double rate = 0.0;

  static Survivor exponential(double lambda) { return {SurvivorFamily::exponential, lambda}; }
  static Survivor linear(double slope) { return {SurvivorFamily::linear, slope}; }

  friend bool operator==(const Survivor&, const Survivor&) = default;
};

struct PersistenceRule {
  Pattern subject;
  Survivor survivor;

  friend bool operator==(const PersistenceRule&, const PersistenceRule&) = default;
};

struct ProjectionRule {
  std::vector<Pattern> antecedents;
  Pattern trigger;
  Pattern consequent;
  double kappa = 1.0;

  friend bool operator==(const ProjectionRule&, const ProjectionRule&) = default;
};

struct CausalTheory {
  std::vector<ProjectionRule> projection_rules;
  std::vector<PersistenceRule> persistence_rules;
  Survivor default_persistence = Survivor::exponential(0.0);

  struct Resolution {
    Survivor survivor;
    bool matched = false;
  };

  /// First persistence rule whose subject matches the ground fact, else the default.
  Resolution resolve_persistence(const Pattern& fact) const {
    for (const auto& rule : persistence_rules) {
      Bindings b;
      if (unify(rule.subject, fact, b)) return {rule.survivor, true};
    }
    return {default_persistence, false};
  }

  friend bool operator==(const CausalTheory&, const CausalTheory&) = default;
};

namespace detail {

inline Pattern parse_pattern(Cursor& cur) {
  Pattern p;
  p.name = cur.identifier();
  if (!cur.accept("(")) return p;
  if (cur.accept(")")) return p;
  do {
    Term t;
    t.variable = cur.accept("?");
    t.text = cur.identifier();
    p.args.push_back(std::move(t));
  } while (cur.accept(","));
  cur.expect(")");
  return p;
}

inline void collect_variables(const Pattern& p, std::set<std::string>& out) {
  for (const auto& a : p.args) {
    if (a.variable) out.insert(a.text);
  }
}

inline Survivor parse_survivor(Cursor& cur) {
  const std::size_t col = (cur.skip_space(), cur.column());
  const auto family = cur.word();
  const std::size_t value_col = (cur.skip_space(), cur.column());
  const double rate = cur.number();
  if (rate < 0.0) cur.fail_at(value_col, "decay rate must be non-negative");
  if (family == "exp") return Survivor::exponential(rate);
  if (family == "lin") return Survivor::linear(rate);
  cur.fail_at(col, "expected survivor family 'exp' or 'lin'");
}

}  // namespace detail

inline CausalTheory parse_theory(std::string_view text) {
  CausalTheory theory;
  std::set<std::string> persisted;
  for (const auto& line : detail::significant_lines(text)) {
    detail::Cursor cur(line.text, line.number);
    const std::size_t stmt_col = (cur.skip_space(), cur.column());
    const auto head = cur.word();
    if (head == "persist") {
      const std::size_t pat_col = (cur.skip_space(), cur.column());
      PersistenceRule rule{detail::parse_pattern(cur), {}};
      rule.survivor = detail::parse_survivor(cur);
      cur.expect_end();
      if (!persisted.insert(canonical_key(rule.subject)).second) {
        cur.fail_at(pat_col, "duplicate persistence rule for " + rule.subject.str());
      }
      theory.persistence_rules.push_back(std::move(rule));
    } else if (head == "project") {
      std::vector<Pattern> before;
      while (!cur.starts_with("=>")) {
        if (cur.at_end()) cur.fail("expected '=>'");
        before.push_back(detail::parse_pattern(cur));
        cur.accept(",");
      }
      if (before.empty()) cur.fail("projection rule needs a triggering event");
      cur.expect("=>");
      const std::size_t cons_col = (cur.skip_space(), cur.column());
      ProjectionRule rule;
      rule.trigger = std::move(before.back());
      before.pop_back();
      rule.antecedents = std::move(before);
      rule.consequent = detail::parse_pattern(cur);
      cur.expect("@");
      const std::size_t kappa_col = (cur.skip_space(), cur.column());
      rule.kappa = cur.number();
      cur.expect_end();
      if (rule.kappa < 0.0 || rule.kappa > 1.0) cur.fail_at(kappa_col, "probability must lie in [0, 1]");
      std::set<std::string> bound;
      detail::collect_variables(rule.trigger, bound);
      for (const auto& a : rule.antecedents) detail::collect_variables(a, bound);
      for (const auto& a : rule.consequent.args) {
        if (a.variable && !bound.contains(a.text)) {
          cur.fail_at(cons_col, "unsafe variable ?" + a.text + " in consequent " + rule.consequent.str());
        }
      }
      theory.projection_rules.push_back(std::move(rule));
    } else {
      cur.fail_at(stmt_col, "expected 'persist' or 'project'");
    }
  }
  return theory;
}

/// Pretty-prints a theory in the rule language; parse_theory reads it back unchanged.
inline std::string format_theory(const CausalTheory& theory) {
  std::ostringstream out;
  for (const auto& rule : theory.persistence_rules) {
    out << "persist " << rule.subject.str() << ' '
        << (rule.survivor.family == SurvivorFamily::exponential ? "exp " : "lin ")
        << detail::format_number(rule.survivor.rate) << '\n';
  }
  for (const auto& rule : theory.projection_rules) {
    out << "project ";
    for (std::size_t i = 0; i < rule.antecedents.size(); ++i) {
      out << rule.antecedents[i].str() << (i + 1 < rule.antecedents.size() ? ", " : " ");
    }
    out << rule.trigger.str() << " => " << rule.consequent.str() << " @ " << detail::format_number(rule.kappa)
        << '\n';
  }
  return out.str();
}

/// Fact-type graph with an arc Q -> R whenever some projection rule has Q
/// among its antecedents and R as its consequent. Vertices are predicate names.
class DependencyGraph {
 public:
  using Arc = std::pair<std::string, std::string>;

  void add_vertex(const std::string& v) { vertices_.insert(v); }
  void add_arc(const std::string& from, const std::string& to) {
    vertices_.insert(from);
    vertices_.insert(to);
    arcs_.emplace(from, to);
  }

  const std::set<std::string>& vertices() const noexcept { return vertices_; }
  const std::set<Arc>& arcs() const noexcept { return arcs_; }
  bool has_arc(const std::string& from, const std::string& to) const { return arcs_.contains({from, to}); }

  /// Some directed cycle as a vertex sequence, or empty when the graph is acyclic.
  std::vector<std::string> find_cycle() const {
    std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::vector<std::string> cycle;
    auto visit = [&](auto&& self, const std::string& v) -> bool {
      state[v] = 1;
      stack.push_back(v);
      for (auto it = arcs_.lower_bound({v, std::string{}}); it != arcs_.end() && it->first == v; ++it) {
        const auto& w = it->second;
        if (state[w] == 1) {
          auto start = std::find(stack.begin(), stack.end(), w);
          cycle.assign(start, stack.end());
          return true;
        }
        if (state[w] == 0 && self(self, w)) return true;
      }
      stack.pop_back();
      state[v] = 2;
      return false;
    };
    for (const auto& v : vertices_) {
      if (state[v] == 0 && visit(visit, v)) return cycle;
    }
    return {};
  }

  bool acyclic() const { return find_cycle().empty(); }

 private:
  std::set<std::string> vertices_;
  std::set<Arc> arcs_;
};

inline DependencyGraph dependency_graph(const CausalTheory& theory) {
  DependencyGraph g;
  for (const auto& rule : theory.persistence_rules) g.add_vertex(rule.subject.name);
  for (const auto& rule : theory.projection_rules) {
    g.add_vertex(rule.consequent.name);
    for (const auto& a : rule.antecedents) g.add_arc(a.name, rule.consequent.name);
  }
  return g;
}

}  // namespace tproj
