#pragma once

/// \file
/// Deterministic causal projection: fires projection rules over the token
/// store, ignoring probabilities, until no rule instance is left to fire.
///
/// A rule instance is a (rule, trigger event token, antecedent fact tokens)
/// tuple. It fires when the trigger is a user-supplied event matching the
/// rule's trigger pattern and every antecedent pattern is matched, under one
/// consistent set of bindings, by a fact token with est <= trigger.lst.
/// Firing creates the onset event token of the consequent (same window as the
/// trigger) and the consequent fact token itself.
///
/// A trigger may not reappear in the derivation of its own antecedents. This
/// bounds chains through cyclic theories by the number of basic events.

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tproj/core.hpp"
#include "tproj/theory.hpp"
#include "tproj/tokens.hpp"

namespace tproj {

namespace detail {

class Projector {
 public:
  Projector(const CausalTheory& theory, TokenStore& store, const TimeGrid& grid, std::vector<std::string>* warnings)
      : theory_(theory), store_(store), grid_(grid), warnings_(warnings) {
    for (const auto& f : store_.facts()) {
      if (const auto* d = std::get_if<RuleDerived>(&f.derivation)) fired_.insert(key_of(*d));
    }
  }

  void run() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t r = 0; r < theory_.projection_rules.size(); ++r) changed |= fire_rule(r);
    }
  }

 private:
  using Key = std::tuple<std::size_t, TokenId, std::vector<TokenId>>;

  static Key key_of(const RuleDerived& d) { return {d.rule, d.trigger, d.antecedents}; }

  bool fire_rule(std::size_t r) {
    const ProjectionRule& rule = theory_.projection_rules[r];
    bool changed = false;
    // Index loops: firing appends to the store and may reallocate its vectors.
    for (std::size_t i = 0; i < store_.named(TokenKind::event, rule.trigger.name).size(); ++i) {
      const TokenId trigger = store_.named(TokenKind::event, rule.trigger.name)[i];
      const EventToken& ev = store_.event(trigger);
      if (!ev.user_supplied() || ev.est >= grid_.end()) continue;
      Bindings bindings;
      if (!unify(rule.trigger, ev.event_type, bindings)) continue;
      std::vector<TokenId> chosen;
      changed |= match_antecedents(r, trigger, 0, bindings, chosen);
    }
    return changed;
  }

  bool match_antecedents(std::size_t r, TokenId trigger, std::size_t idx, const Bindings& bindings,
                         std::vector<TokenId>& chosen) {
    const ProjectionRule& rule = theory_.projection_rules[r];
    if (idx == rule.antecedents.size()) return fire(r, trigger, bindings, chosen);

    const Pattern& wanted = rule.antecedents[idx];
    bool changed = false;
    if (wanted.is_always()) {
      chosen.push_back(store_.always(grid_));
      changed = match_antecedents(r, trigger, idx + 1, bindings, chosen);
      chosen.pop_back();
      return changed;
    }
    for (std::size_t j = 0; j < store_.named(TokenKind::fact, wanted.name).size(); ++j) {
      const TokenId candidate = store_.named(TokenKind::fact, wanted.name)[j];
      Bindings extended = bindings;
      {
        const FactToken& f = store_.fact(candidate);
        if (f.builtin() || f.est > store_.event(trigger).lst) continue;
        if (std::binary_search(f.trigger_ancestry.begin(), f.trigger_ancestry.end(), trigger)) continue;
        if (!unify(wanted, f.fact_type, extended)) continue;
      }
      chosen.push_back(candidate);
      changed |= match_antecedents(r, trigger, idx + 1, extended, chosen);
      chosen.pop_back();
    }
    return changed;
  }

  bool fire(std::size_t r, TokenId trigger, const Bindings& bindings, const std::vector<TokenId>& chosen) {
    RuleDerived derivation{r, trigger, chosen};
    if (!fired_.insert(key_of(derivation)).second) return false;

    const ProjectionRule& rule = theory_.projection_rules[r];
    const Pattern consequent = substitute(rule.consequent, bindings);
    const double est = store_.event(trigger).est;
    const double lst = store_.event(trigger).lst;

    std::vector<TokenId> ancestry{trigger};
    for (TokenId a : chosen) {
      const auto& up = store_.fact(a).trigger_ancestry;
      ancestry.insert(ancestry.end(), up.begin(), up.end());
    }
    std::sort(ancestry.begin(), ancestry.end());
    ancestry.erase(std::unique(ancestry.begin(), ancestry.end()), ancestry.end());

    const auto persistence = theory_.resolve_persistence(consequent);
    if (!persistence.matched && warnings_ && warned_.insert(consequent.str()).second) {
      warnings_->push_back("no persistence rule matches " + consequent.str() + "; assuming it persists forever");
    }

    const TokenId onset = store_.add_event(EventToken{.id = {},
                                                      .event_type = consequent,
                                                      .est = est,
                                                      .lst = lst,
                                                      .kappa = rule.kappa,
                                                      .density = StepSeries(grid_),
                                                      .derivation = derivation,
                                                      .onset_of = std::nullopt});
    const TokenId fact = store_.add_fact(FactToken{.id = {},
                                                   .fact_type = consequent,
                                                   .initiating_event = onset,
                                                   .persistence = persistence.survivor,
                                                   .mass = StepSeries(grid_),
                                                   .est = est,
                                                   .close_cell = std::nullopt,
                                                   .derivation = std::move(derivation),
                                                   .trigger_ancestry = std::move(ancestry)});
    store_.event(onset).onset_of = fact;
    return true;
  }

  const CausalTheory& theory_;
  TokenStore& store_;
  const TimeGrid& grid_;
  std::vector<std::string>* warnings_;
  std::set<Key> fired_;
  std::set<std::string> warned_;
};

}  // namespace detail

/// Extends `store` with every token the theory derives from it. Re-projecting
/// a projected store adds nothing. Facts with no matching persistence rule use
/// the theory's default survivor; a warning per such fact type is appended to
/// `warnings` when given.
inline TokenStore project(const CausalTheory& theory, TokenStore store, const TimeGrid& grid,
                          std::vector<std::string>* warnings = nullptr) {
  detail::Projector(theory, store, grid, warnings).run();
  return store;
}

}  // namespace tproj
