#pragma once

/// \file
/// The token database. Every token carries an expectation vector over the
/// working grid: a density series for event tokens, a mass series for fact
/// tokens. Token ids are shared across both kinds and follow insertion order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string_view>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tproj/core.hpp"
#include "tproj/error.hpp"
#include "tproj/theory.hpp"

namespace tproj {

struct TokenId {
  std::size_t value = 0;

  friend bool operator==(TokenId, TokenId) = default;
  friend auto operator<=>(TokenId, TokenId) = default;
};

enum class TokenKind { fact, event };

/// Observed event given by the user.
struct UserSupplied {
  friend bool operator==(const UserSupplied&, const UserSupplied&) = default;
};

/// Built-in fact such as ALWAYS.
struct BasicFact {
  friend bool operator==(const BasicFact&, const BasicFact&) = default;
};

struct RuleDerived {
  std::size_t rule = 0;  // index into CausalTheory::projection_rules
  TokenId trigger;
  std::vector<TokenId> antecedents;

  friend bool operator==(const RuleDerived&, const RuleDerived&) = default;
};

using Derivation = std::variant<UserSupplied, BasicFact, RuleDerived>;

struct EventToken {
  TokenId id;
  Pattern event_type;
  double est = 0.0;
  double lst = 0.0;
  double kappa = 1.0;
  StepSeries density;
  Derivation derivation;
  std::optional<TokenId> onset_of;  // set for the event that makes a fact token true

  bool user_supplied() const { return std::holds_alternative<UserSupplied>(derivation); }

  /// Open on every cell that intersects [est, lst].
  bool open_at(std::size_t cell, const TimeGrid& grid) const {
    if (lst < grid.origin() || est >= grid.end()) return false;
    return grid.clamp_cell(est) <= cell && cell <= grid.clamp_cell(lst);
  }
};

struct FactToken {
  TokenId id;
  Pattern fact_type;
  std::optional<TokenId> initiating_event;
  Survivor persistence;
  StepSeries mass;
  double est = 0.0;
  std::optional<std::size_t> close_cell;
  Derivation derivation;
  // User-supplied event tokens anywhere in this token's derivation.
  std::vector<TokenId> trigger_ancestry;

  bool builtin() const { return std::holds_alternative<BasicFact>(derivation); }
  bool closed() const { return close_cell.has_value(); }

  /// Open from its est cell until the cell at which it was closed (inclusive).
  bool open_at(std::size_t cell, const TimeGrid& grid) const {
    if (est >= grid.end()) return false;
    if (cell < grid.clamp_cell(est)) return false;
    return !close_cell || cell <= *close_cell;
  }
};

class TokenStore {
 public:
  TokenId add_event(EventToken token) {
    token.id = next_id();
    slots_.push_back({TokenKind::event, events_.size()});
    by_type_[token.event_type.str()].push_back(token.id);
    by_name_[{TokenKind::event, token.event_type.name}].push_back(token.id);
    events_.push_back(std::move(token));
    return events_.back().id;
  }

  TokenId add_fact(FactToken token) {
    token.id = next_id();
    slots_.push_back({TokenKind::fact, facts_.size()});
    by_type_[token.fact_type.str()].push_back(token.id);
    by_name_[{TokenKind::fact, token.fact_type.name}].push_back(token.id);
    facts_.push_back(std::move(token));
    return facts_.back().id;
  }

  std::size_t size() const noexcept { return slots_.size(); }
  bool empty() const noexcept { return slots_.empty(); }
  bool contains(TokenId id) const noexcept { return id.value < slots_.size(); }

  TokenKind kind(TokenId id) const { return slot(id).kind; }

  const EventToken& event(TokenId id) const { return events_[checked(id, TokenKind::event)]; }
  EventToken& event(TokenId id) { return events_[checked(id, TokenKind::event)]; }
  const FactToken& fact(TokenId id) const { return facts_[checked(id, TokenKind::fact)]; }
  FactToken& fact(TokenId id) { return facts_[checked(id, TokenKind::fact)]; }

  const std::vector<EventToken>& events() const noexcept { return events_; }
  std::vector<EventToken>& events() noexcept { return events_; }
  const std::vector<FactToken>& facts() const noexcept { return facts_; }
  std::vector<FactToken>& facts() noexcept { return facts_; }

  /// Ids of tokens whose ground type prints as `type`, in insertion order.
  const std::vector<TokenId>& with_type(const std::string& type) const {
    static const std::vector<TokenId> none;
    const auto it = by_type_.find(type);
    return it == by_type_.end() ? none : it->second;
  }

  /// Ids of tokens of one kind whose type has the given predicate name.
  const std::vector<TokenId>& named(TokenKind kind, const std::string& name) const {
    static const std::vector<TokenId> none;
    const auto it = by_name_.find({kind, name});
    return it == by_name_.end() ? none : it->second;
  }

  /// The built-in ALWAYS fact, created on first use with a mass of 1 everywhere.
  TokenId always(const TimeGrid& grid) {
    if (always_) return *always_;
    FactToken t{.id = {},
                .fact_type = Pattern{std::string(kAlways), {}},
                .initiating_event = std::nullopt,
                .persistence = Survivor::exponential(0.0),
                .mass = StepSeries(grid),
                .est = grid.origin(),
                .close_cell = std::nullopt,
                .derivation = BasicFact{},
                .trigger_ancestry = {}};
    t.mass.fill(1.0);
    always_ = add_fact(std::move(t));
    return *always_;
  }

  std::optional<TokenId> always_id() const noexcept { return always_; }

 private:
  struct Slot {
    TokenKind kind;
    std::size_t index;
  };

  TokenId next_id() const { return TokenId{slots_.size()}; }

  const Slot& slot(TokenId id) const {
    if (!contains(id)) throw PreconditionError("unknown token id " + std::to_string(id.value));
    return slots_[id.value];
  }

  std::size_t checked(TokenId id, TokenKind want) const {
    const Slot& s = slot(id);
    if (s.kind != want) {
      throw PreconditionError("token " + std::to_string(id.value) + " is not " +
                              (want == TokenKind::event ? "an event" : "a fact") + " token");
    }
    return s.index;
  }

  std::vector<Slot> slots_;
  std::vector<EventToken> events_;
  std::vector<FactToken> facts_;
  std::map<std::string, std::vector<TokenId>> by_type_;
  std::map<std::pair<TokenKind, std::string>, std::vector<TokenId>> by_name_;
  std::optional<TokenId> always_;
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

/// Adds a user-supplied event occurring somewhere in [est, lst] with total
/// probability kappa. The density is a Gaussian centred on the window with
/// standard deviation (lst - est)/6, truncated to the window and renormalized
/// so that it integrates to kappa; a zero-width window puts kappa/delta into
/// the single cell containing est. Any part of the window beyond the grid is lost.
inline TokenId add_basic_event(TokenStore& store, const Pattern& event_type, double est, double lst, double kappa,
                               const TimeGrid& grid) {
  if (!event_type.ground()) throw PreconditionError("basic event " + event_type.str() + " must be ground");
  if (!(est <= lst)) throw PreconditionError("event window has est after lst");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw PreconditionError("event probability must lie in [0, 1]");
  if (est >= grid.end() || lst < grid.origin()) {
    throw PreconditionError("event window [" + detail::format_number(est) + ", " + detail::format_number(lst) +
                            "] lies outside the projection horizon");
  }

  StepSeries density(grid);
  if (est == lst) {
    density[grid.clamp_cell(est)] = kappa / grid.delta();
  } else {
    const double mean = 0.5 * (est + lst);
    const double sigma = (lst - est) / 6.0;
    const double total = detail::normal_cdf(3.0) - detail::normal_cdf(-3.0);
    const std::size_t first = grid.clamp_cell(est);
    const std::size_t last = grid.clamp_cell(lst);
    for (std::size_t k = first; k <= last; ++k) {
      const double a = std::max(grid.cell_start(k), est);
      const double b = std::min(grid.cell_end(k), lst);
      if (b <= a) continue;
      const double mass = detail::normal_cdf((b - mean) / sigma) - detail::normal_cdf((a - mean) / sigma);
      density[k] = kappa * mass / total / grid.delta();
    }
  }

  return store.add_event(EventToken{.id = {},
                                    .event_type = event_type,
                                    .est = est,
                                    .lst = lst,
                                    .kappa = kappa,
                                    .density = std::move(density),
                                    .derivation = UserSupplied{},
                                    .onset_of = std::nullopt});
}

/// One line of a basic-facts file:
///     event ARRIVE(TRUCK14) est 0 lst 10 kappa 1.0
struct BasicEventSpec {
  Pattern event_type;
  double est = 0.0;
  double lst = 0.0;
  double kappa = 1.0;

  friend bool operator==(const BasicEventSpec&, const BasicEventSpec&) = default;
};

inline std::vector<BasicEventSpec> parse_basic_facts(std::string_view text) {
  std::vector<BasicEventSpec> out;
  for (const auto& line : detail::significant_lines(text)) {
    detail::Cursor cur(line.text, line.number);
    cur.keyword("event");
    const std::size_t pat_col = (cur.skip_space(), cur.column());
    BasicEventSpec spec;
    spec.event_type = detail::parse_pattern(cur);
    if (!spec.event_type.ground()) cur.fail_at(pat_col, "basic event must be ground");
    cur.keyword("est");
    spec.est = cur.number();
    cur.keyword("lst");
    const std::size_t lst_col = (cur.skip_space(), cur.column());
    spec.lst = cur.number();
    if (spec.lst < spec.est) cur.fail_at(lst_col, "lst precedes est");
    cur.keyword("kappa");
    const std::size_t kappa_col = (cur.skip_space(), cur.column());
    spec.kappa = cur.number();
    if (spec.kappa < 0.0 || spec.kappa > 1.0) cur.fail_at(kappa_col, "probability must lie in [0, 1]");
    cur.expect_end();
    out.push_back(std::move(spec));
  }
  return out;
}

inline std::string format_basic_facts(const std::vector<BasicEventSpec>& specs) {
  std::ostringstream out;
  for (const auto& s : specs) {
    out << "event " << s.event_type.str() << " est " << detail::format_number(s.est) << " lst "
        << detail::format_number(s.lst) << " kappa " << detail::format_number(s.kappa) << '\n';
  }
  return out.str();
}

inline TokenId add_basic_event(TokenStore& store, const BasicEventSpec& spec, const TimeGrid& grid) {
  return add_basic_event(store, spec.event_type, spec.est, spec.lst, spec.kappa, grid);
}

/// Puts every expectation vector on `grid` and zeroes everything except
/// user-supplied event densities (resampled when they were built on a coarser
/// grid) and the constant ALWAYS mass. Closure marks are cleared.
inline void init_vectors(TokenStore& store, const TimeGrid& grid) {
  for (auto& ev : store.events()) {
    if (ev.user_supplied()) {
      if (!(ev.density.grid() == grid)) ev.density = resample(ev.density, grid);
    } else {
      ev.density = StepSeries(grid);
    }
  }
  for (auto& f : store.facts()) {
    f.mass = StepSeries(grid);
    f.close_cell.reset();
    if (f.builtin()) f.mass.fill(1.0);
  }
}

}  // namespace tproj
