#pragma once

/// \file
/// Online refinement of persistence rules from observed durations. Each class
/// keeps a count and a running sum; its rate is recomputed from the mean after
/// every data point. For the exponential family the mean is used as the
/// half-life, for the linear family as the expected persistence.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tproj/detail/lexer.hpp"
#include "tproj/error.hpp"
#include "tproj/theory.hpp"

namespace tproj {

/// Rate (exponential) or slope (linear) for a mean duration; +inf when the mean is 0.
inline double rate(SurvivorFamily family, double mean) {
  if (!(mean >= 0.0)) throw PreconditionError("mean duration must be non-negative");
  if (mean == 0.0) return std::numeric_limits<double>::infinity();
  if (family == SurvivorFamily::linear) return 0.5 / mean;
  return std::numbers::ln2 / mean;
}

class AcquisitionClass {
 public:
  AcquisitionClass(Pattern key, SurvivorFamily family) : key_(std::move(key)), family_(family) {}

  /// Restores a saved class; lambda is recomputed from sum/insts when insts > 0.
  AcquisitionClass(Pattern key, SurvivorFamily family, std::size_t insts, double sum, double lambda)
      : key_(std::move(key)), family_(family), insts_(insts), sum_(sum), lambda_(lambda) {
    if (!(sum >= 0.0)) throw PreconditionError("class sum must be non-negative");
    if (insts == 0 && sum != 0.0) throw PreconditionError("class without data points must have zero sum");
    if (insts > 0) lambda_ = rate(family_, mean());
  }

  const Pattern& key() const noexcept { return key_; }
  SurvivorFamily type() const noexcept { return family_; }
  double lambda() const noexcept { return lambda_; }
  std::size_t insts() const noexcept { return insts_; }
  double sum() const noexcept { return sum_; }
  double mean() const noexcept { return insts_ == 0 ? 0.0 : sum_ / static_cast<double>(insts_); }

  Survivor survivor() const { return {family_, lambda_}; }

  /// Adds one observed duration.
  void acquire(double duration) {
    if (!(duration >= 0.0) || std::isinf(duration)) {
      throw PreconditionError("observed duration must be finite and non-negative");
    }
    insts_ += 1;
    sum_ += duration;
    lambda_ = rate(family_, sum_ / static_cast<double>(insts_));
  }

  friend bool operator==(const AcquisitionClass&, const AcquisitionClass&) = default;

 private:
  Pattern key_;
  SurvivorFamily family_;
  std::size_t insts_ = 0;
  double sum_ = 0.0;
  double lambda_ = 0.0;
};

/// The set of tracked classes. An observed key is routed to the first class
/// whose key pattern matches it; unmatched keys create a new class only when a
/// default family has been configured.
class AcquisitionRegistry {
 public:
  AcquisitionRegistry() = default;
  explicit AcquisitionRegistry(std::optional<SurvivorFamily> default_family) : default_family_(default_family) {}

  void set_default_family(std::optional<SurvivorFamily> f) { default_family_ = f; }

  AcquisitionClass& track(Pattern key, SurvivorFamily family) {
    classes_.emplace_back(std::move(key), family);
    return classes_.back();
  }

  void add(AcquisitionClass c) { classes_.push_back(std::move(c)); }

  const std::vector<AcquisitionClass>& classes() const noexcept { return classes_; }

  AcquisitionClass* find(const Pattern& key) {
    for (auto& c : classes_) {
      Bindings b;
      if (c.key() == key || unify(c.key(), key, b)) return &c;
    }
    return nullptr;
  }

  /// Feeds departure - arrival into the matching class and returns it.
  const AcquisitionClass& observe_lifetime(const Pattern& key, double arrival, double departure) {
    if (!(departure >= arrival)) {
      throw PreconditionError("departure " + detail::format_number(departure) + " precedes arrival " +
                              detail::format_number(arrival) + " for " + key.str());
    }
    AcquisitionClass* c = find(key);
    if (!c) {
      if (!default_family_) {
        std::string known;
        for (const auto& k : classes_) known += (known.empty() ? "" : ", ") + k.key().str();
        throw PreconditionError("no acquisition class matches " + key.str() + " (known: " +
                                (known.empty() ? "none" : known) + ")");
      }
      c = &track(key, *default_family_);
    }
    c->acquire(departure - arrival);
    return *c;
  }

  friend bool operator==(const AcquisitionRegistry& a, const AcquisitionRegistry& b) {
    return a.classes_ == b.classes_;
  }

 private:
  std::vector<AcquisitionClass> classes_;
  std::optional<SurvivorFamily> default_family_;
};

namespace detail {

inline SurvivorFamily parse_family(Cursor& cur) {
  const std::size_t col = (cur.skip_space(), cur.column());
  const auto w = cur.word();
  if (w == "exponential") return SurvivorFamily::exponential;
  if (w == "linear") return SurvivorFamily::linear;
  cur.fail_at(col, "expected 'linear' or 'exponential'");
}

}  // namespace detail

/// Reads an acquisition state file, one class per line:
///     class TRUCK(?c) exponential insts 2 sum 40 lambda 0.0346573590279973
inline AcquisitionRegistry parse_acquisition_state(std::string_view text) {
  AcquisitionRegistry reg;
  for (const auto& line : detail::significant_lines(text)) {
    detail::Cursor cur(line.text, line.number);
    cur.keyword("class");
    Pattern key = detail::parse_pattern(cur);
    const SurvivorFamily family = detail::parse_family(cur);
    cur.keyword("insts");
    const std::size_t insts = cur.count();
    cur.keyword("sum");
    const std::size_t sum_col = (cur.skip_space(), cur.column());
    const double sum = cur.number();
    cur.keyword("lambda");
    const std::size_t lambda_col = (cur.skip_space(), cur.column());
    const double lambda = cur.number(true);
    cur.expect_end();
    if (sum < 0.0 || (insts == 0 && sum != 0.0)) cur.fail_at(sum_col, "inconsistent sum");
    if (lambda < 0.0) cur.fail_at(lambda_col, "negative rate");
    AcquisitionClass c(std::move(key), family, insts, sum, lambda);
    const double expected = c.lambda();
    if (insts > 0 && !(expected == lambda || std::abs(expected - lambda) <= 1e-12 * std::abs(expected))) {
      cur.fail_at(lambda_col, "rate does not match sum/insts (expected " + detail::format_number(expected) + ")");
    }
    reg.add(std::move(c));
  }
  return reg;
}

inline std::string format_acquisition_state(const AcquisitionRegistry& reg) {
  std::ostringstream out;
  for (const auto& c : reg.classes()) {
    out << "class " << c.key().str() << ' ' << to_string(c.type()) << " insts " << c.insts() << " sum "
        << detail::format_number(c.sum()) << " lambda " << detail::format_number(c.lambda()) << '\n';
  }
  return out.str();
}

/// One arrival/departure pair. Stays that ended in loading are censored and
/// are not used for acquisition.
struct Observation {
  Pattern key;
  double arrival = 0.0;
  double departure = 0.0;
  bool censored = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Reads an observations file, one per line:
///     observe TRUCK(ACME) arrive 0 depart 12 [loaded]
inline std::vector<Observation> parse_observations(std::string_view text) {
  std::vector<Observation> out;
  for (const auto& line : detail::significant_lines(text)) {
    detail::Cursor cur(line.text, line.number);
    cur.keyword("observe");
    const std::size_t key_col = (cur.skip_space(), cur.column());
    Observation o;
    o.key = detail::parse_pattern(cur);
    if (!o.key.ground()) cur.fail_at(key_col, "observed key must be ground");
    cur.keyword("arrive");
    o.arrival = cur.number();
    cur.keyword("depart");
    const std::size_t dep_col = (cur.skip_space(), cur.column());
    o.departure = cur.number();
    if (o.departure < o.arrival) cur.fail_at(dep_col, "departure precedes arrival");
    if (!cur.at_end()) {
      cur.keyword("loaded");
      o.censored = true;
    }
    cur.expect_end();
    out.push_back(std::move(o));
  }
  return out;
}

inline std::string format_observations(const std::vector<Observation>& obs) {
  std::ostringstream out;
  for (const auto& o : obs) {
    out << "observe " << o.key.str() << " arrive " << detail::format_number(o.arrival) << " depart "
        << detail::format_number(o.departure) << (o.censored ? " loaded" : "") << '\n';
  }
  return out.str();
}

/// Routes every uncensored observation into the registry.
inline void acquire_all(AcquisitionRegistry& reg, const std::vector<Observation>& obs) {
  for (const auto& o : obs) {
    if (!o.censored) reg.observe_lifetime(o.key, o.arrival, o.departure);
  }
}

}  // namespace tproj
