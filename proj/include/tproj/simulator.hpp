#pragma once

/// \file
/// Seeded scenario generator for arrival/departure streams.
///
/// Random numbers come from std::mt19937_64, whose output sequence is fixed by
/// the standard, mapped to doubles with explicit formulas below. The standard
/// library's distributions are implementation-defined and are not used, so a
/// seed reproduces the same streams on every platform.
///
/// Scenario file (clauses may be split across lines):
///     scenario seed 7
///       class TRUCK(ACME) exp 0.1
///       arrivals poisson 1
///       count 10000 horizon 1e9

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tproj/acquisition.hpp"
#include "tproj/detail/lexer.hpp"
#include "tproj/error.hpp"
#include "tproj/theory.hpp"
#include "tproj/tokens.hpp"

namespace tproj {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

struct LifetimeDistribution {
  enum class Kind { exponential, uniform, fixed };

  Kind kind = Kind::fixed;
  double a = 0.0;  // rate, lower bound, or fixed duration
  double b = 0.0;  // upper bound for uniform

  static LifetimeDistribution exponential(double rate) { return {Kind::exponential, rate, 0.0}; }
  static LifetimeDistribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static LifetimeDistribution fixed(double d) { return {Kind::fixed, d, 0.0}; }

  double mean() const {
    switch (kind) {
      case Kind::exponential: return 1.0 / a;
      case Kind::uniform: return 0.5 * (a + b);
      case Kind::fixed: return a;
    }
    return a;
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::exponential: return rng.exponential(a);
      case Kind::uniform: return a + (b - a) * rng.uniform();
      case Kind::fixed: return a;
    }
    return a;
  }

  friend bool operator==(const LifetimeDistribution&, const LifetimeDistribution&) = default;
};

struct ScenarioClass {
  Pattern key;
  LifetimeDistribution lifetime;

  friend bool operator==(const ScenarioClass&, const ScenarioClass&) = default;
};

struct ArrivalProcess {
  bool poisson = false;
  double rate = 0.0;          // poisson
  std::vector<double> times;  // fixed schedule

  friend bool operator==(const ArrivalProcess&, const ArrivalProcess&) = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  std::vector<ScenarioClass> classes;
  ArrivalProcess arrivals;
  std::size_t count = 0;
  double horizon = 0.0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  bool have_seed = false, have_arrivals = false, have_count = false, have_horizon = false;
  std::size_t last_line = 1;
  for (const auto& line : detail::significant_lines(text)) {
    detail::Cursor cur(line.text, line.number);
    last_line = line.number;
    while (!cur.at_end()) {
      const std::size_t col = cur.column();
      const auto kw = cur.word();
      if (kw == "scenario") continue;
      if (kw == "seed") {
        sc.seed = cur.count();
        have_seed = true;
      } else if (kw == "class") {
        const std::size_t key_col = (cur.skip_space(), cur.column());
        ScenarioClass c;
        c.key = detail::parse_pattern(cur);
        if (!c.key.ground()) cur.fail_at(key_col, "class key must be ground");
        const std::size_t dist_col = (cur.skip_space(), cur.column());
        const auto dist = cur.word();
        if (dist == "exp") {
          c.lifetime = LifetimeDistribution::exponential(cur.number());
          if (!(c.lifetime.a > 0.0)) cur.fail_at(dist_col, "exponential rate must be positive");
        } else if (dist == "uniform") {
          const double lo = cur.number();
          const double hi = cur.number();
          if (!(lo >= 0.0 && hi > lo)) cur.fail_at(dist_col, "uniform bounds must satisfy 0 <= lo < hi");
          c.lifetime = LifetimeDistribution::uniform(lo, hi);
        } else if (dist == "fixed") {
          c.lifetime = LifetimeDistribution::fixed(cur.number());
          if (!(c.lifetime.a > 0.0)) cur.fail_at(dist_col, "fixed duration must be positive");
        } else {
          cur.fail_at(dist_col, "expected 'exp', 'uniform' or 'fixed'");
        }
        sc.classes.push_back(std::move(c));
      } else if (kw == "arrivals") {
        const std::size_t kind_col = (cur.skip_space(), cur.column());
        const auto kind = cur.word();
        if (kind == "poisson") {
          sc.arrivals.poisson = true;
          sc.arrivals.rate = cur.number();
          if (!(sc.arrivals.rate > 0.0)) cur.fail_at(kind_col, "arrival rate must be positive");
        } else if (kind == "at") {
          sc.arrivals.poisson = false;
          sc.arrivals.times.clear();
          do {
            sc.arrivals.times.push_back(cur.number());
          } while (cur.accept(","));
          if (!std::is_sorted(sc.arrivals.times.begin(), sc.arrivals.times.end())) {
            cur.fail_at(kind_col, "arrival times must be non-decreasing");
          }
        } else {
          cur.fail_at(kind_col, "expected 'poisson' or 'at'");
        }
        have_arrivals = true;
      } else if (kw == "count") {
        sc.count = cur.count();
        have_count = true;
      } else if (kw == "horizon") {
        const std::size_t h_col = (cur.skip_space(), cur.column());
        sc.horizon = cur.number();
        if (!(sc.horizon > 0.0)) cur.fail_at(h_col, "horizon must be positive");
        have_horizon = true;
      } else {
        cur.fail_at(col, "unknown scenario clause '" + std::string(kw) + "'");
      }
    }
  }
  auto missing = [&](const char* what) { throw ParseError(last_line, 1, std::string("scenario is missing ") + what); };
  if (!have_seed) missing("'seed'");
  if (sc.classes.empty()) missing("a 'class'");
  if (!have_arrivals) missing("'arrivals'");
  if (!have_count) missing("'count'");
  if (!have_horizon) missing("'horizon'");
  if (!sc.arrivals.poisson && sc.arrivals.times.size() < sc.count) {
    throw ParseError(last_line, 1, "scenario lists fewer arrival times than its count");
  }
  return sc;
}

struct GeneratedData {
  std::vector<BasicEventSpec> facts;
  std::vector<Observation> observations;
};

/// Samples arrivals and lifetimes. Entity k (from 1) belongs to class
/// (k-1) mod #classes and appears as the basic fact ARRIVE(<class name><k>).
/// Only stays that end by the horizon produce an observation.
inline GeneratedData generate(const Scenario& sc) {
  GeneratedData out;
  Rng rng(sc.seed);
  double clock = 0.0;
  for (std::size_t k = 0; k < sc.count; ++k) {
    double arrival = 0.0;
    if (sc.arrivals.poisson) {
      clock += rng.exponential(sc.arrivals.rate);
      arrival = clock;
    } else {
      arrival = sc.arrivals.times[k];
    }
    if (arrival >= sc.horizon) break;
    const ScenarioClass& cls = sc.classes[k % sc.classes.size()];
    const double departure = arrival + cls.lifetime.sample(rng);
    const std::string entity = cls.key.name + std::to_string(k + 1);
    out.facts.push_back({Pattern{"ARRIVE", {Term{entity, false}}}, arrival, arrival, 1.0});
    if (departure <= sc.horizon) out.observations.push_back({cls.key, arrival, departure, false});
  }
  return out;
}

struct ConvergenceRow {
  Pattern key;
  std::size_t n = 0;
  double acquired = 0.0;
  double reference = 0.0;
  double relative_error = 0.0;
};

inline constexpr std::size_t kConvergenceCheckpoints[] = {10, 100, 1000, 10000};

/// Feeds generated lifetimes through acquisition, one class per scenario
/// class, and reports the acquired rate against rate(family, true mean) at
/// each checkpoint the data reaches.
inline std::vector<ConvergenceRow> run_convergence(const Scenario& sc, SurvivorFamily family,
                                                   const GeneratedData& data) {
  std::vector<ConvergenceRow> rows;
  for (const auto& cls : sc.classes) {
    AcquisitionClass acc(cls.key, family);
    const double reference = rate(family, cls.lifetime.mean());
    const std::size_t* next = std::begin(kConvergenceCheckpoints);
    for (const auto& o : data.observations) {
      if (o.key != cls.key) continue;
      acc.acquire(o.departure - o.arrival);
      if (next != std::end(kConvergenceCheckpoints) && acc.insts() == *next) {
        rows.push_back({cls.key, acc.insts(), acc.lambda(), reference,
                        std::abs(acc.lambda() - reference) / reference});
        ++next;
      }
    }
  }
  return rows;
}

inline std::vector<ConvergenceRow> run_convergence(const Scenario& sc, SurvivorFamily family) {
  return run_convergence(sc, family, generate(sc));
}

inline std::string format_convergence(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream out;
  out << "class,n,acquired,reference,relative_error\n";
  for (const auto& r : rows) {
    out << '"' << r.key.str() << "\"," << r.n << ',' << detail::format_number(r.acquired) << ','
        << detail::format_number(r.reference) << ',' << detail::format_number(r.relative_error) << '\n';
  }
  return out.str();
}

}  // namespace tproj
