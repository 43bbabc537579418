#pragma once

/// \file
/// Probabilistic causal refinement: a single forward sweep over the grid that
/// fills event densities and fact masses cell by cell.
///
/// Event tokens derived from PROJECT(P1..Pn, E, R, kappa) get
///     density_i = kappa * density_i(E) * prod_j mass_i(Pj)
/// and exponential fact tokens follow the convolution recurrence
///     mass_i = exp(-lambda*delta) * mass_{i-1} + density_i * delta * c(lambda*delta)
/// where c(x) = (1 - exp(-x)) / x is the exact decay of a density held
/// constant across one cell. Linear survivors have no such recurrence and are
/// convolved directly at every cell.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tproj/core.hpp"
#include "tproj/error.hpp"
#include "tproj/theory.hpp"
#include "tproj/tokens.hpp"

namespace tproj {

/// Probability that a fact still holds `elapsed` time units after becoming true.
inline double survivor_eval(const Survivor& s, double elapsed) {
  if (!(elapsed >= 0.0)) throw PreconditionError("survivor evaluated at negative elapsed time");
  if (elapsed == 0.0) return 1.0;
  if (std::isinf(s.rate)) return 0.0;
  if (s.family == SurvivorFamily::exponential) return std::exp(-s.rate * elapsed);
  return std::max(0.0, 1.0 - s.rate * elapsed);
}

/// exp(-lambda*delta): fraction of mass surviving one cell.
inline double cell_decay(double lambda, double delta) {
  if (std::isinf(lambda)) return 0.0;
  return std::exp(-lambda * delta);
}

/// (1 - exp(-x))/x with x = lambda*delta, the mean survival of mass that
/// arrives uniformly across one cell. Tends to 1 as x -> 0.
inline double within_cell_factor(double lambda, double delta) {
  const double x = lambda * delta;
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return -std::expm1(-x) / x;
}

inline double clamp_probability(double v) { return std::clamp(v, 0.0, 1.0); }

/// One step of the exponential recurrence, clamped to [0, 1].
inline double mass_update_exp(double previous_mass, double density, double lambda, double delta) {
  return clamp_probability(cell_decay(lambda, delta) * previous_mass +
                           density * delta * within_cell_factor(lambda, delta));
}

/// kappa * trigger density * product of antecedent masses.
inline double density_update(double kappa, double trigger_density, std::span<const double> antecedent_masses) {
  double d = kappa * trigger_density;
  for (double m : antecedent_masses) d *= m;
  return d;
}

/// Runs mass_update_exp over every cell of a density series, starting from zero mass.
inline StepSeries sweep_exponential(const StepSeries& density, double lambda) {
  StepSeries mass(density.grid());
  double previous = 0.0;
  for (std::size_t k = 0; k < density.size(); ++k) {
    mass[k] = mass_update_exp(previous, density[k], lambda, density.grid().delta());
    previous = mass[k];
  }
  return mass;
}

/// Weight with which density in cell `from` reaches cell `to` (to >= from).
inline double cell_kernel(const Survivor& s, std::size_t from, std::size_t to, double delta) {
  const double elapsed = static_cast<double>(to - from) * delta;
  if (s.family == SurvivorFamily::exponential) {
    return within_cell_factor(s.rate, delta) * survivor_eval(s, elapsed);
  }
  return survivor_eval(s, elapsed);
}

/// Direct Riemann sum of the convolution at one cell: sum_{j<=k} f_j * delta * kernel(j, k).
inline double convolve_direct_at(const StepSeries& f, const Survivor& s, std::size_t k) {
  const double delta = f.grid().delta();
  std::size_t first = 0;
  if (s.family == SurvivorFamily::linear && s.rate > 0.0 && std::isfinite(s.rate)) {
    // Cells further back than the survivor's support contribute nothing.
    const double reach = std::ceil(1.0 / (s.rate * delta));
    if (reach < static_cast<double>(k)) first = k - static_cast<std::size_t>(reach);
  }
  double sum = 0.0;
  for (std::size_t j = first; j <= k; ++j) {
    if (f[j] != 0.0) sum += f[j] * delta * cell_kernel(s, j, k, delta);
  }
  return sum;
}

/// Convolution of a density with a survivor function, evaluated independently at every cell.
inline StepSeries convolve_direct(const StepSeries& f, const Survivor& s) {
  StepSeries out(f.grid());
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = convolve_direct_at(f, s, k);
  return out;
}

/// Exponential persistence of f cut short by a clipping event with density g:
///     pi_k = sum_{j<=k} f_j * delta * c * exp(-lambda*(k-j)*delta) * max(0, 1 - G(j, k))
/// with G(j, k) the integral of g over cells j..k. Decay and clipping can
/// account for the same loss twice; the formula is applied as is.
inline StepSeries clip(const StepSeries& f, double lambda, const StepSeries& g) {
  if (!(f.grid() == g.grid())) throw PreconditionError("clip needs f and g on the same grid");
  const double delta = f.grid().delta();
  std::vector<double> prefix(g.size() + 1, 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) prefix[k + 1] = prefix[k] + g[k];
  const Survivor decay = Survivor::exponential(lambda);
  StepSeries out(f.grid());
  for (std::size_t k = 0; k < f.size(); ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
      if (f[j] == 0.0) continue;
      const double clipped = (prefix[k + 1] - prefix[j]) * delta;
      sum += f[j] * delta * cell_kernel(decay, j, k, delta) * std::max(0.0, 1.0 - clipped);
    }
    out[k] = sum;
  }
  return out;
}

enum class UpdateOrder {
  recursive,    // update antecedents on demand while updating a consequent
  topological,  // sort each cell's open tokens by dependency first
};

struct RefineOptions {
  double epsilon = 1e-4;  // close a fact token once its mass falls below this
  UpdateOrder order = UpdateOrder::recursive;
  std::ostream* trace = nullptr;
};

struct Closure {
  TokenId token;
  std::size_t cell;
};

struct RefineReport {
  std::size_t clamped_updates = 0;
  std::vector<Closure> closures;
};

namespace detail {

class SweepState {
 public:
  SweepState(TokenStore& store, const TimeGrid& grid, const RefineOptions& options)
      : store_(store), grid_(grid), options_(options), marks_(store.size(), Mark::pending),
        reached_epsilon_(store.size(), false) {}

  RefineReport run() {
    check_vectors();
    for (cell_ = 0; cell_ < grid_.omega(); ++cell_) {
      std::fill(marks_.begin(), marks_.end(), Mark::pending);
      if (options_.order == UpdateOrder::recursive) {
        for (std::size_t e = 0; e < store_.events().size(); ++e) visit(store_.events()[e].id);
        for (std::size_t f = 0; f < store_.facts().size(); ++f) visit(store_.facts()[f].id);
      } else {
        for (TokenId id : topological_order()) update(id);
      }
    }
    return std::move(report_);
  }

 private:
  enum class Mark : std::uint8_t { pending, active, done };

  void check_vectors() const {
    for (const auto& e : store_.events()) {
      if (!(e.density.grid() == grid_)) {
        throw PreconditionError("event token " + std::to_string(e.id.value) + " is not initialized on the sweep grid");
      }
    }
    for (const auto& f : store_.facts()) {
      if (!(f.mass.grid() == grid_)) {
        throw PreconditionError("fact token " + std::to_string(f.id.value) + " is not initialized on the sweep grid");
      }
    }
  }

  bool open(TokenId id) const {
    return store_.kind(id) == TokenKind::event ? store_.event(id).open_at(cell_, grid_)
                                               : store_.fact(id).open_at(cell_, grid_);
  }

  std::vector<TokenId> dependencies(TokenId id) const {
    std::vector<TokenId> deps;
    if (store_.kind(id) == TokenKind::event) {
      if (const auto* d = std::get_if<RuleDerived>(&store_.event(id).derivation)) {
        deps.push_back(d->trigger);
        deps.insert(deps.end(), d->antecedents.begin(), d->antecedents.end());
      }
    } else if (const auto& init = store_.fact(id).initiating_event) {
      deps.push_back(*init);
    }
    return deps;
  }

  void visit(TokenId id) {
    Mark& mark = marks_[id.value];
    if (mark == Mark::done) return;
    if (mark == Mark::active) {
      const auto start = std::find(stack_.begin(), stack_.end(), id);
      std::vector<TokenId> cycle(start, stack_.end());
      cycle.push_back(id);
      throw_cycle(cycle);
    }
    if (!open(id)) {
      mark = Mark::done;
      return;
    }
    mark = Mark::active;
    stack_.push_back(id);
    for (TokenId dep : dependencies(id)) {
      if (open(dep)) visit(dep);
    }
    stack_.pop_back();
    update(id);
  }

  // Kahn's algorithm over the open tokens, lowest id first among ready tokens.
  std::vector<TokenId> topological_order() {
    std::vector<TokenId> open_ids;
    for (std::size_t v = 0; v < store_.size(); ++v) {
      if (open(TokenId{v})) open_ids.push_back(TokenId{v});
    }
    std::vector<std::size_t> pending(store_.size(), 0);
    std::vector<std::vector<TokenId>> dependents(store_.size());
    for (TokenId id : open_ids) {
      for (TokenId dep : dependencies(id)) {
        if (!open(dep)) continue;
        ++pending[id.value];
        dependents[dep.value].push_back(id);
      }
    }
    std::priority_queue<TokenId, std::vector<TokenId>, std::greater<>> ready;
    for (TokenId id : open_ids) {
      if (pending[id.value] == 0) ready.push(id);
    }
    std::vector<TokenId> order;
    while (!ready.empty()) {
      const TokenId id = ready.top();
      ready.pop();
      order.push_back(id);
      for (TokenId next : dependents[id.value]) {
        if (--pending[next.value] == 0) ready.push(next);
      }
    }
    if (order.size() != open_ids.size()) {
      // Walk dependencies among the leftovers until one repeats.
      TokenId at{};
      for (TokenId id : open_ids) {
        if (pending[id.value] > 0) {
          at = id;
          break;
        }
      }
      std::vector<TokenId> path;
      while (std::find(path.begin(), path.end(), at) == path.end()) {
        path.push_back(at);
        for (TokenId dep : dependencies(at)) {
          if (open(dep) && pending[dep.value] > 0) {
            at = dep;
            break;
          }
        }
      }
      std::vector<TokenId> cycle(std::find(path.begin(), path.end(), at), path.end());
      cycle.push_back(at);
      throw_cycle(cycle);
    }
    return order;
  }

  [[noreturn]] void throw_cycle(const std::vector<TokenId>& cycle) const {
    std::string text = "open tokens at cell " + std::to_string(cell_) + " form a dependency cycle: ";
    std::vector<std::size_t> ids;
    for (std::size_t n = 0; n < cycle.size(); ++n) {
      const TokenId id = cycle[n];
      ids.push_back(id.value);
      if (n) text += " -> ";
      text += "#" + std::to_string(id.value) + " " +
              (store_.kind(id) == TokenKind::event ? store_.event(id).event_type.str()
                                                   : store_.fact(id).fact_type.str());
    }
    throw CyclicOpenTokens(cell_, std::move(ids), text);
  }

  void update(TokenId id) {
    marks_[id.value] = Mark::done;
    if (store_.kind(id) == TokenKind::event) {
      update_event(store_.event(id));
    } else {
      update_fact(store_.fact(id));
    }
  }

  void update_event(EventToken& ev) {
    const auto* d = std::get_if<RuleDerived>(&ev.derivation);
    if (!d) return;  // user-supplied densities are already in place
    masses_.clear();
    for (TokenId a : d->antecedents) masses_.push_back(store_.fact(a).mass[cell_]);
    ev.density[cell_] = density_update(ev.kappa, store_.event(d->trigger).density[cell_], masses_);
    trace(ev.id, "density", ev.density[cell_]);
  }

  void update_fact(FactToken& f) {
    if (f.builtin() || !f.initiating_event) return;
    const StepSeries& onset = store_.event(*f.initiating_event).density;
    double raw = 0.0;
    if (f.persistence.family == SurvivorFamily::exponential) {
      const double previous = cell_ > 0 ? f.mass[cell_ - 1] : 0.0;
      raw = cell_decay(f.persistence.rate, grid_.delta()) * previous +
            onset[cell_] * grid_.delta() * within_cell_factor(f.persistence.rate, grid_.delta());
    } else {
      raw = convolve_direct_at(onset, f.persistence, cell_);
    }
    if (raw > 1.0) ++report_.clamped_updates;
    f.mass[cell_] = clamp_probability(raw);
    trace(f.id, "mass", f.mass[cell_]);

    if (f.mass[cell_] >= options_.epsilon) {
      reached_epsilon_[f.id.value] = true;
    } else if (reached_epsilon_[f.id.value]) {
      f.close_cell = cell_;
      report_.closures.push_back({f.id, cell_});
    }
  }

  void trace(TokenId id, const char* kind, double value) const {
    if (!options_.trace) return;
    *options_.trace << "cell " << cell_ << " token " << id.value << ' ' << kind << ' ' << value << '\n';
  }

  TokenStore& store_;
  const TimeGrid& grid_;
  const RefineOptions& options_;
  std::vector<Mark> marks_;
  std::vector<bool> reached_epsilon_;
  std::vector<TokenId> stack_;
  std::vector<double> masses_;
  std::size_t cell_ = 0;
  RefineReport report_;
};

}  // namespace detail

/// Fills every density and mass vector in a projected, initialized store.
/// Throws CyclicOpenTokens when the open tokens at some cell depend on each
/// other in a cycle.
inline RefineReport refine(TokenStore& store, const TimeGrid& grid, const RefineOptions& options = {}) {
  return detail::SweepState(store, grid, options).run();
}

}  // namespace tproj
