// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance <golden dir> <samples dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tproj/commands.hpp"

namespace fs = std::filesystem;
using namespace tproj;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

StepSeries random_density(const TimeGrid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(grid.omega());
  double sum = 0.0;
  for (auto& x : v) sum += (x = u(rng) < 0.5 ? 0.0 : u(rng));
  const double total = u(rng);
  if (sum > 0) {
    for (auto& x : v) x *= total / (sum * grid.delta());
  }
  return StepSeries(grid, std::move(v));
}

// A single derived fact whose onset density equals `density` on every cell.
TokenStore persistence_store(const StepSeries& density, const Survivor& persistence) {
  const TimeGrid& grid = density.grid();
  CausalTheory theory;
  theory.persistence_rules.push_back({Pattern{"F", {}}, persistence});
  theory.projection_rules.push_back({{Pattern{"ALWAYS", {}}}, Pattern{"E", {}}, Pattern{"F", {}}, 1.0});
  TokenStore store;
  store.add_event(EventToken{.id = {},
                             .event_type = Pattern{"E", {}},
                             .est = grid.origin(),
                             .lst = grid.end(),
                             .kappa = 1.0,
                             .density = density,
                             .derivation = UserSupplied{},
                             .onset_of = std::nullopt});
  store = project(theory, std::move(store), grid);
  init_vectors(store, grid);
  return store;
}

Outcome sweep_matches_direct() {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  const int cases = 120;
  for (int i = 0; i < cases; ++i) {
    const TimeGrid grid(0, 0.1 + u(rng), 1 + rng() % 1000);
    const StepSeries f = random_density(grid, rng);
    const double lambda = i == 0 ? 0.0 : 2.0 * u(rng);
    const StepSeries direct = convolve_direct(f, Survivor::exponential(lambda));
    TokenStore store = persistence_store(f, Survivor::exponential(lambda));
    RefineOptions options;
    options.epsilon = 0.0;
    refine(store, grid, options);
    const StepSeries& swept = store.fact(store.with_type("F").back()).mass;
    const StepSeries plain = sweep_exponential(f, lambda);
    for (std::size_t k = 0; k < grid.omega(); ++k) {
      worst = std::max({worst, std::abs(swept[k] - direct[k]), std::abs(plain[k] - direct[k])});
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && secs < 10.0, fmt("%.0f cases, max |diff| %.3g, %.2f s", cases, worst, secs)};
}

Outcome clip_bounded() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_excess = -1.0, worst_zero = 0.0;
  const int cases = 120;
  for (int i = 0; i < cases; ++i) {
    const TimeGrid grid(0, 0.1 + u(rng), 1 + rng() % 300);
    const StepSeries f = random_density(grid, rng);
    const StepSeries g = random_density(grid, rng);
    const double lambda = 2.0 * u(rng);
    const StepSeries direct = convolve_direct(f, Survivor::exponential(lambda));
    const StepSeries clipped = clip(f, lambda, g);
    const StepSeries unclipped = clip(f, lambda, StepSeries(grid));
    for (std::size_t k = 0; k < grid.omega(); ++k) {
      worst_excess = std::max(worst_excess, clipped[k] - direct[k]);
      worst_zero = std::max(worst_zero, std::abs(unclipped[k] - direct[k]));
    }
  }
  return {worst_excess <= 1e-12 && worst_zero <= 1e-9,
          fmt("%.0f cases, max excess %.3g, max |diff| with no clipping %.3g", cases, worst_excess, worst_zero)};
}

std::vector<double> csv_values(const std::string& csv) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start < csv.size()) {
    std::size_t nl = csv.find('\n', start);
    if (nl == std::string::npos) nl = csv.size();
    const std::string line = csv.substr(start, nl - start);
    start = nl + 1;
    if (line.empty() || line[0] == '#' || line.starts_with("token_id")) continue;
    out.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  }
  return out;
}

Outcome truck_curve(const fs::path& golden, const fs::path& samples) {
  RunConfig config;
  config.delta = 2;
  config.omega = 1500;
  const ProjectionRun run = run_projection(parse_theory(read_file(samples / "truck.theory")),
                                           parse_basic_facts(read_file(samples / "truck.facts")), config);
  const std::string csv = format_projection_csv(run, config);
  const std::vector<double> got = csv_values(csv);
  const std::vector<double> want = csv_values(read_file(golden / "truck.csv"));
  double worst = want.size() == got.size() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));

  const FactToken& fact = run.store.fact(run.store.with_type("ATDOCK(TRUCK14)").back());
  const StepSeries& onset = run.store.event(*fact.initiating_event).density;
  bool shape = run.grid.omega() == 3000 && run.grid.delta() == 1.0;
  std::size_t k = 1;
  for (; k < fact.mass.size() && onset[k] > 0.0; ++k) shape &= fact.mass[k] >= fact.mass[k - 1];
  const std::size_t stop = fact.close_cell.value_or(fact.mass.size() - 1);
  for (; k <= stop; ++k) shape &= fact.mass[k] < fact.mass[k - 1];
  const bool closed = fact.close_cell && fact.mass[*fact.close_cell] < config.epsilon;
  return {worst <= 1e-9 && shape && closed,
          fmt("max |diff| vs golden %.3g, peak %.6f, closed at cell %.0f", worst,
              *std::max_element(fact.mass.values().begin(), fact.mass.values().end()),
              fact.close_cell ? static_cast<double>(*fact.close_cell + 1) : -1.0)};
}

Outcome half_life() {
  double worst = 0.0;
  for (double mean : {0.25, 1.0, 7.5, 10.0, 480.0}) {
    AcquisitionClass c(Pattern{"X", {}}, SurvivorFamily::exponential);
    c.acquire(mean * 0.5);
    c.acquire(mean * 1.5);
    worst = std::max(worst, std::abs(survivor_eval(c.survivor(), mean) - 0.5) / 0.5);
  }
  return {worst <= 1e-6, fmt("max relative error %.3g", worst)};
}

Outcome truck_survival() {
  const Survivor s = Survivor::exponential(-std::log(0.95) / 15.0);
  const double a = survivor_eval(s, 15), b = survivor_eval(s, 30), c = survivor_eval(s, 45);
  const bool ok = std::abs(a - 0.95) <= 1e-9 && std::abs(b - 0.9025) <= 1e-9 && std::abs(c - 0.857375) <= 1e-9;
  return {ok, fmt("%.12g %.12g %.12g", a, b, c)};
}

Outcome scenario_convergence(const fs::path& samples) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc = parse_scenario(read_file(samples / "golden.scenario"));
  const auto rows = run_convergence(sc, SurvivorFamily::exponential);
  const double secs = seconds_since(start);
  const double target = std::numbers::ln2 * 0.1;
  double err100 = -1, err10000 = -1, final_rate = 0;
  for (const auto& r : rows) {
    if (r.n == 100) err100 = r.relative_error;
    if (r.n == 10000) {
      err10000 = r.relative_error;
      final_rate = r.acquired;
    }
  }
  const bool ok = err10000 >= 0 && std::abs(final_rate - target) <= 0.02 * target && err10000 <= err100 &&
                  std::abs(rows.front().reference - target) <= 1e-15 && secs < 5.0;
  return {ok, fmt("relative error %.4f at n=100, %.4f at n=10000, %.2f s", err100, err10000, secs)};
}

Outcome rate_exact() {
  const bool ok = rate(SurvivorFamily::exponential, 10.0) == std::numbers::ln2 / 10.0 &&
                  rate(SurvivorFamily::linear, 10.0) == 0.05 &&
                  rate(SurvivorFamily::exponential, 0.0) == std::numeric_limits<double>::infinity();
  return {ok, fmt("exponential %.17g, linear %.17g", rate(SurvivorFamily::exponential, 10.0),
                  rate(SurvivorFamily::linear, 10.0))};
}

// N independent trucks, each with its own arrival, on a fixed grid.
double refine_seconds(std::size_t n, std::size_t omega) {
  const TimeGrid grid(0, 1, omega);
  const auto theory = parse_theory("persist ATDOCK(?t) exp 0.00342\nproject ALWAYS, ARRIVE(?t) => ATDOCK(?t) @ 1.0\n");
  TokenStore store;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i % 100);
    add_basic_event(store, Pattern{"ARRIVE", {{"T" + std::to_string(i), false}}}, t, t + 10, 1.0, grid);
  }
  store = project(theory, std::move(store), grid);
  double best = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 7; ++rep) {
    TokenStore work = store;
    init_vectors(work, grid);
    RefineOptions options;
    options.epsilon = 0.0;
    const auto start = std::chrono::steady_clock::now();
    refine(work, grid, options);
    best = std::min(best, seconds_since(start));
  }
  return best;
}

Outcome linear_scaling() {
  const std::size_t sizes[] = {10, 100, 1000};
  std::vector<double> xs, ys;
  for (std::size_t n : sizes) {
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(refine_seconds(n, 2000)));
  }
  const double mx = (xs[0] + xs[1] + xs[2]) / 3, my = (ys[0] + ys[1] + ys[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope >= 0.8 && slope <= 1.3,
          fmt("log-log slope %.3f (%.3g s at N=10, %.3g s at N=1000)", slope, std::exp(ys[0]), std::exp(ys[2]))};
}

// Layered theory: fact i may only depend on facts of lower index, so the graph is acyclic.
CausalTheory random_acyclic_theory(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CausalTheory t;
  const std::size_t facts = 2 + rng() % 5;
  for (std::size_t i = 0; i < facts; ++i) {
    const std::string name = "F" + std::to_string(i);
    t.persistence_rules.push_back({Pattern{name, {}}, rng() % 3 ? Survivor::exponential(0.5 * u(rng))
                                                                : Survivor::linear(0.05 + 0.2 * u(rng))});
    const std::size_t rules = 1 + rng() % 2;
    for (std::size_t r = 0; r < rules; ++r) {
      ProjectionRule rule;
      rule.antecedents.push_back(Pattern{"ALWAYS", {}});
      for (std::size_t j = 0; j < i; ++j) {
        if (rng() % 3 == 0) rule.antecedents.push_back(Pattern{"F" + std::to_string(j), {}});
      }
      rule.trigger = Pattern{"E" + std::to_string(rng() % 3), {}};
      rule.consequent = Pattern{name, {}};
      rule.kappa = u(rng);
      t.projection_rules.push_back(std::move(rule));
    }
  }
  return t;
}

Outcome orders_agree() {
  std::mt19937_64 rng(1009);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int cases = 25;
  std::size_t mismatches = 0, tokens = 0;
  for (int i = 0; i < cases; ++i) {
    const CausalTheory theory = random_acyclic_theory(rng);
    if (!dependency_graph(theory).acyclic()) return {false, "generator produced a cyclic theory"};
    const TimeGrid grid(0, 0.5, 400);
    TokenStore store;
    for (int e = 0; e < 5; ++e) {
      const double t = 150 * u(rng);
      add_basic_event(store, Pattern{"E" + std::to_string(e % 3), {}}, t, t + 20 * u(rng), u(rng), grid);
    }
    store = project(theory, std::move(store), grid);
    init_vectors(store, grid);
    TokenStore other = store;
    RefineOptions rec, topo;
    topo.order = UpdateOrder::topological;
    refine(store, grid, rec);
    refine(other, grid, topo);
    tokens += store.size();
    for (std::size_t f = 0; f < store.facts().size(); ++f) {
      if (!(store.facts()[f].mass == other.facts()[f].mass)) ++mismatches;
    }
    for (std::size_t e = 0; e < store.events().size(); ++e) {
      if (!(store.events()[e].density == other.events()[e].density)) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%.0f theories, %.0f tokens, %.0f differing vectors", cases,
                               static_cast<double>(tokens), static_cast<double>(mismatches))};
}

// Truck curve with the arrival density built directly on a grid of step delta,
// sampled at integer times (cell ends on every grid).
std::vector<double> truck_mass_at_integers(double delta, double horizon) {
  const TimeGrid grid(0, delta, static_cast<std::size_t>(std::llround(horizon / delta)));
  const auto theory = parse_theory("persist ATDOCK(?t) exp 0.05\nproject ALWAYS, ARRIVE(?t) => ATDOCK(?t) @ 1.0\n");
  TokenStore store;
  add_basic_event(store, Pattern{"ARRIVE", {{"T", false}}}, 0, 10, 1.0, grid);
  store = project(theory, std::move(store), grid);
  init_vectors(store, grid);
  RefineOptions options;
  options.epsilon = 0.0;
  refine(store, grid, options);
  const StepSeries& m = store.fact(store.with_type("ATDOCK(T)").back()).mass;
  std::vector<double> out;
  const std::size_t per_unit = static_cast<std::size_t>(std::llround(1.0 / delta));
  for (std::size_t k = per_unit - 1; k < m.size(); k += per_unit) out.push_back(m[k]);
  return out;
}

Outcome mesh_convergence() {
  const double horizon = 60;
  const auto reference = truck_mass_at_integers(1.0 / 16, horizon);
  std::vector<double> errors;
  for (double delta : {1.0, 0.5, 0.25}) {
    const auto m = truck_mass_at_integers(delta, horizon);
    double e = 0;
    for (std::size_t i = 0; i < m.size(); ++i) e = std::max(e, std::abs(m[i] - reference[i]));
    errors.push_back(e);
  }
  const double r1 = errors[0] / errors[1], r2 = errors[1] / errors[2];
  return {r1 >= 1.5 && r2 >= 1.5, fmt("error ratios per halving %.2f, %.2f (error at step 1: %.3g)", r1, r2, errors[0])};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <golden dir> <samples dir>\n");
    return 2;
  }
  const fs::path golden = argv[1], samples = argv[2];
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"incremental sweep equals direct convolution", sweep_matches_direct},
      {"clipped persistence never exceeds unclipped", clip_bounded},
      {"truck arrival curve matches golden output", [&] { return truck_curve(golden, samples); }},
      {"acquired exponential rate halves survival at the mean", half_life},
      {"truck survival loses 5% per 15 minutes", truck_survival},
      {"simulated acquisition converges to the true rate", [&] { return scenario_convergence(samples); }},
      {"rate of mean 10 is exact", rate_exact},
      {"refinement time grows linearly with token count", linear_scaling},
      {"recursive and topological orders agree", orders_agree},
      {"finer meshes converge", mesh_convergence},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
