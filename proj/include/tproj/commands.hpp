#pragma once

/// \file
/// The command layer behind the `tproj` executable. Each command reads its
/// inputs, runs the pipeline and writes only its declared outputs; errors are
/// reported on the given stream and mapped to an exit code.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tproj/acquisition.hpp"
#include "tproj/core.hpp"
#include "tproj/error.hpp"
#include "tproj/projection.hpp"
#include "tproj/refinement.hpp"
#include "tproj/simulator.hpp"
#include "tproj/theory.hpp"
#include "tproj/tokens.hpp"

namespace tproj {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitParse = 2,
  kExitCyclic = 3,
  kExitIo = 4,
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary sibling file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place");
  }
}

/// Grid and sweep settings for a projection run. The base grid (origin,
/// delta, omega) is the step of the input densities; the sweep runs on a
/// working mesh that subdivides it, by default into halves.
struct RunConfig {
  double origin = 0.0;
  double delta = 1.0;
  std::size_t omega = 100;
  double epsilon = 1e-4;
  std::optional<double> mesh;  // nullopt: half the base step
  std::uint64_t seed = 0;

  TimeGrid base_grid() const { return TimeGrid(origin, delta, omega); }

  TimeGrid working_grid() const {
    const double step = mesh.value_or(delta / 2.0);
    const auto ratio = subdivision_ratio(delta, step);
    if (!ratio) throw PreconditionError("mesh " + detail::format_number(step) + " must evenly divide delta");
    return TimeGrid(origin, delta / static_cast<double>(*ratio), omega * *ratio);
  }
};

struct ProjectionRun {
  TimeGrid grid;
  TokenStore store;
  RefineReport report;
  std::vector<std::string> warnings;
};

/// Projection followed by refinement. Basic event densities are built on the
/// base grid and resampled onto the working mesh before the sweep.
inline ProjectionRun run_projection(const CausalTheory& theory, const std::vector<BasicEventSpec>& facts,
                                    const RunConfig& config, std::ostream* trace = nullptr) {
  const TimeGrid base = config.base_grid();
  const TimeGrid working = config.working_grid();
  TokenStore store;
  for (const auto& f : facts) add_basic_event(store, f, base);
  std::vector<std::string> warnings;
  store = project(theory, std::move(store), working, &warnings);
  init_vectors(store, working);
  RefineOptions options;
  options.epsilon = config.epsilon;
  options.trace = trace;
  RefineReport report = refine(store, working, options);
  return {working, std::move(store), std::move(report), std::move(warnings)};
}

namespace detail {

inline std::string format_csv_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace detail

/// CSV with one row per token and cell. Cells are numbered from 1 and `time`
/// is the start of the cell. Comment lines carry the run settings.
inline std::string format_projection_csv(const ProjectionRun& run, const RunConfig& config) {
  std::ostringstream out;
  const TimeGrid& g = run.grid;
  out << "# tproj project origin=" << detail::format_number(config.origin)
      << " delta=" << detail::format_number(config.delta) << " omega=" << config.omega
      << " mesh=" << (config.mesh ? detail::format_number(*config.mesh) : std::string("auto"))
      << " epsilon=" << detail::format_number(config.epsilon) << " seed=" << config.seed << '\n';
  out << "# grid origin=" << detail::format_number(g.origin()) << " delta=" << detail::format_number(g.delta())
      << " omega=" << g.omega() << '\n';
  out << "token_id,type,kind,cell,time,value\n";
  for (std::size_t id = 0; id < run.store.size(); ++id) {
    const TokenId tid{id};
    const bool is_event = run.store.kind(tid) == TokenKind::event;
    const StepSeries& s = is_event ? run.store.event(tid).density : run.store.fact(tid).mass;
    const std::string type =
        detail::csv_quote(is_event ? run.store.event(tid).event_type.str() : run.store.fact(tid).fact_type.str());
    const char* kind = is_event ? "density" : "mass";
    for (std::size_t k = 0; k < s.size(); ++k) {
      out << id << ',' << type << ',' << kind << ',' << k + 1 << ',' << detail::format_csv_value(g.cell_start(k))
          << ',' << detail::format_csv_value(s[k]) << '\n';
    }
  }
  return out.str();
}

/// gnuplot script drawing every fact token's mass curve from the CSV.
inline std::string format_plot_script(const ProjectionRun& run, const std::string& csv_name) {
  std::ostringstream out;
  out << "set datafile separator \",\"\n"
      << "set xlabel \"time\"\nset ylabel \"probability\"\nset yrange [0:1.05]\n";
  const std::size_t omega = run.grid.omega();
  std::vector<std::string> curves;
  for (std::size_t id = 0; id < run.store.size(); ++id) {
    const TokenId tid{id};
    if (run.store.kind(tid) != TokenKind::fact) continue;
    // Data line 0 is the CSV header.
    const std::size_t first = 1 + id * omega;
    curves.push_back("'" + csv_name + "' every ::" + std::to_string(first) + "::" +
                     std::to_string(first + omega - 1) + " using 5:6 with steps title \"#" + std::to_string(id) +
                     " " + run.store.fact(tid).fact_type.str() + "\"");
  }
  if (curves.empty()) return out.str();
  out << "plot ";
  for (std::size_t i = 0; i < curves.size(); ++i) out << (i ? ", \\\n     " : "") << curves[i];
  out << '\n';
  return out.str();
}

/// Independent-causes combination 1 - prod(1 - m) over the masses of every
/// fact token matching `fact` at the cell containing t. Sets *found to whether
/// any token matched.
inline double query_probability(const TokenStore& store, const TimeGrid& grid, const Pattern& fact, double t,
                                bool* found = nullptr) {
  const auto cell = grid.cell_of(t);
  if (!cell) throw PreconditionError("time " + detail::format_number(t) + " lies outside the projection horizon");
  double miss = 1.0;
  bool any = false;
  for (const auto& f : store.facts()) {
    Bindings b;
    if (!unify(fact, f.fact_type, b)) continue;
    any = true;
    miss *= 1.0 - f.mass[*cell];
  }
  if (found) *found = any;
  return 1.0 - miss;
}

/// Same combination, read back from a CSV written by format_projection_csv.
inline double query_projection_csv(std::string_view csv, const Pattern& fact, double t, bool* found = nullptr) {
  std::optional<TimeGrid> grid;
  std::optional<std::size_t> cell;
  double miss = 1.0;
  bool any = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < csv.size()) {
    const auto nl = csv.find('\n', start);
    const std::string_view line = csv.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? csv.size() : nl + 1;
    ++line_no;
    if (line.starts_with("# grid ")) {
      detail::Cursor cur(line.substr(7), line_no);
      cur.expect("origin=");
      const double origin = cur.number();
      cur.expect("delta=");
      const double delta = cur.number();
      cur.expect("omega=");
      const std::size_t omega = cur.count();
      grid.emplace(origin, delta, omega);
      cell = grid->cell_of(t);
      if (!cell) throw PreconditionError("time " + detail::format_number(t) + " lies outside the projection horizon");
      continue;
    }
    if (line.empty() || line.starts_with('#') || line.starts_with("token_id,")) continue;
    if (!grid) throw ParseError(line_no, 1, "projection CSV lacks a '# grid' line");
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 6) throw ParseError(line_no, 1, "expected 6 CSV fields");
    if (fields[2] != "mass" || std::stoull(fields[3]) != *cell + 1) continue;
    detail::Cursor pc(fields[1], line_no);
    const Pattern type = detail::parse_pattern(pc);
    Bindings b;
    if (!unify(fact, type, b)) continue;
    any = true;
    miss *= 1.0 - std::stod(fields[5]);
  }
  if (!grid) throw ParseError(line_no, 1, "projection CSV lacks a '# grid' line");
  if (found) *found = any;
  return 1.0 - miss;
}

inline Pattern parse_pattern_text(std::string_view text) {
  detail::Cursor cur(text, 1);
  Pattern p = detail::parse_pattern(cur);
  cur.expect_end();
  return p;
}

namespace detail {

// Runs body, mapping library exceptions to exit codes and messages on err.
template <class Body>
int guarded(std::ostream& err, const std::string& context, Body&& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << context << ": " << e.what() << '\n';
    return kExitParse;
  } catch (const CyclicOpenTokens& e) {
    err << e.what() << '\n';
    return kExitCyclic;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return kExitIo;
  } catch (const ResampleMismatch& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << context << ": " << e.what() << '\n';
    return kExitParse;
  }
}

}  // namespace detail

struct ProjectCommand {
  std::filesystem::path theory;
  std::filesystem::path facts;
  std::filesystem::path output;
  RunConfig config;
  bool plot = false;
  bool trace = false;
};

inline int cmd_project(const ProjectCommand& cmd, std::ostream& err = std::cerr) {
  CausalTheory theory;
  std::vector<BasicEventSpec> facts;
  int rc = detail::guarded(err, cmd.theory.string(), [&] {
    theory = parse_theory(read_file(cmd.theory));
    return int{kExitOk};
  });
  if (rc != kExitOk) return rc;
  rc = detail::guarded(err, cmd.facts.string(), [&] {
    facts = parse_basic_facts(read_file(cmd.facts));
    return int{kExitOk};
  });
  if (rc != kExitOk) return rc;
  try {
    (void)cmd.config.working_grid();
  } catch (const PreconditionError& e) {
    err << "invalid grid: " << e.what() << '\n';
    return kExitUsage;
  }
  return detail::guarded(err, cmd.facts.string(), [&] {
    const ProjectionRun run = run_projection(theory, facts, cmd.config, cmd.trace ? &err : nullptr);
    for (const auto& w : run.warnings) err << "warning: " << w << '\n';
    write_file_atomic(cmd.output, format_projection_csv(run, cmd.config));
    if (cmd.plot) {
      std::filesystem::path script = cmd.output;
      script.replace_extension(".gp");
      write_file_atomic(script, format_plot_script(run, cmd.output.filename().string()));
    }
    return int{kExitOk};
  });
}

struct QueryCommand {
  std::optional<std::filesystem::path> csv;
  // In-memory run when no CSV is given.
  std::optional<ProjectCommand> run;
  std::string fact;
  double time = 0.0;
};

inline int cmd_query(const QueryCommand& cmd, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Pattern fact;
  try {
    fact = parse_pattern_text(cmd.fact);
  } catch (const ParseError& e) {
    err << "fact pattern: " << e.what() << '\n';
    return kExitUsage;
  }
  bool found = false;
  double p = 0.0;
  int rc = kExitOk;
  // A query time outside the horizon is a usage error, not bad input data.
  auto at_time = [&](auto&& query) {
    try {
      query();
      return int{kExitOk};
    } catch (const PreconditionError& e) {
      err << e.what() << '\n';
      return int{kExitUsage};
    }
  };
  if (cmd.csv) {
    rc = detail::guarded(err, cmd.csv->string(), [&] {
      const std::string text = read_file(*cmd.csv);
      return at_time([&] { p = query_projection_csv(text, fact, cmd.time, &found); });
    });
  } else if (cmd.run) {
    const auto& r = *cmd.run;
    rc = detail::guarded(err, r.facts.string(), [&] {
      const ProjectionRun run =
          run_projection(parse_theory(read_file(r.theory)), parse_basic_facts(read_file(r.facts)), r.config);
      return at_time([&] { p = query_probability(run.store, run.grid, fact, cmd.time, &found); });
    });
  } else {
    err << "query needs a projection CSV or theory and facts files\n";
    return kExitUsage;
  }
  if (rc != kExitOk) return rc;
  if (!found) err << "warning: no token matches " << fact.str() << '\n';
  out << detail::format_csv_value(p) << '\n';
  return kExitOk;
}

struct AcquireCommand {
  std::filesystem::path state;
  std::filesystem::path observations;
  std::optional<SurvivorFamily> default_family;
};

/// Applies every observation to the state file. Nothing is written unless all
/// observations are accepted; with no usable observations the file is left as is.
inline int cmd_acquire(const AcquireCommand& cmd, std::ostream& err = std::cerr) {
  AcquisitionRegistry reg;
  int rc = detail::guarded(err, cmd.state.string(), [&] {
    if (std::filesystem::exists(cmd.state)) reg = parse_acquisition_state(read_file(cmd.state));
    return int{kExitOk};
  });
  if (rc != kExitOk) return rc;
  reg.set_default_family(cmd.default_family);
  std::vector<Observation> obs;
  rc = detail::guarded(err, cmd.observations.string(), [&] {
    obs = parse_observations(read_file(cmd.observations));
    acquire_all(reg, obs);
    return int{kExitOk};
  });
  if (rc != kExitOk) return rc;
  const bool any = std::any_of(obs.begin(), obs.end(), [](const Observation& o) { return !o.censored; });
  if (!any) return kExitOk;
  return detail::guarded(err, cmd.state.string(), [&] {
    write_file_atomic(cmd.state, format_acquisition_state(reg));
    return int{kExitOk};
  });
}

struct SimulateCommand {
  std::filesystem::path scenario;
  std::filesystem::path output_dir;
  SurvivorFamily family = SurvivorFamily::exponential;
};

/// Writes facts.txt, observations.txt and convergence.csv into the output directory.
inline int cmd_simulate(const SimulateCommand& cmd, std::ostream& err = std::cerr) {
  Scenario sc;
  int rc = detail::guarded(err, cmd.scenario.string(), [&] {
    sc = parse_scenario(read_file(cmd.scenario));
    return int{kExitOk};
  });
  if (rc != kExitOk) return rc;
  return detail::guarded(err, cmd.output_dir.string(), [&] {
    std::error_code ec;
    std::filesystem::create_directories(cmd.output_dir, ec);
    if (ec) throw IoError("cannot create " + cmd.output_dir.string());
    const GeneratedData data = generate(sc);
    write_file_atomic(cmd.output_dir / "facts.txt", format_basic_facts(data.facts));
    write_file_atomic(cmd.output_dir / "observations.txt", format_observations(data.observations));
    write_file_atomic(cmd.output_dir / "convergence.csv", format_convergence(run_convergence(sc, cmd.family, data)));
    return int{kExitOk};
  });
}

}  // namespace tproj
