// tproj: probabilistic temporal projection from the command line.
//
//   tproj project  --theory T --facts F --out curves.csv [grid flags] [--plot]
//   tproj query    (--csv curves.csv | --theory T --facts F [grid flags]) --fact 'ATDOCK(TRUCK14)' --time 30
//   tproj acquire  --state classes.txt --observations obs.txt [--family exponential]
//   tproj simulate --scenario scenario.txt --out dir [--family linear]

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "tproj/commands.hpp"

namespace {

void add_grid_flags(CLI::App* app, tproj::RunConfig& config, std::string& mesh) {
  app->add_option("--origin", config.origin, "Time of the first cell")->capture_default_str();
  app->add_option("--delta", config.delta, "Step of the input grid")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--omega", config.omega, "Number of input grid cells")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--epsilon", config.epsilon, "Mass below which a fact token is closed")->capture_default_str();
  app->add_option("--mesh", mesh, "Working mesh step, or 'auto' for half of --delta")->capture_default_str();
  app->add_option("--seed", config.seed, "Seed recorded in the run metadata")->capture_default_str();
}

bool apply_mesh(tproj::RunConfig& config, const std::string& mesh) {
  if (mesh == "auto") {
    config.mesh.reset();
    return true;
  }
  try {
    std::size_t used = 0;
    config.mesh = std::stod(mesh, &used);
    return used == mesh.size() && *config.mesh > 0.0;
  } catch (const std::exception&) {
    return false;
  }
}

const std::map<std::string, tproj::SurvivorFamily> kFamilies{
    {"exponential", tproj::SurvivorFamily::exponential},
    {"linear", tproj::SurvivorFamily::linear},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic temporal projection over causal theories"};
  app.require_subcommand(1);

  tproj::ProjectCommand project;
  std::string project_mesh = "auto";
  auto* project_cmd = app.add_subcommand("project", "Project and refine; write every token's curve as CSV");
  project_cmd->add_option("--theory", project.theory, "Rule file")->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--facts", project.facts, "Basic facts file")->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--out", project.output, "Output CSV")->required();
  project_cmd->add_flag("--plot", project.plot, "Also write a gnuplot script next to the CSV");
  project_cmd->add_flag("--trace", project.trace, "Log every per-cell update to stderr");
  add_grid_flags(project_cmd, project.config, project_mesh);

  tproj::QueryCommand query;
  tproj::ProjectCommand query_run;
  std::string query_mesh = "auto";
  std::string query_csv;
  auto* query_cmd = app.add_subcommand("query", "Probability that a fact holds at a time");
  query_cmd->add_option("--csv", query_csv, "CSV written by 'project'");
  query_cmd->add_option("--theory", query_run.theory, "Rule file (when no CSV is given)");
  query_cmd->add_option("--facts", query_run.facts, "Basic facts file (when no CSV is given)");
  query_cmd->add_option("--fact", query.fact, "Fact pattern, e.g. ATDOCK(TRUCK14)")->required();
  query_cmd->add_option("--time", query.time, "Query time")->required();
  add_grid_flags(query_cmd, query_run.config, query_mesh);

  tproj::AcquireCommand acquire;
  std::string acquire_family;
  auto* acquire_cmd = app.add_subcommand("acquire", "Refine persistence classes from observed stays");
  acquire_cmd->add_option("--state", acquire.state, "Class state file (created if missing)")->required();
  acquire_cmd->add_option("--observations", acquire.observations, "Observations file")->required()->check(CLI::ExistingFile);
  acquire_cmd->add_option("--family", acquire_family, "Family for classes created on first sight")
      ->check(CLI::IsMember({"exponential", "linear"}));

  tproj::SimulateCommand simulate;
  std::string simulate_family = "exponential";
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate arrivals, observations and a convergence report");
  simulate_cmd->add_option("--scenario", simulate.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--out", simulate.output_dir, "Output directory")->required();
  simulate_cmd->add_option("--family", simulate_family, "Survivor family to acquire")
      ->capture_default_str()
      ->check(CLI::IsMember({"exponential", "linear"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tproj::kExitUsage;
  }

  if (project_cmd->parsed()) {
    if (!apply_mesh(project.config, project_mesh)) {
      std::cerr << "--mesh must be 'auto' or a positive number\n";
      return tproj::kExitUsage;
    }
    return tproj::cmd_project(project);
  }
  if (query_cmd->parsed()) {
    if (!query_csv.empty()) {
      query.csv = query_csv;
    } else if (!query_run.theory.empty() && !query_run.facts.empty()) {
      if (!apply_mesh(query_run.config, query_mesh)) {
        std::cerr << "--mesh must be 'auto' or a positive number\n";
        return tproj::kExitUsage;
      }
      query.run = query_run;
    }
    return tproj::cmd_query(query);
  }
  if (acquire_cmd->parsed()) {
    if (!acquire_family.empty()) acquire.default_family = kFamilies.at(acquire_family);
    return tproj::cmd_acquire(acquire);
  }
  simulate.family = kFamilies.at(simulate_family);
  return tproj::cmd_simulate(simulate);
}
