#include "lac/config.hpp"
#include "lac/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

namespace {

// Output directory when neither the config nor --out names one.
constexpr const char* kOutputEnv = "LAC_OUTPUT_DIR";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-augmented control workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scenario_name;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 1;
  bool diagnostics = false;
  bool check = false;
  bool quiet = false;
  std::string trace_path;

  CLI::App* run = app.add_subcommand("run", "Run a scenario and write CSVs plus a plot script");
  run->add_option("config", config_path, "YAML scenario file (defaults apply when omitted)");
  run->add_option("--scenario", scenario_name, "fig1_sweep, fig2_attack, fig3_arm or custom");
  run->add_option("--seed", seed, "Run a single seed instead of the configured list");
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Parallel workers")->check(CLI::PositiveNumber);
  run->add_flag("--diagnostics", diagnostics, "Per-step errors and regularity probes");
  run->add_flag("--check", check, "Run the invariant suite on the outputs");
  run->add_option("--trace", trace_path, "Per-solve iteration trace CSV (forces one worker)");
  run->add_flag("--quiet", quiet, "Only print failures");

  CLI::App* validate = app.add_subcommand("validate", "Check a config and print the normalized settings");
  validate->add_option("config", config_path, "YAML scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  lac::ScenarioConfig config;
  try {
    std::optional<lac::ScenarioKind> kind;
    if (!scenario_name.empty()) kind = lac::parse_scenario_kind(scenario_name);
    if (!config_path.empty()) {
      config = lac::load_config(config_path, kind);
    } else {
      config = lac::default_config(kind.value_or(lac::ScenarioKind::Fig1Sweep));
    }
    if (seed) config.seeds = {*seed};
    if (!out_dir.empty()) {
      config.output = std::filesystem::absolute(out_dir);
    } else if (!config.output_explicit) {
      if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') {
        config.output = std::filesystem::absolute(std::filesystem::path(env) / lac::to_string(config.scenario));
      }
    }
    const auto problems = lac::validate_config(config);
    if (!problems.empty()) {
      for (const auto& p : problems) std::cerr << "config error: " << p << '\n';
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  if (validate->parsed()) {
    std::cout << "scenario " << lac::to_string(config.scenario) << ", system " << config.system << ", T " << config.T
              << ", k " << config.k << ", " << config.errors.levels().size() << " levels x " << config.seeds.size()
              << " seeds x " << config.policies.size() << " policies\n";
    return 0;
  }

  lac::RunnerOptions options;
  options.jobs = jobs;
  options.diagnostics = diagnostics;
  options.check = check;
  if (!trace_path.empty()) options.trace = std::filesystem::absolute(trace_path);
  options.log = quiet ? nullptr : &std::cerr;
  try {
    const lac::ScenarioResult result = lac::run_scenario(config, options);
    if (quiet) {
      for (const auto& f : result.failures) std::cerr << "FAILED: " << f << '\n';
    }
    std::cout << "wrote " << result.output_dir.string() << '\n';
    return result.exit_status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
