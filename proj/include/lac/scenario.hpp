#pragma once

#include "lac/config.hpp"
#include "lac/lqc.hpp"
#include "lac/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lac {

/// Everything shared by the runs of one scenario: plant, truth, start state and weights.
struct ScenarioSetup {
  SystemModel system;
  std::vector<Vec> truth;
  Vec x0;
  std::optional<LqcGains> gains;     // exact gains for LQC, linearized gains for the arm
  bool exact_gains = false;          // gains describe the plant itself
  std::vector<double> weights;       // rho(0..k-1)
};

ScenarioSetup prepare_scenario(const ScenarioConfig& config);

/// True disturbance of the arm: amplitude * sin(t / 10).
std::vector<Vec> arm_truth(double amplitude, int horizon);

struct CellDiagnostics {
  std::string policy;
  double sum_e_u_sq = 0.0;
  double sum_e_x_sq = 0.0;
  double error_budget = 0.0;
  double min_singular_value = 0.0;
  double min_reduced_hessian_eig = 0.0;
};

/// One (seed, error level) cell: every configured policy on the same streams.
struct CellResult {
  std::uint64_t seed = 0;
  double level = 0.0;
  PredictionBundle bundle;
  double gamma = 0.0;
  double step_size = 0.0;
  OfflineOptimum offline;
  std::vector<TrajectoryLog> logs;
  std::vector<MetricsRow> rows;
  std::vector<CellDiagnostics> diagnostics;
  std::vector<std::string> failures;  // required-run failures (nonzero exit)
  std::vector<std::string> notes;     // advisory messages
};

struct CellOptions {
  bool diagnostics = false;
  bool check = false;
  std::ostream* trace = nullptr;
};

CellResult run_cell(const ScenarioConfig& config, const ScenarioSetup& setup, std::uint64_t seed, double level,
                    const CellOptions& options = {});

/// Invariant suite on a finished cell; returns one message per violation.
std::vector<std::string> check_cell(const ScenarioConfig& config, const ScenarioSetup& setup, const CellResult& cell);

struct RunnerOptions {
  int jobs = 1;
  bool diagnostics = false;
  bool check = false;
  bool write_runs = true;
  std::optional<std::filesystem::path> trace;  // per-solve CSV trace, forces a single worker
  std::ostream* log = nullptr;                  // progress and failure messages
};

struct ScenarioResult {
  int exit_status = 0;
  std::filesystem::path output_dir;
  std::vector<CellResult> cells;
  std::vector<std::string> failures;
};

/// Executes every (seed, level) cell, writes run CSVs, metrics.csv and plot.py under the output directory.
ScenarioResult run_scenario(const ScenarioConfig& config, const RunnerOptions& options = {});

/// Resolved output directory: absolute paths as given, relative ones against the config location.
std::filesystem::path resolve_output(const ScenarioConfig& config);

/// File stem of a run CSV, e.g. "LAC_seed0_e0.1".
std::string run_stem(const std::string& policy, std::uint64_t seed, double level);

/// Writes a self-contained matplotlib script that reads the CSVs next to it.
void emit_plot_script(std::ostream& out, ScenarioKind kind, const std::string& metrics_csv,
                      const std::vector<std::string>& run_csvs);

}  // namespace lac
