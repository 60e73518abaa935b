#include "lac/scenario.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lac;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ScenarioConfig small_custom(const fs::path& out) {
  ScenarioConfig c = default_config(ScenarioKind::Custom);
  c.u_max = INFINITY;
  c.T = 60;
  c.errors.kind = ErrorSchedule::Kind::Graded;
  c.errors.level_start = 0.0;
  c.errors.level_stop = 1.0;
  c.errors.level_step = 1.0;
  c.seeds = {0, 1};
  c.output = out;
  c.output_explicit = true;
  return c;
}

}  // namespace

TEST_CASE("plot scripts follow the figure layouts") {
  std::ostringstream fig1, fig2, fig3;
  emit_plot_script(fig1, ScenarioKind::Fig1Sweep, "metrics.csv", {"runs/LAC_seed0_e0.csv"});
  emit_plot_script(fig2, ScenarioKind::Fig2Attack, "metrics.csv", {"runs/LAC_seed0_e0.csv"});
  emit_plot_script(fig3, ScenarioKind::Fig3Arm, "metrics.csv", {"runs/LAC_seed0_e0.csv"});
  CHECK(fig1.str().find("fill_between") != std::string::npos);
  CHECK(fig1.str().find("runs/LAC_seed0_e0.csv") == std::string::npos);
  CHECK(fig2.str().find("plt.subplots(3, 1") != std::string::npos);
  CHECK(fig2.str().find("NORMALIZE = 5.0") != std::string::npos);
  CHECK(fig3.str().find("plt.subplots(4, 1") != std::string::npos);
  CHECK(fig3.str().find("\"runs/LAC_seed0_e0.csv\"") != std::string::npos);

  std::ostringstream again;
  emit_plot_script(again, ScenarioKind::Fig2Attack, "metrics.csv", {"runs/LAC_seed0_e0.csv"});
  CHECK(again.str() == fig2.str());
}

TEST_CASE("run file stems") {
  CHECK(run_stem("LAC", 3, 0.1) == "LAC_seed3_e0.1");
  CHECK(run_stem("P-MPC", 0, 5.0) == "P-MPC_seed0_e5");
}

TEST_CASE("scenario runs are complete, checked and reproducible") {
  const fs::path a = fs::temp_directory_path() / "lac_scenario_test_a";
  const fs::path b = fs::temp_directory_path() / "lac_scenario_test_b";
  fs::remove_all(a);
  fs::remove_all(b);

  RunnerOptions opt;
  opt.check = true;
  const ScenarioResult ra = run_scenario(small_custom(a), opt);
  CHECK(ra.exit_status == 0);
  CHECK(ra.failures.empty());
  REQUIRE(ra.cells.size() == 4);
  CHECK(fs::exists(a / "metrics.csv"));
  CHECK(fs::exists(a / "plot.py"));
  CHECK(fs::exists(a / "runs" / "LAC_seed1_e1.csv"));

  opt.jobs = 3;
  const ScenarioResult rb = run_scenario(small_custom(b), opt);
  CHECK(rb.exit_status == 0);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "runs" / "SelfTuning_seed0_e1.csv") == slurp(b / "runs" / "SelfTuning_seed0_e1.csv"));

  // Four policies per cell, one header line.
  const std::string metrics = slurp(a / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 4 * 4);

  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("zero prediction error: LAC and P-MPC agree after the burn-in") {
  ScenarioConfig c = default_config(ScenarioKind::Custom);
  c.u_max = INFINITY;
  c.T = 200;
  c.errors.kind = ErrorSchedule::Kind::None;
  c.policies = {"LAC", "P-MPC"};
  const ScenarioSetup setup = prepare_scenario(c);
  const CellResult cell = run_cell(c, setup, 0, 0.0);
  REQUIRE(cell.logs.size() == 2);
  const auto& lac = cell.logs[0];
  const auto& pmpc = cell.logs[1];
  REQUIRE(lac.policy == "LAC");

  // Competitive ratio of the remaining run from step s, measured from each policy's own state.
  const int s = 100;
  auto tail_ratio = [&](const TrajectoryLog& log) {
    double J = log.terminal_cost;
    for (std::size_t t = s; t < log.stage_costs.size(); ++t) J += log.stage_costs[t];
    const std::vector<Vec> rest(setup.truth.begin() + s, setup.truth.end());
    return J / clairvoyant_optimal_lqc(*setup.gains, log.states[s], rest).total_cost;
  };
  CHECK(std::abs(tail_ratio(lac) - tail_ratio(pmpc)) <= 1e-6);
  CHECK(check_cell(c, setup, cell).empty());
}
