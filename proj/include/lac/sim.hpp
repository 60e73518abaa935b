#pragma once

#include "lac/confidence.hpp"
#include "lac/lqc.hpp"
#include "lac/model.hpp"
#include "lac/policies.hpp"
#include "lac/trajopt.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lac {

struct ErrorSchedule {
  enum class Kind { None, Graded, Attack };
  Kind kind = Kind::None;
  double target_norm = 0.0;  // graded: stacked window error norm at every step
  double attack_norm = 4.0;  // attack: stacked window error norm at triggered steps
  double sigma = 0.5;
  bool mean_ones = true;  // false draws zero-mean noise before normalization
  int trigger_period = 5;
  std::vector<int> trigger_residues{0, 1};
  std::uint64_t seed = 0;

  /// Attack window [T/3, 2T/3) in exact integer arithmetic.
  static bool in_attack_window(int t, int horizon);
  bool triggered(int t, int horizon) const;
  /// Stacked window error norm injected at step t.
  double norm_at(int t, int horizon) const;
};

/// Predictions = truth + noise whose stacked window norm equals the schedule target;
/// nominals are zero. A fresh draw is taken for every step.
PredictionBundle inject_errors(const std::vector<Vec>& truth, const ErrorSchedule& schedule, int window);

struct TrajectoryLog {
  std::string policy;
  std::vector<Vec> states;  // T + 1
  std::vector<Vec> inputs;  // T
  std::vector<double> stage_costs;
  double terminal_cost = 0.0;
  double total_cost = 0.0;
  std::vector<double> lambdas;
  std::vector<double> gradients;
  std::vector<int> feedback_index;
  std::vector<bool> feasible;
  std::vector<double> violation;
  std::vector<double> e_u;  // filled by per-step diagnostics, NaN otherwise
  std::vector<double> e_x;  // row t holds the one-step state error of x_{t+1}
  int nonconverged_solves = 0;

  bool all_feasible() const;
  /// Sum of stored stage costs plus the terminal cost.
  double recomputed_cost() const;
  /// Columns t, x0.., u0.., cost, lambda, feasible, e_u, e_x, grad, xi_available_index.
  void write_csv(std::ostream& out) const;
};

struct RunOptions {
  double feasibility_tolerance = 1e-6;
};

/// Runs t = 0..T-1. The state always advances with the true parameter; costs use the truth.
TrajectoryLog run_closed_loop(const SystemModel& system, Policy& policy, const PredictionBundle& bundle,
                              const Vec& x0, const RunOptions& options = {});

struct OfflineOptions {
  int nonlinear_horizon_cap = 400;
  int grid_points = 801;  // scalar dynamic-programming seed
  SolverOptions solver{};
};

struct OfflineOptimum {
  double cost = 0.0;
  std::string method;  // "closed_form", "trajopt", "dp+trajopt"
  bool converged = true;
  bool infinite_ratio = false;  // J* == 0
  std::vector<Vec> inputs;
};

OfflineOptimum offline_optimum(const SystemModel& system, const std::vector<Vec>& truth, const Vec& x0,
                               const OfflineOptions& options = {});

struct MetricsRow {
  std::string policy;
  std::uint64_t seed = 0;
  double error_norm = 0.0;
  double J = 0.0;
  double J_star = 0.0;
  double CR = 0.0;
  double varpi_rho = 0.0;
  double varpi_gram = 0.0;
  double thm3_upper = 0.0;
  double thm4_lower = 0.0;
  double dcl_regret = 0.0;
  double lemma3_bound = 0.0;
  int adversity = 0;
};

struct ReportInputs {
  const PredictionBundle* bundle = nullptr;
  std::vector<double> weights;  // rho(0..k-1)
  double gamma = 0.0;           // diameter of the uncertainty set
  const LqcGains* gains = nullptr;  // LQC bound columns are NaN without gains
  double j_star = 0.0;
  std::uint64_t seed = 0;
  double error_norm = 0.0;
};

/// Bound quantities shared by every policy of one (scenario, seed, level) cell.
struct BoundTerms {
  double varpi_rho = 0.0;
  double varpi_gram = 0.0;
  double thm3_upper = 0.0;
  double thm4_lower = 0.0;
  double lower_gap = 0.0;  // sigma_min(B)^2 sigma_min(P)^2 / lambda_max(R + B'PB) * varpi_gram
  int adversity = 0;
};

BoundTerms bound_terms(const ReportInputs& in);

/// One metrics row per log. DCL regret and its bound are filled for LAC only.
std::vector<MetricsRow> competitive_report(const std::vector<TrajectoryLog>& logs, const ReportInputs& in);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

struct StepDiagnostics {
  std::vector<double> e_u;
  std::vector<double> e_x;
  double sum_e_u_sq = 0.0;
  double sum_e_x_sq = 0.0;
  /// 2 gamma^2 rho(k)^2 T + 2 sum_t xi_t(lambda_t), the per-step error budget.
  double error_budget = 0.0;
};

/// Action and one-step state errors against the clairvoyant LQ feedback at the realized states.
StepDiagnostics per_step_error_diag(const TrajectoryLog& log, const LqcGains& gains, const PredictionBundle& bundle,
                                    std::span<const double> weights, double gamma);

/// Formats with 17 significant digits; NaN as "nan", infinities as "inf"/"-inf".
std::string format_real(double v);

}  // namespace lac
