#include "lac/sim.hpp"

#include "lac/errors.hpp"
#include "lac/random.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace lac {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double op_norm(const Mat& M) { return Eigen::JacobiSVD<Mat>(M).singularValues()(0); }

double min_singular(const Mat& M) {
  const Vec s = Eigen::JacobiSVD<Mat>(M).singularValues();
  return s(s.size() - 1);
}

}  // namespace

bool ErrorSchedule::in_attack_window(int t, int horizon) { return 3 * t >= horizon && 3 * t < 2 * horizon; }

bool ErrorSchedule::triggered(int t, int horizon) const {
  if (kind != Kind::Attack || !in_attack_window(t, horizon)) return false;
  const int r = t % trigger_period;
  return std::find(trigger_residues.begin(), trigger_residues.end(), r) != trigger_residues.end();
}

double ErrorSchedule::norm_at(int t, int horizon) const {
  switch (kind) {
    case Kind::None: return 0.0;
    case Kind::Graded: return target_norm;
    case Kind::Attack: return triggered(t, horizon) ? attack_norm : 0.0;
  }
  return 0.0;
}

PredictionBundle inject_errors(const std::vector<Vec>& truth, const ErrorSchedule& schedule, int window) {
  PredictionBundle bundle(truth, window);
  const int T = bundle.horizon();
  const int d = bundle.param_dim();
  for (int t = 0; t < T; ++t) {
    const double target = schedule.norm_at(t, T);
    if (!(target > 0.0)) continue;
    const int len = bundle.window_length(t);
    Rng rng = make_rng(schedule.seed, "noise", static_cast<std::uint64_t>(t));
    std::normal_distribution<double> normal(schedule.mean_ones ? 1.0 : 0.0, schedule.sigma);
    Vec z(len * d);
    do {
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    } while (z.norm() == 0.0);
    z *= target / z.norm();
    std::vector<Vec> pred(static_cast<std::size_t>(len));
    for (int j = 0; j < len; ++j) pred[static_cast<std::size_t>(j)] = truth[static_cast<std::size_t>(t + j)] + z.segment(j * d, d);
    bundle.set_predictions(t, std::move(pred));
  }
  return bundle;
}

bool TrajectoryLog::all_feasible() const {
  return std::all_of(feasible.begin(), feasible.end(), [](bool f) { return f; });
}

double TrajectoryLog::recomputed_cost() const {
  double J = terminal_cost;
  for (double c : stage_costs) J += c;
  return J;
}

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void TrajectoryLog::write_csv(std::ostream& out) const {
  const auto n = states.empty() ? 0 : states.front().size();
  const auto m = inputs.empty() ? 0 : inputs.front().size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i;
  out << ",cost,lambda,feasible,e_u,e_x,grad,xi_available_index\n";
  const std::size_t T = inputs.size();
  auto cell = [](const std::vector<double>& v, std::size_t t) { return t < v.size() ? v[t] : kNaN; };
  for (std::size_t t = 0; t < T; ++t) {
    out << t;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_real(states[t][i]);
    for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_real(inputs[t][i]);
    out << ',' << format_real(stage_costs[t]) << ',' << format_real(cell(lambdas, t)) << ','
        << (t < feasible.size() && feasible[t] ? 1 : 0) << ',' << format_real(cell(e_u, t)) << ','
        << format_real(cell(e_x, t)) << ',' << format_real(cell(gradients, t)) << ','
        << (t < feedback_index.size() ? feedback_index[t] : -1) << '\n';
  }
  // Terminal row: final state and terminal cost, no action.
  out << T;
  for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_real(states.back()[i]);
  for (Eigen::Index i = 0; i < m; ++i) out << ",nan";
  out << ',' << format_real(terminal_cost) << ",nan,1,nan,nan,nan,-1\n";
}

TrajectoryLog run_closed_loop(const SystemModel& sys, Policy& policy, const PredictionBundle& bundle, const Vec& x0,
                              const RunOptions& options) {
  if (x0.size() != sys.state_dim) throw DimensionMismatch("initial state dimension mismatch");
  if (bundle.param_dim() != sys.param_dim) throw DimensionMismatch("parameter dimension mismatch");
  const int T = bundle.horizon();
  TrajectoryLog log;
  log.policy = policy.name();
  log.states.reserve(static_cast<std::size_t>(T) + 1);
  log.states.push_back(x0);
  for (int t = 0; t < T; ++t) {
    const Vec x = log.states.back();
    const Observation obs(bundle, t);
    Vec u = policy.act(obs, x);
    if (u.size() != sys.input_dim || !u.allFinite()) throw NonFinite(fmt::format("policy produced an invalid action at {}", t));
    if (!policy.last_converged()) ++log.nonconverged_solves;
    const Vec& truth = bundle.truth(t);
    const FeasibilityReport rep = feasibility_check(sys, x, u, truth, t, options.feasibility_tolerance);
    log.feasible.push_back(rep.feasible);
    log.violation.push_back(rep.worst_violation);
    log.stage_costs.push_back(sys.stage_cost(x, u, truth, t));
    Vec next = sys.dynamics(x, u, truth, t);
    if (!next.allFinite()) throw NonFinite(fmt::format("state became non-finite at step {}", t + 1));
    log.lambdas.push_back(policy.last_lambda());
    log.gradients.push_back(policy.last_gradient());
    log.feedback_index.push_back(policy.last_feedback_index());
    log.inputs.push_back(std::move(u));
    log.states.push_back(std::move(next));
  }
  log.terminal_cost = sys.terminal_cost(log.states.back(), bundle.truth(T - 1));
  log.total_cost = log.recomputed_cost();
  log.e_u.assign(static_cast<std::size_t>(T), kNaN);
  log.e_x.assign(static_cast<std::size_t>(T), kNaN);
  return log;
}

namespace {

// Backward dynamic programming over a state grid for scalar plants, parameterized by the
// next state. Returns the forward rollout controls, or nothing when not applicable.
std::optional<std::vector<Vec>> scalar_dp(const SystemModel& sys, const std::vector<Vec>& truth, const Vec& x0,
                                          int points) {
  if (sys.state_dim != 1 || sys.input_dim != 1 || !sys.state_box || points < 3) return std::nullopt;
  const double lo = sys.state_box->lower[0], hi = sys.state_box->upper[0];
  if (!std::isfinite(lo) || !std::isfinite(hi) || x0[0] < lo || x0[0] > hi) return std::nullopt;
  const double ulo = sys.input_box ? sys.input_box->lower[0] : -kInf;
  const double uhi = sys.input_box ? sys.input_box->upper[0] : kInf;
  const int T = static_cast<int>(truth.size());
  const auto G = static_cast<std::size_t>(points);
  std::vector<double> grid(G);
  for (std::size_t j = 0; j < G; ++j) grid[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(G - 1);

  Vec xv(1), uv(1), zero = Vec::Zero(1);
  Mat fx, fu;
  std::vector<std::vector<double>> V(static_cast<std::size_t>(T) + 1, std::vector<double>(G, kInf));
  for (std::size_t j = 0; j < G; ++j) {
    xv[0] = grid[j];
    V.back()[j] = sys.terminal_cost(xv, truth.back());
  }
  // Best next-grid index for state xv at step t; value through out parameter.
  auto best_next = [&](int t, double& value, double& u_out) {
    const Vec& phi = truth[static_cast<std::size_t>(t)];
    const double base = sys.dynamics(xv, zero, phi, t)[0];
    sys.dynamics_jacobian(xv, zero, phi, t, fx, fu);
    const double slope = fu(0, 0);
    value = kInf;
    std::size_t arg = G;
    if (slope == 0.0) return arg;
    const auto& next = V[static_cast<std::size_t>(t) + 1];
    for (std::size_t j = 0; j < G; ++j) {
      if (!std::isfinite(next[j])) continue;
      const double u = (grid[j] - base) / slope;
      if (u < ulo || u > uhi) continue;
      uv[0] = u;
      const double v = sys.stage_cost(xv, uv, phi, t) + next[j];
      if (v < value) {
        value = v;
        arg = j;
        u_out = u;
      }
    }
    return arg;
  };
  for (int t = T - 1; t >= 0; --t) {
    for (std::size_t i = 0; i < G; ++i) {
      xv[0] = grid[i];
      double value, u;
      best_next(t, value, u);
      V[static_cast<std::size_t>(t)][i] = value;
    }
  }
  std::vector<Vec> controls;
  xv = x0;
  for (int t = 0; t < T; ++t) {
    double value, u = 0.0;
    const std::size_t j = best_next(t, value, u);
    if (j == G) return std::nullopt;
    const Vec& phi = truth[static_cast<std::size_t>(t)];
    // Newton refinement so the exact dynamics land on the chosen grid state.
    uv[0] = u;
    for (int it = 0; it < 8; ++it) {
      const double r = sys.dynamics(xv, uv, phi, t)[0] - grid[j];
      if (std::abs(r) < 1e-15) break;
      sys.dynamics_jacobian(xv, uv, phi, t, fx, fu);
      if (fu(0, 0) == 0.0) break;
      uv[0] = std::clamp(uv[0] - r / fu(0, 0), ulo, uhi);
    }
    controls.push_back(uv);
    xv = sys.dynamics(xv, uv, phi, t);
  }
  return controls;
}

double rollout_cost(const SystemModel& sys, const std::vector<Vec>& truth, const Vec& x0, const std::vector<Vec>& u,
                    double& violation) {
  Vec x = x0;
  double J = 0.0;
  violation = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    const int ti = static_cast<int>(t);
    J += sys.stage_cost(x, u[t], truth[t], ti);
    x = sys.dynamics(x, u[t], truth[t], ti);
    if (sys.state_box) violation = std::max(violation, sys.state_box->violation(x));
  }
  return J + sys.terminal_cost(x, truth.back());
}

}  // namespace

OfflineOptimum offline_optimum(const SystemModel& sys, const std::vector<Vec>& truth, const Vec& x0,
                               const OfflineOptions& options) {
  const int T = static_cast<int>(truth.size());
  if (T < 1) throw std::invalid_argument("offline optimum needs a nonempty truth stream");
  OfflineOptimum out;
  if (sys.linear && !sys.state_box && !sys.path_constraint) {
    const LinearQuadratic& lq = *sys.linear;
    const LqcGains g = solve_dare(lq.A, lq.B, lq.Q, lq.R, T);
    const LqcRollout roll = clairvoyant_optimal_lqc(g, x0, truth);
    bool inside = true;
    if (sys.input_box) {
      for (const Vec& u : roll.inputs) inside = inside && sys.input_box->violation(u) <= 0.0;
    }
    if (inside) {
      out.cost = roll.total_cost;
      out.method = "closed_form";
      out.inputs = roll.inputs;
      out.infinite_ratio = out.cost == 0.0;
      return out;
    }
    MpcProblem prob{&sys, x0, 0, truth, std::vector<Vec>()};
    for (const Vec& u : roll.inputs) prob.warm_start->push_back(sys.input_box->clamp(u));
    const MpcSolution sol = solve_mpc(prob, options.solver);
    out.cost = sol.objective;
    out.method = "trajopt";
    out.converged = sol.converged;
    out.inputs = sol.controls;
    out.infinite_ratio = out.cost == 0.0;
    return out;
  }

  if (T > options.nonlinear_horizon_cap) {
    throw std::invalid_argument(fmt::format("offline optimum for nonlinear plants is capped at T = {}", options.nonlinear_horizon_cap));
  }
  MpcProblem prob{&sys, x0, 0, truth, std::nullopt};
  std::optional<std::vector<Vec>> seed = scalar_dp(sys, truth, x0, options.grid_points);
  double seed_cost = kInf, seed_violation = kInf;
  if (seed) {
    seed_cost = rollout_cost(sys, truth, x0, *seed, seed_violation);
    prob.warm_start = *seed;
  }
  const MpcSolution sol = solve_mpc(prob, options.solver);
  out.method = seed ? "dp+trajopt" : "trajopt";
  const bool solver_ok = sol.violation < options.solver.violation_tolerance;
  if (seed && seed_violation < options.solver.violation_tolerance && (!solver_ok || seed_cost < sol.objective)) {
    out.cost = seed_cost;
    out.inputs = *seed;
    out.converged = true;  // exact rollout of a feasible grid-optimal sequence
  } else {
    out.cost = sol.objective;
    out.inputs = sol.controls;
    out.converged = sol.converged;
  }
  out.infinite_ratio = out.cost == 0.0;
  return out;
}

BoundTerms bound_terms(const ReportInputs& in) {
  const PredictionBundle& b = *in.bundle;
  const int T = b.horizon();
  BoundTerms bt;
  std::vector<SurrogateLoss> losses;
  losses.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) losses.push_back(make_surrogate(b, t, in.weights));
  bt.varpi_rho = varpi_rho(losses);

  std::vector<double> e, eb;
  for (const auto& l : losses) {
    for (int j = 0; j < l.length(); ++j) {
      const Vec& a = l.eps[static_cast<std::size_t>(j)];
      const Vec& c = l.eps_bar[static_cast<std::size_t>(j)];
      e.insert(e.end(), a.data(), a.data() + a.size());
      eb.insert(eb.end(), c.data(), c.data() + c.size());
    }
  }
  bt.varpi_gram = varpi_gram(Eigen::Map<const Vec>(e.data(), static_cast<Eigen::Index>(e.size())),
                             Eigen::Map<const Vec>(eb.data(), static_cast<Eigen::Index>(eb.size())))
                      .value;
  bt.adversity = adversity(b.truth());

  if (in.gains == nullptr) {
    bt.thm3_upper = bt.thm4_lower = bt.lower_gap = kNaN;
    return bt;
  }
  const LqcGains& g = *in.gains;
  const Mat S = g.R + g.B.transpose() * g.P * g.B;
  const double s_max = Eigen::SelfAdjointEigenSolver<Mat>(S).eigenvalues().maxCoeff();
  const double sb = min_singular(g.B), sp = min_singular(g.P);
  bt.lower_gap = sb * sb * sp * sp / s_max * bt.varpi_gram;

  const double k = static_cast<double>(b.window());
  const double Td = static_cast<double>(T);
  const double rho = g.decay_rate;
  const double gam2 = in.gamma * in.gamma;
  const double factor = 2.0 * g.decay_scale * g.decay_scale * op_norm(g.H) * std::pow(op_norm(g.P), 2) /
                        ((1.0 - rho) * (1.0 - rho));
  const double inner = gam2 * std::pow(rho, 2.0 * k) * Td + 4.0 * gam2 * std::sqrt(Td * k * k * k + k * k * k * k) +
                       bt.varpi_gram;
  if (in.j_star > 0.0) {
    bt.thm3_upper = 1.0 + factor * inner / in.j_star;
    bt.thm4_lower = 1.0 + bt.lower_gap / in.j_star;
  } else {
    bt.thm3_upper = bt.thm4_lower = kInf;
  }
  return bt;
}

std::vector<MetricsRow> competitive_report(const std::vector<TrajectoryLog>& logs, const ReportInputs& in) {
  const BoundTerms bt = bound_terms(in);
  const PredictionBundle& b = *in.bundle;
  std::vector<SurrogateLoss> losses;
  for (int t = 0; t < b.horizon(); ++t) losses.push_back(make_surrogate(b, t, in.weights));

  std::vector<MetricsRow> rows;
  for (const auto& log : logs) {
    MetricsRow r;
    r.policy = log.policy;
    r.seed = in.seed;
    r.error_norm = in.error_norm;
    r.J = log.total_cost;
    r.J_star = in.j_star;
    r.CR = in.j_star > 0.0 ? log.total_cost / in.j_star : kInf;
    r.varpi_rho = bt.varpi_rho;
    r.varpi_gram = bt.varpi_gram;
    r.thm3_upper = log.policy == "LAC" ? bt.thm3_upper : kNaN;
    r.thm4_lower = bt.thm4_lower;
    r.adversity = bt.adversity;
    if (log.policy == "LAC") {
      const DclRegret reg = dcl_regret(losses, log.lambdas, in.weights, in.gamma, b.window());
      r.dcl_regret = reg.regret;
      r.lemma3_bound = reg.bound;
    } else {
      r.dcl_regret = r.lemma3_bound = kNaN;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_metrics_header(std::ostream& out) {
  out << "policy,seed,error_norm,J,J_star,CR,varpi_rho,varpi_gram,thm3_upper,thm4_lower,dcl_regret,lemma3_bound,"
         "adversity\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.policy << ',' << r.seed << ',' << format_real(r.error_norm) << ',' << format_real(r.J) << ','
      << format_real(r.J_star) << ',' << format_real(r.CR) << ',' << format_real(r.varpi_rho) << ','
      << format_real(r.varpi_gram) << ',' << format_real(r.thm3_upper) << ',' << format_real(r.thm4_lower) << ','
      << format_real(r.dcl_regret) << ',' << format_real(r.lemma3_bound) << ',' << r.adversity << '\n';
}

StepDiagnostics per_step_error_diag(const TrajectoryLog& log, const LqcGains& g, const PredictionBundle& bundle,
                                    std::span<const double> weights, double gamma) {
  const int T = bundle.horizon();
  if (static_cast<int>(log.inputs.size()) != T) throw DimensionMismatch("log and bundle horizons differ");
  const Mat Ft = g.F.transpose();
  std::vector<Vec> tail(static_cast<std::size_t>(T) + 1, Vec::Zero(g.state_dim()));
  for (int t = T - 1; t >= 0; --t) {
    tail[static_cast<std::size_t>(t)] = g.P * bundle.truth(t) + Ft * tail[static_cast<std::size_t>(t) + 1];
  }
  StepDiagnostics d;
  double xi_sum = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Vec u_star = -g.K * log.states[i] - g.S_inv * (g.B.transpose() * tail[i]);
    const Vec du = log.inputs[i] - u_star;
    d.e_u.push_back(du.norm());
    d.e_x.push_back((g.B * du).norm());
    d.sum_e_u_sq += du.squaredNorm();
    d.sum_e_x_sq += (g.B * du).squaredNorm();
    if (i < log.lambdas.size() && std::isfinite(log.lambdas[i])) {
      xi_sum += xi(make_surrogate(bundle, t, weights), log.lambdas[i]);
    }
  }
  const double rho_k = g.sensitivity_scale() * std::pow(g.decay_rate, bundle.window());
  d.error_budget = 2.0 * gamma * gamma * rho_k * rho_k * T + 2.0 * xi_sum;
  return d;
}

}  // namespace lac
