#include "lac/scenario.hpp"

#include "lac/errors.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace lac {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool uses_trajopt(const ScenarioConfig& c, const ScenarioSetup& s) {
  if (c.backend == "trajopt") return true;
  if (c.backend == "closed_form") return false;
  return !(s.exact_gains && !s.system.input_box && !s.system.state_box);
}

SolverOptions solver_options(const ScenarioConfig& c, std::uint64_t seed, std::ostream* trace) {
  SolverOptions o;
  o.max_iterations = c.solver_iterations;
  o.seed = seed;
  o.trace = trace;
  return o;
}

std::string level_tag(double level) { return fmt::format("{:g}", level); }

}  // namespace

std::vector<Vec> arm_truth(double amplitude, int horizon) {
  std::vector<Vec> truth(static_cast<std::size_t>(horizon), Vec::Zero(1));
  for (int t = 0; t < horizon; ++t) truth[static_cast<std::size_t>(t)](0) = amplitude * std::sin(t / 10.0);
  return truth;
}

ScenarioSetup prepare_scenario(const ScenarioConfig& c) {
  ScenarioSetup s;
  if (c.system == "lqc_tracking") {
    TrackingSystem ts = make_lqc_tracking_system(c.c1, c.u_max, c.T);
    s.system = std::move(ts.system);
    s.truth = std::move(ts.truth);
    s.x0 = Vec::Zero(s.system.state_dim);
    const LinearQuadratic& lq = *s.system.linear;
    s.gains = solve_dare(lq.A, lq.B, lq.Q, lq.R, c.T);
    s.exact_gains = true;
  } else if (c.system == "robot_arm") {
    s.system = make_robot_arm_system(c.arm, c.T);
    if (c.gamma.kind == GammaPolicy::Kind::Fixed) {
      s.system.uncertainty = UncertaintySet::ball(1, c.gamma.radius);
    }
    s.truth = arm_truth(c.arm_disturbance, c.T);
    s.x0 = Vec::Constant(1, c.arm_x0);
    s.gains = linearized_arm_gains(c.arm, c.T);
  } else {
    throw std::invalid_argument(fmt::format("unknown system '{}'", c.system));
  }

  const int k = c.k;
  switch (c.weights) {
    case WeightSource::Ones:
      s.weights.assign(static_cast<std::size_t>(k), 1.0);
      break;
    case WeightSource::Sensitivity:
      s.weights = s.gains->sensitivity_weights(k);
      break;
    case WeightSource::Edpb: {
      const EdpbTable table = s.exact_gains ? estimate_edpb(*s.gains, s.system, k, k, c.edpb_trials, 0)
                                            : estimate_edpb(s.system, k, c.edpb_trials, 0, solver_options(c, 0, nullptr));
      s.weights.assign(table.envelope.begin(), table.envelope.begin() + k);
      break;
    }
  }
  return s;
}

CellResult run_cell(const ScenarioConfig& c, const ScenarioSetup& s, std::uint64_t seed, double level,
                    const CellOptions& options) {
  CellResult cell;
  cell.seed = seed;
  cell.level = level;

  ErrorSchedule schedule;
  schedule.kind = c.errors.kind;
  schedule.target_norm = level;
  schedule.attack_norm = c.errors.attack_norm;
  schedule.sigma = c.errors.sigma;
  schedule.mean_ones = c.errors.mean_ones;
  schedule.seed = seed;
  cell.bundle = inject_errors(s.truth, schedule, c.k);
  const UncertaintySet phi = ingest(cell.bundle, c.gamma);
  cell.gamma = phi.diameter();
  cell.step_size = c.theory_step ? theory_step_size(s.weights, cell.gamma, c.T, c.k) : c.beta;

  SystemModel system = s.system;
  system.uncertainty = phi;

  if (c.offline) {
    OfflineOptions oo;
    oo.solver = solver_options(c, seed, nullptr);
    try {
      cell.offline = offline_optimum(system, s.truth, s.x0, oo);
      if (!cell.offline.converged) cell.notes.push_back("offline optimum did not fully converge (advisory)");
    } catch (const std::exception& e) {
      cell.offline.cost = kNaN;
      cell.notes.push_back(fmt::format("offline optimum unavailable: {}", e.what()));
    }
  } else {
    cell.offline.cost = kNaN;
    cell.offline.method = "disabled";
  }

  const bool trajopt = uses_trajopt(c, s);
  std::optional<Box> lqc_box = system.input_box;
  auto make_backend = [&](PolicyKind kind) -> std::shared_ptr<ActionBackend> {
    // Self-tuning is defined for linear plants, so it always runs on the (linearized) closed form.
    if (kind == PolicyKind::SelfTuning || !trajopt) return std::make_shared<LqcBackend>(*s.gains, lqc_box);
    return std::make_shared<MpcBackend>(system, solver_options(c, seed, options.trace));
  };

  for (const std::string& name : c.policies) {
    const PolicyKind kind = parse_policy_kind(name);
    std::unique_ptr<Policy> policy;
    switch (kind) {
      case PolicyKind::Lac:
        policy = std::make_unique<LacPolicy>(make_backend(kind),
                                             LacOptions{c.k, cell.step_size, c.initial_lambda, s.weights});
        break;
      case PolicyKind::PredictiveMpc:
        policy = std::make_unique<FixedLambdaPolicy>(make_backend(kind), 1.0, kind);
        break;
      case PolicyKind::NominalMpc:
        policy = std::make_unique<FixedLambdaPolicy>(make_backend(kind), 0.0, kind);
        break;
      case PolicyKind::SelfTuning:
        policy = std::make_unique<SelfTuningPolicy>(make_backend(kind), c.initial_lambda);
        break;
      case PolicyKind::FixedLambda:
        policy = std::make_unique<FixedLambdaPolicy>(make_backend(kind), c.fixed_lambda, kind);
        break;
    }
    try {
      TrajectoryLog log = run_closed_loop(system, *policy, cell.bundle, s.x0);
      if (log.nonconverged_solves > 0) {
        cell.failures.push_back(fmt::format("{} seed {} level {}: {} MPC solves did not converge", log.policy, seed,
                                            level_tag(level), log.nonconverged_solves));
      }
      cell.logs.push_back(std::move(log));
    } catch (const std::exception& e) {
      cell.failures.push_back(fmt::format("{} seed {} level {}: {}", name, seed, level_tag(level), e.what()));
    }
  }

  ReportInputs in;
  in.bundle = &cell.bundle;
  in.weights = s.weights;
  in.gamma = cell.gamma;
  in.gains = s.exact_gains ? &*s.gains : nullptr;
  in.j_star = cell.offline.cost;
  in.seed = seed;
  in.error_norm = c.errors.kind == ErrorSchedule::Kind::Attack ? c.errors.attack_norm : level;
  cell.rows = competitive_report(cell.logs, in);

  if (options.diagnostics) {
    const bool closed_form_reference = s.exact_gains && !system.input_box && !system.state_box;
    for (TrajectoryLog& log : cell.logs) {
      CellDiagnostics d;
      d.policy = log.policy;
      d.sum_e_u_sq = d.sum_e_x_sq = d.error_budget = kNaN;
      d.min_singular_value = d.min_reduced_hessian_eig = kNaN;
      if (closed_form_reference) {
        const StepDiagnostics sd = per_step_error_diag(log, *s.gains, cell.bundle, s.weights, cell.gamma);
        log.e_u = sd.e_u;
        log.e_x = sd.e_x;
        d.sum_e_u_sq = sd.sum_e_u_sq;
        d.sum_e_x_sq = sd.sum_e_x_sq;
        d.error_budget = sd.error_budget;
      }
      if (trajopt) {
        // Spot-check regularity at four points along the executed trajectory.
        double sv = std::numeric_limits<double>::infinity(), he = std::numeric_limits<double>::infinity();
        for (int q = 0; q < 4; ++q) {
          const int t = q * c.T / 4;
          const Observation obs(cell.bundle, t);
          const double lam = std::isfinite(log.lambdas[static_cast<std::size_t>(t)]) ? log.lambdas[static_cast<std::size_t>(t)] : 1.0;
          MpcProblem prob{&system, log.states[static_cast<std::size_t>(t)], t,
                          combine_parameters(obs.predictions(), obs.nominals(), lam), std::nullopt};
          const MpcSolution sol = solve_mpc(prob, solver_options(c, seed, nullptr));
          const RegularityDiagnostics rd = regularity_probe(prob, sol);
          sv = std::min(sv, rd.min_singular_value);
          he = std::min(he, rd.min_reduced_hessian_eig);
        }
        d.min_singular_value = sv;
        d.min_reduced_hessian_eig = he;
      }
      cell.diagnostics.push_back(d);
    }
  }

  if (options.check) {
    for (auto& msg : check_cell(c, s, cell)) cell.failures.push_back(std::move(msg));
  }
  return cell;
}

std::vector<std::string> check_cell(const ScenarioConfig& c, const ScenarioSetup& s, const CellResult& cell) {
  std::vector<std::string> out;
  const std::string where = fmt::format("seed {} level {}", cell.seed, level_tag(cell.level));
  for (const TrajectoryLog& log : cell.logs) {
    const double J = log.total_cost;
    if (!(std::abs(log.recomputed_cost() - J) <= 1e-10 * std::max(1.0, std::abs(J)))) {
      out.push_back(fmt::format("{} {}: cost recomputation mismatch", log.policy, where));
    }
    for (double lam : log.lambdas) {
      if (!(lam >= 0.0 && lam <= 1.0)) {
        out.push_back(fmt::format("{} {}: lambda outside [0, 1]", log.policy, where));
        break;
      }
    }
    // Replaying the executed inputs against the truth must reproduce every logged state bit for bit.
    for (std::size_t t = 0; t < log.inputs.size(); ++t) {
      const Vec next = s.system.dynamics(log.states[t], log.inputs[t], cell.bundle.truth(static_cast<int>(t)),
                                         static_cast<int>(t));
      if (next != log.states[t + 1]) {
        out.push_back(fmt::format("{} {}: state at {} was not propagated with the truth", log.policy, where, t + 1));
        break;
      }
    }
    const bool must_be_feasible = s.system.state_box && (log.policy == "LAC" || log.policy == "N-MPC");
    if (must_be_feasible && !log.all_feasible()) {
      out.push_back(fmt::format("{} {}: infeasible executed step", log.policy, where));
    }
  }
  for (const MetricsRow& r : cell.rows) {
    if (c.offline && !(std::isfinite(r.J) && std::isfinite(r.J_star) && !std::isnan(r.CR))) {
      out.push_back(fmt::format("{} {}: non-finite metrics", r.policy, where));
    }
  }
  return out;
}

std::filesystem::path resolve_output(const ScenarioConfig& c) {
  if (c.output.is_absolute()) return c.output;
  return c.base_dir / c.output;
}

std::string run_stem(const std::string& policy, std::uint64_t seed, double level) {
  return fmt::format("{}_seed{}_e{}", policy, seed, level_tag(level));
}

ScenarioResult run_scenario(const ScenarioConfig& c, const RunnerOptions& options) {
  ScenarioResult result;
  result.output_dir = resolve_output(c);
  const ScenarioSetup setup = prepare_scenario(c);

  struct Task {
    std::uint64_t seed;
    double level;
  };
  std::vector<Task> tasks;
  for (double level : c.errors.levels()) {
    for (std::uint64_t seed : c.seeds) tasks.push_back({seed, level});
  }

  std::ofstream trace_file;
  std::ostream* trace = nullptr;
  int jobs = std::max(1, options.jobs);
  if (options.trace) {
    trace_file.open(*options.trace);
    if (!trace_file) throw std::runtime_error(fmt::format("cannot open trace file '{}'", options.trace->string()));
    trace_file << "start,level,iteration,objective,violation,step\n";
    trace = &trace_file;
    jobs = 1;
  }

  result.cells.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      CellOptions co{options.diagnostics, options.check, trace};
      try {
        result.cells[i] = run_cell(c, setup, tasks[i].seed, tasks[i].level, co);
      } catch (const std::exception& e) {
        result.cells[i].seed = tasks[i].seed;
        result.cells[i].level = tasks[i].level;
        result.cells[i].failures.push_back(fmt::format("seed {} level {}: {}", tasks[i].seed, level_tag(tasks[i].level), e.what()));
      }
      if (options.log != nullptr) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *options.log << fmt::format("[{}/{}] seed {} level {}\n", i + 1, tasks.size(), tasks[i].seed, level_tag(tasks[i].level));
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // Aggregation is serialized and ordered by task index, so output does not depend on --jobs.
  std::filesystem::create_directories(result.output_dir);
  std::vector<std::string> run_files;
  if (options.write_runs) std::filesystem::create_directories(result.output_dir / "runs");
  std::ofstream metrics(result.output_dir / "metrics.csv");
  write_metrics_header(metrics);
  std::ofstream diag;
  if (options.diagnostics) {
    diag.open(result.output_dir / "diagnostics.csv");
    diag << "policy,seed,error_norm,sum_e_u_sq,sum_e_x_sq,error_budget,min_singular_value,min_reduced_hessian_eig\n";
  }
  std::ofstream offline(result.output_dir / "offline.csv");
  offline << "seed,error_norm,J_star,method,converged\n";
  const bool write_streams = c.errors.kind != ErrorSchedule::Kind::Graded || options.diagnostics;
  if (write_streams) std::filesystem::create_directories(result.output_dir / "streams");

  for (const CellResult& cell : result.cells) {
    for (const MetricsRow& row : cell.rows) write_metrics_row(metrics, row);
    offline << cell.seed << ',' << format_real(cell.level) << ',' << format_real(cell.offline.cost) << ','
            << cell.offline.method << ',' << (cell.offline.converged ? 1 : 0) << '\n';
    if (options.write_runs) {
      for (const TrajectoryLog& log : cell.logs) {
        const std::string name = "runs/" + run_stem(log.policy, cell.seed, cell.level) + ".csv";
        std::ofstream f(result.output_dir / name);
        log.write_csv(f);
        run_files.push_back(name);
      }
    }
    if (write_streams && cell.bundle.horizon() > 0) {
      std::ofstream f(result.output_dir / "streams" / fmt::format("seed{}_e{}.csv", cell.seed, level_tag(cell.level)));
      cell.bundle.write_csv(f);
    }
    if (options.diagnostics) {
      for (const CellDiagnostics& d : cell.diagnostics) {
        diag << d.policy << ',' << cell.seed << ',' << format_real(cell.level) << ',' << format_real(d.sum_e_u_sq) << ','
             << format_real(d.sum_e_x_sq) << ',' << format_real(d.error_budget) << ','
             << format_real(d.min_singular_value) << ',' << format_real(d.min_reduced_hessian_eig) << '\n';
      }
    }
    for (const std::string& f : cell.failures) result.failures.push_back(f);
    if (options.log != nullptr) {
      for (const std::string& n : cell.notes) *options.log << fmt::format("note: seed {} level {}: {}\n", cell.seed, level_tag(cell.level), n);
    }
  }

  std::ofstream plot(result.output_dir / "plot.py");
  emit_plot_script(plot, c.scenario, "metrics.csv", run_files);

  if (options.log != nullptr) {
    for (const std::string& f : result.failures) *options.log << "FAILED: " << f << '\n';
  }
  result.exit_status = result.failures.empty() ? 0 : 1;
  return result;
}

}  // namespace lac
