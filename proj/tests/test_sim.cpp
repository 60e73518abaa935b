#include "lac/policies.hpp"
#include "lac/sim.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace lac;

namespace {

double stacked_error(const PredictionBundle& b, int t) {
  double s = 0.0;
  for (int j = 0; j < b.window_length(t); ++j) {
    s += (b.predictions(t)[static_cast<std::size_t>(j)] - b.truth(t + j)).squaredNorm();
  }
  return std::sqrt(s);
}

LqcGains gains_of(const SystemModel& sys) {
  const auto& l = *sys.linear;
  return solve_dare(l.A, l.B, l.Q, l.R);
}

std::vector<TrajectoryLog> run_all(const SystemModel& sys, const LqcGains& g, const PredictionBundle& b, const Vec& x0,
                                   const std::vector<double>& weights) {
  auto backend = [&] { return std::make_shared<LqcBackend>(g); };
  FixedLambdaPolicy pmpc(backend(), 1.0, PolicyKind::PredictiveMpc);
  FixedLambdaPolicy nmpc(backend(), 0.0, PolicyKind::NominalMpc);
  LacPolicy lac(backend(), {b.window(), 0.05, 0.5, weights});
  SelfTuningPolicy st(backend());
  return {run_closed_loop(sys, lac, b, x0), run_closed_loop(sys, pmpc, b, x0), run_closed_loop(sys, nmpc, b, x0),
          run_closed_loop(sys, st, b, x0)};
}

}  // namespace

TEST_CASE("error injection") {
  const TrackingSystem ts = make_lqc_tracking_system(0.2, INFINITY, 60);
  SUBCASE("zero target leaves predictions exact") {
    ErrorSchedule s;
    s.kind = ErrorSchedule::Kind::Graded;
    s.target_norm = 0.0;
    const PredictionBundle b = inject_errors(ts.truth, s, 5);
    for (int t = 0; t < 60; ++t) CHECK(stacked_error(b, t) == 0.0);
  }
  SUBCASE("graded target is met at every step") {
    for (std::uint64_t seed : {0u, 1u, 17u}) {
      ErrorSchedule s;
      s.kind = ErrorSchedule::Kind::Graded;
      s.target_norm = 2.5;
      s.seed = seed;
      const PredictionBundle b = inject_errors(ts.truth, s, 5);
      for (int t = 0; t < 60; ++t) CHECK(std::abs(stacked_error(b, t) - 2.5) <= 1e-9);
      for (int t = 0; t < 60; ++t) CHECK(b.nominals(t)[0].isZero());
    }
  }
  SUBCASE("attack triggers in the middle third") {
    ErrorSchedule s;
    s.kind = ErrorSchedule::Kind::Attack;
    const PredictionBundle b = inject_errors(ts.truth, s, 5);
    CHECK(std::abs(stacked_error(b, 20) - 4.0) <= 1e-9);  // T/3 = 20, 20 % 5 == 0
    CHECK(std::abs(stacked_error(b, 21) - 4.0) <= 1e-9);
    CHECK(stacked_error(b, 22) == 0.0);
    CHECK(stacked_error(b, 15) == 0.0);
    CHECK(stacked_error(b, 40) == 0.0);  // 2T/3 is excluded
    CHECK(ErrorSchedule::in_attack_window(39, 60));
    CHECK_FALSE(ErrorSchedule::in_attack_window(19, 60));
  }
  SUBCASE("injection is reproducible") {
    ErrorSchedule s;
    s.kind = ErrorSchedule::Kind::Graded;
    s.target_norm = 1.0;
    s.seed = 3;
    std::ostringstream a, b;
    inject_errors(ts.truth, s, 5).write_csv(a);
    inject_errors(ts.truth, s, 5).write_csv(b);
    CHECK(a.str() == b.str());
  }
}

TEST_CASE("closed loop with nothing to reject costs nothing") {
  const TrackingSystem ts = make_lqc_tracking_system(0.2, 10.0, 30);
  const LqcGains g = gains_of(ts.system);
  const PredictionBundle b(std::vector<Vec>(30, Vec::Zero(4)), 5);
  for (const TrajectoryLog& log : run_all(ts.system, g, b, Vec::Zero(4), std::vector<double>(5, 1.0))) {
    CHECK(log.total_cost == 0.0);
    CHECK(log.all_feasible());
  }
  CHECK(offline_optimum(ts.system, b.truth(), Vec::Zero(4)).infinite_ratio);
}

TEST_CASE("offline optimum") {
  SUBCASE("linear-quadratic plant against the dense oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 5; ++trial) {
      const oracle::LqInstance in = oracle::random_instance(rng, 3);
      const SystemModel sys = make_linear_quadratic_system(in.A, in.B, in.Q, in.R, 20);
      const int n = static_cast<int>(in.A.rows());
      std::vector<Vec> truth;
      for (int t = 0; t < 20; ++t) truth.push_back(oracle::gaussian_vec(n, rng));
      const Vec x0 = oracle::gaussian_vec(n, rng);
      const OfflineOptimum o = offline_optimum(sys, truth, x0);
      CHECK(o.method == "closed_form");
      CHECK(oracle::relative_error(o.cost, oracle::dense_lq(in.A, in.B, in.Q, in.R, sys.linear->P, x0, truth).cost) <=
            1e-8);
    }
  }
  SUBCASE("arm optimum lies below every policy") {
    const SystemModel arm = make_robot_arm_system({}, 40);
    std::vector<Vec> truth;
    for (int t = 0; t < 40; ++t) truth.push_back(Vec::Constant(1, 0.02 * std::sin(t / 10.0)));
    ErrorSchedule s;
    s.kind = ErrorSchedule::Kind::Attack;
    PredictionBundle b = inject_errors(truth, s, 5);
    ingest(b, {GammaPolicy::Kind::Fixed, 0.05});
    const Vec x0 = Vec::Constant(1, 0.1);
    const OfflineOptimum o = offline_optimum(arm, truth, x0);
    auto backend = [&] { return std::make_shared<MpcBackend>(arm); };
    FixedLambdaPolicy pmpc(backend(), 1.0, PolicyKind::PredictiveMpc);
    FixedLambdaPolicy nmpc(backend(), 0.0, PolicyKind::NominalMpc);
    LacPolicy lac(backend(), {5, 0.05, 0.5, std::vector<double>(5, 0.1)});
    for (Policy* p : std::initializer_list<Policy*>{&pmpc, &nmpc, &lac}) {
      const TrajectoryLog log = run_closed_loop(arm, *p, b, x0);
      CHECK(o.cost <= log.total_cost + 1e-8);
    }
    CHECK(o.method == "dp+trajopt");
  }
}

TEST_CASE("competitive report on unconstrained tracking") {
  const int T = 40;
  const TrackingSystem ts = make_lqc_tracking_system(0.2, INFINITY, T);
  const LqcGains g = gains_of(ts.system);
  const std::vector<double> weights = g.sensitivity_weights(T);

  SUBCASE("perfect full-window predictions are optimal") {
    PredictionBundle b(ts.truth, T);
    const UncertaintySet set = ingest(b, {});
    const double j_star = offline_optimum(ts.system, b.truth(), Vec::Zero(4)).cost;
    FixedLambdaPolicy pmpc(std::make_shared<LqcBackend>(g), 1.0, PolicyKind::PredictiveMpc);
    const TrajectoryLog log = run_closed_loop(ts.system, pmpc, b, Vec::Zero(4));
    const auto rows = competitive_report({log}, {&b, weights, set.diameter(), &g, j_star, 0, 0.0});
    CHECK(std::abs(rows[0].CR - 1.0) <= 1e-9);

    const StepDiagnostics d = per_step_error_diag(log, g, b, weights, set.diameter());
    for (double e : d.e_u) CHECK(e <= 1e-9);
  }
  SUBCASE("upper and lower bounds bracket the measured ratios") {
    for (double level : {0.5, 2.0, 4.0}) {
      ErrorSchedule s;
      s.kind = ErrorSchedule::Kind::Graded;
      s.target_norm = level;
      s.seed = 5;
      PredictionBundle b = inject_errors(ts.truth, s, 5);
      const UncertaintySet set = ingest(b, {});
      const double j_star = offline_optimum(ts.system, b.truth(), Vec::Zero(4)).cost;
      const auto w5 = g.sensitivity_weights(5);
      const auto logs = run_all(ts.system, g, b, Vec::Zero(4), w5);
      const auto rows = competitive_report(logs, {&b, w5, set.diameter(), &g, j_star, 5, level});
      for (const MetricsRow& r : rows) {
        CHECK(r.thm4_lower <= r.CR + 1e-8);
        if (r.policy == "LAC") {
          CHECK(r.CR <= r.thm3_upper);
          CHECK(r.dcl_regret <= r.lemma3_bound);
        } else {
          CHECK(std::isnan(r.thm3_upper));
        }
        CHECK(r.adversity == T);
      }
    }
  }
  SUBCASE("nominal control error matches the windowed-versus-full tail difference") {
    ErrorSchedule s;
    s.kind = ErrorSchedule::Kind::Graded;
    s.target_norm = 1.0;
    PredictionBundle b = inject_errors(ts.truth, s, 5);
    FixedLambdaPolicy nmpc(std::make_shared<LqcBackend>(g), 0.0, PolicyKind::NominalMpc);
    const TrajectoryLog log = run_closed_loop(ts.system, nmpc, b, Vec::Zero(4));
    const StepDiagnostics d = per_step_error_diag(log, g, b, weights, 1.0);
    Vec tail = Vec::Zero(4);
    for (int t = T - 1; t >= 0; --t) {
      tail = g.P * ts.truth[static_cast<std::size_t>(t)] + g.F.transpose() * tail;
      CHECK(d.e_u[static_cast<std::size_t>(t)] ==
            doctest::Approx((g.S_inv * g.B.transpose() * tail).norm()).epsilon(1e-10));
    }
  }
}

TEST_CASE("trajectory CSV") {
  TrajectoryLog log;
  log.policy = "LAC";
  log.states = {Vec::Constant(1, 0.5), Vec::Constant(1, 0.25)};
  log.inputs = {Vec::Constant(1, -1.0)};
  log.stage_costs = {0.35};
  log.terminal_cost = 0.0625;
  log.total_cost = log.recomputed_cost();
  log.lambdas = {0.5};
  log.gradients = {std::nan("")};
  log.feedback_index = {-1};
  log.feasible = {true};
  log.e_u = log.e_x = {std::nan("")};
  std::ostringstream out;
  log.write_csv(out);
  CHECK(out.str() ==
        "t,x0,u0,cost,lambda,feasible,e_u,e_x,grad,xi_available_index\n"
        "0,0.5,-1,0.34999999999999998,0.5,1,nan,nan,nan,-1\n"
        "1,0.25,nan,0.0625,nan,1,nan,nan,nan,-1\n");
  CHECK(log.total_cost == doctest::Approx(0.4125));
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(INFINITY) == "inf");
}
