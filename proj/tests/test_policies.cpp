#include "lac/errors.hpp"
#include "lac/policies.hpp"
#include "lac/sim.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lac;

namespace {

struct Fixture {
  TrackingSystem ts = make_lqc_tracking_system(0.2, INFINITY, 40);
  LqcGains gains = solve_dare(ts.system.linear->A, ts.system.linear->B, ts.system.linear->Q, ts.system.linear->R);

  std::shared_ptr<ActionBackend> backend() const { return std::make_shared<LqcBackend>(gains); }

  PredictionBundle noisy(int window, std::uint64_t seed, double level) const {
    ErrorSchedule s;
    s.kind = ErrorSchedule::Kind::Graded;
    s.target_norm = level;
    s.seed = seed;
    return inject_errors(ts.truth, s, window);
  }
};

std::vector<double> equal_weights(int k) { return std::vector<double>(static_cast<std::size_t>(k), 1.0); }

}  // namespace

TEST_CASE("combining predictions and nominals") {
  const std::vector<Vec> p{Vec::Constant(2, 2.0)}, n{Vec::Constant(2, -2.0)};
  CHECK(combine_parameters(p, n, 1.0)[0] == p[0]);
  CHECK(combine_parameters(p, n, 0.0)[0] == n[0]);
  CHECK(combine_parameters(p, n, 0.75)[0].isApprox(Vec::Constant(2, 1.0)));
  CHECK_THROWS_AS(combine_parameters(p, n, 1.5), std::invalid_argument);
}

TEST_CASE("policy names") {
  CHECK(parse_policy_kind("MPC") == PolicyKind::PredictiveMpc);
  CHECK(parse_policy_kind("LQR") == PolicyKind::NominalMpc);
  CHECK(to_string(parse_policy_kind("SelfTuning")) == "SelfTuning");
  CHECK_THROWS_AS(parse_policy_kind("oracle"), std::invalid_argument);
}

TEST_CASE("constant confidence endpoints and linearity") {
  const Fixture f;
  const PredictionBundle b = f.noisy(5, 1, 2.0);
  const Vec x = Eigen::Vector4d(0.2, -0.1, 0.4, 0.0);
  const Observation obs(b, 3);
  LqcBackend backend(f.gains);
  const Vec u1 = lambda_confident_action(backend, obs, x, 1.0);
  const Vec u0 = lambda_confident_action(backend, obs, x, 0.0);
  CHECK(u1.isApprox(lqc_receding_action(f.gains, x, obs.predictions())));
  CHECK(u0.isApprox(lqc_receding_action(f.gains, x, obs.nominals())));
  CHECK(u0.isApprox(-f.gains.K * x));  // zero nominals
  CHECK(lambda_confident_action(backend, obs, x, 0.5).isApprox(0.5 * (u0 + u1), 1e-12));
}

TEST_CASE("LAC held at full confidence is P-MPC") {
  // With perfect predictions the surrogate gradient at lambda = 1 is exactly zero.
  const Fixture f;
  const PredictionBundle b(f.ts.truth, 5);
  FixedLambdaPolicy pmpc(f.backend(), 1.0, PolicyKind::PredictiveMpc);
  LacPolicy lac(f.backend(), {5, 0.05, 1.0, equal_weights(5)});
  const TrajectoryLog ref = run_closed_loop(f.ts.system, pmpc, b, Vec::Zero(4));
  const TrajectoryLog got = run_closed_loop(f.ts.system, lac, b, Vec::Zero(4));
  CHECK(got.total_cost == ref.total_cost);
  for (double lam : got.lambdas) CHECK(lam == 1.0);
  CHECK(pmpc.name() == "P-MPC");
}

TEST_CASE("predictions equal to nominals make confidence irrelevant") {
  const Fixture f;
  PredictionBundle b(f.ts.truth, 5);
  for (int t = 0; t < b.horizon(); ++t) {
    b.set_predictions(t, std::vector<Vec>(static_cast<std::size_t>(b.window_length(t)), Vec::Zero(4)));
  }
  FixedLambdaPolicy nmpc(f.backend(), 0.0, PolicyKind::NominalMpc);
  LacPolicy lac(f.backend(), {5, 0.05, 0.5, equal_weights(5)});
  const TrajectoryLog a = run_closed_loop(f.ts.system, nmpc, b, Vec::Zero(4));
  const TrajectoryLog c = run_closed_loop(f.ts.system, lac, b, Vec::Zero(4));
  for (std::size_t t = 0; t < a.inputs.size(); ++t) CHECK(a.inputs[t].isApprox(c.inputs[t], 1e-14));
}

TEST_CASE("LAC learns toward full confidence under perfect predictions") {
  const Fixture f;
  const PredictionBundle b(f.ts.truth, 5);
  // A large step saturates at 1 on the first update of each residue class.
  LacPolicy lac(f.backend(), {5, 1.0, 0.5, equal_weights(5)});
  const TrajectoryLog log = run_closed_loop(f.ts.system, lac, b, Vec::Zero(4));
  for (int t = 0; t < 5; ++t) CHECK(log.lambdas[static_cast<std::size_t>(t)] == 0.5);
  for (std::size_t t = 5; t < log.lambdas.size(); ++t) {
    CHECK(log.lambdas[t] >= log.lambdas[t - 5]);
    CHECK(log.feedback_index[t] == static_cast<int>(t) - 5);
  }
  CHECK(log.lambdas.back() == 1.0);

  // Once lambda has settled at 1 every action is the P-MPC action at the visited state.
  std::size_t first = log.lambdas.size();
  while (first > 0 && log.lambdas[first - 1] == 1.0) --first;
  REQUIRE(first + 5 < log.lambdas.size());
  for (std::size_t t = first; t < log.inputs.size(); ++t) {
    const Observation obs(b, static_cast<int>(t));
    CHECK(log.inputs[t].isApprox(lqc_receding_action(f.gains, log.states[t], obs.predictions()), 1e-14));
  }
}

TEST_CASE("self-tuning baseline") {
  const Fixture f;
  SUBCASE("perfect predictions match P-MPC from step k on") {
    const PredictionBundle b(f.ts.truth, 5);
    SelfTuningPolicy st(f.backend());
    const TrajectoryLog a = run_closed_loop(f.ts.system, st, b, Vec::Zero(4));
    CHECK(a.lambdas[0] == 0.5);
    for (std::size_t t = 5; t < a.inputs.size(); ++t) {
      CHECK(a.lambdas[t] == 1.0);
      const Observation obs(b, static_cast<int>(t));
      CHECK(a.inputs[t].isApprox(lqc_receding_action(f.gains, a.states[t], obs.predictions()), 1e-14));
    }
  }
  SUBCASE("truth equal to nominal drives lambda to zero") {
    PredictionBundle b(std::vector<Vec>(30, Vec::Zero(4)), 5);
    for (int t = 0; t < 30; ++t) {
      b.set_predictions(t, std::vector<Vec>(static_cast<std::size_t>(b.window_length(t)), Vec::Constant(4, 0.3)));
    }
    SelfTuningPolicy st(f.backend());
    const TrajectoryLog a = run_closed_loop(f.ts.system, st, b, Vec::Zero(4));
    for (std::size_t t = 1; t < a.lambdas.size(); ++t) CHECK(a.lambdas[t] == 0.0);
  }
  SUBCASE("policies must be stepped in order") {
    const PredictionBundle b(f.ts.truth, 5);
    SelfTuningPolicy st(f.backend());
    CHECK_THROWS_AS(st.act(Observation(b, 2), Vec::Zero(4)), OutOfOrderFeedback);
    LacPolicy lac(f.backend(), {5, 0.05, 0.5, equal_weights(5)});
    CHECK_THROWS_AS(lac.act(Observation(b, 1), Vec::Zero(4)), OutOfOrderFeedback);
    CHECK_THROWS_AS(LacPolicy(f.backend(), {5, 0.05, 0.5, equal_weights(3)}), std::invalid_argument);
  }
}

TEST_CASE("input box clamps the closed-form action") {
  const Fixture f;
  LqcBackend boxed(f.gains, Box::symmetric(2, 0.1));
  const Vec u = boxed.action(Eigen::Vector4d(10, -10, 0, 0), 0, std::vector<Vec>(3, Vec::Zero(4)));
  CHECK(u.cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("linearized arm gains") {
  const LqcGains g = linearized_arm_gains({}, 100);
  CHECK(g.A(0, 0) == 1.5);
  CHECK(g.B(0, 0) == doctest::Approx(0.2));
  CHECK(g.riccati_residual <= 1e-9);
  CHECK(std::abs(g.F(0, 0)) < 1.0);
}
