#include "lac/policies.hpp"

#include "lac/errors.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace lac {

LqcBackend::LqcBackend(LqcGains gains, std::optional<Box> input_box)
    : gains_(std::move(gains)), input_box_(std::move(input_box)) {}

Vec LqcBackend::action(const Vec& x, int, const std::vector<Vec>& params) {
  Vec u = lqc_receding_action(gains_, x, params);
  if (input_box_) u = input_box_->clamp(u);
  return u;
}

MpcBackend::MpcBackend(const SystemModel& system, SolverOptions options) : system_(&system), options_(options) {}

void MpcBackend::reset() {
  have_last_ = false;
  last_converged_ = true;
  nonconverged_ = 0;
  last_ = {};
}

Vec MpcBackend::action(const Vec& x, int t, const std::vector<Vec>& params) {
  MpcProblem prob{system_, x, t, params, std::nullopt};
  if (have_last_ && !last_.controls.empty()) {
    std::vector<Vec> shifted(last_.controls.begin() + 1, last_.controls.end());
    if (shifted.empty()) shifted.push_back(last_.controls.back());
    prob.warm_start = std::move(shifted);
  }
  last_ = solve_mpc(prob, options_);
  have_last_ = true;
  last_converged_ = last_.converged;
  if (!last_.converged) ++nonconverged_;
  return last_.controls.front();
}

std::vector<Vec> combine_parameters(std::span<const Vec> predictions, std::span<const Vec> nominals, double lambda) {
  if (predictions.size() != nominals.size()) throw DimensionMismatch("prediction and nominal windows differ in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  std::vector<Vec> out(predictions.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * predictions[i] + (1.0 - lambda) * nominals[i];
  return out;
}

Vec lambda_confident_action(ActionBackend& backend, const Observation& obs, const Vec& x, double lambda) {
  return backend.action(x, obs.time(), combine_parameters(obs.predictions(), obs.nominals(), lambda));
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Lac: return "LAC";
    case PolicyKind::PredictiveMpc: return "P-MPC";
    case PolicyKind::NominalMpc: return "N-MPC";
    case PolicyKind::SelfTuning: return "SelfTuning";
    case PolicyKind::FixedLambda: return "Fixed";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "LAC") return PolicyKind::Lac;
  if (name == "P-MPC" || name == "MPC") return PolicyKind::PredictiveMpc;
  if (name == "N-MPC" || name == "LQR") return PolicyKind::NominalMpc;
  if (name == "SelfTuning" || name == "Self-Tuning") return PolicyKind::SelfTuning;
  if (name == "Fixed") return PolicyKind::FixedLambda;
  throw std::invalid_argument(fmt::format("unknown policy '{}'", name));
}

FixedLambdaPolicy::FixedLambdaPolicy(std::shared_ptr<ActionBackend> backend, double lambda, PolicyKind kind)
    : backend_(std::move(backend)), lambda_(lambda), kind_(kind) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
}

Vec FixedLambdaPolicy::act(const Observation& obs, const Vec& x) {
  last_lambda_ = lambda_;
  return lambda_confident_action(*backend_, obs, x, lambda_);
}

LacPolicy::LacPolicy(std::shared_ptr<ActionBackend> backend, LacOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      learner_(options_.delay, options_.step_size, options_.initial_lambda) {
  if (static_cast<int>(options_.weights.size()) < options_.delay) {
    throw std::invalid_argument("LAC needs one sensitivity weight per window offset");
  }
}

Vec LacPolicy::act(const Observation& obs, const Vec& x) {
  const int t = obs.time();
  if (t != learner_.next_index()) throw OutOfOrderFeedback(fmt::format("LAC queried at {} but expected {}", t, learner_.next_index()));
  const int k = options_.delay;
  if (t < k) {
    last_lambda_ = learner_.advance(nullptr);
    last_feedback_index_ = -1;
  } else {
    const SurrogateLoss loss = make_surrogate(obs, t - k, options_.weights);
    last_lambda_ = learner_.advance(&loss);
    last_feedback_index_ = t - k;
  }
  last_gradient_ = learner_.gradients().back();
  return lambda_confident_action(*backend_, obs, x, last_lambda_);
}

SelfTuningPolicy::SelfTuningPolicy(std::shared_ptr<ActionBackend> backend, double initial_lambda)
    : backend_(std::move(backend)), ftl_(initial_lambda) {}

Vec SelfTuningPolicy::act(const Observation& obs, const Vec& x) {
  const int t = obs.time();
  if (t != next_t_) throw OutOfOrderFeedback(fmt::format("SelfTuning queried at {} but expected {}", t, next_t_));
  // Truth index t - 1 was revealed at this step: score every earlier window that covered it.
  if (t >= 1) {
    const int tau = t - 1;
    const Vec& truth = obs.revealed_truth(tau);
    for (int s = std::max(0, tau - obs.window() + 1); s <= tau; ++s) {
      if (obs.window_end(s) < tau) continue;
      const auto j = static_cast<std::size_t>(tau - s);
      ftl_.add_pair(truth - obs.past_predictions(s)[j], truth - obs.past_nominals(s)[j]);
    }
    last_feedback_index_ = tau;
  }
  ++next_t_;
  last_lambda_ = ftl_.lambda();
  return lambda_confident_action(*backend_, obs, x, last_lambda_);
}

LqcGains linearized_arm_gains(const RobotArmParams& p, int decay_horizon) {
  Mat A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
  A(0, 0) = 1.0 + p.c2;
  B(0, 0) = p.c3;
  Q(0, 0) = 1.0;
  R(0, 0) = p.c4;
  return solve_dare(A, B, Q, R, decay_horizon);
}

}  // namespace lac
