#pragma once

#include "lac/confidence.hpp"
#include "lac/lqc.hpp"
#include "lac/model.hpp"
#include "lac/trajopt.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lac {

/// Maps (state, time, combined parameter window) to an action.
class ActionBackend {
 public:
  virtual ~ActionBackend() = default;
  virtual Vec action(const Vec& x, int t, const std::vector<Vec>& params) = 0;
  /// Solver health of the most recent call (always true for closed forms).
  virtual bool last_converged() const { return true; }
  /// Clears warm-start state between runs.
  virtual void reset() {}
};

/// Closed-form receding-horizon LQ action, clamped to an optional input box.
class LqcBackend final : public ActionBackend {
 public:
  LqcBackend(LqcGains gains, std::optional<Box> input_box = std::nullopt);
  Vec action(const Vec& x, int t, const std::vector<Vec>& params) override;
  const LqcGains& gains() const { return gains_; }

 private:
  LqcGains gains_;
  std::optional<Box> input_box_;
};

/// Numerical receding-horizon solve, warm-started from the previous solution shifted one step.
class MpcBackend final : public ActionBackend {
 public:
  MpcBackend(const SystemModel& system, SolverOptions options = {});
  Vec action(const Vec& x, int t, const std::vector<Vec>& params) override;
  bool last_converged() const override { return last_converged_; }
  void reset() override;
  const MpcSolution& last_solution() const { return last_; }
  int nonconverged_solves() const { return nonconverged_; }

 private:
  const SystemModel* system_;
  SolverOptions options_;
  MpcSolution last_;
  bool have_last_ = false;
  bool last_converged_ = true;
  int nonconverged_ = 0;
};

/// lambda * predictions + (1 - lambda) * nominals, entrywise.
std::vector<Vec> combine_parameters(std::span<const Vec> predictions, std::span<const Vec> nominals, double lambda);

Vec lambda_confident_action(ActionBackend& backend, const Observation& obs, const Vec& x, double lambda);

enum class PolicyKind { Lac, PredictiveMpc, NominalMpc, SelfTuning, FixedLambda };

std::string to_string(PolicyKind kind);
/// Accepts "LAC", "P-MPC" (or "MPC"), "N-MPC" (or "LQR"), "SelfTuning", "Fixed".
PolicyKind parse_policy_kind(const std::string& name);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  virtual std::string name() const { return to_string(kind()); }
  /// Action at step obs.time(); must be called for t = 0, 1, ... in order.
  virtual Vec act(const Observation& obs, const Vec& x) = 0;

  double last_lambda() const { return last_lambda_; }
  double last_gradient() const { return last_gradient_; }
  /// Index of the newest surrogate loss the policy consumed (-1 if none).
  int last_feedback_index() const { return last_feedback_index_; }
  virtual bool last_converged() const { return true; }

 protected:
  double last_lambda_ = std::numeric_limits<double>::quiet_NaN();
  double last_gradient_ = std::numeric_limits<double>::quiet_NaN();
  int last_feedback_index_ = -1;
};

/// Constant confidence: 1 is predictive MPC, 0 is nominal MPC (LQR with zero nominals).
class FixedLambdaPolicy final : public Policy {
 public:
  FixedLambdaPolicy(std::shared_ptr<ActionBackend> backend, double lambda, PolicyKind kind = PolicyKind::FixedLambda);
  PolicyKind kind() const override { return kind_; }
  Vec act(const Observation& obs, const Vec& x) override;
  bool last_converged() const override { return backend_->last_converged(); }

 private:
  std::shared_ptr<ActionBackend> backend_;
  double lambda_;
  PolicyKind kind_;
};

struct LacOptions {
  int delay = 5;
  double step_size = 0.05;
  double initial_lambda = 0.5;
  std::vector<double> weights;  // rho(0..k-1)
};

/// Learning-augmented control: delayed confidence learning feeding lambda-confident actions.
class LacPolicy final : public Policy {
 public:
  LacPolicy(std::shared_ptr<ActionBackend> backend, LacOptions options);
  PolicyKind kind() const override { return PolicyKind::Lac; }
  Vec act(const Observation& obs, const Vec& x) override;
  bool last_converged() const override { return backend_->last_converged(); }
  const DelayedConfidenceLearner& learner() const { return learner_; }

 private:
  std::shared_ptr<ActionBackend> backend_;
  LacOptions options_;
  DelayedConfidenceLearner learner_;
};

/// Follow-the-leader confidence on fully revealed (prediction, nominal) error pairs.
class SelfTuningPolicy final : public Policy {
 public:
  explicit SelfTuningPolicy(std::shared_ptr<ActionBackend> backend, double initial_lambda = 0.5);
  PolicyKind kind() const override { return PolicyKind::SelfTuning; }
  Vec act(const Observation& obs, const Vec& x) override;
  bool last_converged() const override { return backend_->last_converged(); }

 private:
  std::shared_ptr<ActionBackend> backend_;
  FtlSelfTuning ftl_;
  int next_t_ = 0;
};

/// Linearization x+ = (1 + c2) x + c3 u of the arm at the origin with cost x^2 + c4 u^2.
LqcGains linearized_arm_gains(const RobotArmParams& params, int decay_horizon);

}  // namespace lac
