#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lac {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Per-coordinate interval bounds. Infinite bounds are allowed.
struct Box {
  Vec lower;
  Vec upper;

  static Box symmetric(int dim, double half_width);

  int dim() const { return static_cast<int>(lower.size()); }
  Vec clamp(const Vec& v) const;
  /// Largest exceedance over any bound (0 when inside).
  double violation(const Vec& v) const;
  bool contains(const Vec& v, double tol = 0.0) const { return violation(v) <= tol; }
};

/// Convex uncertainty set containing the origin: a centered Euclidean ball or a
/// centered box.
class UncertaintySet {
 public:
  enum class Shape { Ball, Box };

  static UncertaintySet ball(int dim, double radius);
  static UncertaintySet box(Vec half_widths);

  Shape shape() const { return shape_; }
  int dim() const { return static_cast<int>(half_widths_.size()); }
  double radius() const { return radius_; }
  const Vec& half_widths() const { return half_widths_; }
  double diameter() const;

  bool contains(const Vec& phi, double tol = 1e-12) const;
  /// Euclidean projection (radial scaling for the ball, clamp for the box).
  Vec project(const Vec& phi) const;

 private:
  UncertaintySet(Shape shape, double radius, Vec half_widths);

  Shape shape_;
  double radius_;
  Vec half_widths_;
};

Vec project_param(const Vec& phi, const UncertaintySet& set);

/// Structure of a linear-quadratic plant x+ = Ax + Bu + phi with cost
/// x'Qx + u'Ru and terminal x'Px.
struct LinearQuadratic {
  Mat A, B, Q, R, P;
};

/// A discrete-time plant parameterized by phi. All maps are deterministic.
struct SystemModel {
  using Dynamics = std::function<Vec(const Vec& x, const Vec& u, const Vec& phi, int t)>;
  using DynamicsJacobian = std::function<void(const Vec& x, const Vec& u, const Vec& phi, int t, Mat& fx, Mat& fu)>;
  using StageCost = std::function<double(const Vec& x, const Vec& u, const Vec& phi, int t)>;
  using StageCostGradient = std::function<void(const Vec& x, const Vec& u, const Vec& phi, int t, Vec& gx, Vec& gu)>;
  using TerminalCost = std::function<double(const Vec& x, const Vec& phi)>;
  using TerminalCostGradient = std::function<Vec(const Vec& x, const Vec& phi)>;
  using PathConstraint = std::function<Vec(const Vec& x, const Vec& u, const Vec& phi, int t)>;
  using PathConstraintJacobian = std::function<void(const Vec& x, const Vec& u, const Vec& phi, int t, Mat& hx, Mat& hu)>;

  std::string name;
  int state_dim = 0;
  int input_dim = 0;
  int param_dim = 0;
  int horizon = 0;

  Dynamics dynamics;
  DynamicsJacobian dynamics_jacobian;
  StageCost stage_cost;
  StageCostGradient stage_cost_gradient;
  TerminalCost terminal_cost;
  TerminalCostGradient terminal_cost_gradient;
  // Feasible iff every component is <= 0. Empty function means no path constraint.
  PathConstraint path_constraint;
  PathConstraintJacobian path_constraint_jacobian;

  std::optional<Box> state_box;
  std::optional<Box> input_box;
  UncertaintySet uncertainty = UncertaintySet::ball(1, 1.0);

  // Present only for linear-quadratic plants.
  std::optional<LinearQuadratic> linear;

  int path_constraint_count() const;
};

/// Hypotrochoid reference y_t of the tracking experiment.
Eigen::Vector2d hypotrochoid(int t);

struct TrackingSystem {
  SystemModel system;
  std::vector<Vec> truth;      // phi*_t = [y_t - y_{t+1}; 0; 0], t in [0, T)
  std::vector<Vec> reference;  // y_t, t in [0, T]
};

/// Double-integrator tracking plant in error coordinates. Pass u_max = +inf for
/// an unconstrained input.
TrackingSystem make_lqc_tracking_system(double c1, double u_max, int horizon);

struct RobotArmParams {
  double c2 = 0.5;
  double c3 = 0.2;
  double c4 = 0.1;
  double state_bound = 0.2;
  double input_bound = 1e3;
};

/// x+ = x + c2 sin(x) + c3 u exp(-|x|) + phi, cost x^2 + c4 u^2, terminal x^2.
SystemModel make_robot_arm_system(const RobotArmParams& params, int horizon);

/// Generic LQ plant built from matrices (terminal cost uses the DARE solution).
SystemModel make_linear_quadratic_system(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                         int horizon, double u_max = std::numeric_limits<double>::infinity());

/// Ground truth plus receding-horizon predictions and nominals for every step.
class PredictionBundle {
 public:
  PredictionBundle() = default;
  /// Predictions initialized to the truth, nominals to zero.
  PredictionBundle(std::vector<Vec> truth, int window);

  int horizon() const { return static_cast<int>(truth_.size()); }
  int window() const { return window_; }
  int param_dim() const { return truth_.empty() ? 0 : static_cast<int>(truth_.front().size()); }
  /// Last index covered by the window issued at t.
  int window_end(int t) const;
  int window_length(int t) const { return window_end(t) - t + 1; }

  const Vec& truth(int i) const { return truth_.at(static_cast<std::size_t>(i)); }
  const std::vector<Vec>& truth() const { return truth_; }
  std::span<const Vec> predictions(int t) const { return predictions_.at(static_cast<std::size_t>(t)); }
  std::span<const Vec> nominals(int t) const { return nominals_.at(static_cast<std::size_t>(t)); }

  void set_predictions(int t, std::vector<Vec> window);
  void set_nominals(int t, std::vector<Vec> window);

  /// Largest Euclidean norm across truth, predictions and nominals.
  double max_norm() const;
  void project_into(const UncertaintySet& set);

  /// CSV rows: t,tau,kind,c0,c1,... with kind in {truth,pred,nominal}.
  void write_csv(std::ostream& out) const;

 private:
  int window_ = 1;
  std::vector<Vec> truth_;
  std::vector<std::vector<Vec>> predictions_;
  std::vector<std::vector<Vec>> nominals_;
};

struct GammaPolicy {
  enum class Kind { Auto, Fixed };
  Kind kind = Kind::Auto;
  double radius = 0.0;  // used when kind == Fixed
};

/// Builds the uncertainty ball for a bundle and projects every entry into it.
/// Auto: radius = max norm encountered (diameter twice that).
UncertaintySet ingest(PredictionBundle& bundle, const GammaPolicy& policy);

/// What a policy may read at step t. Truth is gated by the reveal schedule:
/// phi*_i becomes visible at step i + 1.
class Observation {
 public:
  Observation(const PredictionBundle& bundle, int t) : bundle_(&bundle), t_(t) {}

  int time() const { return t_; }
  int horizon() const { return bundle_->horizon(); }
  int window() const { return bundle_->window(); }
  int window_end(int s) const { return bundle_->window_end(s); }
  std::span<const Vec> predictions() const { return bundle_->predictions(t_); }
  std::span<const Vec> nominals() const { return bundle_->nominals(t_); }
  std::span<const Vec> past_predictions(int s) const;
  std::span<const Vec> past_nominals(int s) const;
  /// Throws RevealViolation for i >= t.
  const Vec& revealed_truth(int i) const;

 private:
  const PredictionBundle* bundle_;
  int t_;
};

}  // namespace lac
