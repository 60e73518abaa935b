#include "lac/model.hpp"

#include "lac/errors.hpp"
#include "lac/lqc.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace lac {

Box Box::symmetric(int dim, double half_width) {
  if (dim <= 0) throw std::invalid_argument("box dimension must be positive");
  if (!(half_width > 0.0)) throw std::invalid_argument("box half width must be positive");
  return Box{Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width)};
}

Vec Box::clamp(const Vec& v) const {
  if (v.size() != lower.size()) throw DimensionMismatch("box clamp: dimension mismatch");
  return v.cwiseMax(lower).cwiseMin(upper);
}

double Box::violation(const Vec& v) const {
  if (v.size() != lower.size()) throw DimensionMismatch("box violation: dimension mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    worst = std::max({worst, lower[i] - v[i], v[i] - upper[i]});
  }
  return worst;
}

UncertaintySet::UncertaintySet(Shape shape, double radius, Vec half_widths)
    : shape_(shape), radius_(radius), half_widths_(std::move(half_widths)) {}

UncertaintySet UncertaintySet::ball(int dim, double radius) {
  if (dim <= 0) throw std::invalid_argument("uncertainty set dimension must be positive");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("uncertainty ball radius must be positive");
  return UncertaintySet(Shape::Ball, radius, Vec::Constant(dim, radius));
}

UncertaintySet UncertaintySet::box(Vec half_widths) {
  if (half_widths.size() == 0) throw std::invalid_argument("uncertainty set dimension must be positive");
  if (!(half_widths.minCoeff() > 0.0)) throw std::invalid_argument("uncertainty box half widths must be positive");
  return UncertaintySet(Shape::Box, half_widths.norm(), std::move(half_widths));
}

double UncertaintySet::diameter() const {
  return shape_ == Shape::Ball ? 2.0 * radius_ : 2.0 * half_widths_.norm();
}

bool UncertaintySet::contains(const Vec& phi, double tol) const {
  if (phi.size() != half_widths_.size()) throw DimensionMismatch("uncertainty set: dimension mismatch");
  if (shape_ == Shape::Ball) return phi.norm() <= radius_ + tol;
  return (phi.cwiseAbs() - half_widths_).maxCoeff() <= tol;
}

Vec UncertaintySet::project(const Vec& phi) const {
  if (phi.size() != half_widths_.size()) throw DimensionMismatch("uncertainty set: dimension mismatch");
  if (shape_ == Shape::Box) return phi.cwiseMax(-half_widths_).cwiseMin(half_widths_);
  const double n = phi.norm();
  if (n <= radius_) return phi;
  return phi * (radius_ / n);
}

Vec project_param(const Vec& phi, const UncertaintySet& set) { return set.project(phi); }

int SystemModel::path_constraint_count() const {
  if (!path_constraint) return 0;
  return static_cast<int>(path_constraint(Vec::Zero(state_dim), Vec::Zero(input_dim), Vec::Zero(param_dim), 0).size());
}

Eigen::Vector2d hypotrochoid(int t) {
  const double s = static_cast<double>(t);
  return {std::cos(s / 10.0) / 2.0 + std::cos(s / 2.0), std::sin(s / 10.0) / 2.0 + std::sin(s / 2.0)};
}

namespace {

void attach_quadratic(SystemModel& sys, const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  sys.dynamics = [A, B](const Vec& x, const Vec& u, const Vec& phi, int) -> Vec { return A * x + B * u + phi; };
  sys.dynamics_jacobian = [A, B](const Vec&, const Vec&, const Vec&, int, Mat& fx, Mat& fu) {
    fx = A;
    fu = B;
  };
  sys.stage_cost = [Q, R](const Vec& x, const Vec& u, const Vec&, int) {
    return x.dot(Q * x) + u.dot(R * u);
  };
  sys.stage_cost_gradient = [Q, R](const Vec& x, const Vec& u, const Vec&, int, Vec& gx, Vec& gu) {
    gx = 2.0 * (Q * x);
    gu = 2.0 * (R * u);
  };
  sys.terminal_cost = [P](const Vec& x, const Vec&) { return x.dot(P * x); };
  sys.terminal_cost_gradient = [P](const Vec& x, const Vec&) -> Vec { return 2.0 * (P * x); };
  sys.linear = LinearQuadratic{A, B, Q, R, P};
}

}  // namespace

SystemModel make_linear_quadratic_system(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, int horizon,
                                         double u_max) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (!(u_max > 0.0)) throw std::invalid_argument("u_max must be positive");
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols()) {
    throw DimensionMismatch("linear-quadratic system: inconsistent matrix shapes");
  }
  const LqcGains gains = solve_dare(A, B, Q, R, horizon);

  SystemModel sys;
  sys.name = "linear_quadratic";
  sys.state_dim = static_cast<int>(A.rows());
  sys.input_dim = static_cast<int>(B.cols());
  sys.param_dim = sys.state_dim;
  sys.horizon = horizon;
  attach_quadratic(sys, A, B, Q, R, gains.P);
  if (std::isfinite(u_max)) sys.input_box = Box::symmetric(sys.input_dim, u_max);
  sys.uncertainty = UncertaintySet::ball(sys.param_dim, 1.0);
  return sys;
}

TrackingSystem make_lqc_tracking_system(double c1, double u_max, int horizon) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (!(u_max > 0.0)) throw std::invalid_argument("u_max must be positive");
  if (!(c1 > 0.0)) throw std::invalid_argument("c1 must be positive");

  Mat A = Mat::Identity(4, 4);
  A.block(0, 2, 2, 2) = c1 * Mat::Identity(2, 2);
  Mat B = Mat::Zero(4, 2);
  B.block(2, 0, 2, 2) = c1 * Mat::Identity(2, 2);
  Mat Q = Mat::Zero(4, 4);
  Q(0, 0) = 1.0;
  Q(1, 1) = 1.0;
  const Mat R = Mat::Identity(2, 2);

  TrackingSystem out{make_linear_quadratic_system(A, B, Q, R, horizon, u_max), {}, {}};
  out.system.name = "lqc_tracking";
  out.reference.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int t = 0; t <= horizon; ++t) out.reference.emplace_back(hypotrochoid(t));
  out.truth.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    Vec phi = Vec::Zero(4);
    phi.head<2>() = out.reference[static_cast<std::size_t>(t)] - out.reference[static_cast<std::size_t>(t) + 1];
    out.truth.push_back(std::move(phi));
  }
  double radius = 0.0;
  for (const Vec& phi : out.truth) radius = std::max(radius, phi.norm());
  out.system.uncertainty = UncertaintySet::ball(4, radius > 0.0 ? radius : 1.0);
  return out;
}

SystemModel make_robot_arm_system(const RobotArmParams& p, int horizon) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (!(p.c4 > 0.0)) throw std::invalid_argument("c4 must be positive");
  if (!(p.state_bound > 0.0) || !(p.input_bound > 0.0)) throw std::invalid_argument("arm bounds must be positive");

  SystemModel sys;
  sys.name = "robot_arm";
  sys.state_dim = 1;
  sys.input_dim = 1;
  sys.param_dim = 1;
  sys.horizon = horizon;
  const double c2 = p.c2, c3 = p.c3, c4 = p.c4;

  sys.dynamics = [c2, c3](const Vec& x, const Vec& u, const Vec& phi, int) -> Vec {
    Vec next(1);
    next[0] = x[0] + c2 * std::sin(x[0]) + c3 * u[0] * std::exp(-std::abs(x[0])) + phi[0];
    return next;
  };
  // d/dx exp(-|x|) = -sign(x) exp(-|x|); sign(0) = 0 picks a subgradient at the kink.
  sys.dynamics_jacobian = [c2, c3](const Vec& x, const Vec& u, const Vec&, int, Mat& fx, Mat& fu) {
    const double e = std::exp(-std::abs(x[0]));
    const double sgn = (x[0] > 0.0) - (x[0] < 0.0);
    fx.resize(1, 1);
    fu.resize(1, 1);
    fx(0, 0) = 1.0 + c2 * std::cos(x[0]) - c3 * u[0] * sgn * e;
    fu(0, 0) = c3 * e;
  };
  sys.stage_cost = [c4](const Vec& x, const Vec& u, const Vec&, int) { return x[0] * x[0] + c4 * u[0] * u[0]; };
  sys.stage_cost_gradient = [c4](const Vec& x, const Vec& u, const Vec&, int, Vec& gx, Vec& gu) {
    gx = 2.0 * x;
    gu = 2.0 * c4 * u;
  };
  sys.terminal_cost = [](const Vec& x, const Vec&) { return x[0] * x[0]; };
  sys.terminal_cost_gradient = [](const Vec& x, const Vec&) -> Vec { return 2.0 * x; };
  sys.state_box = Box::symmetric(1, p.state_bound);
  sys.input_box = Box::symmetric(1, p.input_bound);
  sys.uncertainty = UncertaintySet::ball(1, 0.05);
  return sys;
}

PredictionBundle::PredictionBundle(std::vector<Vec> truth, int window) : window_(window), truth_(std::move(truth)) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (truth_.empty()) throw std::invalid_argument("truth stream must be nonempty");
  const auto d = truth_.front().size();
  for (const Vec& v : truth_) {
    if (v.size() != d) throw DimensionMismatch("truth stream: inconsistent dimensions");
  }
  const int T = horizon();
  predictions_.resize(static_cast<std::size_t>(T));
  nominals_.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    auto& pred = predictions_[static_cast<std::size_t>(t)];
    auto& nom = nominals_[static_cast<std::size_t>(t)];
    for (int tau = t; tau <= window_end(t); ++tau) {
      pred.push_back(truth_[static_cast<std::size_t>(tau)]);
      nom.push_back(Vec::Zero(d));
    }
  }
}

int PredictionBundle::window_end(int t) const { return std::min(t + window_ - 1, horizon() - 1); }

void PredictionBundle::set_predictions(int t, std::vector<Vec> window) {
  if (static_cast<int>(window.size()) != window_length(t)) throw DimensionMismatch("prediction window length mismatch");
  for (const Vec& v : window) {
    if (v.size() != param_dim()) throw DimensionMismatch("prediction dimension mismatch");
  }
  predictions_.at(static_cast<std::size_t>(t)) = std::move(window);
}

void PredictionBundle::set_nominals(int t, std::vector<Vec> window) {
  if (static_cast<int>(window.size()) != window_length(t)) throw DimensionMismatch("nominal window length mismatch");
  for (const Vec& v : window) {
    if (v.size() != param_dim()) throw DimensionMismatch("nominal dimension mismatch");
  }
  nominals_.at(static_cast<std::size_t>(t)) = std::move(window);
}

double PredictionBundle::max_norm() const {
  double m = 0.0;
  for (const Vec& v : truth_) m = std::max(m, v.norm());
  for (const auto& w : predictions_) {
    for (const Vec& v : w) m = std::max(m, v.norm());
  }
  for (const auto& w : nominals_) {
    for (const Vec& v : w) m = std::max(m, v.norm());
  }
  return m;
}

// Truth is left untouched: it is ground truth, not an ingested forecast.
void PredictionBundle::project_into(const UncertaintySet& set) {
  for (auto& w : predictions_) {
    for (Vec& v : w) v = set.project(v);
  }
  for (auto& w : nominals_) {
    for (Vec& v : w) v = set.project(v);
  }
}

void PredictionBundle::write_csv(std::ostream& out) const {
  out << "t,tau,kind";
  for (int i = 0; i < param_dim(); ++i) out << ",c" << i;
  out << '\n';
  auto row = [&](int t, int tau, const char* kind, const Vec& v) {
    out << t << ',' << tau << ',' << kind;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << fmt::format("{:.17g}", v[i]);
    out << '\n';
  };
  for (int t = 0; t < horizon(); ++t) {
    row(t, t, "truth", truth_[static_cast<std::size_t>(t)]);
    for (int tau = t; tau <= window_end(t); ++tau) {
      row(t, tau, "pred", predictions_[static_cast<std::size_t>(t)][static_cast<std::size_t>(tau - t)]);
    }
    for (int tau = t; tau <= window_end(t); ++tau) {
      row(t, tau, "nominal", nominals_[static_cast<std::size_t>(t)][static_cast<std::size_t>(tau - t)]);
    }
  }
}

UncertaintySet ingest(PredictionBundle& bundle, const GammaPolicy& policy) {
  double radius = policy.radius;
  if (policy.kind == GammaPolicy::Kind::Auto) {
    radius = bundle.max_norm();
    if (!(radius > 0.0)) radius = 1.0;  // all-zero streams: any positive diameter works
  }
  UncertaintySet set = UncertaintySet::ball(bundle.param_dim(), radius);
  bundle.project_into(set);
  return set;
}

std::span<const Vec> Observation::past_predictions(int s) const {
  if (s > t_) throw RevealViolation(fmt::format("step {} asked for predictions issued at {}", t_, s));
  return bundle_->predictions(s);
}

std::span<const Vec> Observation::past_nominals(int s) const {
  if (s > t_) throw RevealViolation(fmt::format("step {} asked for nominals issued at {}", t_, s));
  return bundle_->nominals(s);
}

const Vec& Observation::revealed_truth(int i) const {
  if (i >= t_ || i < 0) throw RevealViolation(fmt::format("step {} read unrevealed truth index {}", t_, i));
  return bundle_->truth(i);
}

}  // namespace lac
