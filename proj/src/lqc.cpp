#include "lac/lqc.hpp"

#include "lac/errors.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace lac {

namespace {

double op_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(M).singularValues()(0);
}

double min_eig(const Mat& M) { return Eigen::SelfAdjointEigenSolver<Mat>(M).eigenvalues().minCoeff(); }

void require_symmetric(const Mat& M, const char* name) {
  if (M.rows() != M.cols()) throw DimensionMismatch(fmt::format("{} must be square", name));
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) throw std::invalid_argument(fmt::format("{} is not symmetric (max asymmetry {:.3g})", name, asym));
}

Mat riccati_map(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  const Mat BtP = B.transpose() * P;
  const Mat S = R + BtP * B;
  const Mat next = Q + A.transpose() * P * A - (BtP * A).transpose() * S.ldlt().solve(BtP * A);
  return 0.5 * (next + next.transpose());
}

}  // namespace

double LqcGains::sensitivity_scale() const {
  return decay_scale * op_norm(S_inv * B.transpose()) * op_norm(P);
}

std::vector<double> LqcGains::sensitivity_weights(int count) const {
  std::vector<double> w(static_cast<std::size_t>(std::max(count, 0)));
  const double s = sensitivity_scale();
  double r = 1.0;
  for (double& x : w) {
    x = s * r;
    r *= decay_rate;
  }
  return w;
}

double riccati_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  return (P - riccati_map(A, B, Q, R, P)).norm();
}

double spectral_radius(const Mat& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::EigenSolver<Mat>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

DecayConstants decay_constants(const Mat& F, int horizon) {
  const double sr = spectral_radius(F);
  if (!(sr < 1.0)) throw UnstableClosedLoop(fmt::format("closed-loop spectral radius {:.6g} >= 1", sr));
  const double rate = 0.5 * (1.0 + sr);
  double scale = 1.0;  // t = 0
  Mat power = Mat::Identity(F.rows(), F.cols());
  double rate_pow = 1.0;
  for (int t = 1; t <= horizon; ++t) {
    power = power * F;
    rate_pow *= rate;
    scale = std::max(scale, op_norm(power) / rate_pow);
  }
  return {scale, rate};
}

LqcGains solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, int decay_horizon, int max_iterations) {
  require_symmetric(Q, "Q");
  require_symmetric(R, "R");
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols()) {
    throw DimensionMismatch("solve_dare: inconsistent matrix shapes");
  }

  LqcGains g;
  g.A = A;
  g.B = B;
  g.Q = Q;
  g.R = R;
  Mat P = Q;
  int it = 0;
  for (;;) {
    if (it >= max_iterations) {
      throw NonConvergence(fmt::format("Riccati iteration did not converge in {} iterations", max_iterations));
    }
    Mat next = riccati_map(A, B, Q, R, P);
    ++it;
    if (!next.allFinite()) throw NonConvergence("Riccati iteration diverged");
    const double step = (next - P).norm();
    P = std::move(next);
    if (step < 1e-12) break;
  }
  g.P = P;
  g.iterations = it;
  const Mat S = R + B.transpose() * P * B;
  g.S_inv = S.ldlt().solve(Mat::Identity(S.rows(), S.cols()));
  g.S_inv = 0.5 * (g.S_inv + g.S_inv.transpose());
  g.K = g.S_inv * B.transpose() * P * A;
  g.F = A - B * g.K;
  g.H = B * g.S_inv * B.transpose();
  g.riccati_residual = riccati_residual(A, B, Q, R, P);
  const DecayConstants dc = decay_constants(g.F, decay_horizon);
  g.decay_scale = dc.scale;
  g.decay_rate = dc.rate;
  return g;
}

Vec feedforward_sum(const LqcGains& g, std::span<const Vec> params) {
  const int n = g.state_dim();
  Vec v = Vec::Zero(n);
  const Mat Ft = g.F.transpose();
  for (auto it = params.rbegin(); it != params.rend(); ++it) {
    if (it->size() != n) throw DimensionMismatch("parameter dimension must equal state dimension");
    v = g.P * (*it) + Ft * v;
  }
  return v;
}

Vec lqc_receding_action(const LqcGains& g, const Vec& x, std::span<const Vec> params) {
  if (x.size() != g.state_dim()) throw DimensionMismatch("state dimension mismatch");
  if (params.empty()) throw std::invalid_argument("parameter window must be nonempty");
  return -g.K * x - g.S_inv * (g.B.transpose() * feedforward_sum(g, params));
}

double lqc_trajectory_cost(const LqcGains& g, std::span<const Vec> states, std::span<const Vec> inputs) {
  if (states.size() != inputs.size() + 1) throw DimensionMismatch("trajectory needs one more state than inputs");
  double J = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    J += states[t].dot(g.Q * states[t]) + inputs[t].dot(g.R * inputs[t]);
  }
  return J + states.back().dot(g.P * states.back());
}

LqcRollout clairvoyant_optimal_lqc(const LqcGains& g, const Vec& x0, std::span<const Vec> truth) {
  const std::size_t T = truth.size();
  const Mat Ft = g.F.transpose();
  std::vector<Vec> v(T + 1, Vec::Zero(g.state_dim()));
  for (std::size_t t = T; t-- > 0;) v[t] = g.P * truth[t] + Ft * v[t + 1];

  LqcRollout out;
  out.states.reserve(T + 1);
  out.inputs.reserve(T);
  out.states.push_back(x0);
  for (std::size_t t = 0; t < T; ++t) {
    const Vec& x = out.states.back();
    Vec u = -g.K * x - g.S_inv * (g.B.transpose() * v[t]);
    out.stage_costs.push_back(x.dot(g.Q * x) + u.dot(g.R * u));
    Vec next = g.A * x + g.B * u + truth[t];
    out.inputs.push_back(std::move(u));
    out.states.push_back(std::move(next));
  }
  out.terminal_cost = out.states.back().dot(g.P * out.states.back());
  out.total_cost = out.terminal_cost;
  for (double c : out.stage_costs) out.total_cost += c;
  return out;
}

RegretWitness regret_witness(const LqcGains& g, const PredictionBundle& bundle, std::span<const double> lambdas) {
  const int T = bundle.horizon();
  if (static_cast<int>(lambdas.size()) != T) throw DimensionMismatch("one lambda per step is required");
  const Mat Ft = g.F.transpose();

  // tail[t] = sum_{tau >= t} (F')^{tau - t} P phi*_tau
  std::vector<Vec> tail(static_cast<std::size_t>(T) + 1, Vec::Zero(g.state_dim()));
  for (int t = T - 1; t >= 0; --t) {
    tail[static_cast<std::size_t>(t)] = g.P * bundle.truth(t) + Ft * tail[static_cast<std::size_t>(t) + 1];
  }

  RegretWitness w;
  w.psi.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double lam = lambdas[static_cast<std::size_t>(t)];
    const auto pred = bundle.predictions(t);
    const auto nom = bundle.nominals(t);
    std::vector<Vec> combined(pred.size());
    for (std::size_t j = 0; j < pred.size(); ++j) combined[j] = lam * pred[j] + (1.0 - lam) * nom[j];
    Vec psi = feedforward_sum(g, combined) - tail[static_cast<std::size_t>(t)];
    const double c = psi.dot(g.H * psi);
    w.contributions.push_back(c);
    w.total += c;
    w.psi.push_back(std::move(psi));
  }
  return w;
}

RegretIdentityCheck regret_identity_check(const LqcGains& g, double lambda, const PredictionBundle& bundle,
                                          const Vec& x0) {
  const std::vector<double> lambdas(static_cast<std::size_t>(bundle.horizon()), lambda);
  return regret_identity_check(g, lambdas, bundle, x0);
}

RegretIdentityCheck regret_identity_check(const LqcGains& g, std::span<const double> lambdas,
                                          const PredictionBundle& bundle, const Vec& x0) {
  const int T = bundle.horizon();
  if (static_cast<int>(lambdas.size()) != T) throw DimensionMismatch("one lambda per step is required");
  std::vector<Vec> states{x0};
  std::vector<Vec> inputs;
  for (int t = 0; t < T; ++t) {
    const double lam = lambdas[static_cast<std::size_t>(t)];
    const auto pred = bundle.predictions(t);
    const auto nom = bundle.nominals(t);
    std::vector<Vec> combined(pred.size());
    for (std::size_t j = 0; j < pred.size(); ++j) combined[j] = lam * pred[j] + (1.0 - lam) * nom[j];
    Vec u = lqc_receding_action(g, states.back(), combined);
    states.push_back(g.A * states.back() + g.B * u + bundle.truth(t));
    inputs.push_back(std::move(u));
  }
  RegretIdentityCheck out;
  out.policy_cost = lqc_trajectory_cost(g, states, inputs);
  out.optimal_cost = clairvoyant_optimal_lqc(g, x0, bundle.truth()).total_cost;
  out.regret = out.policy_cost - out.optimal_cost;
  out.witness = regret_witness(g, bundle, lambdas);
  const double scale = std::max({1.0, std::abs(out.regret), out.witness.total});
  out.relative_residual = std::abs(out.regret - out.witness.total) / scale;
  return out;
}

double j_star_lower_bound_constant(const LqcGains& g) {
  const double rho = g.decay_rate;
  const double c = std::min({min_eig(g.P), min_eig(g.R) / op_norm(g.B), min_eig(g.Q) / std::max(2.0, op_norm(g.A))});
  return 0.5 * (1.0 - rho) * (1.0 - rho) * std::max(c, 0.0);
}

double j_star_lower_bound(const LqcGains& g, std::span<const Vec> truth) {
  const double rho = g.decay_rate;
  double s = 0.0;
  double total = 0.0;
  for (auto it = truth.rbegin(); it != truth.rend(); ++it) {
    s = it->norm() + rho * s;
    total += s * s;
  }
  return j_star_lower_bound_constant(g) * total;
}

int adversity(std::span<const Vec> truth) {
  return static_cast<int>(std::count_if(truth.begin(), truth.end(), [](const Vec& v) { return v.norm() > 0.0; }));
}

}  // namespace lac
