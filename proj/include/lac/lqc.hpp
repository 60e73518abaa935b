#pragma once

#include "lac/model.hpp"

#include <span>
#include <vector>

namespace lac {

/// DARE solution and the derived feedback quantities for (A, B, Q, R).
struct LqcGains {
  Mat A, B, Q, R;
  Mat P;      // stabilizing DARE solution
  Mat K;      // (R + B'PB)^{-1} B'PA
  Mat F;      // A - BK
  Mat H;      // B (R + B'PB)^{-1} B'
  Mat S_inv;  // (R + B'PB)^{-1}
  double decay_scale = 1.0;  // C_F
  double decay_rate = 0.5;   // rho_F
  double riccati_residual = 0.0;
  int iterations = 0;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }

  /// C_F ||(R+B'PB)^{-1} B'|| ||P||: the per-offset action sensitivity scale.
  double sensitivity_scale() const;
  /// rho(j) = sensitivity_scale * rho_F^j for j < count.
  std::vector<double> sensitivity_weights(int count) const;
};

/// Frobenius norm of P - (Q + A'PA - A'PB(R+B'PB)^{-1}B'PA).
double riccati_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

/// Fixed-point Riccati iteration from P0 = Q. Throws NonConvergence after
/// max_iterations, std::invalid_argument for asymmetric Q or R. The decay
/// constants are fitted over [0, decay_horizon].
LqcGains solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, int decay_horizon = 200,
                    int max_iterations = 100000);

struct DecayConstants {
  double scale;  // C_F
  double rate;   // rho_F
};

double spectral_radius(const Mat& M);

/// rho_F = (1 + spectral_radius(F)) / 2 and C_F = max_{t<=T} ||F^t|| / rho_F^t.
/// Throws UnstableClosedLoop when spectral_radius(F) >= 1.
DecayConstants decay_constants(const Mat& F, int horizon);

/// sum_{j} (F')^j P params[j].
Vec feedforward_sum(const LqcGains& gains, std::span<const Vec> params);

/// Explicit receding-horizon LQ action -Kx - (R+B'PB)^{-1} B' sum_j (F')^j P phi_j.
/// No input clamping.
Vec lqc_receding_action(const LqcGains& gains, const Vec& x, std::span<const Vec> params);

struct LqcRollout {
  std::vector<Vec> states;  // T + 1
  std::vector<Vec> inputs;  // T
  std::vector<double> stage_costs;
  double terminal_cost = 0.0;
  double total_cost = 0.0;
};

/// Quadratic cost of a trajectory: sum x'Qx + u'Ru + x_T' P x_T.
double lqc_trajectory_cost(const LqcGains& gains, std::span<const Vec> states, std::span<const Vec> inputs);

/// Clairvoyant unconstrained optimum with full knowledge of truth.
LqcRollout clairvoyant_optimal_lqc(const LqcGains& gains, const Vec& x0, std::span<const Vec> truth);

/// Hindsight witness of the dynamic regret of a lambda-confident policy.
struct RegretWitness {
  std::vector<Vec> psi;
  std::vector<double> contributions;  // ||psi_t||_H^2
  double total = 0.0;
};

/// psi_t for lambda-confident control with combined parameters
/// lambda_t * pred + (1 - lambda_t) * nominal; lambdas has one entry per step.
RegretWitness regret_witness(const LqcGains& gains, const PredictionBundle& bundle, std::span<const double> lambdas);

struct RegretIdentityCheck {
  RegretWitness witness;
  double policy_cost = 0.0;
  double optimal_cost = 0.0;
  double regret = 0.0;              // policy_cost - optimal_cost
  double relative_residual = 0.0;   // |regret - witness.total| / max(1, |regret|, witness.total)
};

/// Simulates the unconstrained lambda-confident policy and compares its regret
/// to the witness sum.
RegretIdentityCheck regret_identity_check(const LqcGains& gains, double lambda, const PredictionBundle& bundle,
                                          const Vec& x0);
RegretIdentityCheck regret_identity_check(const LqcGains& gains, std::span<const double> lambdas,
                                          const PredictionBundle& bundle, const Vec& x0);

/// C_0 sum_t (sum_{tau>=t} rho_F^{tau-t} ||phi*_tau||)^2.
double j_star_lower_bound(const LqcGains& gains, std::span<const Vec> truth);
double j_star_lower_bound_constant(const LqcGains& gains);

/// Number of steps with a nonzero disturbance (exact zero test).
int adversity(std::span<const Vec> truth);

}  // namespace lac
