#pragma once

#include "lac/model.hpp"
#include "lac/lqc.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lac {

struct SolverOptions {
  double penalty_start = 1e2;
  double penalty_growth = 10.0;
  double penalty_max = 1e8;
  int max_iterations = 3000;  // per penalty level
  double gradient_tolerance = 1e-8;
  // Accepted when the line search stalls: nonsmooth dynamics (the arm's exp(-|x|) at x = 0)
  // leave a one-sided gradient that never vanishes at a kink minimizer.
  double stall_tolerance = 1e-3;
  double violation_tolerance = 1e-6;
  int starts = 3;
  double random_start_scale = 0.1;
  std::uint64_t seed = 0;
  std::ostream* trace = nullptr;  // CSV: start,level,iteration,objective,violation,step
};

/// One receding-horizon problem: minimize the stage costs over the window plus
/// the terminal cost, subject to the rolled-out dynamics and the boxes.
struct MpcProblem {
  const SystemModel* system = nullptr;
  Vec start_state;
  int start_time = 0;
  std::vector<Vec> params;  // already lambda-combined, one per window step
  std::optional<std::vector<Vec>> warm_start;
};

struct MpcSolution {
  std::vector<Vec> controls;
  std::vector<Vec> states;  // x_{t+1} .. x_{t'}
  double objective = 0.0;
  double violation = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool stalled = false;
  int iterations = 0;
};

struct ShootingEvaluation {
  double objective = 0.0;  // unpenalized
  double penalty = 0.0;    // weight * sum of squared positive violations
  double violation = 0.0;  // max positive violation over states and path constraints
  std::vector<Vec> states;    // x_1 .. x_N
  std::vector<Vec> gradient;  // of objective + penalty w.r.t. controls
};

/// Rolls out the dynamics and, when requested, back-propagates the penalized
/// objective gradient through the rollout (adjoint recursion).
ShootingEvaluation evaluate_shooting(const MpcProblem& problem, const std::vector<Vec>& controls,
                                     double penalty_weight, bool with_gradient);

/// Projected gradient with backtracking, quadratic penalty escalation and
/// multi-start. Throws NonFinite on diverging rollouts.
MpcSolution solve_mpc(const MpcProblem& problem, const SolverOptions& options = {});

struct FeasibilityReport {
  bool feasible = true;
  double worst_violation = 0.0;
  std::string worst_constraint;  // "state", "next_state", "input", "path" or empty
};

FeasibilityReport feasibility_check(const SystemModel& system, const Vec& x, const Vec& u, const Vec& phi, int t,
                                    double tolerance = 1e-9);

/// Maps (start state, time, parameter window) to the first action.
using FirstActionMap = std::function<Vec(const Vec& x, int t, const std::vector<Vec>& params)>;

struct EdpbTable {
  std::vector<double> raw;       // max ||du|| / ||delta|| per offset
  std::vector<double> envelope;  // nonincreasing upper envelope of raw
};

/// Empirical sensitivity of the first action to a perturbation of the
/// parameter at each offset. Offsets at or beyond `window` are still probed
/// (they are unused by the window, so their effect is zero).
EdpbTable estimate_edpb(const FirstActionMap& action, const SystemModel& system, int window, int offsets,
                        int trials, std::uint64_t seed, double perturbation = 1e-3);
EdpbTable estimate_edpb(const LqcGains& gains, const SystemModel& system, int window, int offsets, int trials,
                        std::uint64_t seed);
EdpbTable estimate_edpb(const SystemModel& system, int window, int trials, std::uint64_t seed,
                        const SolverOptions& options = {});

struct RegularityDiagnostics {
  int dynamics_rows = 0;
  int active_rows = 0;
  double min_singular_value = 0.0;       // of the active-constraint Jacobian (full space)
  double min_reduced_hessian_eig = 0.0;  // shooting Lagrangian on the active null space
};

/// Numeric LICQ / second-order spot check at a solution. Advisory only.
RegularityDiagnostics regularity_probe(const MpcProblem& problem, const MpcSolution& solution,
                                       double active_tolerance = 1e-6);

}  // namespace lac
