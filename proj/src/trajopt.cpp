#include "lac/trajopt.hpp"

#include "lac/errors.hpp"
#include "lac/random.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

namespace lac {

namespace {

using Controls = std::vector<Vec>;

void check_problem(const MpcProblem& p) {
  if (p.system == nullptr) throw std::invalid_argument("MPC problem has no system");
  if (p.params.empty()) throw std::invalid_argument("window must be >= 1");
  if (p.start_state.size() != p.system->state_dim) throw DimensionMismatch("start state dimension mismatch");
  if (!p.start_state.allFinite()) throw NonFinite("start state is not finite");
  for (const Vec& phi : p.params) {
    if (phi.size() != p.system->param_dim) throw DimensionMismatch("parameter dimension mismatch");
  }
}

Controls clamp_controls(const SystemModel& sys, Controls u) {
  if (sys.input_box) {
    for (Vec& v : u) v = sys.input_box->clamp(v);
  }
  return u;
}

double dot(const Controls& a, const Controls& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

double sq_norm(const Controls& a) { return dot(a, a); }

Controls axpy(const Controls& x, double alpha, const Controls& d) {
  Controls out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + alpha * d[i];
  return out;
}

Controls diff(const Controls& a, const Controls& b) { return axpy(a, -1.0, b); }

double projected_gradient_norm(const SystemModel& sys, const Controls& u, const Controls& g) {
  return std::sqrt(sq_norm(diff(u, clamp_controls(sys, axpy(u, -1.0, g)))));
}

// Positive-part residuals of the box constraint, signed so that d(residual)/dx is +-1.
void box_penalty(const Box& box, const Vec& x, double w, double& penalty, double& violation, Vec* grad) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = x[i] - box.upper[i];
    const double lo = box.lower[i] - x[i];
    if (hi > 0.0) {
      penalty += w * hi * hi;
      violation = std::max(violation, hi);
      if (grad) (*grad)[i] += 2.0 * w * hi;
    } else if (lo > 0.0) {
      penalty += w * lo * lo;
      violation = std::max(violation, lo);
      if (grad) (*grad)[i] -= 2.0 * w * lo;
    }
  }
}

struct Candidate {
  Controls controls;
  ShootingEvaluation eval;
  double gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
};

struct LevelResult {
  Controls u;
  ShootingEvaluation eval;
  double pg_norm = 0.0;
  int iterations = 0;
  bool stalled = false;  // no step length gave sufficient decrease
};

// Spectral projected gradient: Barzilai-Borwein steps with a nonmonotone Armijo test
// against the worst of the last few objective values, so progress continues once
// per-step decreases fall below the objective's rounding level.
LevelResult minimize_level(const MpcProblem& prob, Controls u, double weight, const SolverOptions& opt, int start_id,
                           int level_id) {
  const SystemModel& sys = *prob.system;
  LevelResult r;
  r.u = clamp_controls(sys, std::move(u));
  r.eval = evaluate_shooting(prob, r.u, weight, true);
  if (!std::isfinite(r.eval.objective + r.eval.penalty)) throw NonFinite("shooting rollout produced non-finite values");
  double alpha = 1.0 / std::max(1.0, std::sqrt(sq_norm(r.eval.gradient)));
  Controls prev_u, prev_g;
  constexpr std::size_t kMemory = 10;
  std::deque<double> recent{r.eval.objective + r.eval.penalty};
  for (int it = 0; it < opt.max_iterations; ++it) {
    r.pg_norm = projected_gradient_norm(sys, r.u, r.eval.gradient);
    if (r.pg_norm < opt.gradient_tolerance) break;
    if (!prev_u.empty()) {
      const Controls s = diff(r.u, prev_u);
      const Controls y = diff(r.eval.gradient, prev_g);
      const double sy = dot(s, y);
      if (sy > 0.0) alpha = std::clamp(sq_norm(s) / sy, 1e-12, 1e12);
    }
    const double f0 = *std::max_element(recent.begin(), recent.end());
    bool accepted = false;
    double step = alpha;
    for (int bt = 0; bt < 60; ++bt) {
      Controls trial = clamp_controls(sys, axpy(r.u, -step, r.eval.gradient));
      const double moved = sq_norm(diff(trial, r.u));
      if (moved == 0.0) break;
      ShootingEvaluation e = evaluate_shooting(prob, trial, weight, true);
      const double f1 = e.objective + e.penalty;
      if (std::isfinite(f1) && f1 <= f0 - 1e-4 / step * moved) {
        prev_u = std::move(r.u);
        prev_g = std::move(r.eval.gradient);
        r.u = std::move(trial);
        r.eval = std::move(e);
        recent.push_back(f1);
        if (recent.size() > kMemory) recent.pop_front();
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++r.iterations;
    if (opt.trace) {
      *opt.trace << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}\n", start_id, level_id, it,
                                r.eval.objective + r.eval.penalty, r.eval.violation, step);
    }
    if (!accepted) {
      r.stalled = true;
      break;
    }
  }
  r.pg_norm = projected_gradient_norm(sys, r.u, r.eval.gradient);
  return r;
}

Candidate solve_from(const MpcProblem& prob, Controls start, const SolverOptions& opt, int start_id) {
  Candidate c;
  Controls u = std::move(start);
  int level = 0;
  for (double w = opt.penalty_start;; w *= opt.penalty_growth, ++level) {
    LevelResult r = minimize_level(prob, std::move(u), w, opt, start_id, level);
    c.iterations += r.iterations;
    u = r.u;
    c.controls = r.u;
    c.eval = r.eval;
    c.gradient_norm = r.pg_norm;
    c.stalled = r.stalled;
    const bool last = w * opt.penalty_growth > opt.penalty_max * (1.0 + 1e-12);
    if (r.eval.violation < opt.violation_tolerance || last) break;
  }
  const bool stationary =
      c.gradient_norm < opt.gradient_tolerance || (c.stalled && c.gradient_norm < opt.stall_tolerance);
  c.converged = stationary && c.eval.violation < opt.violation_tolerance;
  return c;
}

double controls_norm(const Controls& u) { return std::sqrt(sq_norm(u)); }

// Feasible candidates first, then lower objective, then lower violation, then smaller controls.
bool better(const Candidate& a, const Candidate& b, double tol) {
  const bool fa = a.eval.violation < tol, fb = b.eval.violation < tol;
  if (fa != fb) return fa;
  const double scale = std::max({1.0, std::abs(a.eval.objective), std::abs(b.eval.objective)});
  if (std::abs(a.eval.objective - b.eval.objective) > 1e-12 * scale) return a.eval.objective < b.eval.objective;
  if (a.eval.violation != b.eval.violation) return a.eval.violation < b.eval.violation;
  return controls_norm(a.controls) < controls_norm(b.controls);
}

}  // namespace

ShootingEvaluation evaluate_shooting(const MpcProblem& prob, const std::vector<Vec>& u, double w, bool with_gradient) {
  const SystemModel& sys = *prob.system;
  const std::size_t N = prob.params.size();
  if (u.size() != N) throw DimensionMismatch("control sequence length must equal the window");

  ShootingEvaluation ev;
  ev.states.reserve(N + 1);
  ev.states.push_back(prob.start_state);
  std::vector<Vec> gx_pen(N + 1, Vec::Zero(sys.state_dim));
  std::vector<Vec> gu_pen(N, Vec::Zero(sys.input_dim));
  std::vector<Vec> h_vals(N);

  for (std::size_t i = 0; i < N; ++i) {
    const int tau = prob.start_time + static_cast<int>(i);
    const Vec& x = ev.states[i];
    ev.objective += sys.stage_cost(x, u[i], prob.params[i], tau);
    if (sys.path_constraint) {
      h_vals[i] = sys.path_constraint(x, u[i], prob.params[i], tau);
      for (Eigen::Index j = 0; j < h_vals[i].size(); ++j) {
        const double v = h_vals[i][j];
        if (v > 0.0) {
          ev.penalty += w * v * v;
          ev.violation = std::max(ev.violation, v);
        }
      }
    }
    Vec next = sys.dynamics(x, u[i], prob.params[i], tau);
    if (!next.allFinite()) throw NonFinite(fmt::format("rollout produced a non-finite state at offset {}", i + 1));
    if (sys.state_box) box_penalty(*sys.state_box, next, w, ev.penalty, ev.violation, with_gradient ? &gx_pen[i + 1] : nullptr);
    ev.states.push_back(std::move(next));
  }
  ev.objective += sys.terminal_cost(ev.states.back(), prob.params.back());
  ev.states.erase(ev.states.begin());
  if (!with_gradient) return ev;

  // Adjoint sweep; lam holds d(total)/d(x_{i+1}).
  const auto state_at = [&](std::size_t i) -> const Vec& { return i == 0 ? prob.start_state : ev.states[i - 1]; };
  Vec lam = sys.terminal_cost_gradient(ev.states.back(), prob.params.back()) + gx_pen[N];
  ev.gradient.assign(N, Vec());
  Mat fx, fu, hx, hu;
  Vec gx, gu;
  for (std::size_t i = N; i-- > 0;) {
    const int tau = prob.start_time + static_cast<int>(i);
    const Vec& x = state_at(i);
    sys.dynamics_jacobian(x, u[i], prob.params[i], tau, fx, fu);
    sys.stage_cost_gradient(x, u[i], prob.params[i], tau, gx, gu);
    Vec grad_u = gu + fu.transpose() * lam;
    Vec grad_x = gx + fx.transpose() * lam + gx_pen[i];
    if (sys.path_constraint && h_vals[i].size() > 0) {
      sys.path_constraint_jacobian(x, u[i], prob.params[i], tau, hx, hu);
      const Vec active = (2.0 * w) * h_vals[i].cwiseMax(0.0);
      grad_u += hu.transpose() * active;
      grad_x += hx.transpose() * active;
    }
    ev.gradient[i] = std::move(grad_u);
    lam = std::move(grad_x);
  }
  return ev;
}

MpcSolution solve_mpc(const MpcProblem& prob, const SolverOptions& opt) {
  check_problem(prob);
  const SystemModel& sys = *prob.system;
  const std::size_t N = prob.params.size();

  std::vector<Controls> starts;
  starts.emplace_back(N, Vec::Zero(sys.input_dim));
  if (prob.warm_start && opt.starts >= 2) {
    Controls ws = *prob.warm_start;
    ws.resize(N, ws.empty() ? Vec::Zero(sys.input_dim) : Vec(ws.back()));
    for (Vec& v : ws) {
      if (v.size() != sys.input_dim) throw DimensionMismatch("warm start dimension mismatch");
    }
    starts.push_back(std::move(ws));
  }
  if (opt.starts >= 3 || (opt.starts >= 2 && !prob.warm_start)) {
    Rng rng = make_rng(opt.seed, "multistart", static_cast<std::uint64_t>(prob.start_time));
    std::normal_distribution<double> normal(0.0, opt.random_start_scale);
    Controls r(N, Vec::Zero(sys.input_dim));
    for (Vec& v : r) {
      for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
    }
    starts.push_back(std::move(r));
  }

  Candidate best;
  bool have = false;
  std::string failure;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    Candidate c;
    try {
      c = solve_from(prob, std::move(starts[s]), opt, static_cast<int>(s));
    } catch (const NonFinite& e) {
      failure = e.what();  // a diverging start is dropped; the others may still succeed
      continue;
    }
    if (!have || better(c, best, opt.violation_tolerance)) {
      const int total = c.iterations + (have ? best.iterations : 0);
      best = std::move(c);
      best.iterations = total;
      have = true;
    } else {
      best.iterations += c.iterations;
    }
  }

  if (!have) throw NonFinite(failure);

  MpcSolution sol;
  sol.controls = std::move(best.controls);
  sol.states = std::move(best.eval.states);
  sol.objective = best.eval.objective;
  sol.violation = best.eval.violation;
  sol.gradient_norm = best.gradient_norm;
  sol.converged = best.converged;
  sol.stalled = best.stalled;
  sol.iterations = best.iterations;
  return sol;
}

FeasibilityReport feasibility_check(const SystemModel& sys, const Vec& x, const Vec& u, const Vec& phi, int t,
                                    double tolerance) {
  FeasibilityReport rep;
  auto note = [&](double v, const char* what) {
    if (v > rep.worst_violation) {
      rep.worst_violation = v;
      rep.worst_constraint = what;
    }
  };
  if (sys.path_constraint) {
    const Vec h = sys.path_constraint(x, u, phi, t);
    if (h.size() > 0) note(h.maxCoeff(), "path");
  }
  if (sys.state_box) note(sys.state_box->violation(x), "state");
  if (sys.input_box) note(sys.input_box->violation(u), "input");
  const Vec next = sys.dynamics(x, u, phi, t);
  if (!next.allFinite()) {
    rep.feasible = false;
    rep.worst_violation = std::numeric_limits<double>::infinity();
    rep.worst_constraint = "next_state";
    return rep;
  }
  if (sys.state_box) note(sys.state_box->violation(next), "next_state");
  rep.feasible = rep.worst_violation <= tolerance;
  return rep;
}

EdpbTable estimate_edpb(const FirstActionMap& action, const SystemModel& sys, int window, int offsets, int trials,
                        std::uint64_t seed, double perturbation) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (window < 1 || offsets < 1) throw std::invalid_argument("window and offsets must be >= 1");
  Rng rng = make_rng(seed, "edpb");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto random_direction = [&](int d) {
    Vec v(d);
    do {
      for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
    } while (v.norm() == 0.0);
    return Vec(v.normalized());
  };
  const double radius = sys.uncertainty.radius();

  EdpbTable table;
  table.raw.assign(static_cast<std::size_t>(offsets), 0.0);
  for (int trial = 0; trial < trials; ++trial) {
    Vec x(sys.state_dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double half = sys.state_box ? 0.5 * std::min(std::abs(sys.state_box->lower[i]), sys.state_box->upper[i]) : 1.0;
      x[i] = half * unit(rng);
    }
    std::vector<Vec> params(static_cast<std::size_t>(window));
    for (Vec& p : params) p = sys.uncertainty.project(0.5 * radius * std::abs(unit(rng)) * random_direction(sys.param_dim));
    const Vec base = action(x, 0, params);
    for (int j = 0; j < std::min(offsets, window); ++j) {
      std::vector<Vec> moved = params;
      const Vec delta = perturbation * random_direction(sys.param_dim);
      moved[static_cast<std::size_t>(j)] += delta;
      const double ratio = (action(x, 0, moved) - base).norm() / delta.norm();
      table.raw[static_cast<std::size_t>(j)] = std::max(table.raw[static_cast<std::size_t>(j)], ratio);
    }
    // Offsets at or past the window index no parameter slot, so their effect is identically zero.
  }
  table.envelope = table.raw;
  for (int j = offsets - 2; j >= 0; --j) {
    table.envelope[static_cast<std::size_t>(j)] =
        std::max(table.envelope[static_cast<std::size_t>(j)], table.envelope[static_cast<std::size_t>(j) + 1]);
  }
  return table;
}

EdpbTable estimate_edpb(const LqcGains& gains, const SystemModel& sys, int window, int offsets, int trials,
                        std::uint64_t seed) {
  FirstActionMap action = [&gains](const Vec& x, int, const std::vector<Vec>& params) {
    return lqc_receding_action(gains, x, params);
  };
  return estimate_edpb(action, sys, window, offsets, trials, seed);
}

EdpbTable estimate_edpb(const SystemModel& sys, int window, int trials, std::uint64_t seed,
                        const SolverOptions& options) {
  FirstActionMap action = [&sys, &options](const Vec& x, int t, const std::vector<Vec>& params) {
    MpcProblem p{&sys, x, t, params, std::nullopt};
    return Vec(solve_mpc(p, options).controls.front());
  };
  return estimate_edpb(action, sys, window, window, trials, seed);
}

namespace {

struct ActiveSet {
  // Each entry maps to (offset, component, sign, kind): kind 0 state box on x_{offset+1},
  // 1 input box on u_offset, 2 path constraint at offset.
  struct Row {
    int offset;
    int component;
    double sign;
    int kind;
  };
  std::vector<Row> rows;
};

ActiveSet find_active(const MpcProblem& prob, const MpcSolution& sol, double tol) {
  const SystemModel& sys = *prob.system;
  ActiveSet a;
  const int N = static_cast<int>(prob.params.size());
  for (int i = 0; i < N; ++i) {
    if (sys.state_box) {
      const Vec& x = sol.states[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < x.size(); ++c) {
        if (x[c] >= sys.state_box->upper[c] - tol) a.rows.push_back({i, static_cast<int>(c), 1.0, 0});
        else if (x[c] <= sys.state_box->lower[c] + tol) a.rows.push_back({i, static_cast<int>(c), -1.0, 0});
      }
    }
    if (sys.input_box) {
      const Vec& u = sol.controls[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < u.size(); ++c) {
        if (u[c] >= sys.input_box->upper[c] - tol) a.rows.push_back({i, static_cast<int>(c), 1.0, 1});
        else if (u[c] <= sys.input_box->lower[c] + tol) a.rows.push_back({i, static_cast<int>(c), -1.0, 1});
      }
    }
    if (sys.path_constraint) {
      const Vec& x = i == 0 ? prob.start_state : sol.states[static_cast<std::size_t>(i) - 1];
      const Vec h = sys.path_constraint(x, sol.controls[static_cast<std::size_t>(i)], prob.params[static_cast<std::size_t>(i)],
                                        prob.start_time + i);
      for (Eigen::Index c = 0; c < h.size(); ++c) {
        if (h[c] >= -tol) a.rows.push_back({i, static_cast<int>(c), 1.0, 2});
      }
    }
  }
  return a;
}

}  // namespace

RegularityDiagnostics regularity_probe(const MpcProblem& prob, const MpcSolution& sol, double active_tolerance) {
  check_problem(prob);
  const SystemModel& sys = *prob.system;
  const int N = static_cast<int>(prob.params.size());
  const int n = sys.state_dim, m = sys.input_dim;
  const ActiveSet active = find_active(prob, sol, active_tolerance);

  RegularityDiagnostics d;
  d.dynamics_rows = N * n;
  d.active_rows = static_cast<int>(active.rows.size());

  // Full-space Jacobian over p = (u_0..u_{N-1}, x_1..x_N).
  const int cols = N * m + N * n;
  Mat J = Mat::Zero(d.dynamics_rows + d.active_rows, cols);
  Mat fx, fu, hx, hu;
  for (int i = 0; i < N; ++i) {
    const Vec& x = i == 0 ? prob.start_state : sol.states[static_cast<std::size_t>(i) - 1];
    const Vec& u = sol.controls[static_cast<std::size_t>(i)];
    sys.dynamics_jacobian(x, u, prob.params[static_cast<std::size_t>(i)], prob.start_time + i, fx, fu);
    // x_{i+1} - f(x_i, u_i) = 0
    J.block(i * n, N * m + i * n, n, n) = Mat::Identity(n, n);
    J.block(i * n, i * m, n, m) = -fu;
    if (i > 0) J.block(i * n, N * m + (i - 1) * n, n, n) = -fx;
  }
  for (std::size_t r = 0; r < active.rows.size(); ++r) {
    const auto& row = active.rows[r];
    const int rr = d.dynamics_rows + static_cast<int>(r);
    if (row.kind == 0) {
      J(rr, N * m + row.offset * n + row.component) = row.sign;
    } else if (row.kind == 1) {
      J(rr, row.offset * m + row.component) = row.sign;
    } else {
      const Vec& x = row.offset == 0 ? prob.start_state : sol.states[static_cast<std::size_t>(row.offset) - 1];
      sys.path_constraint_jacobian(x, sol.controls[static_cast<std::size_t>(row.offset)],
                                   prob.params[static_cast<std::size_t>(row.offset)], prob.start_time + row.offset, hx, hu);
      J.block(rr, row.offset * m, 1, m) = hu.row(row.component);
      if (row.offset > 0) J.block(rr, N * m + (row.offset - 1) * n, 1, n) = hx.row(row.component);
    }
  }
  {
    Eigen::JacobiSVD<Mat> svd(J);
    const auto& s = svd.singularValues();
    d.min_singular_value = s.size() > 0 ? s(s.size() - 1) : 0.0;
    if (J.rows() > J.cols()) d.min_singular_value = 0.0;  // more rows than unknowns cannot be independent
  }

  // Reduced space: controls only, dynamics eliminated by the rollout.
  const int dim = N * m;
  auto flatten = [&](const std::vector<Vec>& u) {
    Vec z(dim);
    for (int i = 0; i < N; ++i) z.segment(i * m, m) = u[static_cast<std::size_t>(i)];
    return z;
  };
  auto unflatten = [&](const Vec& z) {
    std::vector<Vec> u(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) u[static_cast<std::size_t>(i)] = z.segment(i * m, m);
    return u;
  };
  auto constraints = [&](const Vec& z) {
    const std::vector<Vec> u = unflatten(z);
    const ShootingEvaluation ev = evaluate_shooting(prob, u, 0.0, false);
    Vec g(d.active_rows);
    for (int r = 0; r < d.active_rows; ++r) {
      const auto& row = active.rows[static_cast<std::size_t>(r)];
      if (row.kind == 0) {
        g[r] = row.sign * ev.states[static_cast<std::size_t>(row.offset)][row.component];
      } else if (row.kind == 1) {
        g[r] = row.sign * u[static_cast<std::size_t>(row.offset)][row.component];
      } else {
        const Vec& x = row.offset == 0 ? prob.start_state : ev.states[static_cast<std::size_t>(row.offset) - 1];
        g[r] = sys.path_constraint(x, u[static_cast<std::size_t>(row.offset)], prob.params[static_cast<std::size_t>(row.offset)],
                                   prob.start_time + row.offset)[row.component];
      }
    }
    return g;
  };
  const Vec z0 = flatten(sol.controls);
  const double h1 = 1e-6;
  Mat G(d.active_rows, dim);
  for (int j = 0; j < dim; ++j) {
    Vec zp = z0, zm = z0;
    zp[j] += h1;
    zm[j] -= h1;
    G.col(j) = (constraints(zp) - constraints(zm)) / (2.0 * h1);
  }
  const Vec grad = flatten(evaluate_shooting(prob, sol.controls, 0.0, true).gradient);
  Vec mu = Vec::Zero(d.active_rows);
  if (d.active_rows > 0) mu = G.transpose().completeOrthogonalDecomposition().solve(-grad);

  auto lagrangian = [&](const Vec& z) {
    double L = evaluate_shooting(prob, unflatten(z), 0.0, false).objective;
    if (d.active_rows > 0) L += mu.dot(constraints(z));
    return L;
  };
  const double h2 = 1e-4;
  Mat Hs(dim, dim);
  const double L0 = lagrangian(z0);
  for (int a = 0; a < dim; ++a) {
    for (int b = a; b < dim; ++b) {
      double v;
      if (a == b) {
        Vec zp = z0, zm = z0;
        zp[a] += h2;
        zm[a] -= h2;
        v = (lagrangian(zp) - 2.0 * L0 + lagrangian(zm)) / (h2 * h2);
      } else {
        Vec zpp = z0, zpm = z0, zmp = z0, zmm = z0;
        zpp[a] += h2, zpp[b] += h2;
        zpm[a] += h2, zpm[b] -= h2;
        zmp[a] -= h2, zmp[b] += h2;
        zmm[a] -= h2, zmm[b] -= h2;
        v = (lagrangian(zpp) - lagrangian(zpm) - lagrangian(zmp) + lagrangian(zmm)) / (4.0 * h2 * h2);
      }
      Hs(a, b) = Hs(b, a) = v;
    }
  }
  Mat Z;
  if (d.active_rows == 0) {
    Z = Mat::Identity(dim, dim);
  } else {
    Eigen::FullPivLU<Mat> lu(G);
    Z = lu.kernel();
    if (lu.rank() == dim) Z.resize(dim, 0);
  }
  if (Z.cols() == 0) {
    d.min_reduced_hessian_eig = std::numeric_limits<double>::infinity();
  } else {
    Eigen::HouseholderQR<Mat> qr(Z);
    const Mat basis = qr.householderQ() * Mat::Identity(dim, Z.cols());
    d.min_reduced_hessian_eig = Eigen::SelfAdjointEigenSolver<Mat>(basis.transpose() * Hs * basis).eigenvalues().minCoeff();
  }
  return d;
}

}  // namespace lac
