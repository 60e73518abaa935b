#include "lac/confidence.hpp"

#include "lac/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lac {

double xi(const SurrogateLoss& loss, double lambda) {
  double s = 0.0;
  for (int j = 0; j < loss.length(); ++j) {
    const auto i = static_cast<std::size_t>(j);
    s += loss.weights[i] * (lambda * loss.eps[i] + (1.0 - lambda) * loss.eps_bar[i]).norm();
  }
  return s * s;
}

double xi_grad(const SurrogateLoss& loss, double lambda) {
  double s = 0.0;
  double ds = 0.0;
  for (int j = 0; j < loss.length(); ++j) {
    const auto i = static_cast<std::size_t>(j);
    const Vec d = loss.eps[i] - loss.eps_bar[i];
    const Vec a = loss.eps_bar[i] + lambda * d;
    const double n = a.norm();
    s += loss.weights[i] * n;
    if (n > 0.0) ds += loss.weights[i] * a.dot(d) / n;
  }
  return 2.0 * s * ds;
}

namespace {

SurrogateLoss build(int t, int end, std::span<const double> weights, const std::function<const Vec&(int)>& truth,
                    std::span<const Vec> pred, std::span<const Vec> nom) {
  const int len = end - t + 1;
  if (static_cast<int>(weights.size()) < len) throw DimensionMismatch("fewer weights than window entries");
  SurrogateLoss loss;
  loss.index = t;
  loss.weights.assign(weights.begin(), weights.begin() + len);
  for (int j = 0; j < len; ++j) {
    const Vec& truth_j = truth(t + j);
    loss.eps.push_back(truth_j - pred[static_cast<std::size_t>(j)]);
    loss.eps_bar.push_back(truth_j - nom[static_cast<std::size_t>(j)]);
  }
  return loss;
}

}  // namespace

SurrogateLoss make_surrogate(const PredictionBundle& bundle, int t, std::span<const double> weights) {
  return build(t, bundle.window_end(t), weights, [&](int i) -> const Vec& { return bundle.truth(i); },
               bundle.predictions(t), bundle.nominals(t));
}

SurrogateLoss make_surrogate(const Observation& obs, int t, std::span<const double> weights) {
  return build(t, obs.window_end(t), weights, [&](int i) -> const Vec& { return obs.revealed_truth(i); },
               obs.past_predictions(t), obs.past_nominals(t));
}

DelayedConfidenceLearner::DelayedConfidenceLearner(int delay, double step_size, double initial_lambda)
    : delay_(delay), step_size_(step_size), initial_(initial_lambda) {
  if (delay < 1) throw std::invalid_argument("window must be >= 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(initial_lambda >= 0.0 && initial_lambda <= 1.0)) throw std::invalid_argument("initial lambda must lie in [0, 1]");
}

double DelayedConfidenceLearner::advance(const SurrogateLoss* loss) {
  const int t = next_index();
  if (t < delay_) {
    if (loss != nullptr) throw OutOfOrderFeedback(fmt::format("no feedback is due at step {}", t));
    history_.push_back(initial_);
    gradients_.push_back(std::numeric_limits<double>::quiet_NaN());
    return initial_;
  }
  if (loss == nullptr) throw OutOfOrderFeedback(fmt::format("step {} requires the loss issued at {}", t, t - delay_));
  if (loss->index != t - delay_) {
    throw OutOfOrderFeedback(fmt::format("step {} expected the loss issued at {}, got {}", t, t - delay_, loss->index));
  }
  const double prev = history_[static_cast<std::size_t>(t - delay_)];
  const double g = xi_grad(*loss, prev);
  const double next = std::clamp(prev - step_size_ * g, 0.0, 1.0);
  history_.push_back(next);
  gradients_.push_back(g);
  return next;
}

void FtlSelfTuning::add_pair(const Vec& eps, const Vec& eps_bar) {
  const Vec d = eps_bar - eps;
  num_ += eps_bar.dot(d);
  den_ += d.squaredNorm();
}

void FtlSelfTuning::add_window(const SurrogateLoss& loss) {
  for (int j = 0; j < loss.length(); ++j) {
    add_pair(loss.eps[static_cast<std::size_t>(j)], loss.eps_bar[static_cast<std::size_t>(j)]);
  }
}

double FtlSelfTuning::lambda() {
  if (den_ > 0.0) lambda_ = std::clamp(num_ / den_, 0.0, 1.0);
  return lambda_;
}

double cumulative_xi(std::span<const SurrogateLoss> losses, double lambda) {
  double s = 0.0;
  for (const auto& l : losses) s += xi(l, lambda);
  return s;
}

LambdaStar lambda_star(std::span<const SurrogateLoss> losses) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = 1.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = cumulative_xi(losses, c), fd = cumulative_xi(losses, d);
  while (b - a > 1e-6) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = cumulative_xi(losses, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = cumulative_xi(losses, d);
    }
  }
  LambdaStar best{0.5 * (a + b), cumulative_xi(losses, 0.5 * (a + b))};
  for (double edge : {0.0, 1.0}) {
    const double v = cumulative_xi(losses, edge);
    if (v <= best.value) best = {edge, v};
  }
  return best;
}

GramVarpi varpi_gram(const Vec& e, const Vec& b) {
  if (e.size() != b.size()) throw DimensionMismatch("varpi_gram: dimension mismatch");
  const double den = (e - b).squaredNorm();
  if (den == 0.0) return {0.0, true};
  const double ee = e.squaredNorm(), bb = b.squaredNorm(), eb = e.dot(b);
  return {std::max(0.0, (ee * bb - eb * eb) / den), false};
}

RhoNorms rho_norms(std::span<const SurrogateLoss> losses) {
  RhoNorms r;
  for (const auto& l : losses) {
    r.eps_sq += xi(l, 1.0);
    r.eps_bar_sq += xi(l, 0.0);
  }
  return r;
}

double varpi_rho(std::span<const SurrogateLoss> losses) {
  const RhoNorms r = rho_norms(losses);
  const double s = r.eps_sq + r.eps_bar_sq;
  return s > 0.0 ? r.eps_sq * r.eps_bar_sq / s : 0.0;
}

DclRegret dcl_regret(std::span<const SurrogateLoss> losses, std::span<const double> lambdas,
                     std::span<const double> weights, double gamma, int delay) {
  if (lambdas.size() != losses.size()) throw DimensionMismatch("one lambda per loss is required");
  DclRegret out;
  out.best = lambda_star(losses);
  double played = 0.0;
  for (std::size_t t = 0; t < losses.size(); ++t) played += xi(losses[t], lambdas[t]);
  out.regret = played - out.best.value;
  const double C = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double T = static_cast<double>(losses.size());
  const double k = static_cast<double>(delay);
  out.bound = 4.0 * C * C * gamma * gamma * std::sqrt(T * k + k * k);
  return out;
}

double gradient_bound(std::span<const double> weights, double gamma) {
  const double C = std::accumulate(weights.begin(), weights.end(), 0.0);
  return 2.0 * C * C * gamma * gamma;
}

double theory_step_size(std::span<const double> weights, double gamma, int horizon, int delay) {
  const double G = gradient_bound(weights, gamma);
  if (!(G > 0.0)) throw std::invalid_argument("gradient bound must be positive");
  return 1.0 / (2.0 * G * std::sqrt(static_cast<double>(horizon) / delay + 1.0));
}

}  // namespace lac
