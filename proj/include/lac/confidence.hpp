#pragma once

#include "lac/model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace lac {

/// Per-step surrogate loss built from the window issued at `index`:
/// xi(lambda) = (sum_j rho(j) ||lambda eps_j + (1 - lambda) eps_bar_j||)^2.
struct SurrogateLoss {
  int index = 0;
  std::vector<double> weights;  // rho(0..len-1)
  std::vector<Vec> eps;         // truth - prediction
  std::vector<Vec> eps_bar;     // truth - nominal

  int length() const { return static_cast<int>(eps.size()); }
};

double xi(const SurrogateLoss& loss, double lambda);
/// Analytic derivative in lambda; zero-norm terms contribute 0.
double xi_grad(const SurrogateLoss& loss, double lambda);

/// Hindsight construction from the full bundle.
SurrogateLoss make_surrogate(const PredictionBundle& bundle, int t, std::span<const double> weights);
/// Online construction through the reveal guard: needs truth up to window_end(t).
SurrogateLoss make_surrogate(const Observation& obs, int t, std::span<const double> weights);

/// Delayed projected gradient on lambda. At step t >= k the loss issued at
/// t - k is the newest one whose truth is fully revealed; the update
/// lambda_t = clamp(lambda_{t-k} - beta * xi'_{t-k}(lambda_{t-k}), 0, 1)
/// runs k interleaved gradient sequences, one per residue class of t mod k.
class DelayedConfidenceLearner {
 public:
  DelayedConfidenceLearner(int delay, double step_size, double initial_lambda = 0.5);

  int delay() const { return delay_; }
  double step_size() const { return step_size_; }
  /// Index of the next step to be produced.
  int next_index() const { return static_cast<int>(history_.size()); }

  /// Produces lambda_t for t = next_index(). For t < k the loss must be empty;
  /// otherwise it must carry index t - k. Throws OutOfOrderFeedback.
  double advance(const SurrogateLoss* loss);

  const std::vector<double>& history() const { return history_; }
  const std::vector<double>& gradients() const { return gradients_; }  // NaN during initialization

 private:
  int delay_;
  double step_size_;
  double initial_;
  std::vector<double> history_;
  std::vector<double> gradients_;
};

/// Follow-the-leader confidence: the clamped least-squares combination weight
/// over every revealed (eps, eps_bar) pair seen so far.
class FtlSelfTuning {
 public:
  explicit FtlSelfTuning(double initial_lambda = 0.5) : lambda_(initial_lambda) {}

  void add_pair(const Vec& eps, const Vec& eps_bar);
  void add_window(const SurrogateLoss& loss);
  /// Closed-form minimizer; keeps the previous value when every pair has eps == eps_bar.
  double lambda();

  double numerator() const { return num_; }
  double denominator() const { return den_; }

 private:
  double num_ = 0.0;
  double den_ = 0.0;
  double lambda_;
};

struct LambdaStar {
  double lambda = 0.0;
  double value = 0.0;
};

double cumulative_xi(std::span<const SurrogateLoss> losses, double lambda);
/// Golden-section minimization of sum_t xi_t over [0, 1] to 1e-6, with endpoint checks.
LambdaStar lambda_star(std::span<const SurrogateLoss> losses);

struct GramVarpi {
  double value = 0.0;
  bool degenerate = false;
};

/// (||e||^2 ||b||^2 - <e,b>^2) / ||e - b||^2 = min over real lambda of ||lambda e + (1 - lambda) b||^2.
GramVarpi varpi_gram(const Vec& e, const Vec& b);

struct RhoNorms {
  double eps_sq = 0.0;      // sum_t (sum_j rho(j) ||eps||)^2
  double eps_bar_sq = 0.0;  // same for eps_bar
};
RhoNorms rho_norms(std::span<const SurrogateLoss> losses);
/// a b / (a + b) with a, b the squared rho-norms of the two error streams (0 if both vanish).
double varpi_rho(std::span<const SurrogateLoss> losses);

struct DclRegret {
  double regret = 0.0;
  double bound = 0.0;
  LambdaStar best;
};

/// sum_t xi_t(lambda_t) - min_lambda sum_t xi_t(lambda), and 4 C^2 gamma^2 sqrt(T k + k^2)
/// with C = sum_j rho(j).
DclRegret dcl_regret(std::span<const SurrogateLoss> losses, std::span<const double> lambdas,
                     std::span<const double> weights, double gamma, int delay);

/// 2 C^2 gamma^2.
double gradient_bound(std::span<const double> weights, double gamma);
/// 1 / (2 G sqrt(T / k + 1)) with G = gradient_bound.
double theory_step_size(std::span<const double> weights, double gamma, int horizon, int delay);

}  // namespace lac
