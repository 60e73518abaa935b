#include "lac/confidence.hpp"
#include "lac/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lac;

namespace {

SurrogateLoss make_loss(int index, std::vector<double> w, std::vector<Vec> eps, std::vector<Vec> eps_bar) {
  SurrogateLoss l;
  l.index = index;
  l.weights = std::move(w);
  l.eps = std::move(eps);
  l.eps_bar = std::move(eps_bar);
  return l;
}

SurrogateLoss random_loss(int index, int length, int dim, std::mt19937_64& rng, double radius = 0.0) {
  SurrogateLoss l;
  l.index = index;
  for (int j = 0; j < length; ++j) {
    l.weights.push_back(std::pow(0.6, j));
    Vec e = oracle::gaussian_vec(dim, rng);
    Vec b = oracle::gaussian_vec(dim, rng);
    if (radius > 0.0) {
      // Differences of two points in a ball of the given radius.
      auto in_ball = [&](Vec v) { return v.norm() > radius ? Vec(v * (radius / v.norm())) : v; };
      e = in_ball(oracle::gaussian_vec(dim, rng)) - in_ball(oracle::gaussian_vec(dim, rng));
      b = in_ball(oracle::gaussian_vec(dim, rng)) - in_ball(oracle::gaussian_vec(dim, rng));
    }
    l.eps.push_back(e);
    l.eps_bar.push_back(b);
  }
  return l;
}

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

}  // namespace

TEST_CASE("surrogate loss values") {
  const auto zero = make_loss(0, {1.0, 0.5}, {v2(0, 0), v2(0, 0)}, {v2(0, 0), v2(0, 0)});
  for (double lam : {0.0, 0.3, 1.0}) CHECK(xi(zero, lam) == 0.0);

  const auto hand = make_loss(0, {1.0, 0.5}, {v2(1, 0), v2(0, 1)}, {v2(0, 0), v2(0, 0)});
  CHECK(xi(hand, 0.5) == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(xi(hand, 1.0) == doctest::Approx(std::pow(1.0 + 0.5, 2)));

  // Grid cross-check of the same instance: xi(lambda) = (1.5 lambda)^2.
  for (int i = 0; i <= 100; ++i) {
    const double lam = i / 100.0;
    CHECK(xi(hand, lam) == doctest::Approx(2.25 * lam * lam).epsilon(1e-14));
  }
}

TEST_CASE("surrogate gradient") {
  const auto same = make_loss(0, {1.0}, {v2(0.3, -1)}, {v2(0.3, -1)});
  CHECK(xi_grad(same, 0.2) == 0.0);
  CHECK(xi_grad(same, 0.9) == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    const SurrogateLoss l = random_loss(0, 1 + trial % 5, 3, rng);
    const double lam = u(rng);
    const double fd = oracle::central_difference([&](double x) { return xi(l, x); }, lam, 1e-6);
    CHECK(oracle::relative_error(xi_grad(l, lam), fd, 1e-6) <= 1e-6);
  }
}

TEST_CASE("surrogate loss is convex in lambda") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const SurrogateLoss l = random_loss(0, 3, 2, rng);
    const double a = u(rng), b = u(rng), s = u(rng);
    CHECK(xi(l, s * a + (1 - s) * b) <= s * xi(l, a) + (1 - s) * xi(l, b) + 1e-12);
  }
}

TEST_CASE("gradient bound holds on ball-valued errors") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double radius = 0.7;
  for (int trial = 0; trial < 200; ++trial) {
    const SurrogateLoss l = random_loss(0, 5, 3, rng, radius);
    CHECK(std::abs(xi_grad(l, u(rng))) <= gradient_bound(l.weights, 2.0 * radius) * (1 + 1e-12));
  }
}

TEST_CASE("delayed confidence learner") {
  SUBCASE("initialization and ordering") {
    DelayedConfidenceLearner dcl(2, 0.1);
    const auto l0 = make_loss(0, {1.0}, {v2(1, 0)}, {v2(0, 1)});
    CHECK_THROWS_AS(dcl.advance(&l0), OutOfOrderFeedback);
    CHECK(dcl.advance(nullptr) == 0.5);
    CHECK(dcl.advance(nullptr) == 0.5);
    CHECK_THROWS_AS(dcl.advance(nullptr), OutOfOrderFeedback);
    const auto wrong = make_loss(1, {1.0}, {v2(1, 0)}, {v2(0, 1)});
    CHECK_THROWS_AS(dcl.advance(&wrong), OutOfOrderFeedback);
    // Orthogonal unit errors: gradient at 0.5 vanishes, so lambda stays put.
    CHECK(dcl.advance(&l0) == doctest::Approx(0.5));
    CHECK(std::isnan(dcl.gradients()[0]));
    CHECK_THROWS_AS(DelayedConfidenceLearner(0, 0.1), std::invalid_argument);
  }
  SUBCASE("clamp arithmetic from zero") {
    DelayedConfidenceLearner dcl(1, 0.1, 0.0);
    dcl.advance(nullptr);
    // xi(lambda) = (lambda * 0 + (1 - lambda) * 2)^2 has gradient -8 at 0.
    const auto l = make_loss(0, {1.0}, {v2(0, 0)}, {v2(2, 0)});
    CHECK(dcl.advance(&l) == doctest::Approx(0.8));
    DelayedConfidenceLearner big(1, 1.0, 0.0);
    big.advance(nullptr);
    CHECK(big.advance(&l) == 1.0);
  }
  SUBCASE("delay k interleaves k independent projected-gradient runs") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 1.0);
    const int T = 60, k = 2;
    const double beta = 0.2;
    std::vector<SurrogateLoss> losses;
    for (int t = 0; t < T; ++t) losses.push_back(make_loss(t, {1.0}, {Vec::Constant(1, n(rng))}, {Vec::Constant(1, n(rng))}));

    DelayedConfidenceLearner dcl(k, beta);
    for (int t = 0; t < T; ++t) dcl.advance(t < k ? nullptr : &losses[static_cast<std::size_t>(t - k)]);

    for (int r = 0; r < k; ++r) {
      double lam = 0.5;
      for (int t = r; t < T; t += k) {
        CHECK(dcl.history()[static_cast<std::size_t>(t)] == lam);
        lam = std::clamp(lam - beta * xi_grad(losses[static_cast<std::size_t>(t)], lam), 0.0, 1.0);
      }
    }
  }
}

TEST_CASE("follow-the-leader confidence") {
  FtlSelfTuning perfect;
  perfect.add_pair(v2(0, 0), v2(1, 2));
  perfect.add_pair(v2(0, 0), v2(-1, 0));
  CHECK(perfect.lambda() == 1.0);

  FtlSelfTuning nominal;
  nominal.add_pair(v2(1, 2), v2(0, 0));
  CHECK(nominal.lambda() == 0.0);

  FtlSelfTuning idle(0.3);
  idle.add_pair(v2(1, 1), v2(1, 1));
  CHECK(idle.lambda() == 0.3);

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    FtlSelfTuning ftl;
    std::vector<std::pair<Vec, Vec>> pairs;
    for (int i = 0; i < 8; ++i) {
      pairs.emplace_back(oracle::gaussian_vec(3, rng), oracle::gaussian_vec(3, rng, 0.5));
      ftl.add_pair(pairs.back().first, pairs.back().second);
    }
    double best = INFINITY, arg = 0.0;
    for (int i = 0; i <= 10000; ++i) {
      const double lam = i / 10000.0;
      double s = 0.0;
      for (const auto& [e, b] : pairs) s += (lam * e + (1 - lam) * b).squaredNorm();
      if (s < best) best = s, arg = lam;
    }
    CHECK(std::abs(ftl.lambda() - arg) <= 1e-3);
  }
}

TEST_CASE("hindsight best confidence") {
  const std::vector<SurrogateLoss> perfect{make_loss(0, {1.0}, {v2(0, 0)}, {v2(1, 0)}),
                                           make_loss(1, {1.0}, {v2(0, 0)}, {v2(0, 2)})};
  CHECK(lambda_star(perfect).lambda == 1.0);
  CHECK(lambda_star(perfect).value == 0.0);

  const std::vector<SurrogateLoss> nominal{make_loss(0, {1.0}, {v2(1, 0)}, {v2(0, 0)})};
  CHECK(lambda_star(nominal).lambda == 0.0);
  CHECK(lambda_star(nominal).value == 0.0);

  // Orthogonal pairs with equal rho-norms: the minimum is a b / (a + b).
  const std::vector<SurrogateLoss> ortho{make_loss(0, {1.0, 0.5}, {v2(2, 0), v2(0, 2)}, {v2(0, 2), v2(2, 0)})};
  const RhoNorms r = rho_norms(ortho);
  CHECK(r.eps_sq == doctest::Approx(r.eps_bar_sq));
  const LambdaStar s = lambda_star(ortho);
  CHECK(s.value == doctest::Approx(r.eps_sq * r.eps_bar_sq / (r.eps_sq + r.eps_bar_sq)).epsilon(1e-10));
  CHECK(s.lambda == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(varpi_rho(ortho) == doctest::Approx(r.eps_sq / 2));
}

TEST_CASE("Gram residual") {
  CHECK(varpi_gram(v2(1, 0), v2(2, 0)).value == 0.0);
  CHECK(varpi_gram(v2(1, 2), v2(1, 2)).degenerate);
  CHECK(varpi_gram(v2(1, 0), v2(0, 1)).value == doctest::Approx(0.5));

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec e = oracle::gaussian_vec(5, rng);
    const Vec b = oracle::gaussian_vec(5, rng);
    double best = INFINITY;
    for (int i = 0; i < 100000; ++i) {
      const double lam = -20.0 + 40.0 * i / 99999.0;
      best = std::min(best, (lam * e + (1 - lam) * b).squaredNorm());
    }
    const double v = varpi_gram(e, b).value;
    CHECK(v <= best + 1e-12);
    CHECK(best - v <= 1e-6 * std::max(1.0, (e - b).squaredNorm()));
  }
}

TEST_CASE("rho-weighted residual") {
  const std::vector<SurrogateLoss> zero{make_loss(0, {1.0}, {v2(0, 0)}, {v2(3, 0)})};
  CHECK(varpi_rho(zero) == 0.0);
  const std::vector<SurrogateLoss> both{make_loss(0, {1.0}, {v2(0, 0)}, {v2(0, 0)})};
  CHECK(varpi_rho(both) == 0.0);
}

TEST_CASE("learner regret") {
  SUBCASE("lambda-constant losses give zero regret") {
    std::vector<SurrogateLoss> losses;
    std::vector<double> lambdas;
    for (int t = 0; t < 20; ++t) {
      losses.push_back(make_loss(t, {1.0}, {v2(1, t)}, {v2(1, t)}));
      lambdas.push_back(t % 3 / 2.0);
    }
    CHECK(dcl_regret(losses, lambdas, std::vector<double>{1.0}, 1.0, 2).regret == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("repeated loss with an interior minimizer") {
    // Orthogonal errors with unequal norms: the minimizer is 0.8.
    auto run = [](int T) {
      const auto loss = make_loss(0, {1.0}, {v2(0.5, 0)}, {v2(0, 1)});
      std::vector<SurrogateLoss> losses;
      DelayedConfidenceLearner dcl(5, 0.2);
      std::vector<double> lambdas;
      for (int t = 0; t < T; ++t) {
        losses.push_back(loss);
        losses.back().index = t;
        lambdas.push_back(dcl.advance(t < 5 ? nullptr : &losses[static_cast<std::size_t>(t - 5)]));
      }
      return dcl_regret(losses, lambdas, loss.weights, 2.0, 5);
    };
    const DclRegret short_run = run(200), long_run = run(2000);
    CHECK(short_run.best.lambda == doctest::Approx(0.8).epsilon(1e-5));
    CHECK(long_run.regret / 2000 < short_run.regret / 200);
    CHECK(long_run.regret <= long_run.bound);
  }
  SUBCASE("bound and step size formulas") {
    const std::vector<double> w{1.0, 0.5};
    CHECK(gradient_bound(w, 2.0) == doctest::Approx(2.0 * 2.25 * 4.0));
    CHECK(theory_step_size(w, 2.0, 200, 5) == doctest::Approx(1.0 / (2.0 * 18.0 * std::sqrt(41.0))));
  }
}
