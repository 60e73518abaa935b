#pragma once

// Independent reference computations used by the unit tests and the acceptance
// binary. Nothing here calls into the closed forms it is used to check.

#include "lac/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace oracle {

using lac::Mat;
using lac::Vec;

struct LqInstance {
  Mat A, B, Q, R;
};

inline Mat gaussian(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = n(rng);
  return M;
}

inline Vec gaussian_vec(int dim, std::mt19937_64& rng, double scale = 1.0) {
  return gaussian(dim, 1, rng, scale).col(0);
}

/// Random instance with n, m in [1, max_dim]; Gaussian B is controllable with
/// probability one and Q, R are positive definite.
inline LqInstance random_instance(std::mt19937_64& rng, int max_dim = 4) {
  std::uniform_int_distribution<int> dim(1, max_dim);
  const int n = dim(rng);
  const int m = dim(rng);
  LqInstance in;
  in.A = gaussian(n, n, rng, 0.6);
  in.B = gaussian(n, m, rng);
  const Mat q = gaussian(n, n, rng);
  const Mat r = gaussian(m, m, rng);
  in.Q = q * q.transpose() + 0.1 * Mat::Identity(n, n);
  in.R = r * r.transpose() + 0.1 * Mat::Identity(m, m);
  return in;
}

struct DenseLq {
  std::vector<Vec> inputs;
  double cost = 0.0;
};

/// Minimizes sum_{i<L} (x_i'Qx_i + u_i'Ru_i) + x_L' Pf x_L subject to
/// x_{i+1} = A x_i + B u_i + w_i by forming the stacked quadratic and solving
/// its normal equations.
inline DenseLq dense_lq(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& Pf, const Vec& x0,
                        std::span<const Vec> w) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int L = static_cast<int>(w.size());
  Mat G = Mat::Zero(n * L, m * L);  // x_{1..L} from U
  Vec c = Vec::Zero(n * L);         // x_{1..L} with U = 0
  Vec x = x0;
  for (int i = 0; i < L; ++i) {
    x = A * x + w[static_cast<std::size_t>(i)];
    c.segment(n * i, n) = x;
  }
  for (int j = 0; j < L; ++j) {
    Mat blk = B;
    for (int i = j; i < L; ++i) {
      G.block(n * i, m * j, n, m) = blk;
      blk = A * blk;
    }
  }
  Mat Qb = Mat::Zero(n * L, n * L);
  Mat Rb = Mat::Zero(m * L, m * L);
  for (int i = 0; i < L; ++i) {
    Qb.block(n * i, n * i, n, n) = i + 1 == L ? Pf : Q;
    Rb.block(m * i, m * i, m, m) = R;
  }
  const Mat H = Rb + G.transpose() * Qb * G;
  const Vec U = -H.ldlt().solve(G.transpose() * Qb * c);
  const Vec X = c + G * U;
  DenseLq out;
  out.cost = x0.dot(Q * x0) + U.dot(Rb * U) + X.dot(Qb * X);
  for (int i = 0; i < L; ++i) out.inputs.push_back(U.segment(m * i, m));
  return out;
}

/// Central difference of a scalar function along one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
