#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "smoothdiff/toeplitz.hpp"

namespace testing_support {

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double ridge = 0.5) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::MatrixXd s = a * a.transpose() / n;
  s.diagonal().array() += ridge;
  return s;
}

inline Eigen::MatrixXd random_banded_spd(int n, int bw, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - bw); j < i; ++j) a(i, j) = a(j, i) = u(rng);
  // diagonal dominance keeps it positive definite
  for (int i = 0; i < n; ++i) a(i, i) = 2.0 * bw + 1.0 + std::abs(u(rng));
  return a;
}

inline double max_rel_error(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).cwiseAbs().maxCoeff() / std::max(1e-300, want.cwiseAbs().maxCoeff());
}

/// Random problem with a joint SPD covariance over (x, y) and PSD forms A, B.
inline smoothdiff::QuadFormProblem random_quad_problem(int dx, int dy, std::mt19937_64& rng) {
  const Eigen::MatrixXd joint = random_spd(dx + dy, rng, 0.3);
  smoothdiff::QuadFormProblem q;
  q.sxx = joint.topLeftCorner(dx, dx);
  q.sxy = joint.topRightCorner(dx, dy);
  q.syy = joint.bottomRightCorner(dy, dy);
  q.a = random_spd(dx, rng, 0.1);
  q.b = random_spd(dy, rng, 0.1);
  return q;
}

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// Monte Carlo Cov(x'Ax, y'By) from `draws` joint Gaussian samples.
inline McEstimate mc_quad_cov(const smoothdiff::QuadFormProblem& q, int draws, std::mt19937_64& rng) {
  const auto dx = q.a.rows(), dy = q.b.rows();
  Eigen::MatrixXd joint(dx + dy, dx + dy);
  joint << q.sxx, q.sxy, q.sxy.transpose(), q.syy;
  const Eigen::MatrixXd l = joint.llt().matrixL();
  std::normal_distribution<double> g;
  std::vector<double> u(static_cast<std::size_t>(draws)), v(static_cast<std::size_t>(draws));
  Eigen::VectorXd e(dx + dy);
  for (int i = 0; i < draws; ++i) {
    for (Eigen::Index j = 0; j < e.size(); ++j) e[j] = g(rng);
    const Eigen::VectorXd s = l * e;
    u[i] = s.head(dx).dot(q.a * s.head(dx));
    v[i] = s.tail(dy).dot(q.b * s.tail(dy));
  }
  double mu = 0.0, mv = 0.0;
  for (int i = 0; i < draws; ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= draws;
  mv /= draws;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double prod = (u[i] - mu) * (v[i] - mv);
    sum += prod;
    sumsq += prod * prod;
  }
  McEstimate out;
  out.value = sum / (draws - 1);
  const double mean = sum / draws;
  out.se = std::sqrt((sumsq / draws - mean * mean) / draws);
  return out;
}

}  // namespace testing_support
