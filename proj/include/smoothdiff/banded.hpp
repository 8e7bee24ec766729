#pragma once

#include <vector>

#include <Eigen/Dense>

namespace smoothdiff {

/// Cholesky factor of a symmetric positive-definite band matrix.
///
/// Only entries with |i - j| <= bandwidth are read from the input. The factor
/// L is stored row-wise as n x (bandwidth + 1), column offset i - j.
class BandedCholesky {
 public:
  /// Throws NumericalError (with a pivot-ratio condition estimate) when a
  /// pivot is not positive.
  BandedCholesky(const Eigen::MatrixXd& a, int bandwidth);

  [[nodiscard]] int size() const noexcept { return n_; }
  [[nodiscard]] int bandwidth() const noexcept { return bw_; }

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  [[nodiscard]] Eigen::MatrixXd inverse() const;
  [[nodiscard]] double log_determinant() const;
  /// (max pivot / min pivot)^2, a cheap lower estimate of the 2-norm condition number.
  [[nodiscard]] double condition_estimate() const;

 private:
  [[nodiscard]] double l(int i, int j) const { return factor_[i * (bw_ + 1) + (i - j)]; }
  void solve_in_place(double* x) const;

  int n_ = 0;
  int bw_ = 0;
  std::vector<double> factor_;
};

/// Half-bandwidth of a matrix: largest |i - j| with a non-zero entry.
int bandwidth_of(const Eigen::MatrixXd& a, double tol = 0.0);

}  // namespace smoothdiff
