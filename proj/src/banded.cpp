#include "smoothdiff/banded.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smoothdiff/errors.hpp"

namespace smoothdiff {

BandedCholesky::BandedCholesky(const Eigen::MatrixXd& a, int bandwidth)
    : n_(static_cast<int>(a.rows())), bw_(bandwidth) {
  if (a.rows() != a.cols()) throw ParameterError("banded::cholesky: matrix not square");
  if (bw_ < 0) throw ParameterError("banded::cholesky: negative bandwidth");
  bw_ = std::min(bw_, std::max(n_ - 1, 0));
  const int width = bw_ + 1;
  factor_.assign(static_cast<std::size_t>(n_) * width, 0.0);
  for (int i = 0; i < n_; ++i) {
    const int j0 = std::max(0, i - bw_);
    for (int j = j0; j <= i; ++j) {
      double s = a(i, j);
      const int k0 = std::max(j0, j - bw_);
      for (int k = k0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (j == i) {
        if (!(s > 0.0) || !std::isfinite(s)) {
          std::ostringstream msg;
          msg << "banded::cholesky: matrix not positive definite at pivot " << i << " (value " << s
              << ")";
          throw NumericalError(msg.str());
        }
        factor_[i * width] = std::sqrt(s);
      } else {
        factor_[i * width + (i - j)] = s / l(j, j);
      }
    }
  }
}

void BandedCholesky::solve_in_place(double* x) const {
  for (int i = 0; i < n_; ++i) {
    double s = x[i];
    for (int k = std::max(0, i - bw_); k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  for (int i = n_ - 1; i >= 0; --i) {
    double s = x[i];
    const int k1 = std::min(n_ - 1, i + bw_);
    for (int k = i + 1; k <= k1; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
}

Eigen::VectorXd BandedCholesky::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != n_) throw ParameterError("banded::solve: dimension mismatch");
  Eigen::VectorXd x = rhs;
  solve_in_place(x.data());
  return x;
}

Eigen::MatrixXd BandedCholesky::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != n_) throw ParameterError("banded::solve: dimension mismatch");
  Eigen::MatrixXd x = rhs;
  for (Eigen::Index c = 0; c < x.cols(); ++c) solve_in_place(x.col(c).data());
  return x;
}

Eigen::MatrixXd BandedCholesky::inverse() const {
  Eigen::MatrixXd inv = solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(n_, n_)));
  // symmetrize away round-off
  return 0.5 * (inv + inv.transpose());
}

double BandedCholesky::log_determinant() const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

double BandedCholesky::condition_estimate() const {
  double lo = INFINITY, hi = 0.0;
  for (int i = 0; i < n_; ++i) {
    lo = std::min(lo, l(i, i));
    hi = std::max(hi, l(i, i));
  }
  return (hi / lo) * (hi / lo);
}

int bandwidth_of(const Eigen::MatrixXd& a, double tol) {
  int bw = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (std::abs(a(i, j)) > tol) bw = std::max(bw, static_cast<int>(std::abs(i - j)));
  return bw;
}

}  // namespace smoothdiff
