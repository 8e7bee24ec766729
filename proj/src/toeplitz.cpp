#include "smoothdiff/toeplitz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "smoothdiff/errors.hpp"

namespace smoothdiff {

PentaParams PentaParams::with_matched_corners(double diagonal, double first_off,
                                              double second_off, int size) {
  return {diagonal, first_off, second_off, second_off, second_off, size};
}

Eigen::MatrixXd pentadiagonal_matrix(const PentaParams& p) {
  if (p.size < 3) throw ParameterError("toeplitz: pentadiagonal size must be at least 3");
  const int n = p.size;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = p.diagonal;
    if (i + 1 < n) m(i, i + 1) = m(i + 1, i) = p.first_off;
    if (i + 2 < n) m(i, i + 2) = m(i + 2, i) = p.second_off;
  }
  m(0, 0) -= p.corner_first;
  m(n - 1, n - 1) -= p.corner_last;
  return m;
}

std::optional<double> TridiagFactor::decay() const {
  if (!(off > 0.0) || !(diag > 2.0 * off)) return std::nullopt;
  return std::acosh(diag / (2.0 * off));
}

Eigen::MatrixXd tridiagonal_matrix(const TridiagFactor& f, int size) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < size; ++i) {
    m(i, i) = f.diag;
    if (i + 1 < size) m(i, i + 1) = m(i + 1, i) = f.off;
  }
  return m;
}

PentaFactorization factor_pentadiagonal(const PentaParams& p) {
  const double lam = p.second_off;
  if (lam == 0.0) throw DomainError("toeplitz::factor_pentadiagonal: lambda_p must be non-zero");
  const double disc = p.first_off * p.first_off - 4.0 * lam * (p.diagonal - 2.0 * lam);
  if (!(disc > 0.0)) {
    std::ostringstream msg;
    msg << "toeplitz::factor_pentadiagonal: factorization requires "
           "theta^2 - 4*lambda_p*(epsilon - 2*lambda_p) > 0, got "
        << disc;
    throw DomainError(msg.str());
  }
  if (p.corner_first != lam || p.corner_last != lam) {
    throw DomainError(
        "toeplitz::factor_pentadiagonal: corner deficits must both equal lambda_p");
  }
  PentaFactorization out;
  // roots of s^2 - theta s + lambda_p (epsilon - 2 lambda_p)
  const double root = std::sqrt(disc);
  out.root_large = 0.5 * (p.first_off + root);
  out.root_small = 0.5 * (p.first_off - root);
  out.first = {lam, out.root_large};
  out.second = {1.0, out.root_small / lam};
  const Eigen::MatrixXd product = tridiagonal_matrix(out.first, p.size) *
                                  tridiagonal_matrix(out.second, p.size);
  out.residual = (product - pentadiagonal_matrix(p)).cwiseAbs().maxCoeff();
  return out;
}

Eigen::MatrixXd tridiag_toeplitz_inverse(const TridiagFactor& f, int size) {
  if (size < 1) throw ParameterError("toeplitz::tridiag_toeplitz_inverse: size must be positive");
  const auto psi = f.decay();
  if (!psi) {
    throw DomainError(
        "toeplitz::tridiag_toeplitz_inverse: decay rate undefined (need diag > 2*off > 0)");
  }
  const double s = *psi;
  const int n = size;
  // sinh(s k) sinh(s (n+1-l)) / (sinh s sinh(s (n+1))) in overflow-free form:
  // e^{-s (l-k)} (1 - e^{-2sk}) (1 - e^{-2s(n+1-l)}) / ((1 - e^{-2s(n+1)}) 2 sinh s)
  const double denom = -std::expm1(-2.0 * s * (n + 1)) * 2.0 * std::sinh(s);
  Eigen::MatrixXd inv(n, n);
  for (int k = 1; k <= n; ++k) {
    for (int l = k; l <= n; ++l) {
      const double v = std::exp(-s * (l - k)) * -std::expm1(-2.0 * s * k) *
                       -std::expm1(-2.0 * s * (n + 1 - l)) / denom;
      const double signed_v = ((l - k) % 2 == 0 ? v : -v) / f.off;
      inv(k - 1, l - 1) = inv(l - 1, k - 1) = signed_v;
    }
  }
  return inv;
}

double empirical_decay_slope(const Eigen::MatrixXd& inv) {
  const int n = static_cast<int>(inv.rows());
  const double scale = inv.cwiseAbs().maxCoeff();
  std::vector<double> xs, ys;
  const int r0 = n / 3, r1 = n / 2;
  const int max_lag = std::max(2, n / 4);
  for (int r = r0; r <= r1; ++r) {
    for (int lag = 1; lag <= max_lag && r + lag < n; ++lag) {
      const double v = std::abs(inv(r, r + lag));
      if (v <= 1e-11 * scale) break;
      xs.push_back(lag);
      ys.push_back(std::log(v));
    }
  }
  if (xs.size() < 2) throw NumericalError("toeplitz::decay_rate: too few entries to fit a slope");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return -sxy / sxx;
}

DecayReport decay_rate(const PentaParams& params, int size) {
  PentaParams p = params;
  p.size = size;
  const auto fac = factor_pentadiagonal(p);
  const auto psi1 = fac.first.decay();
  const auto psi2 = fac.second.decay();
  if (!psi1 || !psi2) {
    throw DomainError("toeplitz::decay_rate: decay rate undefined (need pi_i > 2*lambda_p > 0)");
  }
  DecayReport out;
  out.psi_first = *psi1;
  out.psi_second = *psi2;
  out.rate = std::min(*psi1, *psi2);
  const Eigen::MatrixXd inv = pentadiagonal_matrix(p).inverse();
  out.empirical_slope = empirical_decay_slope(inv);
  return out;
}

namespace {

void check_problem(const QuadFormProblem& q) {
  const auto dx = q.a.rows(), dy = q.b.rows();
  if (q.a.cols() != dx || q.b.cols() != dy || q.sxy.rows() != dx || q.sxy.cols() != dy ||
      (q.sxx.size() && (q.sxx.rows() != dx || q.sxx.cols() != dx)) ||
      (q.syy.size() && (q.syy.rows() != dy || q.syy.cols() != dy))) {
    throw ParameterError("toeplitz::cov_quadratic_forms: dimension mismatch");
  }
  const double tol = 1e-10;
  if ((q.a - q.a.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, q.a.cwiseAbs().maxCoeff()) ||
      (q.b - q.b.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, q.b.cwiseAbs().maxCoeff())) {
    throw ParameterError("toeplitz::cov_quadratic_forms: A and B must be symmetric");
  }
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol) {
    throw DomainError("toeplitz::cov_quadratic_forms_frobenius: form is not positive semidefinite");
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd quadratic_form_pairing(const QuadFormProblem& q) {
  check_problem(q);
  const Eigen::Index dx = q.a.rows(), dy = q.b.rows();
  const Eigen::Map<const Eigen::VectorXd> v(q.sxy.data(), dx * dy);  // column-major vec
  const Eigen::MatrixXd outer = v * v.transpose();
  const Eigen::MatrixXd jy = Eigen::MatrixXd::Ones(dy, dy);
  const Eigen::MatrixXd jx = Eigen::MatrixXd::Ones(dx, dx);
  const Eigen::MatrixXd left = Eigen::kroneckerProduct(jy, q.a);
  const Eigen::MatrixXd right = Eigen::kroneckerProduct(q.b, jx);
  return left.cwiseProduct(outer).cwiseProduct(right);
}

double cov_quadratic_forms(const QuadFormProblem& q) { return 2.0 * quadratic_form_pairing(q).sum(); }

double cov_quadratic_forms_frobenius(const QuadFormProblem& q) {
  check_problem(q);
  return 2.0 * (psd_sqrt(q.a) * q.sxy * psd_sqrt(q.b)).squaredNorm();
}

namespace {

QuadFormProblem window_problem(const StratumFit& fit1, const StratumFit& fit2, int width, int k,
                               int k_other) {
  const Eigen::MatrixXd v = fit1.covariance + fit2.covariance;
  const int m = static_cast<int>(v.rows());
  if (width < 1 || k < 0 || k_other < 0 || k + width > m || k_other + width > m) {
    throw ParameterError("toeplitz::window_stat_covariance: window index out of range");
  }
  QuadFormProblem q;
  q.sxx = v.block(k, k, width, width);
  q.syy = v.block(k_other, k_other, width, width);
  q.sxy = v.block(k, k_other, width, width);
  const Eigen::LLT<Eigen::MatrixXd> lx(q.sxx), ly(q.syy);
  if (lx.info() != Eigen::Success || ly.info() != Eigen::Success) {
    throw NumericalError("toeplitz::window_stat_covariance: window covariance not positive definite");
  }
  q.a = lx.solve(Eigen::MatrixXd::Identity(width, width));
  q.b = ly.solve(Eigen::MatrixXd::Identity(width, width));
  q.a = 0.5 * (q.a + q.a.transpose()).eval();
  q.b = 0.5 * (q.b + q.b.transpose()).eval();
  return q;
}

}  // namespace

double window_stat_covariance(const StratumFit& fit1, const StratumFit& fit2, int width, int k,
                              int k_other) {
  return cov_quadratic_forms(window_problem(fit1, fit2, width, k, k_other));
}

double window_stat_correlation(const StratumFit& fit1, const StratumFit& fit2, int width, int k,
                               int k_other) {
  const double c = window_stat_covariance(fit1, fit2, width, k, k_other);
  const double vk = window_stat_covariance(fit1, fit2, width, k, k);
  const double vo = window_stat_covariance(fit1, fit2, width, k_other, k_other);
  return c / std::sqrt(vk * vo);
}

}  // namespace smoothdiff
