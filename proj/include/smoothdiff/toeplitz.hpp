#pragma once

#include <optional>

#include <Eigen/Dense>

#include "smoothdiff/fit.hpp"

namespace smoothdiff {

/// Symmetric pentadiagonal Toeplitz matrix whose two corner diagonal entries
/// are reduced by corner_first / corner_last.
struct PentaParams {
  double diagonal = 0.0;       // epsilon
  double first_off = 0.0;      // theta
  double second_off = 0.0;     // lambda_p
  double corner_first = 0.0;   // zeta_1
  double corner_last = 0.0;    // zeta_2
  int size = 3;                // N

  /// Corner deficits equal to the second off-diagonal, the case that factors.
  static PentaParams with_matched_corners(double diagonal, double first_off, double second_off,
                                          int size);
};

Eigen::MatrixXd pentadiagonal_matrix(const PentaParams& params);

/// Symmetric tridiagonal Toeplitz matrix tridiag(off, diag, off).
struct TridiagFactor {
  double off = 0.0;
  double diag = 0.0;

  /// arcosh(diag / (2 off)) when diag > 2 off > 0.
  [[nodiscard]] std::optional<double> decay() const;
};

Eigen::MatrixXd tridiagonal_matrix(const TridiagFactor& factor, int size);

struct PentaFactorization {
  TridiagFactor first;   // (lambda_p, pi_1, lambda_p)
  TridiagFactor second;  // (1, pi_2 / lambda_p, 1)
  double root_large = 0.0;  // pi_1
  double root_small = 0.0;  // pi_2
  double residual = 0.0;    // max |Z1 Z2 - P|
};

/// Splits P into two tridiagonal Toeplitz factors. Throws DomainError unless
/// theta^2 - 4 lambda_p (epsilon - 2 lambda_p) > 0, lambda_p != 0 and both
/// corner deficits equal lambda_p.
PentaFactorization factor_pentadiagonal(const PentaParams& params);

/// Closed-form inverse of tridiag(off, diag, off); throws DomainError when the
/// decay rate is undefined (diag <= 2 off or off <= 0).
Eigen::MatrixXd tridiag_toeplitz_inverse(const TridiagFactor& factor, int size);

struct DecayReport {
  double rate = 0.0;            // min_i psi_i
  double psi_first = 0.0;
  double psi_second = 0.0;
  double empirical_slope = 0.0; // fitted log-magnitude decay per index step of P^{-1}
};

/// Theoretical and empirical off-diagonal decay of P^{-1}.
DecayReport decay_rate(const PentaParams& params, int size);

/// Empirical decay of |inv(r, t)| in t - r, fitted over middle rows where the
/// entries stay above round-off.
double empirical_decay_slope(const Eigen::MatrixXd& inverse);

/// Zero-mean Gaussian (x, y) with joint covariance blocks and symmetric forms A, B.
struct QuadFormProblem {
  Eigen::MatrixXd a;       // d_x x d_x
  Eigen::MatrixXd b;       // d_y x d_y
  Eigen::MatrixXd sxx;
  Eigen::MatrixXd sxy;     // d_x x d_y
  Eigen::MatrixXd syy;
};

/// U = (J ⊗ A) ∘ (vec Sxy vec Sxy^T) ∘ (B ⊗ J), indices column-major over Sxy.
Eigen::MatrixXd quadratic_form_pairing(const QuadFormProblem& problem);

/// Cov(x'Ax, y'By). Each of the two cross pairings in the fourth moment
/// contributes sum(U), so the covariance is 2 sum(U).
double cov_quadratic_forms(const QuadFormProblem& problem);

/// 2 ||A^{1/2} Sxy B^{1/2}||_F^2 for positive semidefinite A, B.
double cov_quadratic_forms_frobenius(const QuadFormProblem& problem);

/// Covariance of the window statistics T_k and T_k' under the null, from the
/// summed posterior covariances of the two fits.
double window_stat_covariance(const StratumFit& fit1, const StratumFit& fit2, int width, int k,
                              int k_other);
double window_stat_correlation(const StratumFit& fit1, const StratumFit& fit2, int width, int k,
                               int k_other);

}  // namespace smoothdiff
