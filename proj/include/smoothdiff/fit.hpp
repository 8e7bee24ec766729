#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smoothdiff/basis.hpp"

namespace smoothdiff {

enum class Family { gaussian, binomial };

std::string to_string(Family f);
/// Accepts "gaussian" / "binomial"; throws ParameterError otherwise.
Family family_from_string(const std::string& name);

/// One stratum: outcome y, covariate z, optional fixed effects x (n x p).
struct StratumData {
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  Eigen::MatrixXd x;  // n x 0 when there are no fixed effects
  Family family = Family::gaussian;

  [[nodiscard]] Eigen::Index size() const noexcept { return y.size(); }
};

enum class SolverKind {
  banded,  // band Cholesky of Z^T W Z + lambda S (no fixed effects)
  dense,   // dense Cholesky of the full block system
};

enum class CovarianceKind {
  bayesian,     // phi (Z^T W Z + lambda S)^{-1}
  frequentist,  // phi C^{-1} (Z^T W Z) C^{-1}; smaller, ignores smoothing bias
};

std::string to_string(CovarianceKind k);
/// Accepts "bayesian" / "frequentist"; throws ParameterError otherwise.
CovarianceKind covariance_from_string(const std::string& name);

enum class LambdaSelector {
  gcv,   // n D / (n - edf)^2
  reml,  // Laplace-approximate restricted likelihood
};

std::string to_string(LambdaSelector s);
/// Accepts "gcv" / "reml"; throws ParameterError otherwise.
LambdaSelector selector_from_string(const std::string& name);

struct FitOptions {
  SolverKind solver = SolverKind::banded;
  LambdaSelector selector = LambdaSelector::gcv;
  CovarianceKind covariance = CovarianceKind::bayesian;
  int max_iterations = 100;
  double tolerance = 1e-8;
  /// IRLS is declared separated once any |eta| exceeds this.
  double separation_eta = 15.0;
};

struct StratumFit {
  Family family = Family::gaussian;
  Eigen::VectorXd coef;        // spline coefficients b
  Eigen::VectorXd fixed;       // fixed-effect coefficients beta (length p)
  double lambda = 0.0;
  double dispersion = 1.0;     // phi
  Eigen::MatrixXd covariance;  // V = phi * (penalized information)^{-1}, m x m
  double edf = 0.0;
  double deviance = 0.0;       // RSS for gaussian
  Eigen::Index n = 0;
  int iterations = 0;
  std::vector<int> dropped_columns;  // constant fixed-effect columns absorbed by the spline
  std::vector<double> deviance_trace;
};

/// Penalized least squares at fixed lambda.
/// Throws NumericalError when Z^T Z + lambda S is not positive definite.
StratumFit fit_gaussian(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                        double lambda, const FitOptions& opts = {});

/// Penalized IRLS for a logit-link binomial outcome at fixed lambda.
/// Throws NumericalError on separation or non-convergence (message carries the deviance trace).
StratumFit fit_binomial(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                        double lambda, const FitOptions& opts = {});

/// Dispatches on data.family.
StratumFit fit_stratum(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                       double lambda, const FitOptions& opts = {});

/// 40 log-spaced values over [1e-4, 1e4] * tr(Z^T Z) / tr(S).
std::vector<double> default_lambda_grid(const StratumData& data, const BasisSpec& spec,
                                        const PenaltyMatrix& pen);

/// GCV score n * D / (n - edf)^2 for each grid value; NaN where the fit failed.
std::vector<double> gcv_scores(const StratumData& data, const BasisSpec& spec,
                               const PenaltyMatrix& pen, std::span<const double> grid,
                               const FitOptions& opts = {});

/// Negative restricted log-likelihood (up to a constant) for each grid value; NaN
/// where the fit failed. Gaussian: (n - M) log(D + lambda b'Sb) + log|C| - r log lambda;
/// binomial: D + lambda b'Sb + log|C| - r log lambda, with C the penalized
/// information, r = rank(S) and M = p + m - r.
std::vector<double> reml_scores(const StratumData& data, const BasisSpec& spec,
                                const PenaltyMatrix& pen, std::span<const double> grid,
                                const FitOptions& opts = {});

/// Minimizer of the opts.selector criterion over the grid (default grid when empty). Near-ties go to the
/// larger lambda. Throws NumericalError when every candidate fails.
double select_lambda(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                     std::span<const double> grid = {}, const FitOptions& opts = {});

/// Fitted values of the smooth part at arbitrary covariates.
Eigen::VectorXd smooth_values(const StratumFit& fit, const BasisSpec& spec,
                              std::span<const double> z);

}  // namespace smoothdiff
