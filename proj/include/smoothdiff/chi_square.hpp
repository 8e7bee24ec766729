#pragma once

namespace smoothdiff {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed without
/// cancellation in the upper tail.
double regularized_gamma_q(double a, double x);

/// Upper-tail probability of a chi-square variable with `dof` degrees of freedom.
double chi_square_sf(double x, double dof);
double chi_square_cdf(double x, double dof);

}  // namespace smoothdiff
