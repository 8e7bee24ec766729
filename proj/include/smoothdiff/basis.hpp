#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "smoothdiff/intervals.hpp"

namespace smoothdiff {

/// Open-uniform B-spline basis on a closed interval.
///
/// Knots follow the clamped convention: m + d + 1 knots, the two end knots
/// repeated d + 1 times and m - d - 1 equally spaced interior knots. The
/// domain is cut into m - d equal knot spans; span k (0-based) is the test
/// region whose fitted values depend on coefficients k..k+d.
class BasisSpec {
 public:
  [[nodiscard]] int degree() const noexcept { return degree_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }
  /// Number of knot-defined test regions, m - d.
  [[nodiscard]] int num_regions() const noexcept { return dim_ - degree_; }
  [[nodiscard]] Interval domain() const noexcept { return domain_; }
  [[nodiscard]] const std::vector<double>& knots() const noexcept { return knots_; }

  /// Knot span k, k in [0, m - d).
  [[nodiscard]] Interval region(int k) const;
  /// Support of basis function j, j in [0, m).
  [[nodiscard]] Interval support(int j) const;
  /// Index of the knot span containing z (the right end belongs to the last span),
  /// or -1 when z is outside the domain.
  [[nodiscard]] int span_of(double z) const noexcept;

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;

 private:
  friend BasisSpec make_basis(Interval domain, int m, int d);

  int degree_ = 0;
  int dim_ = 0;
  Interval domain_;
  std::vector<double> knots_;
};

/// Throws ParameterError unless m >= d + 2, d >= 0 and lo < hi (both finite).
BasisSpec make_basis(Interval domain, int m, int d);

/// Values of the d + 1 basis functions that can be non-zero at z.
/// Returns the index of the first of them, or -1 (values zeroed) outside the domain.
int eval_basis_local(const BasisSpec& spec, double z, std::span<double> values);

/// Full length-m evaluation; zero vector outside the domain.
Eigen::VectorXd eval_basis(const BasisSpec& spec, double z);

/// n x m basis evaluations with the support start of each row.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<int> first;  // -1 for rows outside the domain
  std::vector<std::size_t> sample_ids;
  int degree = 0;

  [[nodiscard]] Eigen::Index rows() const noexcept { return values.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values.cols(); }
};

DesignMatrix design_matrix(const BasisSpec& spec, std::span<const double> z);

/// Z^T W Z using the row-local support; an empty weight span means unit weights.
Eigen::MatrixXd weighted_gram(const DesignMatrix& z, std::span<const double> weights = {});
/// Z^T W y.
Eigen::VectorXd weighted_cross(const DesignMatrix& z, std::span<const double> y,
                               std::span<const double> weights = {});
/// Z b.
Eigen::VectorXd apply_design(const DesignMatrix& z, const Eigen::VectorXd& coef);

struct PenaltyMatrix {
  int order = 2;
  Eigen::MatrixXd difference;  // (m - q) x m
  Eigen::MatrixXd penalty;     // D^T D

  [[nodiscard]] Eigen::Index dim() const noexcept { return penalty.rows(); }
};

/// q-th order difference penalty on m coefficients; requires m > q >= 1.
PenaltyMatrix difference_penalty(int m, int q = 2);

}  // namespace smoothdiff
