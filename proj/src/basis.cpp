#include "smoothdiff/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smoothdiff/errors.hpp"

namespace smoothdiff {

BasisSpec make_basis(Interval domain, int m, int d) {
  if (d < 0) throw ParameterError("basis::make_basis: degree must be non-negative");
  if (m < d + 2) {
    throw ParameterError("basis::make_basis: need m >= d + 2 (m=" + std::to_string(m) +
                         ", d=" + std::to_string(d) + ")");
  }
  if (!std::isfinite(domain.lo) || !std::isfinite(domain.hi) || !(domain.lo < domain.hi)) {
    throw ParameterError("basis::make_basis: degenerate domain");
  }
  BasisSpec spec;
  spec.degree_ = d;
  spec.dim_ = m;
  spec.domain_ = domain;
  const int spans = m - d;
  spec.knots_.resize(static_cast<std::size_t>(m + d + 1));
  for (int i = 0; i <= d; ++i) spec.knots_[i] = domain.lo;
  for (int j = 1; j < spans; ++j) {
    spec.knots_[d + j] = domain.lo + (domain.hi - domain.lo) * j / spans;
  }
  for (int i = 0; i <= d; ++i) spec.knots_[m + i] = domain.hi;
  return spec;
}

Interval BasisSpec::region(int k) const {
  if (k < 0 || k >= num_regions()) throw ParameterError("basis::region: index out of range");
  return {knots_[k + degree_], knots_[k + degree_ + 1]};
}

Interval BasisSpec::support(int j) const {
  if (j < 0 || j >= dim_) throw ParameterError("basis::support: index out of range");
  return {knots_[j], knots_[j + degree_ + 1]};
}

int BasisSpec::span_of(double z) const noexcept {
  if (!(z >= domain_.lo && z <= domain_.hi)) return -1;
  const int spans = num_regions();
  // uniform spans: guess, then correct against the stored knots
  int k = static_cast<int>((z - domain_.lo) / (domain_.hi - domain_.lo) * spans);
  k = std::clamp(k, 0, spans - 1);
  while (k > 0 && z < knots_[k + degree_]) --k;
  while (k + 1 < spans && z >= knots_[k + degree_ + 1]) ++k;
  return k;
}

int eval_basis_local(const BasisSpec& spec, double z, std::span<double> values) {
  const int d = spec.degree();
  if (!std::isfinite(z)) throw ParameterError("basis::eval_basis: non-finite covariate");
  if (values.size() < static_cast<std::size_t>(d + 1)) {
    throw ParameterError("basis::eval_basis: output span too small");
  }
  std::fill(values.begin(), values.end(), 0.0);
  const int k = spec.span_of(z);
  if (k < 0) return -1;

  // de Boor's triangular scheme on knot span [t_s, t_{s+1}), s = k + d.
  const auto& t = spec.knots();
  const int s = k + d;
  double left[16];
  double right[16];
  if (d >= 16) throw ParameterError("basis::eval_basis: degree too large");
  values[0] = 1.0;
  for (int j = 1; j <= d; ++j) {
    left[j] = z - t[s + 1 - j];
    right[j] = t[s + j] - z;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
  return k;
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, double z) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(spec.dim());
  std::vector<double> local(static_cast<std::size_t>(spec.degree() + 1));
  const int first = eval_basis_local(spec, z, local);
  if (first >= 0) {
    for (int r = 0; r <= spec.degree(); ++r) out[first + r] = local[r];
  }
  return out;
}

DesignMatrix design_matrix(const BasisSpec& spec, std::span<const double> z) {
  if (z.empty()) throw ParameterError("basis::design_matrix: empty covariate vector");
  const int d = spec.degree();
  DesignMatrix out;
  out.degree = d;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(z.size()), spec.dim());
  out.first.resize(z.size());
  out.sample_ids.resize(z.size());
  std::vector<double> local(static_cast<std::size_t>(d + 1));
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int first = eval_basis_local(spec, z[i], local);
    out.first[i] = first;
    out.sample_ids[i] = i;
    if (first < 0) continue;
    for (int r = 0; r <= d; ++r) out.values(static_cast<Eigen::Index>(i), first + r) = local[r];
  }
  return out;
}

Eigen::MatrixXd weighted_gram(const DesignMatrix& z, std::span<const double> weights) {
  const Eigen::Index m = z.cols();
  const int w = z.degree + 1;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int f = z.first[static_cast<std::size_t>(i)];
    if (f < 0) continue;
    const double wi = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    for (int a = 0; a < w; ++a) {
      const double va = wi * z.values(i, f + a);
      for (int b = 0; b <= a; ++b) g(f + a, f + b) += va * z.values(i, f + b);
    }
  }
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < a; ++b) g(b, a) = g(a, b);
  return g;
}

Eigen::VectorXd weighted_cross(const DesignMatrix& z, std::span<const double> y,
                               std::span<const double> weights) {
  if (y.size() != static_cast<std::size_t>(z.rows())) {
    throw ParameterError("basis::weighted_cross: length mismatch");
  }
  const int w = z.degree + 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int f = z.first[static_cast<std::size_t>(i)];
    if (f < 0) continue;
    const double wy = (weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)]) *
                      y[static_cast<std::size_t>(i)];
    for (int a = 0; a < w; ++a) out[f + a] += z.values(i, f + a) * wy;
  }
  return out;
}

Eigen::VectorXd apply_design(const DesignMatrix& z, const Eigen::VectorXd& coef) {
  const int w = z.degree + 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int f = z.first[static_cast<std::size_t>(i)];
    if (f < 0) continue;
    double s = 0.0;
    for (int a = 0; a < w; ++a) s += z.values(i, f + a) * coef[f + a];
    out[i] = s;
  }
  return out;
}

PenaltyMatrix difference_penalty(int m, int q) {
  if (q < 1 || m <= q) {
    throw ParameterError("basis::difference_penalty: need m > q >= 1 (m=" + std::to_string(m) +
                         ", q=" + std::to_string(q) + ")");
  }
  // stencil (-1)^(q-j) C(q, j), j = 0..q
  std::vector<double> stencil(static_cast<std::size_t>(q + 1));
  double binom = 1.0;
  for (int j = 0; j <= q; ++j) {
    stencil[j] = ((q - j) % 2 == 0 ? 1.0 : -1.0) * binom;
    binom = binom * (q - j) / (j + 1);
  }
  PenaltyMatrix pen;
  pen.order = q;
  pen.difference = Eigen::MatrixXd::Zero(m - q, m);
  for (int r = 0; r < m - q; ++r)
    for (int j = 0; j <= q; ++j) pen.difference(r, r + j) = stencil[j];
  pen.penalty = pen.difference.transpose() * pen.difference;
  return pen;
}

}  // namespace smoothdiff
