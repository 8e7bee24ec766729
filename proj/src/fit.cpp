#include "smoothdiff/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "smoothdiff/banded.hpp"
#include "smoothdiff/errors.hpp"

namespace smoothdiff {

std::string to_string(Family f) { return f == Family::gaussian ? "gaussian" : "binomial"; }

Family family_from_string(const std::string& name) {
  if (name == "gaussian") return Family::gaussian;
  if (name == "binomial") return Family::binomial;
  throw ParameterError("unknown family '" + name + "' (expected gaussian or binomial)");
}

std::string to_string(CovarianceKind k) {
  return k == CovarianceKind::bayesian ? "bayesian" : "frequentist";
}

CovarianceKind covariance_from_string(const std::string& name) {
  if (name == "bayesian") return CovarianceKind::bayesian;
  if (name == "frequentist") return CovarianceKind::frequentist;
  throw ParameterError("unknown covariance '" + name + "' (expected bayesian or frequentist)");
}

std::string to_string(LambdaSelector s) { return s == LambdaSelector::gcv ? "gcv" : "reml"; }

LambdaSelector selector_from_string(const std::string& name) {
  if (name == "gcv") return LambdaSelector::gcv;
  if (name == "reml") return LambdaSelector::reml;
  throw ParameterError("unknown lambda selector '" + name + "' (expected gcv or reml)");
}

namespace {

struct WorkingSolution {
  Eigen::VectorXd fixed;
  Eigen::VectorXd coef;
  Eigen::MatrixXd inverse;  // m x m block of the inverse penalized information
  Eigen::MatrixXd sandwich; // m x m block of C^-1 I C^-1, when requested
  double edf = 0.0;
};

double dense_condition(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff(), hi = ev.maxCoeff();
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

/// Design, kept fixed-effect columns and the penalty for one stratum.
class StratumProblem {
 public:
  StratumProblem(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                 const char* op)
      : data_(data), spec_(spec), pen_(pen), op_(op) {
    const auto n = data.y.size();
    if (n == 0) throw ParameterError(std::string("fit::") + op + ": empty stratum");
    if (data.z.size() != n) throw ParameterError(std::string("fit::") + op + ": y/z length mismatch");
    if (data.x.cols() > 0 && data.x.rows() != n) {
      throw ParameterError(std::string("fit::") + op + ": fixed-effect row count mismatch");
    }
    if (pen.dim() != spec.dim()) {
      throw ParameterError(std::string("fit::") + op + ": penalty dimension does not match basis");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(data.y[i]) || !std::isfinite(data.z[i])) {
        throw ParameterError(std::string("fit::") + op + ": non-finite data at row " +
                             std::to_string(i));
      }
    }
    design_ = design_matrix(spec, std::span<const double>(data.z.data(), static_cast<std::size_t>(n)));
    // Z spans the intercept, so a constant fixed-effect column would make the block
    // system singular; it is absorbed by the spline instead.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < data.x.cols(); ++c) {
      const auto col = data.x.col(c);
      const double lo = col.minCoeff(), hi = col.maxCoeff();
      if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
        dropped_.push_back(static_cast<int>(c));
      } else {
        keep.push_back(c);
      }
    }
    x_.resize(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) x_.col(static_cast<Eigen::Index>(k)) = data.x.col(keep[k]);
    kept_ = keep;
  }

  [[nodiscard]] const DesignMatrix& design() const { return design_; }
  [[nodiscard]] Eigen::Index n() const { return data_.y.size(); }
  [[nodiscard]] Eigen::Index p() const { return x_.cols(); }

  WorkingSolution solve(std::span<const double> weights, std::span<const double> response,
                        double lambda, SolverKind solver, bool sandwich = false) const {
    const Eigen::Index m = spec_.dim();
    const Eigen::MatrixXd gram = weighted_gram(design_, weights);
    const Eigen::VectorXd zr = weighted_cross(design_, response, weights);
    WorkingSolution out;
    if (p() == 0) {
      const Eigen::MatrixXd a = gram + lambda * pen_.penalty;
      if (solver == SolverKind::banded) {
        const int bw = std::max(spec_.degree(), pen_.order);
        try {
          const BandedCholesky chol(a, bw);
          out.coef = chol.solve(zr);
          out.inverse = chol.inverse();
        } catch (const NumericalError& e) {
          std::ostringstream msg;
          msg << "fit::" << op_ << ": penalized system singular (lambda=" << lambda
              << ", condition~" << dense_condition(a) << "): " << e.what();
          throw NumericalError(msg.str());
        }
      } else {
        const Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) singular(a, lambda);
        out.coef = llt.solve(zr);
        out.inverse = llt.solve(Eigen::MatrixXd::Identity(m, m));
        out.inverse = 0.5 * (out.inverse + out.inverse.transpose()).eval();
      }
      out.fixed = Eigen::VectorXd::Zero(0);
      out.edf = out.inverse.cwiseProduct(gram).sum();
      if (sandwich) out.sandwich = out.inverse * gram * out.inverse;
      return out;
    }

    const Eigen::Index p = this->p();
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n());
    if (!weights.empty()) w = Eigen::Map<const Eigen::VectorXd>(weights.data(), n());
    const Eigen::Map<const Eigen::VectorXd> r(response.data(), n());
    const Eigen::MatrixXd wx = w.asDiagonal() * x_;
    Eigen::MatrixXd info(p + m, p + m);
    info.topLeftCorner(p, p) = x_.transpose() * wx;
    info.topRightCorner(p, m) = wx.transpose() * design_.values;
    info.bottomLeftCorner(m, p) = info.topRightCorner(p, m).transpose();
    info.bottomRightCorner(m, m) = gram;
    Eigen::MatrixXd c = info;
    c.bottomRightCorner(m, m) += lambda * pen_.penalty;
    Eigen::VectorXd rhs(p + m);
    rhs.head(p) = wx.transpose() * r;
    rhs.tail(m) = zr;
    const Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) singular(c, lambda);
    const Eigen::VectorXd sol = llt.solve(rhs);
    Eigen::MatrixXd cinv = llt.solve(Eigen::MatrixXd::Identity(p + m, p + m));
    cinv = 0.5 * (cinv + cinv.transpose()).eval();
    out.fixed = sol.head(p);
    out.coef = sol.tail(m);
    out.inverse = cinv.bottomRightCorner(m, m);
    out.edf = cinv.cwiseProduct(info).sum();
    if (sandwich) out.sandwich = (cinv * info * cinv).bottomRightCorner(m, m);
    return out;
  }

  [[nodiscard]] Eigen::VectorXd linear_predictor(const Eigen::VectorXd& fixed,
                                                 const Eigen::VectorXd& coef) const {
    Eigen::VectorXd eta = apply_design(design_, coef);
    if (p() > 0) eta += x_ * fixed;
    return eta;
  }

  [[nodiscard]] Eigen::VectorXd kept_fixed(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(kept_.size()));
    for (std::size_t k = 0; k < kept_.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[kept_[k]];
    return out;
  }

  [[nodiscard]] Eigen::VectorXd full_fixed(const Eigen::VectorXd& kept) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(data_.x.cols());
    for (std::size_t k = 0; k < kept_.size(); ++k) out[kept_[k]] = kept[static_cast<Eigen::Index>(k)];
    return out;
  }

  [[nodiscard]] const Eigen::MatrixXd& fixed_design() const { return x_; }
  [[nodiscard]] const std::vector<int>& dropped() const { return dropped_; }
  [[nodiscard]] const PenaltyMatrix& penalty() const { return pen_; }

 private:
  [[noreturn]] void singular(const Eigen::MatrixXd& a, double lambda) const {
    std::ostringstream msg;
    msg << "fit::" << op_ << ": penalized system singular (lambda=" << lambda
        << ", condition~" << dense_condition(a) << ")";
    throw NumericalError(msg.str());
  }

  const StratumData& data_;
  const BasisSpec& spec_;
  const PenaltyMatrix& pen_;
  const char* op_;
  DesignMatrix design_;
  Eigen::MatrixXd x_;
  std::vector<Eigen::Index> kept_;
  std::vector<int> dropped_;
};

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

StratumFit gaussian_at(const StratumProblem& prob, const StratumData& data, double lambda,
                       const FitOptions& opts) {
  if (!(lambda >= 0.0)) throw ParameterError("fit::fit_gaussian: lambda must be non-negative");
  const bool sandwich = opts.covariance == CovarianceKind::frequentist;
  auto sol = prob.solve({}, as_span(data.y), lambda, opts.solver, sandwich);
  const Eigen::VectorXd resid = data.y - prob.linear_predictor(sol.fixed, sol.coef);
  StratumFit fit;
  fit.family = Family::gaussian;
  fit.lambda = lambda;
  fit.n = prob.n();
  fit.edf = sol.edf;
  fit.deviance = resid.squaredNorm();
  const double dof = static_cast<double>(prob.n()) - fit.edf;
  if (!(dof > 0.0)) {
    throw NumericalError("fit::fit_gaussian: no residual degrees of freedom (edf=" +
                         std::to_string(fit.edf) + ")");
  }
  fit.dispersion = fit.deviance / dof;
  fit.coef = std::move(sol.coef);
  fit.fixed = prob.full_fixed(sol.fixed);
  fit.covariance = fit.dispersion * (sandwich ? sol.sandwich : sol.inverse);
  fit.dropped_columns = prob.dropped();
  fit.iterations = 1;
  return fit;
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // -log mu = softplus(-eta), -log(1 - mu) = softplus(eta)
    dev += y[i] * softplus(-eta[i]) + (1.0 - y[i]) * softplus(eta[i]);
  }
  return 2.0 * dev;
}

double inv_logit(double eta) {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

StratumFit binomial_at(const StratumProblem& prob, const StratumData& data, double lambda,
                       const FitOptions& opts) {
  if (!(lambda >= 0.0)) throw ParameterError("fit::fit_binomial: lambda must be non-negative");
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    if (data.y[i] != 0.0 && data.y[i] != 1.0) {
      throw ParameterError("fit::fit_binomial: outcomes must be 0 or 1 (row " + std::to_string(i) + ")");
    }
  }
  const Eigen::Index n = prob.n();
  const auto& s = prob.penalty().penalty;
  Eigen::VectorXd mu = (data.y.array() + 0.5) / 2.0;
  Eigen::VectorXd eta = (mu.array() / (1.0 - mu.array())).log();
  Eigen::VectorXd w(n), work(n);
  Eigen::VectorXd coef, fixed;
  double pen_dev_old = std::numeric_limits<double>::infinity();
  std::vector<double> trace;

  auto check_separation = [&](const Eigen::VectorXd& e) {
    const double peak = e.cwiseAbs().maxCoeff();
    if (peak > opts.separation_eta) {
      std::ostringstream msg;
      msg << "fit::fit_binomial: separation detected, |linear predictor| reached " << peak
          << " (lambda=" << lambda << ")";
      throw NumericalError(msg.str());
    }
  };

  bool converged = false;
  int iter = 0;
  for (iter = 1; iter <= opts.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
      work[i] = eta[i] + (data.y[i] - mu[i]) / w[i];
    }
    auto sol = prob.solve(as_span(w), as_span(work), lambda, opts.solver);
    Eigen::VectorXd eta_new = prob.linear_predictor(sol.fixed, sol.coef);
    double dev = binomial_deviance(data.y, eta_new);
    double pen_dev = dev + lambda * sol.coef.dot(s * sol.coef);
    // step halving on a penalized-deviance increase
    for (int half = 0; half < 30 && iter > 1 && pen_dev > pen_dev_old * (1.0 + 1e-12) + 1e-12; ++half) {
      sol.coef = 0.5 * (sol.coef + coef);
      sol.fixed = 0.5 * (sol.fixed + fixed);
      eta_new = prob.linear_predictor(sol.fixed, sol.coef);
      dev = binomial_deviance(data.y, eta_new);
      pen_dev = dev + lambda * sol.coef.dot(s * sol.coef);
    }
    check_separation(eta_new);
    coef = std::move(sol.coef);
    fixed = std::move(sol.fixed);
    eta = std::move(eta_new);
    for (Eigen::Index i = 0; i < n; ++i) mu[i] = inv_logit(eta[i]);
    trace.push_back(pen_dev);
    if (std::abs(pen_dev - pen_dev_old) / (std::abs(pen_dev) + 0.1) < opts.tolerance) {
      converged = true;
      break;
    }
    pen_dev_old = pen_dev;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "fit::fit_binomial: IRLS did not converge in " << opts.max_iterations
        << " iterations; penalized deviance trace:";
    for (double t : trace) msg << ' ' << t;
    throw NumericalError(msg.str());
  }
  for (Eigen::Index i = 0; i < n; ++i) w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
  const bool sandwich = opts.covariance == CovarianceKind::frequentist;
  const auto fin = prob.solve(as_span(w), as_span(eta), lambda, opts.solver, sandwich);

  StratumFit fit;
  fit.family = Family::binomial;
  fit.lambda = lambda;
  fit.n = n;
  fit.coef = std::move(coef);
  fit.fixed = prob.full_fixed(fixed);
  fit.dispersion = 1.0;
  fit.covariance = sandwich ? fin.sandwich : fin.inverse;
  fit.edf = fin.edf;
  fit.deviance = binomial_deviance(data.y, eta);
  fit.iterations = iter;
  fit.deviance_trace = std::move(trace);
  fit.dropped_columns = prob.dropped();
  return fit;
}

StratumFit fit_at(const StratumProblem& prob, const StratumData& data, double lambda,
                  const FitOptions& opts) {
  return data.family == Family::gaussian ? gaussian_at(prob, data, lambda, opts)
                                         : binomial_at(prob, data, lambda, opts);
}

}  // namespace

StratumFit fit_gaussian(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                        double lambda, const FitOptions& opts) {
  const StratumProblem prob(data, spec, pen, "fit_gaussian");
  return gaussian_at(prob, data, lambda, opts);
}

StratumFit fit_binomial(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                        double lambda, const FitOptions& opts) {
  const StratumProblem prob(data, spec, pen, "fit_binomial");
  return binomial_at(prob, data, lambda, opts);
}

StratumFit fit_stratum(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                       double lambda, const FitOptions& opts) {
  return data.family == Family::gaussian ? fit_gaussian(data, spec, pen, lambda, opts)
                                         : fit_binomial(data, spec, pen, lambda, opts);
}

std::vector<double> default_lambda_grid(const StratumData& data, const BasisSpec& spec,
                                        const PenaltyMatrix& pen) {
  const auto design = design_matrix(
      spec, std::span<const double>(data.z.data(), static_cast<std::size_t>(data.z.size())));
  double tr_gram = 0.0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) tr_gram += design.values.row(i).squaredNorm();
  const double tr_pen = pen.penalty.trace();
  const double scale = tr_pen > 0.0 && tr_gram > 0.0 ? tr_gram / tr_pen : 1.0;
  constexpr int kPoints = 40;
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    grid[i] = scale * std::pow(10.0, -4.0 + 8.0 * i / (kPoints - 1));
  }
  return grid;
}

std::vector<double> gcv_scores(const StratumData& data, const BasisSpec& spec,
                               const PenaltyMatrix& pen, std::span<const double> grid,
                               const FitOptions& opts) {
  const StratumProblem prob(data, spec, pen, "select_lambda");
  const double n = static_cast<double>(prob.n());
  std::vector<double> scores;
  scores.reserve(grid.size());
  for (double lambda : grid) {
    try {
      const auto fit = fit_at(prob, data, lambda, opts);
      const double denom = n - fit.edf;
      scores.push_back(denom > 0.0 ? n * fit.deviance / (denom * denom)
                                   : std::numeric_limits<double>::quiet_NaN());
    } catch (const NumericalError&) {
      scores.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return scores;
}

std::vector<double> reml_scores(const StratumData& data, const BasisSpec& spec,
                                const PenaltyMatrix& pen, std::span<const double> grid,
                                const FitOptions& opts) {
  const StratumProblem prob(data, spec, pen, "select_lambda");
  const Eigen::Index n = prob.n(), m = spec.dim(), p = prob.p();
  const double rank = static_cast<double>(m - pen.order);
  const double null_dim = static_cast<double>(p + pen.order);
  const auto& x = prob.fixed_design();
  std::vector<double> scores;
  scores.reserve(grid.size());
  for (double lambda : grid) {
    try {
      if (!(lambda > 0.0)) throw NumericalError("fit::select_lambda: REML needs lambda > 0");
      const auto fit = fit_at(prob, data, lambda, opts);
      Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
      if (data.family == Family::binomial) {
        Eigen::VectorXd eta = prob.linear_predictor(prob.kept_fixed(fit.fixed), fit.coef);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double mu = inv_logit(eta[i]);
          w[i] = std::max(mu * (1.0 - mu), 1e-12);
        }
      }
      Eigen::MatrixXd c(p + m, p + m);
      const Eigen::MatrixXd wx = w.asDiagonal() * x;
      c.topLeftCorner(p, p) = x.transpose() * wx;
      c.topRightCorner(p, m) = wx.transpose() * prob.design().values;
      c.bottomLeftCorner(m, p) = c.topRightCorner(p, m).transpose();
      c.bottomRightCorner(m, m) =
          weighted_gram(prob.design(), {w.data(), static_cast<std::size_t>(n)}) + lambda * pen.penalty;
      const Eigen::LLT<Eigen::MatrixXd> llt(c);
      if (llt.info() != Eigen::Success) throw NumericalError("fit::select_lambda: singular system");
      const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      const double rough = lambda * fit.coef.dot(pen.penalty * fit.coef);
      const double core = data.family == Family::gaussian
                              ? (static_cast<double>(n) - null_dim) * std::log(fit.deviance + rough)
                              : fit.deviance + rough;
      scores.push_back(core + log_det - rank * std::log(lambda));
    } catch (const NumericalError&) {
      scores.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return scores;
}

double select_lambda(const StratumData& data, const BasisSpec& spec, const PenaltyMatrix& pen,
                     std::span<const double> grid, const FitOptions& opts) {
  std::vector<double> owned;
  if (grid.empty()) {
    owned = default_lambda_grid(data, spec, pen);
    grid = owned;
  }
  const bool reml = opts.selector == LambdaSelector::reml;
  const auto scores = reml ? reml_scores(data, spec, pen, grid, opts)
                           : gcv_scores(data, spec, pen, grid, opts);
  double best = std::numeric_limits<double>::infinity();
  for (double s : scores)
    if (std::isfinite(s)) best = std::min(best, s);
  if (!std::isfinite(best)) {
    throw NumericalError("fit::select_lambda: every candidate lambda failed");
  }
  double tol = 0.0;
  if (reml) {
    tol = 1e-9 * std::max(1.0, std::abs(best));
  } else {
    const double ref = data.family == Family::gaussian
                           ? data.y.squaredNorm() / static_cast<double>(data.y.size())
                           : 1.0;
    tol = 1e-9 * best + 1e-14 * ref;
  }
  double chosen = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::isfinite(scores[i]) && scores[i] <= best + tol) chosen = std::max(chosen, grid[i]);
  }
  return chosen;
}

Eigen::VectorXd smooth_values(const StratumFit& fit, const BasisSpec& spec,
                              std::span<const double> z) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(z.size()));
  std::vector<double> local(static_cast<std::size_t>(spec.degree() + 1));
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int first = eval_basis_local(spec, z[i], local);
    double s = 0.0;
    if (first >= 0)
      for (int r = 0; r <= spec.degree(); ++r) s += local[r] * fit.coef[first + r];
    out[static_cast<Eigen::Index>(i)] = s;
  }
  return out;
}

}  // namespace smoothdiff
