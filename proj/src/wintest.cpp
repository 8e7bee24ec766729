#include "smoothdiff/wintest.hpp"

#include <sstream>

#include "smoothdiff/chi_square.hpp"
#include "smoothdiff/errors.hpp"

namespace smoothdiff {

namespace {

Eigen::MatrixXd direct_inverse(const Eigen::MatrixXd& block, int k) {
  const Eigen::LLT<Eigen::MatrixXd> llt(block);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("wintest::sliding_inverses: window " + std::to_string(k) +
                         " is not positive definite");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(block.rows(), block.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

SlidingInverse::SlidingInverse(const Eigen::MatrixXd& v, int width, SlidingOptions opts)
    : v_(v), width_(width), count_(static_cast<int>(v.rows()) - width + 1), opts_(opts) {
  if (v.rows() != v.cols()) throw ParameterError("wintest::sliding_inverses: matrix not square");
  if (width < 1 || width > v.rows()) {
    throw ParameterError("wintest::sliding_inverses: window width out of range");
  }
  factor_directly();
}

void SlidingInverse::factor_directly() {
  inv_ = direct_inverse(v_.block(k_, k_, width_, width_), k_);
  ++stats_.full_factorizations;
}

void SlidingInverse::verify() {
  // uncounted check against a direct inverse
  const Eigen::MatrixXd ref = direct_inverse(v_.block(k_, k_, width_, width_), k_);
  const double err = (inv_ - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff();
  stats_.max_verify_error = std::max(stats_.max_verify_error, err);
  if (err > opts_.verify_tolerance) {
    std::ostringstream msg;
    msg << "wintest::sliding_inverses: incremental inverse drifted at window " << k_
        << " (relative error " << err << ")";
    throw NumericalError(msg.str());
  }
}

bool SlidingInverse::next() {
  if (k_ + 1 >= count_) {
    k_ = count_;
    return false;
  }
  ++k_;
  if (opts_.reanchor_every > 0 && k_ % opts_.reanchor_every == 0) {
    factor_directly();
    return true;
  }
  const int c = width_ - 1;
  if (c == 0) {
    const double s = v_(k_, k_);
    if (!(s > 0.0)) {
      throw NumericalError("wintest::sliding_inverses: window " + std::to_string(k_) +
                           " is not positive definite");
    }
    inv_(0, 0) = 1.0 / s;
    if (opts_.verify) verify();
    return true;
  }
  // Delete the leading row/column: with S^{-1} = [e f^T; f G], S_c^{-1} = G - f f^T / e.
  const double e = inv_(0, 0);
  const Eigen::VectorXd f = inv_.col(0).tail(c);
  common_ = inv_.bottomRightCorner(c, c) - f * f.transpose() / e;
  // Add the trailing row/column [b*; d*] via the Schur complement s = d* - b*^T S_c^{-1} b*.
  const int last = k_ + c;
  const Eigen::VectorXd b = v_.col(last).segment(k_, c);
  const Eigen::VectorXd u = common_ * b;
  const double s = v_(last, last) - b.dot(u);
  if (!(s > 0.0)) {
    throw NumericalError("wintest::sliding_inverses: window " + std::to_string(k_) +
                         " lost positive definiteness (Schur complement " + std::to_string(s) + ")");
  }
  inv_.topLeftCorner(c, c) = common_ + u * u.transpose() / s;
  inv_.col(c).head(c) = -u / s;
  inv_.row(c).head(c) = -u.transpose() / s;
  inv_(c, c) = 1.0 / s;
  if (opts_.verify) verify();
  return true;
}

std::vector<Eigen::MatrixXd> sliding_inverses(const Eigen::MatrixXd& v, int width,
                                              SlidingOptions opts, SlidingStats* stats) {
  SlidingInverse it(v, width, opts);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(it.count()));
  do {
    out.push_back(it.inverse());
  } while (it.next());
  if (stats) *stats = it.stats();
  return out;
}

WindowTestSeries window_statistics(const StratumFit& fit1, const StratumFit& fit2,
                                   const BasisSpec& spec, SlidingOptions opts) {
  const Eigen::Index m = spec.dim();
  if (fit1.coef.size() != m || fit2.coef.size() != m || fit1.covariance.rows() != m ||
      fit2.covariance.rows() != m) {
    throw ParameterError("wintest::window_statistics: fits do not match the basis dimension");
  }
  const int w = spec.degree() + 1;
  const Eigen::VectorXd diff = fit1.coef - fit2.coef;
  const Eigen::MatrixXd vsum = fit1.covariance + fit2.covariance;

  WindowTestSeries out;
  out.width = w;
  const int count = spec.num_regions();
  out.statistic.resize(count);
  out.pvalue.resize(count);
  out.regions.reserve(static_cast<std::size_t>(count));
  SlidingInverse it(vsum, w, opts);
  for (int k = 0; k < count; ++k) {
    const auto seg = diff.segment(k, w);
    const double t = std::max(0.0, seg.dot(it.inverse() * seg));
    out.statistic[k] = t;
    out.pvalue[k] = chi_square_sf(t, w);
    out.regions.push_back(spec.region(k));
    it.next();
  }
  return out;
}

}  // namespace smoothdiff
