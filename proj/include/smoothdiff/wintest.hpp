#pragma once

#include <vector>

#include <Eigen/Dense>

#include "smoothdiff/basis.hpp"
#include "smoothdiff/fit.hpp"

namespace smoothdiff {

struct SlidingOptions {
  /// Recompute the window inverse directly every this many windows; 0 disables.
  int reanchor_every = 64;
#ifdef NDEBUG
  bool verify = false;
#else
  bool verify = true;
#endif
  /// Max-norm relative tolerance for the verification against direct inversion.
  double verify_tolerance = 1e-8;
};

struct SlidingStats {
  int full_factorizations = 0;
  double max_verify_error = 0.0;
};

/// Inverses of the w x w diagonal windows of a symmetric positive-definite
/// matrix, each derived from its predecessor by a row/column deletion
/// followed by a row/column addition.
class SlidingInverse {
 public:
  SlidingInverse(const Eigen::MatrixXd& v, int width, SlidingOptions opts = {});

  [[nodiscard]] int window() const noexcept { return k_; }
  [[nodiscard]] int count() const noexcept { return count_; }
  [[nodiscard]] const Eigen::MatrixXd& inverse() const noexcept { return inv_; }
  /// Advance to the next window; false once the last window has been passed.
  bool next();

  [[nodiscard]] const SlidingStats& stats() const noexcept { return stats_; }

 private:
  void factor_directly();
  void verify();

  const Eigen::MatrixXd& v_;
  int width_;
  int count_;
  int k_ = 0;
  SlidingOptions opts_;
  Eigen::MatrixXd inv_;
  Eigen::MatrixXd common_;
  SlidingStats stats_;
};

/// All window inverses for k = 0 .. m - w.
std::vector<Eigen::MatrixXd> sliding_inverses(const Eigen::MatrixXd& v, int width,
                                              SlidingOptions opts = {},
                                              SlidingStats* stats = nullptr);

struct WindowTestSeries {
  int width = 0;                 // d + 1
  Eigen::VectorXd statistic;     // T_k
  Eigen::VectorXd pvalue;        // chi-square(d + 1) upper tail
  std::vector<Interval> regions; // knot span of window k
};

/// Quadratic-form statistics of the coefficient differences over every window
/// of d + 1 adjacent coefficients.
WindowTestSeries window_statistics(const StratumFit& fit1, const StratumFit& fit2,
                                   const BasisSpec& spec, SlidingOptions opts = {});

}  // namespace smoothdiff
