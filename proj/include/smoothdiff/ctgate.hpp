#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smoothdiff/intervals.hpp"
#include "smoothdiff/wintest.hpp"

namespace smoothdiff {

/// Elementary-hypothesis p-values with a significance level. Values are
/// clamped into [0, 1]; non-finite values and an empty family are rejected.
class PValueFamily {
 public:
  PValueFamily(std::vector<double> pvalues, double alpha);

  [[nodiscard]] const std::vector<double>& pvalues() const noexcept { return p_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] int size() const noexcept { return static_cast<int>(p_.size()); }
  /// Indices ordered by ascending p-value, ties by index.
  [[nodiscard]] const std::vector<int>& order() const noexcept { return order_; }

 private:
  std::vector<double> p_;
  double alpha_;
  std::vector<int> order_;
};

/// Simes local test on ascending p-values: rejects iff p_(i) * n <= i * alpha for some i.
bool simes_test(std::span<const double> sorted_p, double alpha);

/// Size of the largest set of top p-values that Simes does not reject.
int h_alpha(const PValueFamily& family);

/// Closed-testing lower confidence bound on the number of false nulls in R,
/// via the Simes shortcut given a precomputed h_alpha.
int phi_alpha(const PValueFamily& family, std::span<const int> r, int h);
int phi_alpha(const PValueFamily& family, std::span<const int> r);

/// Bound on true discoveries for any index set, simultaneous over all sets.
class TdpBounds {
 public:
  explicit TdpBounds(PValueFamily family);

  [[nodiscard]] const PValueFamily& family() const noexcept { return family_; }
  [[nodiscard]] int h() const noexcept { return h_; }
  [[nodiscard]] int discoveries(std::span<const int> r) const { return phi_alpha(family_, r, h_); }
  [[nodiscard]] double tdp(std::span<const int> r) const;
  /// Bound for the k smallest p-values (ties by index), for all k = 0..n at once.
  [[nodiscard]] std::vector<int> prefix_discoveries() const;

 private:
  PValueFamily family_;
  int h_;
};

/// True when bound / size meets the threshold, with round-off slack.
bool meets_threshold(int discoveries, int size, double threshold);

/// Largest hypothesis set whose TDP bound is at least the threshold, built by
/// taking p-values in ascending order. Empty when no set qualifies.
std::vector<int> greedy_selection(const TdpBounds& bounds, double threshold);

/// Exhaustive closed testing with Simes local tests over the full powerset.
/// Limited to 20 hypotheses.
class ClosedTestingOracle {
 public:
  explicit ClosedTestingOracle(const PValueFamily& family);

  [[nodiscard]] int size() const noexcept { return n_; }
  /// Whether the intersection hypothesis over `mask` is rejected by closed testing.
  [[nodiscard]] bool rejected(std::uint32_t mask) const { return closed_[mask] != 0; }
  [[nodiscard]] int discoveries(std::uint32_t mask) const;
  [[nodiscard]] int discoveries(std::span<const int> r) const;

 private:
  int n_;
  std::vector<std::uint8_t> closed_;
  std::vector<std::uint8_t> largest_unrejected_;  // max #S, S subset of mask, S not rejected
};

int closed_testing_oracle(const PValueFamily& family, std::span<const int> r);

std::uint32_t to_mask(std::span<const int> r);

struct QueryRecord {
  std::vector<int> set;
  int discoveries = 0;
  double tdp_bound = 0.0;
};

struct ThresholdRegion {
  double threshold = 0.0;
  std::vector<int> windows;  // ascending window indices
  int discoveries = 0;
  double tdp_bound = 0.0;
  IntervalSet intervals;     // union of the knot spans of the selected windows
};

struct TdpReport {
  double alpha = 0.0;
  int h = 0;
  std::vector<QueryRecord> queries;
  std::vector<ThresholdRegion> regions;  // thresholds in descending order
};

/// Greedy TDP regions for each threshold (sorted descending internally).
TdpReport threshold_regions(const WindowTestSeries& series, double alpha,
                            std::span<const double> thresholds);

/// Records the bound for an arbitrary window set in a report.
QueryRecord query_region(const TdpBounds& bounds, std::vector<int> set);

}  // namespace smoothdiff
