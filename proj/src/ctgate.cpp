#include "smoothdiff/ctgate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "smoothdiff/errors.hpp"

namespace smoothdiff {

PValueFamily::PValueFamily(std::vector<double> pvalues, double alpha)
    : p_(std::move(pvalues)), alpha_(alpha) {
  if (p_.empty()) throw ParameterError("ctgate: empty p-value family");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("ctgate: alpha must lie in (0, 1)");
  for (auto& p : p_) {
    if (!std::isfinite(p)) throw ParameterError("ctgate: non-finite p-value");
    p = std::clamp(p, 0.0, 1.0);
  }
  order_.resize(p_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(), [this](int a, int b) { return p_[a] < p_[b]; });
}

bool simes_test(std::span<const double> sorted_p, double alpha) {
  if (sorted_p.empty()) throw ParameterError("ctgate::simes_test: empty set");
  const double n = static_cast<double>(sorted_p.size());
  for (std::size_t i = 0; i < sorted_p.size(); ++i) {
    if (sorted_p[i] * n <= static_cast<double>(i + 1) * alpha) return true;
  }
  return false;
}

int h_alpha(const PValueFamily& family) {
  const int n = family.size();
  std::vector<double> sorted(family.pvalues());
  std::sort(sorted.begin(), sorted.end());
  // the i largest p-values are sorted[n - i .. n)
  for (int i = n; i >= 1; --i) {
    if (!simes_test(std::span<const double>(sorted).subspan(static_cast<std::size_t>(n - i)),
                    family.alpha())) {
      return i;
    }
  }
  return 0;
}

int phi_alpha(const PValueFamily& family, std::span<const int> r, int h) {
  if (r.empty()) throw ParameterError("ctgate::phi_alpha: empty index set");
  const int size = static_cast<int>(r.size());
  for (int i : r)
    if (i < 0 || i >= family.size()) throw ParameterError("ctgate::phi_alpha: index out of range");
  if (h == 0) return size;
  std::vector<double> p;
  p.reserve(r.size());
  for (int i : r) p.push_back(family.pvalues()[static_cast<std::size_t>(i)]);
  std::sort(p.begin(), p.end());
  const double alpha = family.alpha();
  const double hd = static_cast<double>(h);
  int best = 0;
  int counted = 0;
  for (int u = 1; u <= size; ++u) {
    while (counted < size && hd * p[static_cast<std::size_t>(counted)] <= u * alpha) ++counted;
    best = std::max(best, 1 - u + counted);
  }
  return best;
}

int phi_alpha(const PValueFamily& family, std::span<const int> r) {
  return phi_alpha(family, r, h_alpha(family));
}

TdpBounds::TdpBounds(PValueFamily family) : family_(std::move(family)), h_(h_alpha(family_)) {}

double TdpBounds::tdp(std::span<const int> r) const {
  return static_cast<double>(discoveries(r)) / static_cast<double>(r.size());
}

std::vector<int> TdpBounds::prefix_discoveries() const {
  // For the k smallest p-values, phi = max_u 1 - u + min(k, c_u) where c_u counts
  // all hypotheses with h p <= u alpha.
  const int n = family_.size();
  std::vector<int> out(static_cast<std::size_t>(n + 1), 0);
  const auto& order = family_.order();
  const auto& p = family_.pvalues();
  if (h_ == 0) {
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  const double hd = static_cast<double>(h_);
  std::vector<int> c(static_cast<std::size_t>(n + 1), 0);  // c[u]
  int counted = 0;
  for (int u = 1; u <= n; ++u) {
    while (counted < n && hd * p[static_cast<std::size_t>(order[counted])] <= u * family_.alpha()) {
      ++counted;
    }
    c[u] = counted;
  }
  for (int k = 1; k <= n; ++k) {
    int best = 0;
    for (int u = 1; u <= k; ++u) best = std::max(best, 1 - u + std::min(k, c[u]));
    out[k] = best;
  }
  return out;
}

bool meets_threshold(int discoveries, int size, double threshold) {
  return size > 0 && static_cast<double>(discoveries) >= threshold * size - 1e-9;
}

std::vector<int> greedy_selection(const TdpBounds& bounds, double threshold) {
  const auto prefix = bounds.prefix_discoveries();
  const int n = bounds.family().size();
  int best = 0;
  for (int k = n; k >= 1; --k) {
    if (meets_threshold(prefix[k], k, threshold)) {
      best = k;
      break;
    }
  }
  std::vector<int> sel(bounds.family().order().begin(), bounds.family().order().begin() + best);
  std::sort(sel.begin(), sel.end());
  return sel;
}

ClosedTestingOracle::ClosedTestingOracle(const PValueFamily& family) : n_(family.size()) {
  if (n_ > 20) throw ParameterError("ctgate::closed_testing_oracle: at most 20 hypotheses");
  const std::uint32_t full = (std::uint32_t{1} << n_) - 1;
  const std::size_t count = std::size_t{1} << n_;
  const auto& order = family.order();
  const auto& p = family.pvalues();
  const double alpha = family.alpha();

  // local Simes rejection for every non-empty subset
  std::vector<std::uint8_t> local(count, 0);
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    const double size = std::popcount(mask);
    int rank = 0;
    for (int idx : order) {
      if (!(mask >> idx & 1u)) continue;
      ++rank;
      if (p[static_cast<std::size_t>(idx)] * size <= rank * alpha) {
        local[mask] = 1;
        break;
      }
    }
  }
  // closed: every superset locally rejected (superset-AND over the lattice)
  closed_ = local;
  for (int bit = 0; bit < n_; ++bit) {
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
      if (!(mask >> bit & 1u)) closed_[mask] &= closed_[mask | (1u << bit)];
    }
  }
  closed_[0] = 0;
  // largest non-rejected subset size inside each mask
  largest_unrejected_.assign(count, 0);
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    std::uint8_t best = closed_[mask] ? 0 : static_cast<std::uint8_t>(std::popcount(mask));
    if (!closed_[mask]) {
      largest_unrejected_[mask] = best;
      continue;
    }
    for (std::uint32_t rest = mask; rest; rest &= rest - 1) {
      const std::uint32_t low = rest & (~rest + 1);
      best = std::max(best, largest_unrejected_[mask ^ low]);
    }
    largest_unrejected_[mask] = best;
  }
}

int ClosedTestingOracle::discoveries(std::uint32_t mask) const {
  if (mask == 0) throw ParameterError("ctgate::closed_testing_oracle: empty index set");
  return std::popcount(mask) - largest_unrejected_[mask];
}

int ClosedTestingOracle::discoveries(std::span<const int> r) const {
  for (int i : r)
    if (i < 0 || i >= n_) throw ParameterError("ctgate::closed_testing_oracle: index out of range");
  return discoveries(to_mask(r));
}

std::uint32_t to_mask(std::span<const int> r) {
  std::uint32_t mask = 0;
  for (int i : r) mask |= std::uint32_t{1} << i;
  return mask;
}

int closed_testing_oracle(const PValueFamily& family, std::span<const int> r) {
  return ClosedTestingOracle(family).discoveries(r);
}

QueryRecord query_region(const TdpBounds& bounds, std::vector<int> set) {
  QueryRecord q;
  q.discoveries = bounds.discoveries(set);
  q.tdp_bound = static_cast<double>(q.discoveries) / static_cast<double>(set.size());
  q.set = std::move(set);
  return q;
}

TdpReport threshold_regions(const WindowTestSeries& series, double alpha,
                            std::span<const double> thresholds) {
  std::vector<double> p(series.pvalue.data(), series.pvalue.data() + series.pvalue.size());
  const TdpBounds bounds(PValueFamily(std::move(p), alpha));
  std::vector<double> taus(thresholds.begin(), thresholds.end());
  std::sort(taus.begin(), taus.end(), std::greater<>());

  TdpReport report;
  report.alpha = alpha;
  report.h = bounds.h();
  for (double tau : taus) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ParameterError("ctgate: TDP thresholds must lie in (0, 1]");
    ThresholdRegion region;
    region.threshold = tau;
    region.windows = greedy_selection(bounds, tau);
    if (!region.windows.empty()) {
      region.discoveries = bounds.discoveries(region.windows);
      region.tdp_bound = static_cast<double>(region.discoveries) / region.windows.size();
      for (int k : region.windows) region.intervals.add(series.regions[static_cast<std::size_t>(k)]);
    }
    report.regions.push_back(std::move(region));
  }
  return report;
}

}  // namespace smoothdiff
