#pragma once

#include <span>
#include <vector>

namespace smoothdiff {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double length() const noexcept { return hi > lo ? hi - lo : 0.0; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Finite union of closed intervals kept as sorted, disjoint, non-degenerate pieces.
class IntervalSet {
 public:
  IntervalSet() = default;
  explicit IntervalSet(std::span<const Interval> pieces);

  void add(Interval piece);

  [[nodiscard]] const std::vector<Interval>& pieces() const noexcept { return pieces_; }
  [[nodiscard]] bool empty() const noexcept { return pieces_.empty(); }
  /// Lebesgue measure.
  [[nodiscard]] double measure() const noexcept;

  [[nodiscard]] IntervalSet intersect(const IntervalSet& other) const;
  [[nodiscard]] double intersection_measure(const IntervalSet& other) const;

 private:
  std::vector<Interval> pieces_;
};

}  // namespace smoothdiff
