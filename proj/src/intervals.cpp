#include "smoothdiff/intervals.hpp"

#include <algorithm>

namespace smoothdiff {

IntervalSet::IntervalSet(std::span<const Interval> pieces) {
  for (const auto& p : pieces) add(p);
}

void IntervalSet::add(Interval piece) {
  if (!(piece.hi > piece.lo)) return;
  auto it = std::lower_bound(pieces_.begin(), pieces_.end(), piece,
                             [](const Interval& a, const Interval& b) { return a.hi < b.lo; });
  // it: first piece whose hi >= piece.lo, i.e. the first that may touch the new one
  auto last = it;
  while (last != pieces_.end() && last->lo <= piece.hi) {
    piece.lo = std::min(piece.lo, last->lo);
    piece.hi = std::max(piece.hi, last->hi);
    ++last;
  }
  it = pieces_.erase(it, last);
  pieces_.insert(it, piece);
}

double IntervalSet::measure() const noexcept {
  double total = 0.0;
  for (const auto& p : pieces_) total += p.length();
  return total;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  IntervalSet out;
  std::size_t i = 0, j = 0;
  while (i < pieces_.size() && j < other.pieces_.size()) {
    const auto& a = pieces_[i];
    const auto& b = other.pieces_[j];
    const double lo = std::max(a.lo, b.lo);
    const double hi = std::min(a.hi, b.hi);
    if (hi > lo) out.pieces_.push_back({lo, hi});
    if (a.hi < b.hi) ++i; else ++j;
  }
  return out;
}

double IntervalSet::intersection_measure(const IntervalSet& other) const {
  return intersect(other).measure();
}

}  // namespace smoothdiff
