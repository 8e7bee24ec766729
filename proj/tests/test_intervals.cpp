#include <doctest.h>

#include <random>
#include <vector>

#include "smoothdiff/intervals.hpp"

using namespace smoothdiff;

namespace {

// endpoints on the 1/8 grid; membership is decided per 1/16 cell midpoint
constexpr int kCells = 16 * 13;

std::vector<bool> cells(const std::vector<Interval>& pieces) {
  std::vector<bool> in(kCells, false);
  for (int c = 0; c < kCells; ++c) {
    const double mid = (c + 0.5) / 16.0;
    for (const auto& p : pieces) in[c] = in[c] || (p.lo <= mid && mid <= p.hi);
  }
  return in;
}

double cell_measure(const std::vector<bool>& in) {
  int n = 0;
  for (bool b : in) n += b;
  return n / 16.0;
}

std::vector<Interval> random_pieces(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 5), pos(0, 80), len(0, 16);
  std::vector<Interval> out;
  for (int i = count(rng); i > 0; --i) {
    const int a = pos(rng);
    out.push_back({a / 8.0, (a + len(rng)) / 8.0});
  }
  return out;
}

}  // namespace

TEST_CASE("interval set normalization") {
  IntervalSet s;
  s.add({3, 4});
  s.add({1, 2});
  s.add({2, 2.5});
  s.add({5, 5});
  REQUIRE(s.pieces().size() == 2u);
  CHECK(s.pieces()[0] == Interval{1, 2.5});
  CHECK(s.pieces()[1] == Interval{3, 4});
  CHECK(s.measure() == doctest::Approx(2.5));
  CHECK(IntervalSet().empty());
  CHECK(IntervalSet().measure() == 0.0);
}

TEST_CASE("hand-built intersections") {
  const std::vector<Interval> a{{0, 2}, {3, 5}};
  const std::vector<Interval> b{{1, 4}};
  const auto x = IntervalSet(a).intersect(IntervalSet(b));
  REQUIRE(x.pieces().size() == 2u);
  CHECK(x.pieces()[0] == Interval{1, 2});
  CHECK(x.pieces()[1] == Interval{3, 4});
  CHECK(IntervalSet(a).intersection_measure(IntervalSet(b)) == doctest::Approx(2.0));
  const std::vector<Interval> touching{{2, 3}};
  CHECK(IntervalSet(a).intersection_measure(IntervalSet(touching)) == 0.0);
}

TEST_CASE("interval arithmetic against a cell oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_pieces(rng);
    const auto b = random_pieces(rng);
    const IntervalSet sa(a), sb(b);
    const auto ca = cells(a), cb = cells(b);
    std::vector<bool> both(kCells);
    for (int c = 0; c < kCells; ++c) both[c] = ca[c] && cb[c];
    CHECK(sa.measure() == doctest::Approx(cell_measure(ca)).epsilon(1e-14));
    CHECK(sa.intersection_measure(sb) == doctest::Approx(cell_measure(both)).epsilon(1e-14));
    CHECK(sa.intersect(sb).measure() == doctest::Approx(cell_measure(both)).epsilon(1e-14));
    for (std::size_t i = 1; i < sa.pieces().size(); ++i)
      CHECK(sa.pieces()[i - 1].hi < sa.pieces()[i].lo);
  }
}
