#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "smoothdiff/banded.hpp"
#include "smoothdiff/basis.hpp"
#include "smoothdiff/errors.hpp"

using namespace smoothdiff;

namespace {

// Cox–de Boor recursion straight from the definition, 0/0 taken as 0.
// The last non-degenerate span is closed on the right.
double cox_de_boor(const std::vector<double>& t, int j, int d, double z) {
  if (d == 0) {
    const double lo = t[j], hi = t[j + 1];
    if (lo == hi) return 0.0;
    const bool last = hi == t.back();
    return (z >= lo && (z < hi || (last && z == hi))) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  if (t[j + d] != t[j]) left = (z - t[j]) / (t[j + d] - t[j]) * cox_de_boor(t, j, d - 1, z);
  if (t[j + d + 1] != t[j + 1]) {
    right = (t[j + d + 1] - z) / (t[j + d + 1] - t[j + 1]) * cox_de_boor(t, j + 1, d - 1, z);
  }
  return left + right;
}

}  // namespace

TEST_CASE("degree-0 basis on [0,1] is the interval indicators") {
  const auto spec = make_basis({0.0, 1.0}, 4, 0);
  const std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0};
  REQUIRE(spec.knots().size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(spec.knots()[i] == doctest::Approx(expect[i]));
  CHECK(spec.num_regions() == 4);
  for (int j = 0; j < 4; ++j) {
    const auto v = eval_basis(spec, 0.25 * j + 0.1);
    for (int k = 0; k < 4; ++k) CHECK(v[k] == (k == j ? 1.0 : 0.0));
  }
}

TEST_CASE("knot layout and regions") {
  SUBCASE("paper dimensions give 117 regions") {
    const auto spec = make_basis({0.0, 10.0}, 120, 3);
    CHECK(spec.num_regions() == 117);
    CHECK(spec.knots().size() == 124u);
  }
  SUBCASE("m=5, d=2 on [0,1]") {
    const auto spec = make_basis({0.0, 1.0}, 5, 2);
    const std::vector<double> expect{0, 0, 0, 1.0 / 3, 2.0 / 3, 1, 1, 1};
    REQUIRE(spec.knots().size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(spec.knots()[i] == doctest::Approx(expect[i]));
    CHECK(spec.num_regions() == 3);
    CHECK(spec.region(0).lo == doctest::Approx(0.0));
    CHECK(spec.region(0).hi == doctest::Approx(1.0 / 3));
    CHECK(spec.region(2).lo == doctest::Approx(2.0 / 3));
    CHECK(spec.region(2).hi == doctest::Approx(1.0));
    CHECK(spec.support(0).lo == 0.0);
    CHECK(spec.support(0).hi == doctest::Approx(1.0 / 3));
    CHECK(spec.support(2).lo == 0.0);
    CHECK(spec.support(2).hi == doctest::Approx(1.0));
  }
  SUBCASE("regions tile the domain") {
    const auto spec = make_basis({-2.0, 3.0}, 17, 3);
    CHECK(spec.region(0).lo == -2.0);
    CHECK(spec.region(spec.num_regions() - 1).hi == 3.0);
    for (int k = 1; k < spec.num_regions(); ++k) CHECK(spec.region(k).lo == spec.region(k - 1).hi);
  }
  SUBCASE("deterministic") { CHECK(make_basis({0, 1}, 9, 3) == make_basis({0, 1}, 9, 3)); }
}

TEST_CASE("make_basis rejects invalid input") {
  CHECK_THROWS_AS(make_basis({0, 1}, 4, 3), ParameterError);
  CHECK_THROWS_AS(make_basis({1, 1}, 10, 3), ParameterError);
  CHECK_THROWS_AS(make_basis({2, 1}, 10, 3), ParameterError);
  CHECK_THROWS_AS(make_basis({0, std::nan("")}, 10, 3), ParameterError);
  CHECK_THROWS_AS(make_basis({0, 1}, 10, -1), ParameterError);
}

TEST_CASE("evaluation matches an independent Cox-de Boor recursion") {
  std::mt19937_64 rng(11);
  for (int d : {1, 2, 3, 4}) {
    const auto spec = make_basis({-1.0, 2.5}, 13, d);
    std::uniform_real_distribution<double> u(-1.0, 2.5);
    for (int trial = 0; trial < 300; ++trial) {
      const double z = trial == 0 ? -1.0 : trial == 1 ? 2.5 : u(rng);
      const auto v = eval_basis(spec, z);
      for (int j = 0; j < spec.dim(); ++j) {
        CHECK(v[j] == doctest::Approx(cox_de_boor(spec.knots(), j, d, z)).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("partition of unity, non-negativity and local support") {
  const auto spec = make_basis({0.0, 10.0}, 120, 3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> local(4);
  for (int i = 0; i < 10000; ++i) {
    const double z = u(rng);
    const int first = eval_basis_local(spec, z, local);
    REQUIRE(first >= 0);
    double s = 0.0;
    for (double x : local) {
      CHECK(x >= 0.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
    for (int r = 0; r < 4; ++r) {
      const auto sup = spec.support(first + r);
      CHECK(z >= sup.lo);
      CHECK(z <= sup.hi);
    }
  }
}

TEST_CASE("outside the domain gives zeros; non-finite input throws") {
  const auto spec = make_basis({0.0, 1.0}, 8, 3);
  CHECK(eval_basis(spec, -0.01).isZero());
  CHECK(eval_basis(spec, 1.01).isZero());
  CHECK(spec.span_of(1.0) == spec.num_regions() - 1);
  CHECK(spec.span_of(1.5) == -1);
  CHECK(eval_basis(spec, 1.0)[7] == doctest::Approx(1.0));
  CHECK_THROWS_AS(eval_basis(spec, std::nan("")), ParameterError);
  CHECK_THROWS_AS(eval_basis(spec, INFINITY), ParameterError);
}

TEST_CASE("constant and Greville coefficients reproduce constants and lines") {
  const int m = 15, d = 3;
  const auto spec = make_basis({0.0, 4.0}, m, d);
  Eigen::VectorXd greville(m);
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int r = 1; r <= d; ++r) s += spec.knots()[j + r];
    greville[j] = s / d;
  }
  for (double z = 0.0; z <= 4.0; z += 0.0137) {
    const auto v = eval_basis(spec, z);
    CHECK(v.dot(Eigen::VectorXd::Constant(m, 2.5)) == doctest::Approx(2.5));
    CHECK(v.dot(greville) == doctest::Approx(z).epsilon(1e-12));
  }
}

TEST_CASE("design matrix rows, ordering and Gram band") {
  const auto spec = make_basis({0.0, 1.0}, 12, 3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> z(400);
  for (auto& x : z) x = u(rng);

  SUBCASE("single row equals eval_basis") {
    const auto one = design_matrix(spec, std::vector<double>{0.37});
    CHECK((one.values.row(0).transpose() - eval_basis(spec, 0.37)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("sorted z gives non-decreasing support starts") {
    auto sorted = z;
    std::sort(sorted.begin(), sorted.end());
    const auto dm = design_matrix(spec, sorted);
    for (std::size_t i = 1; i < sorted.size(); ++i) CHECK(dm.first[i] >= dm.first[i - 1]);
  }
  SUBCASE("Gram and cross products match dense products") {
    const auto dm = design_matrix(spec, z);
    std::vector<double> w(z.size()), y(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      w[i] = 0.5 + u(rng);
      y[i] = u(rng);
    }
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::MatrixXd dense = dm.values.transpose() * wv.asDiagonal() * dm.values;
    const Eigen::MatrixXd gram = weighted_gram(dm, w);
    CHECK((gram - dense).cwiseAbs().maxCoeff() < 1e-12);
    for (int j = 0; j < 12; ++j)
      for (int k = 0; k < 12; ++k)
        if (std::abs(j - k) > 3) CHECK(gram(j, k) == 0.0);
    const Eigen::VectorXd cross = weighted_cross(dm, y, w);
    CHECK((cross - dm.values.transpose() * wv.asDiagonal() * yv).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(12, -1, 1);
    CHECK((apply_design(dm, b) - dm.values * b).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("empty input throws") { CHECK_THROWS_AS(design_matrix(spec, std::vector<double>{}), ParameterError); }
}

TEST_CASE("difference penalty") {
  SUBCASE("m=4, q=2 by hand") {
    const auto pen = difference_penalty(4, 2);
    Eigen::MatrixXd d(2, 4);
    d << 1, -2, 1, 0, 0, 1, -2, 1;
    Eigen::MatrixXd s(4, 4);
    s << 1, -2, 1, 0, -2, 5, -4, 1, 1, -4, 5, -2, 0, 1, -2, 1;
    CHECK(pen.difference == d);
    CHECK(pen.penalty == s);
  }
  SUBCASE("null space, rank and band for q=2, m=120") {
    const auto pen = difference_penalty(120, 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(120);
    const Eigen::VectorXd lin = Eigen::VectorXd::LinSpaced(120, 1, 120);
    CHECK((pen.penalty * ones).norm() < 1e-10);
    CHECK((pen.penalty * lin).norm() < 1e-10);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(pen.penalty);
    CHECK(lu.rank() == 118);
    CHECK(bandwidth_of(pen.penalty) == 2);
  }
  SUBCASE("third differences") {
    const auto pen = difference_penalty(10, 3);
    CHECK(pen.difference.row(0).head(4) == Eigen::RowVector4d(-1, 3, -3, 1));
    const Eigen::VectorXd quad = Eigen::VectorXd::LinSpaced(10, 0, 9).array().square();
    CHECK((pen.penalty * quad).norm() < 1e-9);
  }
  SUBCASE("invalid order") {
    CHECK_THROWS_AS(difference_penalty(2, 2), ParameterError);
    CHECK_THROWS_AS(difference_penalty(5, 0), ParameterError);
  }
}
