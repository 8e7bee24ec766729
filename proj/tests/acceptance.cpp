// Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion.
//
//   smoothdiff_acceptance --cli path/to/smoothdiff [--only 3,6] [--known-failures 9]
//
// Criteria listed in --known-failures are still run and reported as FAIL;
// the exit status is non-zero when any other criterion fails or a known
// failure unexpectedly passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "smoothdiff/ctgate.hpp"
#include "smoothdiff/toeplitz.hpp"
#include "smoothdiff/sim.hpp"
#include "smoothdiff/wintest.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace smoothdiff;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

const TableCell& cell(const std::vector<TableCell>& table, double alpha, double tau) {
  for (const auto& c : table)
    if (std::abs(c.alpha - alpha) < 1e-12 && std::abs(c.threshold - tau) < 1e-12) return c;
  throw std::runtime_error("missing table cell");
}

std::string describe(const TableCell& c) {
  return fmt(c.value) + "±" + fmt(c.mc_se, 2) + " (n=" + std::to_string(c.n_replicates) + ")";
}

SimOutcome run_preset(const std::string& name, int replicates) {
  auto s = preset(name);
  s.replicates = replicates;
  return run_scenario(s);
}

// 1
Verdict shortcut_oracle() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long long queries = 0, mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    const double strength = u(rng);
    std::vector<double> p(static_cast<std::size_t>(n));
    for (auto& x : p) x = u(rng) < strength ? std::pow(u(rng), 6.0) : u(rng);
    const PValueFamily family(p, trial % 2 ? 0.05 : 0.2);
    const ClosedTestingOracle oracle(family);
    const int h = h_alpha(family);
    std::vector<int> r;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      r.clear();
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1u) r.push_back(i);
      ++queries;
      mismatches += phi_alpha(family, r, h) != oracle.discoveries(mask);
    }
  }
  return {mismatches == 0, std::to_string(queries) + " subsets, " + std::to_string(mismatches) + " mismatches"};
}

// 2 and 3 share one run
SimOutcome& table1a_run() {
  static SimOutcome out = run_preset("table1a", 500);
  return out;
}

Verdict table1a() {
  const auto& out = table1a_run();
  bool ok = true;
  std::string detail = "alpha=0.1 error";
  for (double tau : {0.9, 0.7, 0.5}) {
    const auto& c = cell(out.error_table, 0.1, tau);
    ok = ok && std::abs(c.value - 0.105) <= 0.04;
    detail += " tau" + fmt(tau) + "=" + describe(c);
  }
  detail += "; alpha=0.2 error";
  for (double tau : {0.9, 0.7, 0.5}) {
    const auto& c = cell(out.error_table, 0.2, tau);
    ok = ok && std::abs(c.value - 0.25) <= 0.06;
    detail += " tau" + fmt(tau) + "=" + fmt(c.value);
  }
  return {ok, detail + "; failed replicates " + std::to_string(out.failed)};
}

Verdict table2a() {
  const auto& out = table1a_run();
  bool ok = true;
  std::string detail = "alpha=0.1 mean TDP";
  const double target[] = {0.908, 0.705, 0.505};
  int i = 0;
  for (double tau : {0.9, 0.7, 0.5}) {
    const auto& c = cell(out.tdp_table, 0.1, tau);
    ok = ok && std::abs(c.value - target[i]) <= 0.03;
    detail += " tau" + fmt(tau) + "=" + describe(c) + " (paper " + fmt(target[i]) + ")";
    ++i;
  }
  return {ok, detail};
}

// 4
Verdict table1b() {
  const auto out = run_preset("table1b", 300);
  const auto& err = cell(out.error_table, 0.1, 0.5);
  const auto& tdp = cell(out.tdp_table, 0.1, 0.5);
  return {err.value <= 0.06 && tdp.value >= 0.53,
          "alpha=0.1 tau=0.5 error " + describe(err) + " (<=0.06), mean TDP " + describe(tdp) + " (>=0.53)"};
}

// 5
Verdict table_s1() {
  const auto out = run_preset("tableS1", 300);
  bool ok = true;
  std::string detail = "alpha=0.1 mean TDP";
  const double target[] = {0.920, 0.726, 0.522};
  int i = 0;
  for (double tau : {0.9, 0.7, 0.5}) {
    const auto& c = cell(out.tdp_table, 0.1, tau);
    ok = ok && std::abs(c.value - target[i]) <= 0.05;
    detail += " tau" + fmt(tau) + "=" + describe(c) + " (paper " + fmt(target[i]) + ")";
    ++i;
  }
  detail += "; failed replicates " + std::to_string(out.failed) + "/" + std::to_string(out.scenario.replicates) +
            " (" + fmt(100.0 * out.failed / out.scenario.replicates, 3) + "%)";
  return {ok, detail};
}

// 6
Verdict sliding_inverse() {
  std::mt19937_64 rng(1006);
  const Eigen::MatrixXd v = testing_support::random_spd(200, rng, 1.0);
  double worst = 0.0;
  bool counts_ok = true;
  std::string counts;
  for (int w : {3, 4}) {
    SlidingOptions exact;
    exact.reanchor_every = 0;
    exact.verify = false;
    SlidingStats stats;
    const auto inv = sliding_inverses(v, w, exact, &stats);
    for (std::size_t k = 0; k < inv.size(); ++k) {
      const Eigen::MatrixXd direct = v.block(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), w, w).inverse();
      worst = std::max(worst, testing_support::max_rel_error(inv[k], direct));
    }
    counts_ok = counts_ok && stats.full_factorizations == 1;
    // with periodic re-anchoring: one factorization per anchor block
    SlidingOptions anchored;
    anchored.reanchor_every = 25;
    anchored.verify = false;
    SlidingStats astats;
    const auto ainv = sliding_inverses(v, w, anchored, &astats);
    const int windows = 200 - w + 1;
    const int expected = (windows + 24) / 25;
    counts_ok = counts_ok && astats.full_factorizations == expected;
    for (std::size_t k = 0; k < ainv.size(); ++k)
      worst = std::max(worst, testing_support::max_rel_error(ainv[k], inv[k]));
    counts += " w=" + std::to_string(w) + ": " + std::to_string(stats.full_factorizations) + " factorization, " +
              std::to_string(astats.full_factorizations) + " with re-anchor every 25 (expect " +
              std::to_string(expected) + ")";
  }
  return {worst < 1e-10 && counts_ok, "max rel error " + fmt(worst, 3) + ";" + counts};
}

// 7
Verdict toeplitz_lemmas() {
  std::mt19937_64 rng(1007);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  double worst_residual = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double lam = u(rng), pi1 = u(rng) + 0.05, pi2 = u(rng);
    const double eps = pi1 * pi2 / lam + 2.0 * lam;
    const auto f = factor_pentadiagonal(PentaParams::with_matched_corners(eps, pi1 + pi2, lam, 50));
    worst_residual = std::max(worst_residual, f.residual / std::max(1.0, eps));
  }
  double worst_inverse = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const TridiagFactor f{u(rng), 0.0};
    const TridiagFactor g{f.off, 2.0 * f.off * (1.0 + u(rng))};
    const int n = 1 + static_cast<int>(rng() % 200);
    worst_inverse = std::max(worst_inverse, testing_support::max_rel_error(tridiag_toeplitz_inverse(g, n),
                                                                            tridiagonal_matrix(g, n).inverse()));
  }
  double worst_slope = 0.0;
  std::string slopes;
  // decay needs pi_1, pi_2 > 2 lambda_p
  const double cases[][3] = {{8.1, 5.0, 1.0}, {14.5, 7.5, 1.0}, {9.1, 5.0, 0.8}, {17.5, 10.5, 2.0}};
  for (const auto& c : cases) {
    const auto r = decay_rate(PentaParams::with_matched_corners(c[0], c[1], c[2], 60), 60);
    const double rel = std::abs(r.empirical_slope - r.rate) / r.rate;
    worst_slope = std::max(worst_slope, rel);
    slopes += " " + fmt(r.empirical_slope) + "/" + fmt(r.rate);
  }
  return {worst_residual < 1e-12 && worst_inverse < 1e-8 && worst_slope < 0.1,
          "residual " + fmt(worst_residual, 3) + ", tridiagonal inverse " + fmt(worst_inverse, 3) +
              ", slope/psi" + slopes + " (worst " + fmt(100 * worst_slope, 3) + "%)"};
}

// 8
Verdict quadratic_forms() {
  std::mt19937_64 rng(1008);
  std::uniform_int_distribution<int> dim(1, 5);
  double worst_rel = 0.0, worst_z = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = testing_support::random_quad_problem(dim(rng), dim(rng), rng);
    const double ds = cov_quadratic_forms(q);
    const double fr = cov_quadratic_forms_frobenius(q);
    worst_rel = std::max(worst_rel, std::abs(ds - fr) / std::abs(ds));
    const auto mc = testing_support::mc_quad_cov(q, 1000000, rng);
    worst_z = std::max({worst_z, std::abs(mc.value - ds) / mc.se, std::abs(mc.value - fr) / mc.se});
  }
  return {worst_rel < 1e-10 && worst_z < 3.0,
          "double sum vs Frobenius " + fmt(worst_rel, 3) + " rel; worst Monte Carlo deviation " + fmt(worst_z, 3) +
              " se over 50 problems"};
}

// 9
double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    d = std::max({d, (i + 1) / n - p[i], p[i] - i / n});
  return d;
}

std::pair<double, std::size_t> pooled_ks(const SimOutcome& out) {
  std::vector<double> pooled;
  for (const auto& r : out.replicates)
    if (!r.failed) pooled.insert(pooled.end(), r.pvalues.begin(), r.pvalues.end());
  return {ks_uniform(pooled), pooled.size()};
}

Verdict null_calibration() {
  auto s = preset("null");
  s.replicates = 300;
  const auto out = run_scenario(s);
  const auto [ks, count] = pooled_ks(out);
  bool fwer_ok = true;
  std::string fwer;
  for (const auto& a : out.alpha_summary) {
    fwer_ok = fwer_ok && a.any_discovery_rate <= a.alpha + 2.0 * a.any_discovery_se;
    fwer += " alpha" + fmt(a.alpha) + "=" + fmt(a.any_discovery_rate) + "±" + fmt(a.any_discovery_se, 2);
  }
  // diagnostics only: the same null under the sandwich covariance and under a tiny fixed lambda
  auto freq = s;
  freq.replicates = 100;
  freq.covariance = CovarianceKind::frequentist;
  const double ks_freq = pooled_ks(run_scenario(freq)).first;
  auto tiny = s;
  tiny.replicates = 100;
  tiny.lambda = 1e-6;
  const double ks_tiny = pooled_ks(run_scenario(tiny)).first;
  return {ks < 0.05 && fwer_ok,
          "KS " + fmt(ks, 3) + " over " + std::to_string(count) + " p-values (<0.05); any-discovery" + fwer +
              "; diagnostics: KS frequentist " + fmt(ks_freq, 3) + ", KS lambda=1e-6 " + fmt(ks_tiny, 3)};
}

// 10
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli given"};
  const fs::path root = fs::temp_directory_path() / ("smoothdiff_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  struct Run {
    std::string preset;
    std::string threads;
    std::string tag;
  };
  const std::vector<Run> runs{{"table2a", "1", "a"}, {"table2a", "1", "b"}, {"table2a", "4", "c"},
                              {"fig5", "1", "d"},    {"fig5", "3", "e"}};
  for (const auto& r : runs) {
    const std::string cmd = "\"" + cli + "\" simulate " + r.preset + " --replicates 24 --seed 777 --threads " +
                            r.threads + " --out \"" + (root / r.tag).string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
  }
  int files = 0;
  std::string diff;
  auto compare = [&](const std::string& a, const std::string& b) {
    for (const auto& e : fs::directory_iterator(root / a)) {
      ++files;
      const auto other = root / b / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) diff += " " + b + "/" + e.path().filename().string();
    }
  };
  compare("a", "b");
  compare("a", "c");
  compare("d", "e");
  fs::remove_all(root);
  return {files > 0 && diff.empty(),
          std::to_string(files) + " file comparisons across runs and thread counts" +
              (diff.empty() ? std::string(", all identical") : ", differing:" + diff)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  std::vector<int> only, known;
  app.add_option("--cli", cli, "Path to the smoothdiff executable");
  app.add_option("--only", only, "Run a subset of criteria")->delimiter(',');
  app.add_option("--known-failures", known, "Criteria documented as unattainable")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"shortcut-oracle equivalence", shortcut_oracle},
      {"Table 1a type-1 error (500 replicates)", table1a},
      {"Table 2a mean empirical TDP", table2a},
      {"conservative 30/120 regime", table1b},
      {"binary pipeline Table S1", table_s1},
      {"sliding-inverse exactness", sliding_inverse},
      {"Toeplitz factorization, inverse and decay", toeplitz_lemmas},
      {"quadratic-form covariance", quadratic_forms},
      {"null calibration", null_calibration},
      {"determinism across runs and threads", [&] { return determinism(cli); }},
  };
  const std::set<int> known_set(known.begin(), known.end());
  bool unexpected = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool is_known = known_set.count(id) > 0;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << v.detail
              << " [" << fmt(secs, 3) << " s]" << (is_known && !v.pass ? " (known failure)" : "") << std::endl;
    unexpected = unexpected || (v.pass == is_known);
  }
  return unexpected ? 1 : 0;
}
