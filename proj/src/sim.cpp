#include "smoothdiff/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "smoothdiff/analysis.hpp"
#include "smoothdiff/ctgate.hpp"
#include "smoothdiff/errors.hpp"

namespace smoothdiff {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean(const std::vector<double>& v) {
  return v.empty() ? kNan : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return kNan;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double parse_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw InputError("sim::apply_settings: '" + key + "' expects a number, got '" + text + "'");
  }
  return value;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw InputError("sim::apply_settings: '" + key + "' expects an integer, got '" + text + "'");
  }
  return value;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw InputError("sim::apply_settings: '" + key + "' is empty");
  return out;
}

}  // namespace

Rng replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32), 0x5eedu};
  return Rng(seq);
}

double SimScenario::min_diff_for(int replicate) const {
  if (!sweep) return min_diff;
  if (replicates <= 1) return sweep->from;
  return sweep->from + (sweep->to - sweep->from) * replicate / (replicates - 1);
}

void validate(const SimScenario& s) {
  auto fail = [](const std::string& what) { throw ParameterError("sim::validate: " + what); };
  if (s.basis_dim < s.degree + 2 || s.degree < 0) fail("basis_dim must be at least degree + 2");
  if (s.penalty_order < 1 || s.penalty_order >= s.basis_dim) fail("penalty_order out of range");
  if (s.n_nonzero <= 0 || s.n_nonzero >= s.basis_dim) fail("need 0 < n_nonzero < basis_dim");
  if (!(s.clumping >= 1.0)) fail("clumping factor must be >= 1");
  if (!(s.coef_var >= 0.0) || !(s.diff_var >= 0.0)) fail("variances must be >= 0");
  if (!(s.min_diff >= 0.0)) fail("min_diff must be >= 0");
  if (!(s.noise_var >= 0.0)) fail("noise_var must be >= 0");
  if (s.n_per_stratum < s.basis_dim) fail("n_per_stratum must be at least basis_dim");
  if (!(s.domain.lo < s.domain.hi)) fail("domain must have lo < hi");
  if (s.alphas.empty() || s.thresholds.empty()) fail("alphas and thresholds must be non-empty");
  for (double a : s.alphas) {
    if (!(a > 0.0 && a < 1.0)) fail("alpha must lie in (0, 1)");
  }
  for (double t : s.thresholds) {
    if (!(t > 0.0 && t <= 1.0)) fail("thresholds must lie in (0, 1]");
  }
  if (s.replicates < 1) fail("replicates must be >= 1");
  if (s.sweep && (!(s.sweep->from >= 0.0) || !(s.sweep->to >= 0.0))) fail("sweep bounds must be >= 0");
  if (s.lambda && !(*s.lambda > 0.0)) fail("lambda must be positive");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"table1a", "table1b", "table2a", "table2b", "tableS1",
                                              "fig5",    "fig6",    "fig8",    "example", "null"};
  return names;
}

SimScenario preset(std::string_view name) {
  SimScenario s;
  s.name = std::string(name);
  if (name == "table1a" || name == "table2a") {
    s.replicates = 2000;
  } else if (name == "table1b" || name == "table2b") {
    s.n_nonzero = 30;
  } else if (name == "tableS1") {
    s.family = Family::binomial;
    s.n_nonzero = 20;
    s.min_diff = 3.4;
    s.diff_var = 0.6;
  } else if (name == "fig5" || name == "fig6") {
    s.alphas = {0.2};
    s.sweep = EffectSweep{0.0, 2.5};
  } else if (name == "fig8") {
    s.family = Family::binomial;
    s.n_nonzero = 20;
    s.alphas = {0.2};
    s.sweep = EffectSweep{0.0, 9.0};
  } else if (name == "example") {
    s.diff_var = 0.6;
    s.min_diff = 0.93;
    s.alphas = {0.15};
  } else if (name == "null") {
    s.diff_var = 0.0;
    s.min_diff = 0.0;
  } else {
    throw ParameterError("sim::preset: unknown preset '" + std::string(name) + "'");
  }
  return s;
}

SimScenario apply_settings(SimScenario s, const std::map<std::string, std::string>& settings) {
  if (auto it = settings.find("preset"); it != settings.end()) {
    const auto seed = s.seed;
    s = preset(it->second);
    s.seed = seed;
  }
  for (const auto& [key, value] : settings) {
    if (key == "preset") continue;
    if (key == "name") s.name = value;
    else if (key == "basis_dim") s.basis_dim = static_cast<int>(parse_integer(key, value));
    else if (key == "degree") s.degree = static_cast<int>(parse_integer(key, value));
    else if (key == "penalty_order") s.penalty_order = static_cast<int>(parse_integer(key, value));
    else if (key == "n_nonzero") s.n_nonzero = static_cast<int>(parse_integer(key, value));
    else if (key == "clumping") s.clumping = parse_double(key, value);
    else if (key == "coef_var") s.coef_var = parse_double(key, value);
    else if (key == "diff_var") s.diff_var = parse_double(key, value);
    else if (key == "min_diff") s.min_diff = parse_double(key, value);
    else if (key == "noise_var") s.noise_var = parse_double(key, value);
    else if (key == "n_per_stratum") s.n_per_stratum = static_cast<int>(parse_integer(key, value));
    else if (key == "domain_lo") s.domain.lo = parse_double(key, value);
    else if (key == "domain_hi") s.domain.hi = parse_double(key, value);
    else if (key == "family") s.family = family_from_string(value);
    else if (key == "alpha" || key == "alphas") s.alphas = parse_list(key, value);
    else if (key == "tdp" || key == "thresholds") s.thresholds = parse_list(key, value);
    else if (key == "replicates") s.replicates = static_cast<int>(parse_integer(key, value));
    else if (key == "seed") s.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    else if (key == "sweep_from") s.sweep = EffectSweep{parse_double(key, value), s.sweep ? s.sweep->to : 0.0};
    else if (key == "sweep_to") s.sweep = EffectSweep{s.sweep ? s.sweep->from : 0.0, parse_double(key, value)};
    else if (key == "lambda") s.lambda = parse_double(key, value);
    else if (key == "covariance") s.covariance = covariance_from_string(value);
    else if (key == "selector") s.selector = selector_from_string(value);
    else throw InputError("sim::apply_settings: unknown key '" + key + "'");
  }
  std::sort(s.thresholds.begin(), s.thresholds.end(), std::greater<>());
  return s;
}

std::vector<int> clumped_indices(int m, int k, double nu, Rng& rng) {
  if (k <= 0 || k >= m) throw ParameterError("sim::clumped_indices: need 0 < k < m");
  if (!(nu >= 1.0)) throw ParameterError("sim::clumped_indices: need nu >= 1");
  std::vector<char> chosen(static_cast<std::size_t>(m), 0);
  std::vector<double> weight(static_cast<std::size_t>(m), 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      if (!chosen[i]) total += weight[i];
    }
    double u = unif(rng) * total;
    int pick = -1;
    for (int i = 0; i < m; ++i) {
      if (chosen[i]) continue;
      pick = i;
      if (u < weight[i]) break;
      u -= weight[i];
    }
    chosen[pick] = 1;
    out.push_back(pick);
    if (pick > 0) weight[pick - 1] = nu;
    if (pick + 1 < m) weight[pick + 1] = nu;
  }
  std::sort(out.begin(), out.end());
  return out;
}

SimCoefficients gen_coefficients(const SimScenario& s, double min_diff, Rng& rng) {
  const int m = s.basis_dim;
  SimCoefficients out;
  out.unaltered.resize(m);
  std::normal_distribution<double> coef(0.0, std::sqrt(s.coef_var));
  for (int k = 0; k < m; ++k) out.unaltered[k] = s.coef_var > 0.0 ? coef(rng) : 0.0;
  out.different = clumped_indices(m, s.n_nonzero, s.clumping, rng);
  out.altered = out.unaltered;
  std::normal_distribution<double> diff(0.0, std::sqrt(s.diff_var));
  for (int k : out.different) {
    double delta = s.diff_var > 0.0 ? diff(rng) : 0.0;
    delta += std::signbit(delta) ? -min_diff : min_diff;
    out.altered[k] += delta;
  }
  return out;
}

StratumData gen_stratum(const Eigen::VectorXd& coef, const SimScenario& s, const BasisSpec& spec,
                        Rng& rng) {
  if (coef.size() != spec.dim()) {
    throw ParameterError("sim::gen_stratum: coefficient length does not match the basis");
  }
  const int n = s.n_per_stratum;
  StratumData data;
  data.family = s.family;
  data.z.resize(n);
  data.y.resize(n);
  data.x.resize(n, 0);
  std::uniform_real_distribution<double> where(s.domain.lo, s.domain.hi);
  for (int i = 0; i < n; ++i) data.z[i] = where(rng);
  std::vector<double> local(static_cast<std::size_t>(spec.degree() + 1));
  std::normal_distribution<double> noise(0.0, std::sqrt(s.noise_var));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const int first = eval_basis_local(spec, data.z[i], local);
    double eta = 0.0;
    if (first >= 0) {
      for (int j = 0; j <= spec.degree(); ++j) eta += local[j] * coef[first + j];
    }
    if (s.family == Family::gaussian) {
      data.y[i] = s.noise_var > 0.0 ? eta + noise(rng) : eta;
    } else {
      const double prob = 1.0 / (1.0 + std::exp(-eta));
      data.y[i] = unif(rng) < prob ? 1.0 : 0.0;
    }
  }
  return data;
}

ReplicateData gen_replicate_data(const SimScenario& s, const BasisSpec& spec, int index) {
  auto rng = replicate_rng(s.seed, static_cast<std::uint64_t>(index));
  ReplicateData out;
  out.min_diff = s.min_diff_for(index);
  out.coefficients = gen_coefficients(s, out.min_diff, rng);
  out.first = gen_stratum(out.coefficients.altered, s, spec, rng);
  out.second = gen_stratum(out.coefficients.unaltered, s, spec, rng);
  return out;
}

IntervalSet truly_different_region(const BasisSpec& spec, std::span<const int> different) {
  IntervalSet out;
  for (int j : different) out.add(spec.support(j));
  return out;
}

std::vector<int> non_null_windows(const BasisSpec& spec, std::span<const int> different) {
  std::vector<int> out;
  for (int k = 0; k < spec.num_regions(); ++k) {
    const bool hit = std::any_of(different.begin(), different.end(),
                                 [&](int j) { return j >= k && j <= k + spec.degree(); });
    if (hit) out.push_back(k);
  }
  return out;
}

double empirical_tdp(const IntervalSet& selected, const IntervalSet& truth) {
  const double area = selected.measure();
  if (!(area > 0.0)) return kNan;
  return std::clamp(selected.intersection_measure(truth) / area, 0.0, 1.0);
}

ReplicateRecord run_replicate(const SimScenario& s, int index) {
  ReplicateRecord rec;
  rec.index = index;
  rec.min_diff = s.min_diff_for(index);
  try {
    const auto spec = make_basis(s.domain, s.basis_dim, s.degree);
    const auto pen = difference_penalty(s.basis_dim, s.penalty_order);
    const auto data = gen_replicate_data(s, spec, index);
    // With a zero difference (the null preset) K is drawn but nothing differs.
    const bool global_null = data.coefficients.altered == data.coefficients.unaltered;
    if (!global_null) rec.different = data.coefficients.different;
    const auto truth = truly_different_region(spec, rec.different);
    const auto truth_windows = non_null_windows(spec, rec.different);
    rec.non_null = static_cast<int>(truth_windows.size());
    rec.truth_measure = truth.measure();

    FitOptions fit_opts;
    fit_opts.covariance = s.covariance;
    fit_opts.selector = s.selector;
    const auto cmp = compare_strata(data.first, data.second, spec, pen, s.lambda, fit_opts);
    rec.lambda_first = cmp.fit1.lambda;
    rec.lambda_second = cmp.fit2.lambda;
    const auto& pv = cmp.series.pvalue;
    rec.pvalues.assign(pv.data(), pv.data() + pv.size());

    for (double alpha : s.alphas) {
      AlphaOutcome ao;
      ao.alpha = alpha;
      const TdpBounds bounds(PValueFamily(rec.pvalues, alpha));
      ao.h = bounds.h();
      if (truth_windows.empty()) {
        ao.truth_tdp_bound = kNan;
      } else {
        ao.truth_discoveries = bounds.discoveries(truth_windows);
        ao.truth_tdp_bound = bounds.tdp(truth_windows);
      }
      const auto prefix = bounds.prefix_discoveries();
      ao.any_discovery = prefix.size() > 1 && prefix[1] > 0;

      const auto report = threshold_regions(cmp.series, alpha, s.thresholds);
      for (const auto& region : report.regions) {
        ThresholdOutcome to;
        to.threshold = region.threshold;
        to.selected = static_cast<int>(region.windows.size());
        to.discoveries = region.discoveries;
        to.tdp_bound = region.tdp_bound;
        to.region_measure = region.intervals.measure();
        if (to.selected == 0) {
          to.empirical_tdp = kNan;
          to.coverage = 0.0;
        } else {
          to.empirical_tdp = truth.empty() ? 0.0 : empirical_tdp(region.intervals, truth);
          to.coverage = truth.empty() ? 0.0
                                      : region.intervals.intersection_measure(truth) / rec.truth_measure;
          to.error = to.threshold > to.empirical_tdp + 1e-9;
        }
        ao.thresholds.push_back(to);
      }
      rec.per_alpha.push_back(std::move(ao));
    }
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure = e.what();
    rec.pvalues.clear();
    rec.per_alpha.clear();
  }
  return rec;
}

SimOutcome aggregate(const SimScenario& s, std::vector<ReplicateRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const ReplicateRecord& a, const ReplicateRecord& b) { return a.index < b.index; });
  SimOutcome out;
  out.scenario = s;
  out.failed = static_cast<int>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.failed; }));
  if (out.failed == static_cast<int>(records.size())) {
    throw NumericalError("sim::run_scenario: all " + std::to_string(records.size()) +
                         " replicates failed" +
                         (records.empty() ? std::string{} : "; first: " + records.front().failure));
  }
  out.replicates = std::move(records);

  const auto sorted_thresholds = [&] {
    auto t = s.thresholds;
    std::sort(t.begin(), t.end(), std::greater<>());
    return t;
  }();

  for (std::size_t ai = 0; ai < s.alphas.size(); ++ai) {
    std::vector<double> any, truth_tdp;
    for (const auto& r : out.replicates) {
      if (r.failed) continue;
      const auto& ao = r.per_alpha[ai];
      any.push_back(ao.any_discovery ? 1.0 : 0.0);
      if (std::isfinite(ao.truth_tdp_bound)) truth_tdp.push_back(ao.truth_tdp_bound);
    }
    out.alpha_summary.push_back({s.alphas[ai], mean(any), standard_error(any), mean(truth_tdp),
                                 static_cast<int>(any.size())});

    for (std::size_t ti = 0; ti < sorted_thresholds.size(); ++ti) {
      std::vector<double> err, tdp, cov;
      for (const auto& r : out.replicates) {
        if (r.failed) continue;
        const auto& to = r.per_alpha[ai].thresholds[ti];
        cov.push_back(to.coverage);
        if (to.selected == 0) continue;
        err.push_back(to.error ? 1.0 : 0.0);
        tdp.push_back(to.empirical_tdp);
      }
      const double a = s.alphas[ai];
      const double t = sorted_thresholds[ti];
      out.error_table.push_back({a, t, mean(err), static_cast<int>(err.size()), standard_error(err)});
      out.tdp_table.push_back({a, t, mean(tdp), static_cast<int>(tdp.size()), standard_error(tdp)});
      out.coverage_table.push_back({a, t, mean(cov), static_cast<int>(cov.size()), standard_error(cov)});
    }
  }

  if (s.sweep) {
    constexpr int kBins = 10;
    const double lo = std::min(s.sweep->from, s.sweep->to);
    const double hi = std::max(s.sweep->from, s.sweep->to);
    const double width = (hi - lo) / kBins;
    for (std::size_t ai = 0; ai < s.alphas.size(); ++ai) {
      for (std::size_t ti = 0; ti < sorted_thresholds.size(); ++ti) {
        for (int b = 0; b < kBins; ++b) {
          const double blo = lo + width * b;
          const double bhi = b + 1 == kBins ? hi : lo + width * (b + 1);
          std::vector<double> tdp, truth, cov;
          int count = 0;
          for (const auto& r : out.replicates) {
            if (r.failed) continue;
            const bool inside = width > 0.0 ? (r.min_diff >= blo && (r.min_diff < bhi || b + 1 == kBins))
                                            : b == 0;
            if (!inside) continue;
            ++count;
            const auto& ao = r.per_alpha[ai];
            const auto& to = ao.thresholds[ti];
            if (std::isfinite(ao.truth_tdp_bound)) truth.push_back(ao.truth_tdp_bound);
            cov.push_back(to.coverage);
            if (to.selected > 0) tdp.push_back(to.empirical_tdp);
          }
          out.sweep_curve.push_back({s.alphas[ai], sorted_thresholds[ti], blo, bhi, mean(tdp),
                                     mean(truth), mean(cov), count});
        }
      }
    }
  }
  return out;
}

SimOutcome run_scenario_serial(const SimScenario& s) {
  validate(s);
  std::vector<ReplicateRecord> records;
  records.reserve(static_cast<std::size_t>(s.replicates));
  for (int r = 0; r < s.replicates; ++r) records.push_back(run_replicate(s, r));
  return aggregate(s, std::move(records));
}

SimOutcome run_scenario(const SimScenario& s, int threads) {
  validate(s);
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(s.replicates));
#ifdef _OPENMP
  const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(team)
  for (int r = 0; r < s.replicates; ++r) records[static_cast<std::size_t>(r)] = run_replicate(s, r);
#else
  (void)threads;
  for (int r = 0; r < s.replicates; ++r) records[static_cast<std::size_t>(r)] = run_replicate(s, r);
#endif
  return aggregate(s, std::move(records));
}

}  // namespace smoothdiff
