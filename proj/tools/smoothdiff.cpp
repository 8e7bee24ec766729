// smoothdiff: two-stratum smooth comparison with simultaneous TDP bounds.
//
//   smoothdiff analyze  --data both.csv --alpha 0.05 --tdp 0.9,0.7,0.5 --out results/
//   smoothdiff simulate table1a --replicates 200 --threads 4 --out sim/
//   smoothdiff diagnose --epsilon 5 --theta 4 --lambda-p 1 --n 60
//
// Exit codes: 0 success, 2 bad input or parameters, 3 numerical failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "smoothdiff/analysis.hpp"
#include "smoothdiff/errors.hpp"
#include "smoothdiff/io.hpp"
#include "smoothdiff/sim.hpp"
#include "smoothdiff/toeplitz.hpp"

namespace fs = std::filesystem;
using namespace smoothdiff;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct AnalyzeArgs {
  std::string data;
  std::string first;
  std::string second;
  std::string family = "gaussian";
  int basis_dim = 40;
  int degree = 3;
  int penalty_order = 2;
  std::vector<double> domain;
  double alpha = 0.05;
  std::vector<double> tdp{0.9, 0.7, 0.5};
  std::optional<double> lambda;
  std::string solver = "banded";
  std::string covariance = "bayesian";
  std::string selector = "gcv";
  std::string out = ".";
};

struct SimulateArgs {
  std::string scenario;
  std::optional<int> replicates;
  std::optional<std::uint64_t> seed;
  std::vector<double> alpha;
  std::vector<double> tdp;
  std::optional<int> basis_dim;
  std::optional<int> degree;
  std::optional<std::string> family;
  std::optional<double> lambda;
  std::optional<std::string> selector;
  int threads = 0;
  bool serial = false;
  std::optional<int> dump_replicate;
  std::string out = ".";
};

struct DiagnoseArgs {
  double epsilon = 5.0;
  double theta = 4.0;
  double lambda_p = 1.0;
  int n = 60;
  std::string fits;
  int basis_dim = 40;
  int degree = 3;
  int samples = 2000;
  std::uint64_t seed = 1;
  int max_lag = 8;
  std::string out = ".";
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cli: cannot create output directory '" + dir + "': " + ec.message());
}

template <class Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  write_file(path, os.str());
}

void sort_thresholds(std::vector<double>& tdp) {
  std::sort(tdp.begin(), tdp.end(), std::greater<>());
}

int run_analyze(AnalyzeArgs a) {
  const Family family = family_from_string(a.family);
  std::pair<StratumData, StratumData> strata;
  if (!a.data.empty()) {
    if (!a.first.empty() || !a.second.empty()) {
      throw ParameterError("cli::analyze: use either --data or --first/--second");
    }
    strata = read_strata_csv(fs::path(a.data), family);
  } else if (!a.first.empty() && !a.second.empty()) {
    strata = {read_stratum_csv(fs::path(a.first), family), read_stratum_csv(fs::path(a.second), family)};
  } else {
    throw ParameterError("cli::analyze: need --data, or both --first and --second");
  }
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ParameterError("cli::analyze: alpha must lie in (0, 1)");
  sort_thresholds(a.tdp);

  AnalysisOptions opts;
  opts.basis_dim = a.basis_dim;
  opts.degree = a.degree;
  opts.penalty_order = a.penalty_order;
  if (!a.domain.empty()) opts.domain = Interval{a.domain[0], a.domain[1]};
  opts.alpha = a.alpha;
  opts.thresholds = a.tdp;
  opts.lambda = a.lambda;
  opts.fit.solver = a.solver == "dense" ? SolverKind::dense : SolverKind::banded;
  opts.fit.covariance = covariance_from_string(a.covariance);
  opts.fit.selector = selector_from_string(a.selector);

  const auto result = analyze(strata.first, strata.second, opts);
  ensure_dir(a.out);
  const fs::path out(a.out);
  write_file(out / "fits.json", fits_json(result.comparison));
  write_file(out / "regions.json", report_json(result.report));
  write_stream(out / "windows.csv", [&](auto& os) { write_windows_csv(os, result.comparison.series); });
  write_stream(out / "regions.csv", [&](auto& os) { write_regions_csv(os, result.report); });
  write_stream(out / "curves.csv", [&](auto& os) { write_curves_csv(os, result.comparison); });

  std::cout << "alpha " << format_double(a.alpha) << ", h = " << result.report.h << ", "
            << result.comparison.series.pvalue.size() << " windows\n";
  for (const auto& r : result.report.regions) {
    std::cout << "  tdp >= " << format_double(r.threshold) << ": ";
    if (r.windows.empty()) {
      std::cout << "no region\n";
      continue;
    }
    std::cout << r.windows.size() << " windows, bound " << format_double(r.tdp_bound) << ",";
    for (const auto& p : r.intervals.pieces()) {
      std::cout << " [" << format_double(p.lo) << ", " << format_double(p.hi) << "]";
    }
    std::cout << '\n';
  }
  return 0;
}

SimScenario load_scenario(const SimulateArgs& a) {
  const auto& names = preset_names();
  SimScenario s;
  if (std::find(names.begin(), names.end(), a.scenario) != names.end()) {
    s = preset(a.scenario);
  } else if (fs::exists(a.scenario)) {
    s = apply_settings(SimScenario{}, read_key_values(fs::path(a.scenario)));
  } else {
    std::string known;
    for (const auto& n : names) known += " " + n;
    throw ParameterError("cli::simulate: unknown preset '" + a.scenario + "' (known:" + known + ")");
  }
  if (a.replicates) s.replicates = *a.replicates;
  if (a.seed) s.seed = *a.seed;
  if (!a.alpha.empty()) s.alphas = a.alpha;
  if (!a.tdp.empty()) s.thresholds = a.tdp;
  if (a.basis_dim) s.basis_dim = *a.basis_dim;
  if (a.degree) s.degree = *a.degree;
  if (a.family) s.family = family_from_string(*a.family);
  if (a.lambda) s.lambda = *a.lambda;
  if (a.selector) s.selector = selector_from_string(*a.selector);
  sort_thresholds(s.thresholds);
  validate(s);
  return s;
}

int dump_replicate(const SimScenario& s, int index, const fs::path& out) {
  if (index < 0) throw ParameterError("cli::simulate: replicate index must be >= 0");
  const auto spec = make_basis(s.domain, s.basis_dim, s.degree);
  const auto pen = difference_penalty(s.basis_dim, s.penalty_order);
  const auto data = gen_replicate_data(s, spec, index);
  const std::string stem = "replicate_" + std::to_string(index);
  write_stream(out / (stem + ".csv"), [&](auto& os) { write_strata_csv(os, data.first, data.second); });

  nlohmann::json truth;
  truth["scenario"] = s.name;
  truth["replicate"] = index;
  truth["seed"] = s.seed;
  truth["min_diff"] = data.min_diff;
  truth["different"] = data.coefficients.different;
  truth["domain"] = {s.domain.lo, s.domain.hi};
  truth["basis_dim"] = s.basis_dim;
  truth["degree"] = s.degree;
  std::vector<double> ua(data.coefficients.unaltered.data(),
                         data.coefficients.unaltered.data() + data.coefficients.unaltered.size());
  std::vector<double> al(data.coefficients.altered.data(),
                         data.coefficients.altered.data() + data.coefficients.altered.size());
  truth["unaltered"] = ua;
  truth["altered"] = al;
  write_file(out / (stem + "_truth.json"), truth.dump(2) + "\n");

  // In-process reference for the round trip through `analyze`.
  FitOptions fit_opts;
  fit_opts.covariance = s.covariance;
  fit_opts.selector = s.selector;
  const auto cmp = compare_strata(data.first, data.second, spec, pen, s.lambda, fit_opts);
  const auto report = threshold_regions(cmp.series, s.alphas.front(), s.thresholds);
  write_file(out / (stem + "_regions.json"), report_json(report));
  std::cout << "wrote " << (out / (stem + ".csv")).string() << " (analyze with --domain "
            << format_double(s.domain.lo) << "," << format_double(s.domain.hi) << " --basis-dim "
            << s.basis_dim << " --degree " << s.degree << " --alpha "
            << format_double(s.alphas.front()) << ")\n";
  return 0;
}

int run_simulate(const SimulateArgs& a) {
  const auto s = load_scenario(a);
  ensure_dir(a.out);
  const fs::path out(a.out);
  if (a.dump_replicate) return dump_replicate(s, *a.dump_replicate, out);

  const auto outcome = a.serial ? run_scenario_serial(s) : run_scenario(s, a.threads);
  write_file(out / (s.name + ".json"), sim_outcome_json(outcome));
  write_stream(out / "error_table.csv", [&](auto& os) { write_table_csv(os, outcome.error_table); });
  write_stream(out / "tdp_table.csv", [&](auto& os) { write_table_csv(os, outcome.tdp_table); });
  write_stream(out / "coverage_table.csv", [&](auto& os) { write_table_csv(os, outcome.coverage_table); });
  write_stream(out / "replicates.csv", [&](auto& os) { write_replicates_csv(os, outcome); });
  if (!outcome.sweep_curve.empty()) {
    write_stream(out / "sweep.csv", [&](auto& os) { write_sweep_csv(os, outcome); });
  }

  std::cout << s.name << ": " << outcome.replicates.size() << " replicates, " << outcome.failed
            << " failed\n\n";
  std::cout << format_table(outcome.error_table, "type 1 error (nominal TDP above empirical)") << '\n';
  std::cout << format_table(outcome.tdp_table, "mean empirical TDP") << '\n';
  for (const auto& sm : outcome.alpha_summary) {
    std::cout << "alpha " << format_double(sm.alpha) << ": any-discovery rate "
              << format_double(sm.any_discovery_rate) << ", mean TDP bound of the truth "
              << format_double(sm.mean_truth_tdp) << '\n';
  }
  return 0;
}

struct ModelPair {
  StratumFit first;
  StratumFit second;
  std::string source;
};

StratumFit fit_from_json(const nlohmann::json& j) {
  StratumFit f;
  const auto coef = j.at("coefficients").get<std::vector<double>>();
  f.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  const auto& cov = j.at("covariance");
  const auto m = static_cast<Eigen::Index>(coef.size());
  if (static_cast<Eigen::Index>(cov.size()) != m) throw InputError("cli::diagnose: covariance size mismatch");
  f.covariance.resize(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto row = cov.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != m) throw InputError("cli::diagnose: covariance row size mismatch");
    for (Eigen::Index c = 0; c < m; ++c) f.covariance(r, c) = row[static_cast<std::size_t>(c)];
  }
  return f;
}

ModelPair load_models(const DiagnoseArgs& a, int& degree) {
  if (!a.fits.empty()) {
    std::ifstream in(a.fits);
    if (!in) throw InputError("cli::diagnose: cannot open '" + a.fits + "'");
    nlohmann::json j;
    try {
      in >> j;
      degree = j.at("basis").at("degree").get<int>();
      return {fit_from_json(j.at("strata").at(0)), fit_from_json(j.at("strata").at(1)), a.fits};
    } catch (const nlohmann::json::exception& e) {
      throw InputError("cli::diagnose: " + a.fits + ": " + e.what());
    }
  }
  // Two independent pure-noise strata on a uniform design.
  SimScenario s;
  s.basis_dim = a.basis_dim;
  s.degree = a.degree;
  s.n_per_stratum = a.samples;
  s.noise_var = 1.0;
  const auto spec = make_basis(s.domain, s.basis_dim, s.degree);
  const auto pen = difference_penalty(s.basis_dim);
  auto rng = replicate_rng(a.seed, 0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(s.basis_dim);
  const auto d1 = gen_stratum(zero, s, spec, rng);
  const auto d2 = gen_stratum(zero, s, spec, rng);
  const auto cmp = compare_strata(d1, d2, spec, pen);
  degree = a.degree;
  return {cmp.fit1, cmp.fit2, "uniform-design synthetic model"};
}

int run_diagnose(const DiagnoseArgs& a) {
  ensure_dir(a.out);
  const fs::path out(a.out);
  const auto params = PentaParams::with_matched_corners(a.epsilon, a.theta, a.lambda_p, a.n);
  const auto fac = factor_pentadiagonal(params);
  // The decay theorem needs both roots above 2 lambda_p; the factorization does not.
  std::optional<DecayReport> decay;
  std::string decay_note;
  try {
    decay = decay_rate(params, a.n);
  } catch (const DomainError& e) {
    decay_note = e.what();
  }

  int degree = a.degree;
  const auto models = load_models(a, degree);
  const int width = degree + 1;
  const int windows = static_cast<int>(models.first.coef.size()) - degree;
  const int max_lag = std::min(a.max_lag, windows - 1);

  nlohmann::json j;
  j["pentadiagonal"] = {{"epsilon", a.epsilon}, {"theta", a.theta}, {"lambda_p", a.lambda_p}, {"n", a.n}};
  j["factorization"] = {{"root_large", fac.root_large}, {"root_small", fac.root_small},
                        {"residual", fac.residual},
                        {"first", {{"off", fac.first.off}, {"diag", fac.first.diag}}},
                        {"second", {{"off", fac.second.off}, {"diag", fac.second.diag}}}};
  if (decay) {
    j["decay"] = {{"psi_first", decay->psi_first}, {"psi_second", decay->psi_second},
                  {"rate", decay->rate}, {"empirical_slope", decay->empirical_slope},
                  {"relative_gap", std::abs(decay->empirical_slope - decay->rate) / decay->rate}};
  } else {
    j["decay"] = {{"applicable", false}, {"reason", decay_note}};
  }
  j["model"] = models.source;

  std::ostringstream csv;
  csv << "lag,mean_correlation,max_abs_correlation,middle_correlation,n_pairs\n";
  nlohmann::json corr = nlohmann::json::array();
  const int middle = std::max(0, windows / 2 - max_lag / 2);
  for (int lag = 0; lag <= max_lag; ++lag) {
    double sum = 0.0, worst = 0.0;
    int pairs = 0;
    for (int k = 0; k + lag < windows; ++k) {
      const double c = window_stat_correlation(models.first, models.second, width, k, k + lag);
      sum += c;
      worst = std::max(worst, std::abs(c));
      ++pairs;
    }
    const double mid = middle + lag < windows
                           ? window_stat_correlation(models.first, models.second, width, middle, middle + lag)
                           : std::nan("");
    csv << lag << ',' << format_double(sum / pairs) << ',' << format_double(worst) << ','
        << format_double(mid) << ',' << pairs << '\n';
    corr.push_back({{"lag", lag}, {"mean_correlation", sum / pairs}, {"max_abs_correlation", worst}});
  }
  j["window_correlation"] = corr;
  write_file(out / "diagnostics.json", j.dump(2) + "\n");
  write_file(out / "correlation.csv", csv.str());

  std::cout << "factorization residual " << format_double(fac.residual) << "\n";
  if (decay) {
    std::cout << "psi " << format_double(decay->psi_first) << ", " << format_double(decay->psi_second)
              << "; rate " << format_double(decay->rate) << ", empirical slope "
              << format_double(decay->empirical_slope) << "\n";
  } else {
    std::cout << "decay rate not applicable: " << decay_note << "\n";
  }
  std::cout << "window-statistic correlation by lag (" << models.source << "):\n"
            << csv.str();
  return 0;
}

int default_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stratum P-spline comparison with simultaneous TDP bounds"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key = value file; command-line flags take precedence");

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Compare two strata and report TDP regions");
  analyze_cmd->add_option("--data", an.data, "CSV with a 'stratum' column holding two labels");
  analyze_cmd->add_option("--first", an.first, "CSV of the first stratum");
  analyze_cmd->add_option("--second", an.second, "CSV of the second stratum");
  analyze_cmd->add_option("--family", an.family)->check(CLI::IsMember({"gaussian", "binomial"}))->capture_default_str();
  analyze_cmd->add_option("--basis-dim", an.basis_dim, "Number of B-spline coefficients m")->capture_default_str();
  analyze_cmd->add_option("--degree", an.degree)->capture_default_str();
  analyze_cmd->add_option("--penalty-order", an.penalty_order)->capture_default_str();
  analyze_cmd->add_option("--domain", an.domain, "lo,hi (default: pooled covariate range)")
      ->expected(2)->delimiter(',');
  analyze_cmd->add_option("--alpha", an.alpha)->capture_default_str();
  analyze_cmd->add_option("--tdp", an.tdp, "TDP thresholds")->delimiter(',')->capture_default_str();
  analyze_cmd->add_option("--lambda", an.lambda, "Fixed smoothing parameter (default: selected per stratum)");
  analyze_cmd->add_option("--selector", an.selector, "Smoothing-parameter criterion")
      ->check(CLI::IsMember({"gcv", "reml"}))->capture_default_str();
  analyze_cmd->add_option("--solver", an.solver)->check(CLI::IsMember({"banded", "dense"}))->capture_default_str();
  analyze_cmd->add_option("--covariance", an.covariance, "Coefficient covariance for the window tests")
      ->check(CLI::IsMember({"bayesian", "frequentist"}))->capture_default_str();
  analyze_cmd->add_option("--out", an.out, "Output directory")->capture_default_str();

  SimulateArgs sm;
  sm.threads = default_threads();
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a simulation preset or scenario file");
  simulate_cmd->add_option("scenario", sm.scenario, "Preset name or key = value scenario file")->required();
  simulate_cmd->add_option("--replicates", sm.replicates);
  simulate_cmd->add_option("--seed", sm.seed)->envname("SMOOTHDIFF_SEED");
  simulate_cmd->add_option("--alpha", sm.alpha)->delimiter(',');
  simulate_cmd->add_option("--tdp", sm.tdp)->delimiter(',');
  simulate_cmd->add_option("--basis-dim", sm.basis_dim);
  simulate_cmd->add_option("--degree", sm.degree);
  simulate_cmd->add_option("--family", sm.family)->check(CLI::IsMember({"gaussian", "binomial"}));
  simulate_cmd->add_option("--lambda", sm.lambda);
  simulate_cmd->add_option("--selector", sm.selector)->check(CLI::IsMember({"gcv", "reml"}));
  simulate_cmd->add_option("--threads", sm.threads)->check(CLI::PositiveNumber)->capture_default_str();
  simulate_cmd->add_flag("--serial", sm.serial, "Use the single-threaded reference loop");
  simulate_cmd->add_option("--dump-replicate", sm.dump_replicate, "Write one replicate's data as CSV and stop");
  simulate_cmd->add_option("--out", sm.out)->capture_default_str();

  DiagnoseArgs dg;
  auto* diagnose_cmd = app.add_subcommand("diagnose", "Toeplitz factorization, decay and window correlations");
  diagnose_cmd->add_option("--epsilon", dg.epsilon)->capture_default_str();
  diagnose_cmd->add_option("--theta", dg.theta)->capture_default_str();
  diagnose_cmd->add_option("--lambda-p", dg.lambda_p)->capture_default_str();
  diagnose_cmd->add_option("--n", dg.n)->capture_default_str();
  diagnose_cmd->add_option("--fits", dg.fits, "fits.json from analyze (default: synthetic uniform design)");
  diagnose_cmd->add_option("--basis-dim", dg.basis_dim)->capture_default_str();
  diagnose_cmd->add_option("--degree", dg.degree)->capture_default_str();
  diagnose_cmd->add_option("--samples", dg.samples)->capture_default_str();
  diagnose_cmd->add_option("--seed", dg.seed)->envname("SMOOTHDIFF_SEED")->capture_default_str();
  diagnose_cmd->add_option("--max-lag", dg.max_lag)->capture_default_str();
  diagnose_cmd->add_option("--out", dg.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (analyze_cmd->parsed()) return run_analyze(an);
    if (simulate_cmd->parsed()) return run_simulate(sm);
    return run_diagnose(dg);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
