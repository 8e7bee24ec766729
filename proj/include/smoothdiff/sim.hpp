#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "smoothdiff/basis.hpp"
#include "smoothdiff/fit.hpp"
#include "smoothdiff/intervals.hpp"

namespace smoothdiff {

using Rng = std::mt19937_64;

/// Independent stream for one replicate, a pure function of (seed, replicate).
Rng replicate_rng(std::uint64_t seed, std::uint64_t replicate);

/// Minimum-difference sweep: replicate r of R uses from + (to - from) r / (R - 1).
struct EffectSweep {
  double from = 0.0;
  double to = 0.0;
};

struct SimScenario {
  std::string name = "custom";
  int basis_dim = 120;
  int degree = 3;
  int penalty_order = 2;
  int n_nonzero = 15;
  double clumping = 6.0;     // nu
  double coef_var = 0.1;     // sigma_b^2
  double diff_var = 0.05;    // sigma_Delta^2
  double min_diff = 2.4;     // M_Delta
  double noise_var = 0.8;    // sigma^2, gaussian only
  int n_per_stratum = 4000;
  Interval domain{0.0, 10.0};
  Family family = Family::gaussian;
  std::vector<double> alphas{0.1, 0.2, 0.3};
  std::vector<double> thresholds{0.9, 0.7, 0.5};
  int replicates = 1000;
  std::uint64_t seed = 20200729;
  std::optional<EffectSweep> sweep;
  std::optional<double> lambda;  // fixed smoothing parameter instead of GCV
  CovarianceKind covariance = CovarianceKind::bayesian;
  LambdaSelector selector = LambdaSelector::gcv;

  [[nodiscard]] double min_diff_for(int replicate) const;
};

/// Throws ParameterError on out-of-range settings.
void validate(const SimScenario& scenario);

const std::vector<std::string>& preset_names();
/// Named scenario; throws ParameterError for unknown names.
SimScenario preset(std::string_view name);
/// Overrides scenario fields from key/value settings (keys as in the README).
SimScenario apply_settings(SimScenario base, const std::map<std::string, std::string>& settings);

/// k distinct indices in [0, m); an unchosen index next to a chosen one has weight nu, others 1.
std::vector<int> clumped_indices(int m, int k, double nu, Rng& rng);

struct SimCoefficients {
  Eigen::VectorXd unaltered;  // b^(U)
  Eigen::VectorXd altered;    // b^(A) = b^(U) + Delta b
  std::vector<int> different; // K, ascending
};

SimCoefficients gen_coefficients(const SimScenario& scenario, double min_diff, Rng& rng);
inline SimCoefficients gen_coefficients(const SimScenario& scenario, Rng& rng) {
  return gen_coefficients(scenario, scenario.min_diff, rng);
}

StratumData gen_stratum(const Eigen::VectorXd& coef, const SimScenario& scenario,
                        const BasisSpec& spec, Rng& rng);

struct ReplicateData {
  SimCoefficients coefficients;
  StratumData first;   // altered coefficients
  StratumData second;  // unaltered coefficients
  double min_diff = 0.0;
};

ReplicateData gen_replicate_data(const SimScenario& scenario, const BasisSpec& spec, int index);

/// Union of the supports of the basis functions with a non-zero difference.
IntervalSet truly_different_region(const BasisSpec& spec, std::span<const int> different);
/// Windows k whose coefficients k..k+d include a non-zero difference.
std::vector<int> non_null_windows(const BasisSpec& spec, std::span<const int> different);
/// |selected ∩ truth| / |selected|; NaN for an empty selection.
double empirical_tdp(const IntervalSet& selected, const IntervalSet& truth);

struct ThresholdOutcome {
  double threshold = 0.0;
  int selected = 0;
  int discoveries = 0;
  double tdp_bound = 0.0;
  double region_measure = 0.0;
  double empirical_tdp = 0.0;  // NaN when nothing is selected
  double coverage = 0.0;       // |selected ∩ truth| / |truth|
  bool error = false;          // nominal threshold above the empirical TDP
};

struct AlphaOutcome {
  double alpha = 0.0;
  int h = 0;
  int truth_discoveries = 0;
  double truth_tdp_bound = 0.0;  // NaN under the global null
  bool any_discovery = false;    // some set gets a positive bound
  std::vector<ThresholdOutcome> thresholds;
};

struct ReplicateRecord {
  int index = 0;
  double min_diff = 0.0;
  bool failed = false;
  std::string failure;
  std::vector<int> different;
  int non_null = 0;
  double truth_measure = 0.0;
  double lambda_first = 0.0;
  double lambda_second = 0.0;
  std::vector<double> pvalues;
  std::vector<AlphaOutcome> per_alpha;
};

ReplicateRecord run_replicate(const SimScenario& scenario, int index);

struct TableCell {
  double alpha = 0.0;
  double threshold = 0.0;
  double value = 0.0;
  int n_replicates = 0;
  double mc_se = 0.0;
};

struct AlphaSummary {
  double alpha = 0.0;
  double any_discovery_rate = 0.0;
  double any_discovery_se = 0.0;
  double mean_truth_tdp = 0.0;
  int n_replicates = 0;
};

struct SweepBin {
  double alpha = 0.0;
  double threshold = 0.0;
  double min_diff_lo = 0.0;
  double min_diff_hi = 0.0;
  double mean_empirical_tdp = 0.0;
  double mean_truth_tdp = 0.0;
  double mean_coverage = 0.0;
  int n_replicates = 0;
};

struct SimOutcome {
  SimScenario scenario;
  std::vector<ReplicateRecord> replicates;
  int failed = 0;
  std::vector<TableCell> error_table;     // alpha x threshold
  std::vector<TableCell> tdp_table;       // mean empirical TDP
  std::vector<TableCell> coverage_table;  // mean coverage of the truth
  std::vector<AlphaSummary> alpha_summary;
  std::vector<SweepBin> sweep_curve;      // only for sweep scenarios
};

/// Replicates fanned out over OpenMP threads (threads <= 0: runtime default).
/// Output is identical to run_scenario_serial for any thread count.
SimOutcome run_scenario(const SimScenario& scenario, int threads = 0);
/// Single-threaded reference.
SimOutcome run_scenario_serial(const SimScenario& scenario);
/// Ordered reduction of replicate records; throws NumericalError if all failed.
SimOutcome aggregate(const SimScenario& scenario, std::vector<ReplicateRecord> records);

}  // namespace smoothdiff
