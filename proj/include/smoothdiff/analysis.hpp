#pragma once

#include <optional>
#include <vector>

#include "smoothdiff/basis.hpp"
#include "smoothdiff/ctgate.hpp"
#include "smoothdiff/fit.hpp"
#include "smoothdiff/wintest.hpp"

namespace smoothdiff {

struct AnalysisOptions {
  int basis_dim = 40;
  int degree = 3;
  int penalty_order = 2;
  std::optional<Interval> domain;  // default: range of the pooled covariates
  double alpha = 0.05;
  std::vector<double> thresholds{0.9, 0.7, 0.5};
  std::optional<double> lambda;    // default: GCV per stratum
  FitOptions fit;
};

/// Both fits and the window tests on a shared basis.
struct StrataComparison {
  BasisSpec spec;
  PenaltyMatrix penalty;
  StratumFit fit1;
  StratumFit fit2;
  WindowTestSeries series;
};

StrataComparison compare_strata(const StratumData& first, const StratumData& second,
                                const BasisSpec& spec, const PenaltyMatrix& pen,
                                std::optional<double> lambda = std::nullopt,
                                const FitOptions& opts = {});

struct AnalysisResult {
  StrataComparison comparison;
  TdpReport report;
};

/// Full two-stratum pipeline: shared basis, per-stratum fits, window tests and
/// the TDP regions at every threshold.
AnalysisResult analyze(const StratumData& first, const StratumData& second,
                       const AnalysisOptions& opts);

Interval pooled_range(const StratumData& first, const StratumData& second);

}  // namespace smoothdiff
