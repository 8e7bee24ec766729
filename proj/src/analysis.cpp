#include "smoothdiff/analysis.hpp"

#include <algorithm>

#include "smoothdiff/errors.hpp"

namespace smoothdiff {

StrataComparison compare_strata(const StratumData& first, const StratumData& second,
                                const BasisSpec& spec, const PenaltyMatrix& pen,
                                std::optional<double> lambda, const FitOptions& opts) {
  auto fit_one = [&](const StratumData& data) {
    const double lam = lambda ? *lambda : select_lambda(data, spec, pen, {}, opts);
    return fit_stratum(data, spec, pen, lam, opts);
  };
  StrataComparison out{spec, pen, fit_one(first), fit_one(second), {}};
  out.series = window_statistics(out.fit1, out.fit2, spec);
  return out;
}

Interval pooled_range(const StratumData& first, const StratumData& second) {
  if (first.z.size() == 0 || second.z.size() == 0) {
    throw ParameterError("analysis: both strata must be non-empty");
  }
  return {std::min(first.z.minCoeff(), second.z.minCoeff()),
          std::max(first.z.maxCoeff(), second.z.maxCoeff())};
}

AnalysisResult analyze(const StratumData& first, const StratumData& second,
                       const AnalysisOptions& opts) {
  if (first.family != second.family) throw ParameterError("analysis: strata families differ");
  const Interval domain = opts.domain ? *opts.domain : pooled_range(first, second);
  const auto spec = make_basis(domain, opts.basis_dim, opts.degree);
  const auto pen = difference_penalty(opts.basis_dim, opts.penalty_order);
  AnalysisResult out{compare_strata(first, second, spec, pen, opts.lambda, opts.fit), {}};
  out.report = threshold_regions(out.comparison.series, opts.alpha, opts.thresholds);
  return out;
}

}  // namespace smoothdiff
