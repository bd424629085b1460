#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dyadiv/estimators.hpp"

namespace dyadiv {

// Nonparametric bootstrap over dyads. Every replicate resamples n rows with
// replacement, refits all nuisances and re-runs the estimator. Replicate r
// draws from a stream derived from (seed, r), so the result is independent
// of scheduling. Replicates that abort are excluded and counted, as are
// points beyond 10x the observed outcome range; more than 20% of either
// aborts the call.
BootstrapResult bootstrap(const DyadDataset& ds, const EstimandSpec& spec,
                          const EstimateOptions& opts, int b,
                          std::uint64_t seed, double level = 0.95,
                          int threads = 1);

// Normal-approximation interval from the plug-in influence-function SE.
std::pair<double, double> plugin_ci(const EstimateReport& report,
                                    double level);

struct CoverageInput {
  double point;
  double ci_lower;
  double ci_upper;
};

// Fraction of intervals containing the truth.
double coverage(const std::vector<CoverageInput>& replications, double truth);

// Type-7 empirical quantile (linear interpolation) of a sorted vector.
double sorted_quantile(const std::vector<double>& sorted, double p);

}  // namespace dyadiv
