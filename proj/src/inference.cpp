#include "dyadiv/inference.hpp"

#include <algorithm>
#include <cmath>

#include "dyadiv/parallel.hpp"
#include "dyadiv/rng.hpp"

namespace dyadiv {

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) fail(ErrorKind::Precondition, "quantile of empty set");
  const size_t m = sorted.size();
  if (m == 1) return sorted[0];
  const double h = (static_cast<double>(m) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, m - 1);
  const double w = h - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

BootstrapResult bootstrap(const DyadDataset& ds, const EstimandSpec& spec,
                          const EstimateOptions& opts, int b,
                          std::uint64_t seed, double level, int threads) {
  if (b < 2) fail(ErrorKind::Usage, "bootstrap needs B >= 2");
  if (level <= 0.0 || level >= 1.0)
    fail(ErrorKind::Usage, "confidence level must lie in (0,1)");
  const int n = ds.n();

  // Range of the analyzed outcome; used by the exclusion rule.
  EstimandSpec range_spec = spec;
  if (range_spec.target == Target::Ite) {
    range_spec.target = Target::Dte;
    range_spec.peer_level = 1;
  }
  const EstimandView full = make_view(ds, range_spec);
  const double y_range = full.y.maxCoeff() - full.y.minCoeff();
  const double exclusion_cap = 10.0 * y_range;

  enum class Outcome { Ok, Failed, Excluded };
  std::vector<double> points(b, 0.0);
  std::vector<Outcome> outcomes(b, Outcome::Failed);

  parallel_for(b, threads, [&](int r) {
    CounterRng rng(derive_key(seed, stream::kBootstrap,
                              static_cast<std::uint64_t>(r)));
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) {
      idx[i] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    }
    try {
      const EstimateReport rep = estimate(ds, spec, opts, &idx);
      if (y_range > 0.0 && std::fabs(rep.point) > exclusion_cap) {
        outcomes[r] = Outcome::Excluded;
      } else {
        points[r] = rep.point;
        outcomes[r] = Outcome::Ok;
      }
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::WeakIv:
        case ErrorKind::Convergence:
        case ErrorKind::Separation:
        case ErrorKind::Singular:
        case ErrorKind::Precondition:
          outcomes[r] = Outcome::Failed;
          break;
        default:
          throw;  // configuration and IO problems are not per-replicate noise
      }
    }
  });

  BootstrapResult res;
  res.b = b;
  res.level = level;
  for (int r = 0; r < b; ++r) {
    switch (outcomes[r]) {
      case Outcome::Ok: res.replicates.push_back(points[r]); break;
      case Outcome::Failed: ++res.n_failed; break;
      case Outcome::Excluded: ++res.n_range_excluded; break;
    }
  }
  const int dropped = res.n_failed + res.n_range_excluded;
  if (dropped > b / 5) {
    fail(ErrorKind::Inference,
         std::to_string(dropped) + " of " + std::to_string(b) +
             " bootstrap replicates failed or were excluded; consider a "
             "different estimation method");
  }
  const size_t m = res.replicates.size();
  if (m < 2) {
    fail(ErrorKind::Inference, "fewer than 2 usable bootstrap replicates");
  }
  double mean = 0.0;
  for (double v : res.replicates) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : res.replicates) ss += (v - mean) * (v - mean);
  res.se = std::sqrt(ss / static_cast<double>(m - 1));

  std::vector<double> sorted = res.replicates;
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - level) / 2.0;
  res.ci_lower = sorted_quantile(sorted, tail);
  res.ci_upper = sorted_quantile(sorted, 1.0 - tail);
  return res;
}

std::pair<double, double> plugin_ci(const EstimateReport& report,
                                    double level) {
  if (level <= 0.0 || level >= 1.0)
    fail(ErrorKind::Usage, "confidence level must lie in (0,1)");
  if (report.eif.size() == 0 || !report.se_plugin) {
    fail(ErrorKind::Precondition,
         "plug-in interval needs influence values; only the MR estimator "
         "provides them");
  }
  const double z = norm_quantile(0.5 * (1.0 + level));
  const double half = z * *report.se_plugin;
  return {report.point - half, report.point + half};
}

double coverage(const std::vector<CoverageInput>& replications, double truth) {
  if (replications.empty())
    fail(ErrorKind::Precondition, "coverage of an empty replication list");
  int hit = 0;
  for (const auto& r : replications) {
    if (r.ci_lower <= truth && truth <= r.ci_upper) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(replications.size());
}

}  // namespace dyadiv
