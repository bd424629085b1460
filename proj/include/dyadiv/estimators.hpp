#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dyadiv/dataset.hpp"
#include "dyadiv/nuisance.hpp"
#include "dyadiv/sieve.hpp"

namespace dyadiv {

enum class Method { Wald, Ipw, G, Reg, Mr, Sieve };

const char* method_name(Method m);
Method parse_method(const std::string& s);

struct Diagnostics {
  bool weak_iv = false;              // fitted delta below the guard floors
  double min_abs_delta = 0.0;
  double mean_delta = 0.0;
  int trim_low = 0, trim_high = 0;   // pi values clamped by trimming
  double calib_resid_beta = 0.0;     // sieve only
  double calib_resid_gamma = 0.0;
  double calib_resid_alpha = 0.0;
  std::vector<std::string> warnings;
};

struct BootstrapResult {
  std::vector<double> replicates;  // retained replicate points
  double se = 0.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  int n_failed = 0;          // replicates that aborted (weak IV etc.)
  int n_range_excluded = 0;  // |point| beyond 10x the outcome range
  int b = 0;
  double level = 0.95;
};

struct EstimateReport {
  EstimandSpec estimand;
  Method method = Method::Mr;
  Learner learner = Learner::Parametric;
  double point = 0.0;
  int n = 0;
  Eigen::ArrayXd eif;  // per-row influence values; non-empty only for MR
  std::optional<double> se_plugin;
  Diagnostics diag;
  NuisanceMeta nuisance_meta;
  std::optional<BootstrapResult> bootstrap;

  std::string to_json(int indent = -1) const;
};

struct EstimateOptions {
  Method method = Method::Mr;
  NuisanceConfig nuisance;
  BasisSpec basis;
  double delta_mean_floor = 0.02;  // abort when |mean(delta_hat)| is below
  double delta_row_floor = 1e-3;   // abort when any row is below
  double phi_row_floor = 1e-3;     // same guard for the calibrated phi
  bool ite_prop2 = false;          // condition every nuisance on the peer IV
  std::shared_ptr<const PrecomputedNuisances> precomputed;
  // Hook for synthetic studies: supplies nuisance values directly.
  std::function<NuisanceValues(const EstimandView&)> nuisance_override;
};

// Runs one estimator on (a resample of) a dataset. ITE runs the two
// direct-effect levels and differences them.
EstimateReport estimate(const DyadDataset& ds, const EstimandSpec& spec,
                        const EstimateOptions& opts,
                        const std::vector<int>* idx = nullptr);

// The individual estimators on an already materialized view. Exposed for
// tests; `estimate` is the normal entry point.
double point_wald(const EstimandView& v, const NuisanceValues& nv);
double point_ipw(const EstimandView& v, const NuisanceValues& nv,
                 const EstimateOptions& opts);
double point_g(const EstimandView& v, const NuisanceValues& nv);
double point_reg(const EstimandView& v, const NuisanceValues& nv);
// Returns the per-row terms whose mean is the MR point.
Eigen::ArrayXd mr_terms(const EstimandView& v, const NuisanceValues& nv,
                        const EstimateOptions& opts);

}  // namespace dyadiv
