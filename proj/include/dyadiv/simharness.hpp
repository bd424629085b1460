#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyadiv/dataset.hpp"
#include "dyadiv/estimators.hpp"

namespace dyadiv {

// Synthetic dyadic design with two uniform covariates, two latent uniform
// confounders, logistic instruments, a multinomial joint treatment and four
// linear potential-outcome models. Both partners' outcomes are generated so
// the role swap is exercisable.
struct DgpConfig {
  int n = 1000;
  std::uint64_t seed = 1;
};

DyadDataset generate(const DgpConfig& cfg);

struct TrueValues {
  double dte1 = 7.0;
  double dte0 = 5.0;
  double ste1 = 3.0;
  double ste0 = 1.0;
  double ite = 2.0;
};
TrueValues true_values();
double true_value(const std::string& estimand_label);

// Nuisance functions of the synthetic design, by Gauss-Legendre quadrature
// over the latent confounders. Defined for the two-covariate design only.
struct OracleNuisances {
  double pi1, mu, eta, delta, omega;
};
OracleNuisances oracle_at(double x1, double x2, Target target, int level);
NuisanceValues oracle_values(const EstimandView& view);

// Deliberate nuisance corruption for robustness studies. Values are the
// oracle plus deterministic error paths scaled like estimation error
// (amplitude * n^{-1/2} * shape(x)); the pattern decides which nuisances
// carry large errors and which stay accurate.
enum class MisspecPattern { None, OnlyIpwCorrect, OnlyGCorrect, OnlyRegCorrect };
MisspecPattern parse_pattern(const std::string& s);
const char* pattern_name(MisspecPattern p);

NuisanceValues pattern_values(const EstimandView& view, MisspecPattern p);

struct McRow {
  std::string estimand;
  std::string method;
  int n = 0;
  int reps = 0;
  double bias = 0.0;
  double sd = 0.0;
  double cp = 0.0;  // NaN when no bootstrap was run
  int failures = 0;
};

struct McTable {
  std::vector<McRow> rows;
  std::vector<std::string> warnings;
  std::string to_csv() const;
  std::string to_text() const;
};

struct McConfig {
  int reps = 200;
  std::vector<int> ns = {5000};
  // parametric | lasso | sieve | wald | ipw | g | reg | mr
  std::vector<std::string> methods = {"parametric"};
  std::vector<std::string> estimands = {"dte1", "dte0", "ste1", "ste0"};
  std::uint64_t seed = 1;
  int bootstrap_b = 200;  // 0 disables per-replication intervals
  double level = 0.95;
  MisspecPattern pattern = MisspecPattern::None;
  int basis_degree = 2;
  int threads = 1;
};

McTable run_mc(const McConfig& cfg);

}  // namespace dyadiv
