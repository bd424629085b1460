// dyadiv command line: simulate / estimate / mc-table over the shared
// library's C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dyadiv.h"
#include "json.hpp"

using nlohmann::json;

namespace {

int fail_with(dv_status status) {
  std::cerr << "error: " << dv_last_error() << "\n";
  return dv_exit_class(status);
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << content;
  return static_cast<bool>(f);
}

struct StringGuard {
  char* s = nullptr;
  ~StringGuard() { dv_string_free(s); }
};

struct DatasetGuard {
  dv_dataset* ds = nullptr;
  ~DatasetGuard() { dv_dataset_free(ds); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal peer-effect estimation on dyadic data with dual "
               "instrumental variables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dv_version()));
  app.set_config("--config", "", "Plain key=value config file; flags override");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a synthetic dataset");
  sim->configurable();
  int sim_n = 1000;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim->add_option("--n", sim_n, "Sample size (>= 100)")->required();
  sim->add_option("--seed", sim_seed, "RNG seed")->required();
  sim->add_option("--out", sim_out, "Output CSV path")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate one causal effect");
  est->configurable();
  std::string est_data, est_estimand, est_method = "mr";
  std::string est_learner = "parametric", est_nuisance_file, est_out;
  std::string est_ite_mode = "diff";
  int est_ego = 1, est_bootstrap = 0, est_threads = 0;
  std::uint64_t est_seed = 1;
  double est_level = 0.95, est_trim = 0.01;
  int est_degree = 2;
  double est_lambda = -1.0;
  int est_cv_folds = 5;
  est->add_option("--data", est_data, "Input dataset CSV")->required();
  est->add_option("--estimand", est_estimand, "dte1|dte0|ste1|ste0|ite")
      ->required();
  est->add_option("--method", est_method, "wald|ipw|g|reg|mr|sieve");
  est->add_option("--ego", est_ego, "Ego unit (1 or 2)")
      ->check(CLI::IsMember({1, 2}));
  est->add_option("--learner", est_learner, "parametric|lasso|precomputed");
  est->add_option("--nuisance-file", est_nuisance_file,
                  "Precomputed nuisance CSV (pi1,mu,eta,delta,omega)");
  est->add_option("--bootstrap", est_bootstrap, "Bootstrap replicates B");
  est->add_option("--seed", est_seed, "RNG seed");
  est->add_option("--level", est_level, "Confidence level");
  est->add_option("--trim-eps", est_trim, "Propensity trimming bound");
  est->add_option("--basis-degree", est_degree, "Sieve basis degree");
  est->add_option("--lasso-lambda", est_lambda,
                  "Fixed lasso penalty (omit for CV)");
  est->add_option("--lasso-cv-folds", est_cv_folds, "CV folds for lasso");
  est->add_option("--ite-mode", est_ite_mode, "diff|prop2");
  est->add_option("--threads", est_threads, "Worker threads (0 = auto)");
  est->add_option("--out", est_out, "Write report JSON here (default stdout)");

  // mc-table
  auto* mc = app.add_subcommand("mc-table",
                                "Monte Carlo bias/SD/CP study on synthetic "
                                "data");
  mc->configurable();
  int mc_reps = 200, mc_bootstrap = 200, mc_degree = 2, mc_threads = 0;
  std::uint64_t mc_seed = 1;
  double mc_level = 0.95;
  std::vector<int> mc_ns = {5000};
  std::vector<std::string> mc_methods = {"parametric"};
  std::vector<std::string> mc_estimands = {"dte1", "dte0", "ste1", "ste0"};
  std::string mc_misspec = "none", mc_out;
  mc->add_option("--reps", mc_reps, "Replications")->required();
  mc->add_option("--ns", mc_ns, "Sample sizes")->delimiter(',');
  mc->add_option("--methods", mc_methods,
                 "parametric|lasso|sieve|wald|ipw|g|reg|mr")
      ->delimiter(',');
  mc->add_option("--estimands", mc_estimands, "Estimand labels")
      ->delimiter(',');
  mc->add_option("--seed", mc_seed, "RNG seed")->required();
  mc->add_option("--bootstrap", mc_bootstrap,
                 "Bootstrap B per replication (0 disables CP)");
  mc->add_option("--level", mc_level, "Confidence level");
  mc->add_option("--misspec", mc_misspec,
                 "none|only_ipw_correct|only_g_correct|only_reg_correct");
  mc->add_option("--basis-degree", mc_degree, "Sieve basis degree");
  mc->add_option("--threads", mc_threads, "Worker threads (0 = auto)");
  mc->add_option("--out", mc_out,
                 "Output prefix; writes <prefix>.csv and <prefix>.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  if (sim->parsed()) {
    if (sim_n < 100) {
      std::cerr << "error: --n must be >= 100\n";
      return 2;
    }
    json cfg{{"n", sim_n}, {"seed", sim_seed}};
    DatasetGuard ds;
    dv_status st = dv_dataset_simulate(cfg.dump().c_str(), &ds.ds);
    if (st != DV_OK) return fail_with(st);
    st = dv_dataset_write_csv(ds.ds, sim_out.c_str());
    if (st != DV_OK) return fail_with(st);
    std::cerr << "wrote " << dv_dataset_rows(ds.ds) << " rows to " << sim_out
              << "\n";
    return 0;
  }

  if (est->parsed()) {
    DatasetGuard ds;
    dv_status st = dv_dataset_load_csv(est_data.c_str(), DV_Y2_AUTO, &ds.ds);
    if (st != DV_OK) return fail_with(st);

    json cfg;
    cfg["estimand"] = est_estimand;
    cfg["ego"] = est_ego;
    cfg["method"] = est_method;
    cfg["learner"] = est_learner;
    cfg["trim_eps"] = est_trim;
    cfg["basis_degree"] = est_degree;
    cfg["ite_mode"] = est_ite_mode;
    cfg["bootstrap"] = est_bootstrap;
    cfg["seed"] = est_seed;
    cfg["level"] = est_level;
    cfg["lasso_cv_folds"] = est_cv_folds;
    if (est_lambda >= 0.0) cfg["lasso_lambda"] = est_lambda;
    if (!est_nuisance_file.empty()) cfg["nuisance_file"] = est_nuisance_file;
    if (est_threads > 0) cfg["threads"] = est_threads;

    StringGuard report;
    st = dv_estimate(ds.ds, cfg.dump().c_str(), &report.s);
    if (st != DV_OK) return fail_with(st);
    if (est_out.empty()) {
      std::cout << report.s << "\n";
    } else if (!write_file(est_out, std::string(report.s) + "\n")) {
      std::cerr << "error: cannot write " << est_out << "\n";
      return 4;
    }
    return 0;
  }

  // mc-table
  if (mc_reps < 2) {
    std::cerr << "error: --reps must be >= 2\n";
    return 2;
  }
  json cfg;
  cfg["reps"] = mc_reps;
  cfg["ns"] = mc_ns;
  cfg["methods"] = mc_methods;
  cfg["estimands"] = mc_estimands;
  cfg["seed"] = mc_seed;
  cfg["bootstrap"] = mc_bootstrap;
  cfg["level"] = mc_level;
  cfg["misspec"] = mc_misspec;
  cfg["basis_degree"] = mc_degree;
  if (mc_threads > 0) cfg["threads"] = mc_threads;

  StringGuard csv, text;
  const dv_status st = dv_mc_table(cfg.dump().c_str(), &csv.s, &text.s);
  if (st != DV_OK) return fail_with(st);
  std::cout << text.s;
  if (!mc_out.empty()) {
    if (!write_file(mc_out + ".csv", csv.s) ||
        !write_file(mc_out + ".txt", text.s)) {
      std::cerr << "error: cannot write outputs with prefix " << mc_out << "\n";
      return 4;
    }
  }
  return 0;
}
