#include "dyadiv.h"

#include <cstring>
#include <memory>
#include <string>

#include "dyadiv/dataset.hpp"
#include "dyadiv/estimators.hpp"
#include "dyadiv/inference.hpp"
#include "dyadiv/parallel.hpp"
#include "dyadiv/simharness.hpp"
#include "json.hpp"

using nlohmann::json;

struct dv_dataset {
  dyadiv::DyadDataset data;
};

namespace {

thread_local std::string g_last_error;

dv_status status_of(dyadiv::ErrorKind kind) {
  using dyadiv::ErrorKind;
  switch (kind) {
    case ErrorKind::Usage: return DV_ERR_USAGE;
    case ErrorKind::Io: return DV_ERR_IO;
    case ErrorKind::Parse: return DV_ERR_PARSE;
    case ErrorKind::Domain: return DV_ERR_DOMAIN;
    case ErrorKind::Schema: return DV_ERR_SCHEMA;
    case ErrorKind::Precondition: return DV_ERR_PRECONDITION;
    case ErrorKind::Convergence: return DV_ERR_CONVERGENCE;
    case ErrorKind::Separation: return DV_ERR_SEPARATION;
    case ErrorKind::Singular: return DV_ERR_SINGULAR;
    case ErrorKind::WeakIv: return DV_ERR_WEAK_IV;
    case ErrorKind::Inference: return DV_ERR_INFERENCE;
  }
  return DV_ERR_INTERNAL;
}

template <typename Fn>
dv_status guarded(Fn&& fn) {
  try {
    fn();
    return DV_OK;
  } catch (const dyadiv::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = std::string("config: ") + e.what();
    return DV_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DV_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_config(const char* config_json) {
  if (config_json == nullptr || *config_json == '\0') return json::object();
  json j = json::parse(config_json);
  if (!j.is_object()) {
    dyadiv::fail(dyadiv::ErrorKind::Usage, "config must be a JSON object");
  }
  return j;
}

dyadiv::EstimateOptions options_from_json(const json& j) {
  dyadiv::EstimateOptions opts;
  opts.method = dyadiv::parse_method(j.value("method", std::string("mr")));
  opts.nuisance.learner =
      dyadiv::parse_learner(j.value("learner", std::string("parametric")));
  opts.nuisance.trim_eps = j.value("trim_eps", 0.01);
  opts.nuisance.newton_tol = j.value("newton_tol", 1e-10);
  opts.nuisance.newton_max_iter = j.value("newton_max_iter", 100);
  if (j.contains("lasso_lambda")) {
    opts.nuisance.lasso_lambda.cv = false;
    opts.nuisance.lasso_lambda.lambda = j["lasso_lambda"].get<double>();
    if (opts.nuisance.lasso_lambda.lambda < 0.0) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "lasso_lambda must be >= 0");
    }
  }
  opts.nuisance.lasso_lambda.folds = j.value("lasso_cv_folds", 5);
  opts.basis.degree = j.value("basis_degree", 2);
  opts.basis.standardize = j.value("basis_standardize", true);
  opts.delta_mean_floor = j.value("delta_mean_floor", 0.02);
  opts.delta_row_floor = j.value("delta_row_floor", 1e-3);
  opts.phi_row_floor = j.value("phi_row_floor", 1e-3);
  const std::string ite_mode = j.value("ite_mode", std::string("diff"));
  if (ite_mode == "prop2") {
    opts.ite_prop2 = true;
  } else if (ite_mode != "diff") {
    dyadiv::fail(dyadiv::ErrorKind::Usage,
                 "ite_mode must be 'diff' or 'prop2'");
  }
  if (j.contains("nuisance_file")) {
    opts.precomputed = std::make_shared<dyadiv::PrecomputedNuisances>(
        dyadiv::PrecomputedNuisances::load_csv(
            j["nuisance_file"].get<std::string>()));
  }
  return opts;
}

}  // namespace

extern "C" {

const char* dv_version(void) { return "0.1.0"; }

const char* dv_last_error(void) { return g_last_error.c_str(); }

int dv_exit_class(dv_status status) {
  switch (status) {
    case DV_OK: return 0;
    case DV_ERR_USAGE: return 2;
    case DV_ERR_IO:
    case DV_ERR_PARSE:
    case DV_ERR_DOMAIN:
    case DV_ERR_SCHEMA: return 4;
    case DV_ERR_PRECONDITION:
    case DV_ERR_CONVERGENCE:
    case DV_ERR_SEPARATION:
    case DV_ERR_SINGULAR:
    case DV_ERR_WEAK_IV:
    case DV_ERR_INFERENCE: return 3;
    case DV_ERR_INTERNAL: break;
  }
  return 1;
}

dv_status dv_dataset_load_csv(const char* path, dv_y2_mode y2_mode,
                              dv_dataset** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "null argument");
    }
    dyadiv::Y2Mode mode = dyadiv::Y2Mode::AutoDetect;
    if (y2_mode == DV_Y2_REQUIRED) mode = dyadiv::Y2Mode::Required;
    if (y2_mode == DV_Y2_FORBIDDEN) mode = dyadiv::Y2Mode::Forbidden;
    *out = new dv_dataset{dyadiv::DyadDataset::load_csv(path, mode)};
  });
}

dv_status dv_dataset_simulate(const char* config_json, dv_dataset** out) {
  return guarded([&] {
    if (out == nullptr) dyadiv::fail(dyadiv::ErrorKind::Usage, "null output");
    const json j = parse_config(config_json);
    dyadiv::DgpConfig cfg;
    cfg.n = j.value("n", 1000);
    cfg.seed = j.value("seed", 1ULL);
    *out = new dv_dataset{dyadiv::generate(cfg)};
  });
}

dv_status dv_dataset_write_csv(const dv_dataset* ds, const char* path) {
  return guarded([&] {
    if (ds == nullptr || path == nullptr) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "null argument");
    }
    ds->data.write_csv(path);
  });
}

dv_status dv_dataset_swap_roles(const dv_dataset* ds, dv_dataset** out) {
  return guarded([&] {
    if (ds == nullptr || out == nullptr) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "null argument");
    }
    *out = new dv_dataset{ds->data.swap_roles()};
  });
}

long dv_dataset_rows(const dv_dataset* ds) {
  return ds == nullptr ? -1 : static_cast<long>(ds->data.n());
}

int dv_dataset_covariate_dim(const dv_dataset* ds) {
  return ds == nullptr ? -1 : ds->data.covariate_dim();
}

int dv_dataset_has_y2(const dv_dataset* ds) {
  return ds == nullptr ? -1 : (ds->data.has_y2() ? 1 : 0);
}

void dv_dataset_free(dv_dataset* ds) { delete ds; }

dv_status dv_estimate(const dv_dataset* ds, const char* config_json,
                      char** report_json) {
  return guarded([&] {
    if (ds == nullptr || report_json == nullptr) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "null argument");
    }
    const json j = parse_config(config_json);
    if (!j.contains("estimand")) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "config needs an 'estimand'");
    }
    const int ego_num = j.value("ego", 1);
    if (ego_num != 1 && ego_num != 2) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "ego must be 1 or 2");
    }
    const dyadiv::EstimandSpec spec = dyadiv::EstimandSpec::parse(
        j["estimand"].get<std::string>(),
        ego_num == 1 ? dyadiv::Ego::Unit1 : dyadiv::Ego::Unit2);
    const dyadiv::EstimateOptions opts = options_from_json(j);

    ds->data.check_overlap();
    dyadiv::EstimateReport report = dyadiv::estimate(ds->data, spec, opts);

    const int b = j.value("bootstrap", 0);
    if (b > 0) {
      const std::uint64_t seed = j.value("seed", 1ULL);
      const double level = j.value("level", 0.95);
      const int threads = j.value("threads", dyadiv::default_threads());
      report.bootstrap =
          dyadiv::bootstrap(ds->data, spec, opts, b, seed, level, threads);
    }
    *report_json = dup_string(report.to_json(j.value("json_indent", 2)));
  });
}

dv_status dv_mc_table(const char* config_json, char** csv_out,
                      char** text_out) {
  return guarded([&] {
    if (csv_out == nullptr || text_out == nullptr) {
      dyadiv::fail(dyadiv::ErrorKind::Usage, "null argument");
    }
    const json j = parse_config(config_json);
    dyadiv::McConfig cfg;
    cfg.reps = j.value("reps", 200);
    if (j.contains("ns")) cfg.ns = j["ns"].get<std::vector<int>>();
    if (j.contains("methods")) {
      cfg.methods = j["methods"].get<std::vector<std::string>>();
    }
    if (j.contains("estimands")) {
      cfg.estimands = j["estimands"].get<std::vector<std::string>>();
    }
    cfg.seed = j.value("seed", 1ULL);
    cfg.bootstrap_b = j.value("bootstrap", 200);
    cfg.level = j.value("level", 0.95);
    cfg.pattern =
        dyadiv::parse_pattern(j.value("misspec", std::string("none")));
    cfg.basis_degree = j.value("basis_degree", 2);
    cfg.threads = j.value("threads", dyadiv::default_threads());
    const dyadiv::McTable table = dyadiv::run_mc(cfg);
    *csv_out = dup_string(table.to_csv());
    *text_out = dup_string(table.to_text());
  });
}

void dv_string_free(char* s) { std::free(s); }

}  // extern "C"
