/* dyadiv: causal peer-effect estimation on dyadic data with dual
 * instrumental variables.
 *
 * C API over the C++ core. All functions return a dv_status code; on
 * failure dv_last_error() describes the problem (thread-local). Strings
 * returned through char** are owned by the caller and released with
 * dv_string_free(); datasets are opaque handles released with
 * dv_dataset_free().
 */
#ifndef DYADIV_H
#define DYADIV_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct dv_dataset dv_dataset;

typedef enum {
  DV_OK = 0,
  DV_ERR_USAGE,         /* bad configuration value */
  DV_ERR_IO,            /* file unreadable or unwritable */
  DV_ERR_PARSE,         /* malformed CSV cell or row */
  DV_ERR_DOMAIN,        /* value outside its admissible set */
  DV_ERR_SCHEMA,        /* header or column mismatch */
  DV_ERR_PRECONDITION,  /* required field or condition missing */
  DV_ERR_CONVERGENCE,   /* solver did not reach tolerance */
  DV_ERR_SEPARATION,    /* logistic likelihood unbounded */
  DV_ERR_SINGULAR,      /* singular linear system */
  DV_ERR_WEAK_IV,       /* instrument too weak for stable weighting */
  DV_ERR_INFERENCE,     /* bootstrap failure ceiling exceeded */
  DV_ERR_INTERNAL       /* unexpected error */
} dv_status;

/* y2 handling when loading: 0 = detect from header, 1 = required,
 * 2 = forbidden. */
typedef enum {
  DV_Y2_AUTO = 0,
  DV_Y2_REQUIRED = 1,
  DV_Y2_FORBIDDEN = 2
} dv_y2_mode;

const char* dv_version(void);

/* Message for the most recent failure on this thread. */
const char* dv_last_error(void);

/* Process exit class for a status: 0 success, 2 usage error, 3 estimation
 * abort, 4 IO/data error, 1 internal. */
int dv_exit_class(dv_status status);

/* ---- datasets ---- */

dv_status dv_dataset_load_csv(const char* path, dv_y2_mode y2_mode,
                              dv_dataset** out);

/* Draws a synthetic dyadic dataset. config_json: {"n": int, "seed": int}. */
dv_status dv_dataset_simulate(const char* config_json, dv_dataset** out);

dv_status dv_dataset_write_csv(const dv_dataset* ds, const char* path);
dv_status dv_dataset_swap_roles(const dv_dataset* ds, dv_dataset** out);

long dv_dataset_rows(const dv_dataset* ds);
int dv_dataset_covariate_dim(const dv_dataset* ds);
int dv_dataset_has_y2(const dv_dataset* ds);
void dv_dataset_free(dv_dataset* ds);

/* ---- estimation ---- */

/* Runs one estimator and returns the report as JSON.
 *
 * config_json keys (all optional except "estimand" and "method"):
 *   estimand: "dte1"|"dte0"|"ste1"|"ste0"|"ite"
 *   ego: 1|2                       (default 1)
 *   method: "wald"|"ipw"|"g"|"reg"|"mr"|"sieve"
 *   learner: "parametric"|"lasso"|"precomputed"
 *   nuisance_file: path            (csv pi1,mu,eta,delta,omega; learner
 *                                   "precomputed")
 *   trim_eps, newton_tol, newton_max_iter
 *   lasso_lambda: number           (fixed penalty; omit for CV)
 *   lasso_cv_folds: int            (default 5)
 *   basis_degree: int              (default 2), basis_standardize: bool
 *   delta_mean_floor, delta_row_floor, phi_row_floor
 *   ite_mode: "diff"|"prop2"       (default "diff")
 *   bootstrap: int                 (B; 0 disables)
 *   seed: int, level: number, threads: int
 *   json_indent: int               (-1 compact)
 */
dv_status dv_estimate(const dv_dataset* ds, const char* config_json,
                      char** report_json);

/* Monte Carlo study over synthetic data; returns the bias/SD/CP table as
 * CSV and as aligned text.
 *
 * config_json keys: reps, ns (array), methods (array of
 * "parametric"|"lasso"|"sieve"|"wald"|"ipw"|"g"|"reg"|"mr"), estimands
 * (array), seed, bootstrap, level, misspec ("none"|"only_ipw_correct"|
 * "only_g_correct"|"only_reg_correct"), basis_degree, threads.
 */
dv_status dv_mc_table(const char* config_json, char** csv_out,
                      char** text_out);

void dv_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* DYADIV_H */
