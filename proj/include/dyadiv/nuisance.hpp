#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dyadiv/dataset.hpp"

namespace dyadiv {

enum class Learner { Parametric, Lasso, Precomputed };

const char* learner_name(Learner l);
Learner parse_learner(const std::string& s);

struct LassoLambda {
  bool cv = true;       // cross-validated by default
  double lambda = 0.0;  // used when cv == false
  int folds = 5;
};

struct NuisanceConfig {
  Learner learner = Learner::Parametric;
  double trim_eps = 0.01;
  double newton_tol = 1e-10;
  int newton_max_iter = 100;
  LassoLambda lasso_lambda;
};

struct FitMeta {
  int iterations = 0;
  bool converged = true;
  double residual = 0.0;  // final score / moment norm
};

struct NuisanceMeta {
  FitMeta pi, mu, eta, delta, omega;
  std::string learner;
};

// Row-aligned evaluations of the five nuisance functions on one view.
// pi_obs is pr(Z = z_i | x_i) after trimming.
struct NuisanceValues {
  Eigen::ArrayXd pi1;
  Eigen::ArrayXd pi_obs;
  Eigen::ArrayXd mu;
  Eigen::ArrayXd eta;
  Eigen::ArrayXd delta;
  Eigen::ArrayXd omega;
  int trim_low = 0, trim_high = 0;
};

// Fitted coefficients (index functions use the design [1, X] with
// zero-variance covariates dropped) plus evaluations on the fitting view.
struct NuisanceFit {
  Eigen::VectorXd xi_pi, xi_mu, xi_eta, xi_delta, xi_omega;
  std::vector<int> kept_cols;  // covariate columns retained in the design
  NuisanceMeta meta;
  NuisanceValues values;
};

// [1, X] with zero-variance covariate columns dropped (they are absorbed by
// the intercept; keeping them would make every fit singular on saturated
// data). kept receives the retained covariate indices.
Eigen::MatrixXd build_design(const Eigen::MatrixXd& x, std::vector<int>* kept);

// Newton-Raphson logistic MLE; penalty > 0 switches to the lasso path
// (coordinate descent inside IRLS, intercept unpenalized).
Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& design,
                             const Eigen::ArrayXd& labels,
                             const Eigen::ArrayXd* weights, double penalty,
                             const NuisanceConfig& cfg, FitMeta* meta);

Eigen::VectorXd fit_ols(const Eigen::MatrixXd& design,
                        const Eigen::ArrayXd& response,
                        const Eigen::ArrayXd* weights, FitMeta* meta);

Eigen::VectorXd fit_lasso_linear(const Eigen::MatrixXd& design,
                                 const Eigen::ArrayXd& response,
                                 const Eigen::ArrayXd* weights, double lambda,
                                 FitMeta* meta);

// Deterministic k-fold (row index mod k) cross-validation over a decreasing
// lambda path; returns the loss-minimizing lambda.
double cv_lasso_lambda(const Eigen::MatrixXd& design,
                       const Eigen::ArrayXd& response, bool logistic,
                       int folds, const NuisanceConfig& cfg);

// Treatment-difference function delta(x) = tanh(xi' [1,x]), solved from the
// signed moment with weights 1/pi by damped Newton.
Eigen::VectorXd fit_delta_coef(const EstimandView& view,
                               const Eigen::MatrixXd& design,
                               const Eigen::ArrayXd& pi_obs,
                               const Eigen::ArrayXd& mu,
                               const NuisanceConfig& cfg, FitMeta* meta);

// Conditional-effect function omega(x) = xi' [1,x]; the signed moment is
// linear in xi, so this is one symmetric solve.
Eigen::VectorXd fit_omega_coef(const EstimandView& view,
                               const Eigen::MatrixXd& design,
                               const Eigen::ArrayXd& pi_obs,
                               const Eigen::ArrayXd& mu,
                               const Eigen::ArrayXd& eta, FitMeta* meta);

// Runs the five fitting steps in order (pi, mu, eta, delta, omega) on one
// view and returns coefficients, diagnostics and row-aligned values.
NuisanceFit fit_all(const EstimandView& view, const NuisanceConfig& cfg);

// Externally supplied per-row nuisance values, aligned to the dataset row
// order: columns pi1, mu, eta, delta, omega.
struct PrecomputedNuisances {
  Eigen::MatrixXd table;  // n x 5
  static PrecomputedNuisances load_csv(const std::string& path);
};

NuisanceValues evaluate_precomputed(const PrecomputedNuisances& pre,
                                    const EstimandView& view, double trim_eps);

inline double expit(double v) {
  if (v >= 0.0) {
    return 1.0 / (1.0 + std::exp(-v));
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace dyadiv
