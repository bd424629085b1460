#include "dyadiv/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dyadiv {

namespace {

double log1pexp(double v) {
  if (v > 33.0) return v;
  if (v < -33.0) return std::exp(v);
  return std::log1p(std::exp(v));
}

// Mean log-likelihood of a logistic model.
double logistic_loglik(const Eigen::MatrixXd& design,
                       const Eigen::ArrayXd& labels,
                       const Eigen::ArrayXd& w, const Eigen::VectorXd& beta) {
  const Eigen::ArrayXd eta = (design * beta).array();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    ll += w(i) * (labels(i) * eta(i) - log1pexp(eta(i)));
  }
  return ll / static_cast<double>(labels.size());
}

void check_full_rank(const Eigen::MatrixXd& design, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) {
    fail(ErrorKind::Singular,
         std::string(what) + ": design matrix is rank-deficient (collinear "
                             "columns)");
  }
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Weighted lasso on standardized coordinates. design includes the intercept
// column, which stays unpenalized via centering.
Eigen::VectorXd lasso_linear_impl(const Eigen::MatrixXd& design,
                                  const Eigen::ArrayXd& response,
                                  const Eigen::ArrayXd& w, double lambda,
                                  FitMeta* meta) {
  const int m = static_cast<int>(response.size());
  const int q = static_cast<int>(design.cols());
  const double wsum = w.sum();
  if (wsum <= 0.0) fail(ErrorKind::Domain, "lasso: weights sum to zero");

  // Center/scale the non-intercept columns.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(q);
  Eigen::MatrixXd xs = design;
  for (int j = 1; j < q; ++j) {
    mean(j) = (design.col(j).array() * w).sum() / wsum;
    xs.col(j).array() -= mean(j);
    const double v = (xs.col(j).array().square() * w).sum() / wsum;
    scale(j) = v > 1e-24 ? std::sqrt(v) : 1.0;
    xs.col(j) /= scale(j);
  }
  const double ymean = (response * w).sum() / wsum;
  Eigen::ArrayXd yc = response - ymean;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);  // standardized scale
  Eigen::ArrayXd resid = yc;
  Eigen::ArrayXd colnorm(q);
  for (int j = 1; j < q; ++j) {
    colnorm(j) = (xs.col(j).array().square() * w).sum() / wsum;
  }

  int it = 0;
  const int max_iter = 2000;
  for (; it < max_iter; ++it) {
    double max_change = 0.0;
    for (int j = 1; j < q; ++j) {
      if (colnorm(j) <= 0.0) continue;
      const double rho =
          (xs.col(j).array() * resid * w).sum() / wsum + colnorm(j) * beta(j);
      const double bj = soft_threshold(rho, lambda) / colnorm(j);
      const double diff = bj - beta(j);
      if (diff != 0.0) {
        resid -= diff * xs.col(j).array();
        beta(j) = bj;
        max_change = std::max(max_change, std::fabs(diff));
      }
    }
    if (max_change < 1e-10) break;
  }
  if (meta) {
    meta->iterations = it;
    meta->converged = it < max_iter;
  }

  // Back to the original scale.
  Eigen::VectorXd out = Eigen::VectorXd::Zero(q);
  double intercept = ymean;
  for (int j = 1; j < q; ++j) {
    out(j) = beta(j) / scale(j);
    intercept -= out(j) * mean(j);
  }
  out(0) = intercept;
  return out;
}

Eigen::VectorXd lasso_logistic_impl(const Eigen::MatrixXd& design,
                                    const Eigen::ArrayXd& labels,
                                    const Eigen::ArrayXd& w, double lambda,
                                    const NuisanceConfig& cfg, FitMeta* meta) {
  const int m = static_cast<int>(labels.size());
  const int q = static_cast<int>(design.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  int outer = 0;
  const int max_outer = 60;
  for (; outer < max_outer; ++outer) {
    const Eigen::ArrayXd eta = (design * beta).array();
    Eigen::ArrayXd p(m), wq(m), zr(m);
    for (int i = 0; i < m; ++i) {
      p(i) = expit(eta(i));
      const double v = std::max(p(i) * (1.0 - p(i)), 1e-5);
      wq(i) = w(i) * v;
      zr(i) = eta(i) + (labels(i) - p(i)) / v;
    }
    Eigen::VectorXd next = lasso_linear_impl(design, zr, wq, lambda, nullptr);
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < 1e-9) break;
  }
  if (meta) {
    meta->iterations = outer;
    meta->converged = outer < max_outer;
    const Eigen::ArrayXd p =
        (design * beta).array().unaryExpr([](double v) { return expit(v); });
    meta->residual =
        ((design.transpose() * ((labels - p) * w).matrix()) / m)
            .lpNorm<Eigen::Infinity>();
  }
  return beta;
}

}  // namespace

const char* learner_name(Learner l) {
  switch (l) {
    case Learner::Parametric: return "parametric";
    case Learner::Lasso: return "lasso";
    case Learner::Precomputed: return "precomputed";
  }
  return "?";
}

Learner parse_learner(const std::string& s) {
  if (s == "parametric") return Learner::Parametric;
  if (s == "lasso") return Learner::Lasso;
  if (s == "precomputed") return Learner::Precomputed;
  fail(ErrorKind::Usage, "unknown learner '" + s + "'");
}

Eigen::MatrixXd build_design(const Eigen::MatrixXd& x,
                             std::vector<int>* kept) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  std::vector<int> cols;
  for (int j = 0; j < p; ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / n;
    if (var > 1e-24) cols.push_back(j);
  }
  Eigen::MatrixXd d(n, 1 + cols.size());
  d.col(0).setOnes();
  for (size_t k = 0; k < cols.size(); ++k) d.col(1 + k) = x.col(cols[k]);
  if (kept) *kept = cols;
  return d;
}

Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& design,
                             const Eigen::ArrayXd& labels,
                             const Eigen::ArrayXd* weights, double penalty,
                             const NuisanceConfig& cfg, FitMeta* meta) {
  const int m = static_cast<int>(labels.size());
  const int q = static_cast<int>(design.cols());
  if (design.rows() != m) fail(ErrorKind::Domain, "design/label size mismatch");
  for (int i = 0; i < m; ++i) {
    if (labels(i) != 0.0 && labels(i) != 1.0)
      fail(ErrorKind::Domain, "logistic labels must be 0/1");
  }
  Eigen::ArrayXd w = weights ? *weights : Eigen::ArrayXd::Ones(m);

  if (penalty > 0.0) {
    return lasso_logistic_impl(design, labels, w, penalty, cfg, meta);
  }

  check_full_rank(design, "logistic regression");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  double ll = logistic_loglik(design, labels, w, beta);
  int it = 0;
  for (; it < cfg.newton_max_iter; ++it) {
    const Eigen::ArrayXd eta = (design * beta).array();
    Eigen::ArrayXd p(m);
    for (int i = 0; i < m; ++i) p(i) = expit(eta(i));
    const Eigen::VectorXd score =
        design.transpose() * ((labels - p) * w).matrix() / m;
    const double snorm = score.norm();
    if (meta) {
      meta->iterations = it;
      meta->residual = snorm;
    }
    if (snorm <= cfg.newton_tol) {
      if (meta) meta->converged = true;
      return beta;
    }
    const Eigen::ArrayXd hw = w * p * (1.0 - p);
    const Eigen::MatrixXd hess =
        design.transpose() * hw.matrix().asDiagonal() * design / m;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) {
      fail(ErrorKind::Separation,
           "logistic Hessian not positive definite; data may be separated");
    }
    const Eigen::VectorXd step = ldlt.solve(score);
    double t = 1.0;
    const double slope = score.dot(step);
    // Absolute slack keeps the Armijo test meaningful once improvements
    // shrink below the rounding noise of the log-likelihood.
    const double noise = 1e-13 * (1.0 + std::fabs(ll));
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd cand = beta + t * step;
      const double cand_ll = logistic_loglik(design, labels, w, cand);
      if (cand_ll >= ll + 1e-4 * t * slope - noise) {
        beta = cand;
        ll = cand_ll;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      fail(ErrorKind::Convergence,
           "logistic line search stalled at iteration " + std::to_string(it) +
               " (score norm " + std::to_string(snorm) + ")");
    }
    if (beta.lpNorm<Eigen::Infinity>() > 50.0) {
      fail(ErrorKind::Separation,
           "logistic coefficients diverging; perfect separation suspected");
    }
  }
  fail(ErrorKind::Convergence,
       "logistic regression did not converge in " +
           std::to_string(cfg.newton_max_iter) + " iterations (score norm " +
           std::to_string(meta ? meta->residual : -1.0) + ")");
}

Eigen::VectorXd fit_ols(const Eigen::MatrixXd& design,
                        const Eigen::ArrayXd& response,
                        const Eigen::ArrayXd* weights, FitMeta* meta) {
  const int m = static_cast<int>(response.size());
  Eigen::MatrixXd d = design;
  Eigen::ArrayXd r = response;
  if (weights) {
    const Eigen::ArrayXd sw = weights->sqrt();
    d.array().colwise() *= sw;
    r *= sw;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
  if (qr.rank() < d.cols()) {
    fail(ErrorKind::Singular, "least squares: rank-deficient design");
  }
  const Eigen::VectorXd beta = qr.solve(r.matrix());
  if (meta) {
    meta->iterations = 1;
    meta->converged = true;
    const Eigen::VectorXd resid = r.matrix() - d * beta;
    const double scale = std::max(1.0, r.matrix().norm());
    meta->residual = (d.transpose() * resid).lpNorm<Eigen::Infinity>() / scale;
  }
  return beta;
}

Eigen::VectorXd fit_lasso_linear(const Eigen::MatrixXd& design,
                                 const Eigen::ArrayXd& response,
                                 const Eigen::ArrayXd* weights, double lambda,
                                 FitMeta* meta) {
  Eigen::ArrayXd w =
      weights ? *weights : Eigen::ArrayXd::Ones(response.size());
  return lasso_linear_impl(design, response, w, lambda, meta);
}

double cv_lasso_lambda(const Eigen::MatrixXd& design,
                       const Eigen::ArrayXd& response, bool logistic,
                       int folds, const NuisanceConfig& cfg) {
  const int m = static_cast<int>(response.size());
  const int q = static_cast<int>(design.cols());
  folds = std::max(2, std::min(folds, m));

  // lambda_max: smallest penalty that zeroes all non-intercept coefficients
  // of the standardized problem.
  double ymean = response.mean();
  double lmax = 1e-3;
  for (int j = 1; j < q; ++j) {
    const double mean = design.col(j).mean();
    Eigen::ArrayXd c = design.col(j).array() - mean;
    const double sd = std::sqrt(std::max(c.square().mean(), 1e-24));
    const double g = std::fabs((c * (response - ymean)).mean() / sd);
    lmax = std::max(lmax, g);
  }
  const int npath = 40;
  std::vector<double> path(npath);
  for (int k = 0; k < npath; ++k) {
    path[k] = lmax * std::pow(1e-3, static_cast<double>(k) / (npath - 1));
  }

  std::vector<double> loss(npath, 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> tr, te;
    for (int i = 0; i < m; ++i) ((i % folds) == f ? te : tr).push_back(i);
    if (tr.empty() || te.empty()) continue;
    Eigen::MatrixXd dtr(tr.size(), q), dte(te.size(), q);
    Eigen::ArrayXd ytr(tr.size()), yte(te.size());
    for (size_t i = 0; i < tr.size(); ++i) {
      dtr.row(i) = design.row(tr[i]);
      ytr(i) = response(tr[i]);
    }
    for (size_t i = 0; i < te.size(); ++i) {
      dte.row(i) = design.row(te[i]);
      yte(i) = response(te[i]);
    }
    Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(tr.size());
    for (int k = 0; k < npath; ++k) {
      Eigen::VectorXd beta =
          logistic
              ? lasso_logistic_impl(dtr, ytr, ones, path[k], cfg, nullptr)
              : lasso_linear_impl(dtr, ytr, ones, path[k], nullptr);
      const Eigen::ArrayXd eta = (dte * beta).array();
      if (logistic) {
        for (Eigen::Index i = 0; i < yte.size(); ++i) {
          loss[k] += 2.0 * (log1pexp(eta(i)) - yte(i) * eta(i));
        }
      } else {
        loss[k] += (yte - eta).square().sum();
      }
    }
  }
  int best = 0;
  for (int k = 1; k < npath; ++k) {
    if (loss[k] < loss[best]) best = k;
  }
  return path[best];
}

Eigen::VectorXd fit_delta_coef(const EstimandView& view,
                               const Eigen::MatrixXd& design,
                               const Eigen::ArrayXd& pi_obs,
                               const Eigen::ArrayXd& mu,
                               const NuisanceConfig& cfg, FitMeta* meta) {
  const int m = view.n();
  const int q = static_cast<int>(design.cols());
  const Eigen::ArrayXd dsgn = 2.0 * view.z - 1.0;
  const Eigen::ArrayXd daind = view.da * view.ind;

  auto moment = [&](const Eigen::VectorXd& xi) {
    const Eigen::ArrayXd t = (design * xi).array().tanh();
    const Eigen::ArrayXd r = dsgn / pi_obs * (daind - t * view.z - mu);
    return Eigen::VectorXd(design.transpose() * r.matrix() / m);
  };

  Eigen::VectorXd xi = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd g = moment(xi);
  int it = 0;
  for (; it < cfg.newton_max_iter; ++it) {
    const double gnorm = g.norm();
    if (meta) {
      meta->iterations = it;
      meta->residual = gnorm;
    }
    if (gnorm <= cfg.newton_tol) {
      if (meta) meta->converged = true;
      return xi;
    }
    // -Jacobian = P_n[ z/pi * sech^2(xi'v) * v v' ], symmetric PSD.
    const Eigen::ArrayXd t = (design * xi).array().tanh();
    const Eigen::ArrayXd wq = view.z / pi_obs * (1.0 - t.square());
    const Eigen::MatrixXd negj =
        design.transpose() * wq.matrix().asDiagonal() * design / m;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(negj);
    if (ldlt.info() != Eigen::Success ||
        (ldlt.vectorD().array() < 1e-12).any()) {
      fail(ErrorKind::Singular,
           "delta moment Jacobian is singular; use a weaker basis or check "
           "instrument variation");
    }
    const Eigen::VectorXd step = ldlt.solve(g);
    double t_ls = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd cand = xi + t_ls * step;
      const Eigen::VectorXd gc = moment(cand);
      if (gc.norm() < gnorm || gc.norm() <= cfg.newton_tol) {
        xi = cand;
        g = gc;
        accepted = true;
        break;
      }
      t_ls *= 0.5;
    }
    if (!accepted) {
      fail(ErrorKind::Convergence,
           "delta solver stalled (moment norm " + std::to_string(gnorm) + ")");
    }
  }
  fail(ErrorKind::Convergence,
       "delta solver did not converge in " +
           std::to_string(cfg.newton_max_iter) + " iterations (moment norm " +
           std::to_string(g.norm()) + ")");
}

Eigen::VectorXd fit_omega_coef(const EstimandView& view,
                               const Eigen::MatrixXd& design,
                               const Eigen::ArrayXd& pi_obs,
                               const Eigen::ArrayXd& mu,
                               const Eigen::ArrayXd& eta, FitMeta* meta) {
  const int m = view.n();
  const Eigen::ArrayXd dsgn = 2.0 * view.z - 1.0;
  const Eigen::ArrayXd sw = dsgn / pi_obs;
  const Eigen::ArrayXd daind = view.da * view.ind;
  const Eigen::ArrayXd yind = view.y * view.ind;

  const Eigen::MatrixXd lhs = design.transpose() *
                              (sw * (daind - mu)).matrix().asDiagonal() *
                              design / m;
  const Eigen::VectorXd rhs =
      design.transpose() * (sw * (yind - eta)).matrix() / m;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) {
    fail(ErrorKind::Singular,
         "omega system is singular (collinear index functions or degenerate "
         "instrument arm)");
  }
  const Eigen::VectorXd xi = lu.solve(rhs);
  const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  const double resid = (lhs * xi - rhs).lpNorm<Eigen::Infinity>() / scale;
  if (meta) {
    meta->iterations = 1;
    meta->converged = resid <= 1e-8;
    meta->residual = resid;
  }
  if (resid > 1e-8) {
    fail(ErrorKind::Singular,
         "omega moment residual " + std::to_string(resid) +
             " exceeds tolerance; system nearly singular");
  }
  return xi;
}

namespace {

template <typename Fn>
auto with_step_label(const char* step, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(step) + ": " + e.what());
  }
}

}  // namespace

NuisanceFit fit_all(const EstimandView& view, const NuisanceConfig& cfg) {
  if (cfg.trim_eps <= 0.0 || cfg.trim_eps >= 0.5)
    fail(ErrorKind::Usage, "trim_eps must lie in (0, 0.5)");
  if (cfg.newton_tol <= 0.0) fail(ErrorKind::Usage, "newton_tol must be > 0");

  const int m = view.n();
  NuisanceFit fit;
  fit.meta.learner = learner_name(cfg.learner);
  const Eigen::MatrixXd design = build_design(view.x, &fit.kept_cols);
  const bool lasso = cfg.learner == Learner::Lasso;

  // Instrument arms must both be populated.
  const double zbar = view.z.mean();
  if (zbar <= 0.0 || zbar >= 1.0) {
    fail(ErrorKind::Precondition,
         "degenerate instrument arm in view: mean(z) = " + std::to_string(zbar));
  }

  auto pick_lambda = [&](const Eigen::MatrixXd& d, const Eigen::ArrayXd& y,
                         bool logistic) {
    if (!cfg.lasso_lambda.cv) return cfg.lasso_lambda.lambda;
    return cv_lasso_lambda(d, y, logistic, cfg.lasso_lambda.folds, cfg);
  };

  // Step 1: instrument propensity.
  fit.xi_pi = with_step_label("step 1 (pi)", [&] {
    const double lam = lasso ? pick_lambda(design, view.z, true) : 0.0;
    return fit_logistic(design, view.z, nullptr, lasso ? lam : 0.0, cfg,
                        &fit.meta.pi);
  });
  Eigen::ArrayXd pi1 = (design * fit.xi_pi).array();
  for (int i = 0; i < m; ++i) pi1(i) = expit(pi1(i));
  NuisanceValues vals;
  vals.trim_low = static_cast<int>((pi1 < cfg.trim_eps).count());
  vals.trim_high = static_cast<int>((pi1 > 1.0 - cfg.trim_eps).count());
  vals.pi1 = pi1.max(cfg.trim_eps).min(1.0 - cfg.trim_eps);
  vals.pi_obs = view.z * vals.pi1 + (1.0 - view.z) * (1.0 - vals.pi1);

  // Control-arm subset used by steps 2 and 3.
  std::vector<int> ctrl;
  for (int i = 0; i < m; ++i) {
    if (view.z(i) == 0.0) ctrl.push_back(i);
  }
  Eigen::MatrixXd d0(ctrl.size(), design.cols());
  Eigen::ArrayXd mu_lab(ctrl.size()), eta_resp(ctrl.size());
  for (size_t k = 0; k < ctrl.size(); ++k) {
    const int i = ctrl[k];
    d0.row(k) = design.row(i);
    mu_lab(k) = view.da(i) * view.ind(i);
    eta_resp(k) = view.y(i) * view.ind(i);
  }

  // Step 2: conditional treatment expectation on the z=0 arm.
  fit.xi_mu = with_step_label("step 2 (mu)", [&] {
    const double lam = lasso ? pick_lambda(d0, mu_lab, true) : 0.0;
    return fit_logistic(d0, mu_lab, nullptr, lasso ? lam : 0.0, cfg,
                        &fit.meta.mu);
  });
  vals.mu = (design * fit.xi_mu).array();
  for (int i = 0; i < m; ++i) vals.mu(i) = expit(vals.mu(i));

  // Step 3: conditional outcome expectation on the z=0 arm.
  fit.xi_eta = with_step_label("step 3 (eta)", [&] {
    if (lasso) {
      const double lam = pick_lambda(d0, eta_resp, false);
      return fit_lasso_linear(d0, eta_resp, nullptr, lam, &fit.meta.eta);
    }
    return fit_ols(d0, eta_resp, nullptr, &fit.meta.eta);
  });
  vals.eta = (design * fit.xi_eta).array();

  // Step 4: treatment probability difference.
  fit.xi_delta = with_step_label("step 4 (delta)", [&] {
    return fit_delta_coef(view, design, vals.pi_obs, vals.mu, cfg,
                          &fit.meta.delta);
  });
  vals.delta = (design * fit.xi_delta).array().tanh();

  // Step 5: conditional effect function.
  fit.xi_omega = with_step_label("step 5 (omega)", [&] {
    return fit_omega_coef(view, design, vals.pi_obs, vals.mu, vals.eta,
                          &fit.meta.omega);
  });
  vals.omega = (design * fit.xi_omega).array();

  fit.values = std::move(vals);
  return fit;
}

PrecomputedNuisances PrecomputedNuisances::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Schema, "empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream hs(line);
  std::vector<std::string> header;
  std::string tok;
  while (std::getline(hs, tok, ',')) header.push_back(tok);
  const std::vector<std::string> want = {"pi1", "mu", "eta", "delta", "omega"};
  if (header != want) {
    fail(ErrorKind::Schema,
         "precomputed nuisance header must be pi1,mu,eta,delta,omega");
  }
  std::vector<std::array<double, 5>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::array<double, 5> r{};
    for (int j = 0; j < 5; ++j) {
      if (!std::getline(ls, tok, ','))
        fail(ErrorKind::Parse,
             "line " + std::to_string(line_no) + ": expected 5 fields");
      try {
        r[j] = std::stod(tok);
      } catch (...) {
        fail(ErrorKind::Parse, "line " + std::to_string(line_no) +
                                   ": cannot parse '" + tok + "'");
      }
    }
    rows.push_back(r);
  }
  PrecomputedNuisances pre;
  pre.table.resize(rows.size(), 5);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < 5; ++j) pre.table(i, j) = rows[i][j];
  }
  for (Eigen::Index i = 0; i < pre.table.rows(); ++i) {
    const double p = pre.table(i, 0);
    const double d = pre.table(i, 3);
    if (p <= 0.0 || p >= 1.0)
      fail(ErrorKind::Domain,
           "precomputed pi1 out of (0,1) at row " + std::to_string(i + 1));
    if (std::fabs(d) >= 1.0)
      fail(ErrorKind::Domain,
           "precomputed |delta| must be < 1 at row " + std::to_string(i + 1));
  }
  return pre;
}

NuisanceValues evaluate_precomputed(const PrecomputedNuisances& pre,
                                    const EstimandView& view,
                                    double trim_eps) {
  const int m = view.n();
  NuisanceValues vals;
  vals.pi1.resize(m);
  vals.mu.resize(m);
  vals.eta.resize(m);
  vals.delta.resize(m);
  vals.omega.resize(m);
  for (int k = 0; k < m; ++k) {
    const int i = view.rows[k];
    if (i >= pre.table.rows()) {
      fail(ErrorKind::Schema,
           "precomputed nuisance table has " + std::to_string(pre.table.rows()) +
               " rows; dataset row " + std::to_string(i + 1) + " requested");
    }
    vals.pi1(k) = pre.table(i, 0);
    vals.mu(k) = pre.table(i, 1);
    vals.eta(k) = pre.table(i, 2);
    vals.delta(k) = pre.table(i, 3);
    vals.omega(k) = pre.table(i, 4);
  }
  vals.trim_low = static_cast<int>((vals.pi1 < trim_eps).count());
  vals.trim_high = static_cast<int>((vals.pi1 > 1.0 - trim_eps).count());
  vals.pi1 = vals.pi1.max(trim_eps).min(1.0 - trim_eps);
  vals.pi_obs = view.z * vals.pi1 + (1.0 - view.z) * (1.0 - vals.pi1);
  return vals;
}

}  // namespace dyadiv
