#include "dyadiv/estimators.hpp"

#include <cmath>

#include "dyadiv/rng.hpp"
#include "json.hpp"

namespace dyadiv {

namespace {

void weak_iv_guard(const Eigen::ArrayXd& delta, double mean_floor,
                   double row_floor, const char* what) {
  const double mean_abs = std::fabs(delta.mean());
  if (mean_abs < mean_floor) {
    fail(ErrorKind::WeakIv,
         std::string(what) + ": |mean| = " + std::to_string(mean_abs) +
             " is below the floor " + std::to_string(mean_floor));
  }
  const double row_min = delta.abs().minCoeff();
  if (row_min < row_floor) {
    fail(ErrorKind::WeakIv,
         std::string(what) + ": a row has magnitude " +
             std::to_string(row_min) + " below the floor " +
             std::to_string(row_floor));
  }
}

void fill_delta_diag(Diagnostics* diag, const Eigen::ArrayXd& delta,
                     const EstimateOptions& opts) {
  diag->min_abs_delta = delta.abs().minCoeff();
  diag->mean_delta = delta.mean();
  diag->weak_iv = std::fabs(diag->mean_delta) < opts.delta_mean_floor ||
                  diag->min_abs_delta < opts.delta_row_floor;
}

NuisanceValues resolve_nuisances(const EstimandView& view,
                                 const EstimateOptions& opts,
                                 NuisanceMeta* meta) {
  if (opts.nuisance_override) {
    if (meta) meta->learner = "override";
    return opts.nuisance_override(view);
  }
  if (opts.nuisance.learner == Learner::Precomputed) {
    if (!opts.precomputed) {
      fail(ErrorKind::Usage,
           "precomputed learner selected but no nuisance table provided");
    }
    if (meta) meta->learner = "precomputed";
    return evaluate_precomputed(*opts.precomputed, view,
                                opts.nuisance.trim_eps);
  }
  NuisanceFit fit = fit_all(view, opts.nuisance);
  if (meta) *meta = fit.meta;
  return std::move(fit.values);
}

EstimateReport estimate_sieve_view(const EstimandView& view,
                                   const EstimateOptions& opts) {
  EstimateReport rep;
  rep.method = Method::Sieve;
  rep.n = view.n();
  Basis basis = Basis::build(view.x, opts.basis, &rep.diag.warnings);
  const Eigen::MatrixXd v = basis.eval_rows(view.x);
  SieveFit fit = solve_calibration(view, v);
  rep.diag.calib_resid_beta = fit.resid_beta;
  rep.diag.calib_resid_gamma = fit.resid_gamma;
  rep.diag.calib_resid_alpha = fit.resid_alpha;
  fill_delta_diag(&rep.diag, fit.phi, opts);

  if (fit.phi.abs().minCoeff() < opts.phi_row_floor) {
    fail(ErrorKind::WeakIv,
         "calibrated weight phi has a row below the floor " +
             std::to_string(opts.phi_row_floor));
  }
  const Eigen::ArrayXd dsgn = 2.0 * view.z - 1.0;
  rep.point = (dsgn * view.ind * view.y * fit.psi / fit.phi).mean();
  return rep;
}

EstimateReport estimate_single(const DyadDataset& ds, const EstimandSpec& spec,
                               const EstimateOptions& opts,
                               const std::vector<int>* idx,
                               bool augment_peer_iv) {
  const EstimandView view = make_view(ds, spec, idx, augment_peer_iv);

  if (opts.method == Method::Sieve) {
    EstimateReport rep = estimate_sieve_view(view, opts);
    rep.estimand = spec;
    return rep;
  }

  EstimateReport rep;
  rep.estimand = spec;
  rep.method = opts.method;
  rep.learner = opts.nuisance.learner;
  rep.n = view.n();
  const NuisanceValues nv = resolve_nuisances(view, opts, &rep.nuisance_meta);
  rep.diag.trim_low = nv.trim_low;
  rep.diag.trim_high = nv.trim_high;
  if (nv.delta.size() > 0) fill_delta_diag(&rep.diag, nv.delta, opts);

  switch (opts.method) {
    case Method::Wald:
      rep.point = point_wald(view, nv);
      break;
    case Method::Ipw:
      rep.point = point_ipw(view, nv, opts);
      break;
    case Method::G:
      rep.point = point_g(view, nv);
      break;
    case Method::Reg:
      rep.point = point_reg(view, nv);
      break;
    case Method::Mr: {
      const Eigen::ArrayXd terms = mr_terms(view, nv, opts);
      rep.point = terms.mean();
      rep.eif = terms - rep.point;
      const int n = view.n();
      const double var = rep.eif.square().sum() / (n - 1);
      rep.se_plugin = std::sqrt(var / n);
      break;
    }
    case Method::Sieve:
      break;  // handled above
  }
  return rep;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::Wald: return "wald";
    case Method::Ipw: return "ipw";
    case Method::G: return "g";
    case Method::Reg: return "reg";
    case Method::Mr: return "mr";
    case Method::Sieve: return "sieve";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "wald") return Method::Wald;
  if (s == "ipw") return Method::Ipw;
  if (s == "g") return Method::G;
  if (s == "reg") return Method::Reg;
  if (s == "mr") return Method::Mr;
  if (s == "sieve") return Method::Sieve;
  fail(ErrorKind::Usage,
       "unknown method '" + s + "' (want wald|ipw|g|reg|mr|sieve)");
}

double point_wald(const EstimandView& v, const NuisanceValues& nv) {
  return nv.omega.mean();
}

double point_ipw(const EstimandView& v, const NuisanceValues& nv,
                 const EstimateOptions& opts) {
  weak_iv_guard(nv.delta, opts.delta_mean_floor, opts.delta_row_floor,
                "ipw: fitted delta");
  const Eigen::ArrayXd dsgn = 2.0 * v.z - 1.0;
  return (dsgn * v.ind * v.y / (nv.pi_obs * nv.delta)).mean();
}

double point_g(const EstimandView& v, const NuisanceValues& nv) {
  // Refit omega within the linear-index class using only pi, then average.
  std::vector<int> kept;
  const Eigen::MatrixXd design = build_design(v.x, &kept);
  const int m = v.n();
  const Eigen::ArrayXd sw = (2.0 * v.z - 1.0) / nv.pi_obs;
  const Eigen::MatrixXd lhs = design.transpose() *
                              (sw * v.ind * v.da).matrix().asDiagonal() *
                              design / m;
  const Eigen::VectorXd rhs =
      design.transpose() * (sw * v.ind * v.y).matrix() / m;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) {
    fail(ErrorKind::Singular, "g-moment system is singular");
  }
  const Eigen::VectorXd coef = lu.solve(rhs);
  return (design * coef).mean();
}

double point_reg(const EstimandView& v, const NuisanceValues& nv) {
  // Refit omega from the unweighted signed residual moment; uses only
  // (mu, eta) plus the refit, never pi or delta.
  std::vector<int> kept;
  const Eigen::MatrixXd design = build_design(v.x, &kept);
  const int m = v.n();
  const Eigen::ArrayXd dsgn = 2.0 * v.z - 1.0;
  const Eigen::MatrixXd lhs =
      design.transpose() *
      (dsgn * (v.da * v.ind - nv.mu)).matrix().asDiagonal() * design / m;
  const Eigen::VectorXd rhs =
      design.transpose() * (dsgn * (v.y * v.ind - nv.eta)).matrix() / m;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) {
    fail(ErrorKind::Singular, "reg-moment system is singular");
  }
  const Eigen::VectorXd coef = lu.solve(rhs);
  return (design * coef).mean();
}

Eigen::ArrayXd mr_terms(const EstimandView& v, const NuisanceValues& nv,
                        const EstimateOptions& opts) {
  weak_iv_guard(nv.delta, opts.delta_mean_floor, opts.delta_row_floor,
                "mr: fitted delta");
  const Eigen::ArrayXd dsgn = 2.0 * v.z - 1.0;
  const Eigen::ArrayXd resid = v.ind * v.y - nv.eta -
                               v.da * v.ind * nv.omega + nv.mu * nv.omega;
  return dsgn / (nv.pi_obs * nv.delta) * resid + nv.omega;
}

EstimateReport estimate(const DyadDataset& ds, const EstimandSpec& spec,
                        const EstimateOptions& opts,
                        const std::vector<int>* idx) {
  if (spec.target != Target::Ite) {
    return estimate_single(ds, spec, opts, idx, false);
  }

  // Interaction effect: difference of the two direct-effect levels, either
  // plainly or with every nuisance conditioned on the peer instrument.
  EstimandSpec s1{Target::Dte, 1, spec.ego};
  EstimandSpec s0{Target::Dte, 0, spec.ego};
  EstimateReport r1 = estimate_single(ds, s1, opts, idx, opts.ite_prop2);
  EstimateReport r0 = estimate_single(ds, s0, opts, idx, opts.ite_prop2);

  EstimateReport rep;
  rep.estimand = spec;
  rep.method = opts.method;
  rep.learner = opts.nuisance.learner;
  rep.n = r1.n;
  rep.point = r1.point - r0.point;
  if (r1.eif.size() > 0 && r0.eif.size() > 0) {
    rep.eif = r1.eif - r0.eif;
    const int n = rep.n;
    const double var = rep.eif.square().sum() / (n - 1);
    rep.se_plugin = std::sqrt(var / n);
  }
  rep.diag = r1.diag;
  rep.diag.weak_iv = r1.diag.weak_iv || r0.diag.weak_iv;
  rep.diag.min_abs_delta =
      std::min(r1.diag.min_abs_delta, r0.diag.min_abs_delta);
  for (const auto& w : r0.diag.warnings) rep.diag.warnings.push_back(w);
  rep.nuisance_meta = r1.nuisance_meta;
  return rep;
}

std::string EstimateReport::to_json(int indent) const {
  nlohmann::json j;
  j["estimand"] = estimand.label();
  j["ego"] = estimand.ego == Ego::Unit1 ? 1 : 2;
  j["method"] = method_name(method);
  if (method != Method::Sieve) j["learner"] = learner_name(learner);
  j["point"] = point;
  j["n"] = n;
  if (se_plugin) {
    j["se_plugin"] = *se_plugin;
    const double z = norm_quantile(0.975);
    j["ci"] = {point - z * *se_plugin, point + z * *se_plugin};
  } else {
    j["se_plugin"] = nullptr;
    j["ci"] = nullptr;
  }
  nlohmann::json d;
  d["weak_iv"] = diag.weak_iv;
  d["min_abs_delta"] = diag.min_abs_delta;
  d["mean_delta"] = diag.mean_delta;
  d["trim_low"] = diag.trim_low;
  d["trim_high"] = diag.trim_high;
  if (method == Method::Sieve) {
    d["calibration_residuals"] = {diag.calib_resid_beta,
                                  diag.calib_resid_gamma,
                                  diag.calib_resid_alpha};
  }
  if (!diag.warnings.empty()) d["warnings"] = diag.warnings;
  if (method != Method::Sieve) {
    nlohmann::json nm;
    nm["learner"] = nuisance_meta.learner;
    auto step = [](const FitMeta& f) {
      nlohmann::json s;
      s["iterations"] = f.iterations;
      s["converged"] = f.converged;
      s["residual"] = f.residual;
      return s;
    };
    nm["pi"] = step(nuisance_meta.pi);
    nm["mu"] = step(nuisance_meta.mu);
    nm["eta"] = step(nuisance_meta.eta);
    nm["delta"] = step(nuisance_meta.delta);
    nm["omega"] = step(nuisance_meta.omega);
    d["nuisance"] = nm;
  }
  j["diagnostics"] = d;
  if (bootstrap) {
    nlohmann::json b;
    b["B"] = bootstrap->b;
    b["level"] = bootstrap->level;
    b["se"] = bootstrap->se;
    b["ci"] = {bootstrap->ci_lower, bootstrap->ci_upper};
    b["n_failed"] = bootstrap->n_failed;
    b["n_range_excluded"] = bootstrap->n_range_excluded;
    j["bootstrap"] = b;
  }
  return indent >= 0 ? j.dump(indent) : j.dump();
}

}  // namespace dyadiv
