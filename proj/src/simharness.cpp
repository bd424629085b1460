#include "dyadiv/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "dyadiv/inference.hpp"
#include "dyadiv/parallel.hpp"
#include "dyadiv/rng.hpp"

namespace dyadiv {

namespace {

// Instrument propensity and treatment-uptake models.
double inst_prob(double x1, double x2) { return expit(0.25 * x1 + 0.25 * x2); }
double uptake(double z, double x1, double x2, double u1, double u2) {
  return expit(-1.0 + 2.0 * z - 0.25 * x1 - 0.25 * x2 + 0.05 * u1 -
               0.05 * u2);
}

// Mean potential outcome for own treatment a and partner treatment b.
double po_mean(int a, int b, double x1, double x2, double u1, double u2) {
  const double uterm = 2.0 * u1 + 2.0 * u2;
  if (a == 1 && b == 1) return 6.0 + 6.0 * x1 + 5.0 * x2 + uterm;
  if (a == 1 && b == 0) return 3.0 + 4.0 * x1 + 2.0 * x2 + uterm;
  if (a == 0 && b == 1) return -1.0 + 2.0 * x1 + 1.5 * x2 + uterm;
  return -2.0 + x1 + 0.5 * x2 + uterm;
}

// 8-point Gauss-Legendre rule on [-1, 1]. The latent confounders enter all
// integrands through indexes of range +-0.025, so this rule is exact to
// well below double rounding here.
constexpr int kQuadN = 8;
constexpr double kQuadX[kQuadN] = {
    -0.9602898564975362, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975362};
constexpr double kQuadW[kQuadN] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

double bern(double m, int d) { return d == 1 ? m : 1.0 - m; }

// Error-path shape used by the corruption patterns.
double corruption_shape(double x1, double x2) { return std::tanh(x1 + x2); }

struct PatternAmp {
  double pi, mu, eta, delta, omega;
};

PatternAmp pattern_amplitudes(MisspecPattern p) {
  // Amplitudes multiply n^{-1/2} * shape(x). "Accurate" nuisances get small
  // ones, deliberately mis-estimated nuisances large ones; the multiply
  // robust estimator only inherits products of the two.
  switch (p) {
    case MisspecPattern::OnlyIpwCorrect:
      return {-1.0, 2.0, -11.0, 0.8, 30.0};
    case MisspecPattern::OnlyGCorrect:
      return {-1.0, 2.0, -11.0, -5.0, 2.5};
    case MisspecPattern::OnlyRegCorrect:
      return {-6.0, 0.5, -1.5, -5.0, 2.5};
    case MisspecPattern::None:
      break;
  }
  return {0, 0, 0, 0, 0};
}

}  // namespace

DyadDataset generate(const DgpConfig& cfg) {
  if (cfg.n < 100) fail(ErrorKind::Usage, "simulated sample size must be >= 100");
  const int n = cfg.n;
  CounterRng rng(derive_key(cfg.seed, stream::kDataset));

  Eigen::MatrixXd x(n, 2);
  Eigen::ArrayXi z1(n), z2(n), d1(n), d2(n);
  Eigen::ArrayXd y1(n), y2(n);

  for (int i = 0; i < n; ++i) {
    const double x1 = 2.0 * rng.next_uniform() - 1.0;
    const double x2 = 2.0 * rng.next_uniform() - 1.0;
    const double u1 = 0.5 * (1.0 - rng.next_uniform());  // (0, 0.5]
    const double u2 = 0.5 * (1.0 - rng.next_uniform());
    x(i, 0) = x1;
    x(i, 1) = x2;

    const double pz = inst_prob(x1, x2);
    z1(i) = rng.next_bernoulli(pz) ? 1 : 0;
    z2(i) = rng.next_bernoulli(pz) ? 1 : 0;

    const double m1v = uptake(z1(i), x1, x2, u1, u2);
    const double m2v = uptake(z2(i), x1, x2, u1, u2);
    const double p11 = m1v * m2v;
    const double p10 = m1v * (1.0 - m2v);
    const double p01 = (1.0 - m1v) * m2v;
    const double p00 = (1.0 - m1v) * (1.0 - m2v);
    if (std::fabs(p11 + p10 + p01 + p00 - 1.0) > 1e-12) {
      fail(ErrorKind::Domain, "treatment cell probabilities do not sum to 1");
    }
    const double cell = rng.next_uniform();
    if (cell < p11) {
      d1(i) = 1;
      d2(i) = 1;
    } else if (cell < p11 + p10) {
      d1(i) = 1;
      d2(i) = 0;
    } else if (cell < p11 + p10 + p01) {
      d1(i) = 0;
      d2(i) = 1;
    } else {
      d1(i) = 0;
      d2(i) = 0;
    }

    double po1[2][2];  // ego outcomes, indexed [own d1][peer d2]
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        po1[a][b] = po_mean(a, b, x1, x2, u1, u2) + rng.next_normal();
      }
    }
    double po2[2][2];  // partner outcomes, indexed [own d2][peer d1]
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        po2[a][b] = po_mean(a, b, x1, x2, u1, u2) + rng.next_normal();
      }
    }
    y1(i) = po1[d1(i)][d2(i)];
    y2(i) = po2[d2(i)][d1(i)];
  }
  return DyadDataset(std::move(x), std::move(z1), std::move(z2), std::move(d1),
                     std::move(d2), std::move(y1), std::move(y2));
}

TrueValues true_values() { return TrueValues{}; }

double true_value(const std::string& label) {
  const TrueValues t = true_values();
  if (label == "dte1") return t.dte1;
  if (label == "dte0") return t.dte0;
  if (label == "ste1") return t.ste1;
  if (label == "ste0") return t.ste0;
  if (label == "ite") return t.ite;
  fail(ErrorKind::Usage, "unknown estimand '" + label + "'");
}

OracleNuisances oracle_at(double x1, double x2, Target target, int level) {
  if (target == Target::Ite) {
    fail(ErrorKind::Usage, "oracle is defined for direct/spillover views");
  }
  OracleNuisances o;
  o.pi1 = inst_prob(x1, x2);
  const double pz = o.pi1;
  const int d = level;
  const bool direct = target == Target::Dte;

  // One pass over the latent-confounder grid accumulates all three
  // integrals. Both units share the uptake model, so the partner-at-level-d
  // probability q has the same form for the direct and spillover views; the
  // views differ only in which argument of the outcome models is active.
  double mu = 0.0, de = 0.0, eta = 0.0;
  for (int i = 0; i < kQuadN; ++i) {
    const double u1 = 0.25 * (kQuadX[i] + 1.0);
    for (int j = 0; j < kQuadN; ++j) {
      const double u2 = 0.25 * (kQuadX[j] + 1.0);
      const double w = 0.25 * kQuadW[i] * kQuadW[j];
      const double m0 = uptake(0, x1, x2, u1, u2);
      const double m1 = uptake(1, x1, x2, u1, u2);
      const double q = pz * bern(m1, d) + (1.0 - pz) * bern(m0, d);
      mu += w * m0 * q;
      de += w * (m1 - m0) * q;
      const double ya = direct ? po_mean(1, d, x1, x2, u1, u2)
                               : po_mean(d, 1, x1, x2, u1, u2);
      const double yb = direct ? po_mean(0, d, x1, x2, u1, u2)
                               : po_mean(d, 0, x1, x2, u1, u2);
      eta += w * q * (m0 * ya + (1.0 - m0) * yb);
    }
  }
  o.mu = mu;
  o.delta = de;
  o.eta = eta;
  if (direct) {
    o.omega = d == 1 ? 7.0 + 4.0 * x1 + 3.5 * x2 : 5.0 + 3.0 * x1 + 1.5 * x2;
  } else {
    o.omega = d == 1 ? 3.0 + 2.0 * x1 + 3.0 * x2 : 1.0 + x1 + x2;
  }
  return o;
}

NuisanceValues oracle_values(const EstimandView& view) {
  if (view.x.cols() != 2) {
    fail(ErrorKind::Usage,
         "oracle nuisances are defined for the 2-covariate synthetic design");
  }
  const int m = view.n();
  NuisanceValues nv;
  nv.pi1.resize(m);
  nv.mu.resize(m);
  nv.eta.resize(m);
  nv.delta.resize(m);
  nv.omega.resize(m);
  for (int i = 0; i < m; ++i) {
    const OracleNuisances o =
        oracle_at(view.x(i, 0), view.x(i, 1), view.target, view.peer_level);
    nv.pi1(i) = o.pi1;
    nv.mu(i) = o.mu;
    nv.eta(i) = o.eta;
    nv.delta(i) = o.delta;
    nv.omega(i) = o.omega;
  }
  nv.pi_obs = view.z * nv.pi1 + (1.0 - view.z) * (1.0 - nv.pi1);
  return nv;
}

MisspecPattern parse_pattern(const std::string& s) {
  if (s == "none") return MisspecPattern::None;
  if (s == "only_ipw_correct") return MisspecPattern::OnlyIpwCorrect;
  if (s == "only_g_correct") return MisspecPattern::OnlyGCorrect;
  if (s == "only_reg_correct") return MisspecPattern::OnlyRegCorrect;
  fail(ErrorKind::Usage, "unknown misspecification pattern '" + s + "'");
}

const char* pattern_name(MisspecPattern p) {
  switch (p) {
    case MisspecPattern::None: return "none";
    case MisspecPattern::OnlyIpwCorrect: return "only_ipw_correct";
    case MisspecPattern::OnlyGCorrect: return "only_g_correct";
    case MisspecPattern::OnlyRegCorrect: return "only_reg_correct";
  }
  return "?";
}

NuisanceValues pattern_values(const EstimandView& view, MisspecPattern p) {
  NuisanceValues nv = oracle_values(view);
  if (p == MisspecPattern::None) return nv;
  const PatternAmp amp = pattern_amplitudes(p);
  const int m = view.n();
  const double rate = 1.0 / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < m; ++i) {
    const double s = corruption_shape(view.x(i, 0), view.x(i, 1)) * rate;
    nv.pi1(i) = std::clamp(nv.pi1(i) + amp.pi * s, 0.02, 0.98);
    nv.mu(i) = std::clamp(nv.mu(i) + amp.mu * s, 0.01, 0.99);
    nv.eta(i) += amp.eta * s;
    nv.delta(i) = std::clamp(nv.delta(i) + amp.delta * s, 0.02, 0.95);
    nv.omega(i) += amp.omega * s;
  }
  nv.pi_obs = view.z * nv.pi1 + (1.0 - view.z) * (1.0 - nv.pi1);
  return nv;
}

namespace {

struct MethodSpec {
  std::string name;
  Method method;
  Learner learner;
};

MethodSpec resolve_mc_method(const std::string& s) {
  if (s == "parametric") return {s, Method::Mr, Learner::Parametric};
  if (s == "lasso") return {s, Method::Mr, Learner::Lasso};
  if (s == "sieve") return {s, Method::Sieve, Learner::Parametric};
  return {s, parse_method(s), Learner::Parametric};
}

}  // namespace

McTable run_mc(const McConfig& cfg) {
  if (cfg.reps < 2) fail(ErrorKind::Usage, "run_mc needs reps >= 2");
  McTable table;
  if (cfg.reps < 30) {
    table.warnings.push_back("low-rep warning: " + std::to_string(cfg.reps) +
                             " replications give noisy bias/SD/CP estimates");
  }

  std::vector<MethodSpec> methods;
  for (const auto& s : cfg.methods) methods.push_back(resolve_mc_method(s));
  std::vector<EstimandSpec> estimands;
  for (const auto& s : cfg.estimands) estimands.push_back(EstimandSpec::parse(s));

  struct Cell {
    double point = 0.0;
    bool point_ok = false;
    bool ci_ok = false;
    bool covered = false;
  };

  for (int n : cfg.ns) {
    // cells[rep][estimand][method]
    std::vector<std::vector<std::vector<Cell>>> cells(
        cfg.reps, std::vector<std::vector<Cell>>(
                      estimands.size(), std::vector<Cell>(methods.size())));

    parallel_for(cfg.reps, cfg.threads, [&](int rep) {
      DgpConfig dcfg;
      dcfg.n = n;
      dcfg.seed = derive_key(cfg.seed, stream::kMcRep,
                             static_cast<std::uint64_t>(n),
                             static_cast<std::uint64_t>(rep));
      const DyadDataset ds = generate(dcfg);
      for (size_t ei = 0; ei < estimands.size(); ++ei) {
        // Pattern nuisances are functions of x only; evaluate them once per
        // dataset and estimand, then serve resamples by row lookup.
        std::shared_ptr<PrecomputedNuisances> pattern_table;
        if (cfg.pattern != MisspecPattern::None &&
            estimands[ei].target != Target::Ite) {
          const EstimandView full = make_view(ds, estimands[ei]);
          const NuisanceValues nv = pattern_values(full, cfg.pattern);
          auto pre = std::make_shared<PrecomputedNuisances>();
          pre->table.resize(full.n(), 5);
          pre->table.col(0) = nv.pi1;
          pre->table.col(1) = nv.mu;
          pre->table.col(2) = nv.eta;
          pre->table.col(3) = nv.delta;
          pre->table.col(4) = nv.omega;
          pattern_table = std::move(pre);
        }
        for (size_t mi = 0; mi < methods.size(); ++mi) {
          EstimateOptions opts;
          opts.method = methods[mi].method;
          opts.nuisance.learner = methods[mi].learner;
          opts.basis.degree = cfg.basis_degree;
          if (cfg.pattern != MisspecPattern::None &&
              methods[mi].method != Method::Sieve) {
            if (pattern_table) {
              const auto table = pattern_table;
              const double eps = opts.nuisance.trim_eps;
              opts.nuisance_override = [table, eps](const EstimandView& v) {
                return evaluate_precomputed(*table, v, eps);
              };
            } else {
              const MisspecPattern pat = cfg.pattern;
              opts.nuisance_override = [pat](const EstimandView& v) {
                return pattern_values(v, pat);
              };
            }
          }
          Cell& cell = cells[rep][ei][mi];
          try {
            const EstimateReport rep_out =
                estimate(ds, estimands[ei], opts, nullptr);
            cell.point = rep_out.point;
            cell.point_ok = true;
            if (cfg.bootstrap_b > 0) {
              const std::uint64_t bseed = derive_key(
                  cfg.seed, stream::kMcBoot,
                  static_cast<std::uint64_t>(n) * 1000003ULL +
                      static_cast<std::uint64_t>(rep),
                  static_cast<std::uint64_t>(ei) * 16ULL + mi);
              const BootstrapResult boot =
                  bootstrap(ds, estimands[ei], opts, cfg.bootstrap_b, bseed,
                            cfg.level, 1);
              const double truth = true_value(estimands[ei].label());
              cell.ci_ok = true;
              cell.covered =
                  boot.ci_lower <= truth && truth <= boot.ci_upper;
            }
          } catch (const Error&) {
            // leave the cell marked as failed
          }
        }
      }
    });

    for (size_t ei = 0; ei < estimands.size(); ++ei) {
      const double truth = true_value(estimands[ei].label());
      for (size_t mi = 0; mi < methods.size(); ++mi) {
        McRow row;
        row.estimand = estimands[ei].label();
        row.method = methods[mi].name;
        row.n = n;
        row.reps = cfg.reps;
        std::vector<double> pts;
        int covered = 0, with_ci = 0, failures = 0;
        for (int rep = 0; rep < cfg.reps; ++rep) {
          const Cell& c = cells[rep][ei][mi];
          if (!c.point_ok || (cfg.bootstrap_b > 0 && !c.ci_ok)) ++failures;
          if (c.point_ok) pts.push_back(c.point);
          if (c.ci_ok) {
            ++with_ci;
            if (c.covered) ++covered;
          }
        }
        row.failures = failures;
        if (!pts.empty()) {
          double mean = 0.0;
          for (double v : pts) mean += v;
          mean /= static_cast<double>(pts.size());
          row.bias = mean - truth;
          double ss = 0.0;
          for (double v : pts) ss += (v - mean) * (v - mean);
          row.sd = pts.size() > 1
                       ? std::sqrt(ss / static_cast<double>(pts.size() - 1))
                       : 0.0;
        } else {
          row.bias = std::numeric_limits<double>::quiet_NaN();
          row.sd = std::numeric_limits<double>::quiet_NaN();
        }
        row.cp = with_ci > 0 ? static_cast<double>(covered) / with_ci
                             : std::numeric_limits<double>::quiet_NaN();
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

std::string McTable::to_csv() const {
  std::string out = "estimand,method,n,bias,sd,cp,failures\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%.6f,%d\n",
                  r.estimand.c_str(), r.method.c_str(), r.n, r.bias, r.sd,
                  r.cp, r.failures);
    out += buf;
  }
  return out;
}

std::string McTable::to_text() const {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-9s %-11s %7s %9s %8s %6s %9s %5s\n",
                "estimand", "method", "n", "bias", "sd", "cp", "failures",
                "reps");
  out += buf;
  out += std::string(70, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-9s %-11s %7d %9.3f %8.3f %6.2f %9d %5d\n",
                  r.estimand.c_str(), r.method.c_str(), r.n, r.bias, r.sd,
                  r.cp, r.failures, r.reps);
    out += buf;
  }
  for (const auto& w : warnings) out += "note: " + w + "\n";
  return out;
}

}  // namespace dyadiv
