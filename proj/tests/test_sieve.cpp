#include <cmath>

#include "doctest.h"
#include "dyadiv/estimators.hpp"
#include "dyadiv/rng.hpp"
#include "dyadiv/sieve.hpp"
#include "dyadiv/simharness.hpp"
#include "testutil.hpp"

using namespace dyadiv;

namespace {

EstimandView dgp_view(int n, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  return make_view(generate(cfg), EstimandSpec::parse("dte1"));
}

}  // namespace

TEST_CASE("basis sizes follow the monomial count") {
  DgpConfig cfg;
  cfg.n = 500;
  cfg.seed = 1;
  const DyadDataset ds = generate(cfg);

  BasisSpec deg1{1, true};
  const Basis b1 = Basis::build(ds.x(), deg1, nullptr);
  CHECK(b1.size() == 3);  // 1, x1', x2'

  BasisSpec deg2{2, true};
  const Basis b2 = Basis::build(ds.x(), deg2, nullptr);
  CHECK(b2.size() == 6);  // adds x1'^2, x1'x2', x2'^2
  CHECK(b2.prefix_size(1) == 3);

  BasisSpec deg3{3, true};
  CHECK(Basis::build(ds.x(), deg3, nullptr).size() == 10);
}

TEST_CASE("basis rows start with the constant monomial") {
  DgpConfig cfg;
  cfg.n = 300;
  cfg.seed = 2;
  const DyadDataset ds = generate(cfg);
  const Basis b = Basis::build(ds.x(), BasisSpec{2, true}, nullptr);
  const Eigen::MatrixXd v = b.eval_rows(ds.x());
  CHECK(v.col(0).mean() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(v.col(0).minCoeff() == 1.0);
  // Standardized coordinates have mean ~0 on the build sample.
  CHECK(std::fabs(v.col(1).mean()) < 1e-12);
  CHECK(std::fabs(v.col(2).mean()) < 1e-12);
}

TEST_CASE("oversized basis is a configuration error") {
  DgpConfig cfg;
  cfg.n = 100;  // smallest legal draw
  cfg.seed = 3;
  const DyadDataset ds = generate(cfg);
  Eigen::MatrixXd wide(20, 8);
  CounterRng rng(mix64(4));
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 8; ++j) wide(i, j) = rng.next_normal();
  }
  // degree 2 over 8 covariates: K = 45 >= 20/4.
  try {
    Basis::build(wide, BasisSpec{2, true}, nullptr);
    FAIL("expected a usage error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Usage);
  }
  (void)ds;
}

TEST_CASE("unstandardized wide-range covariates produce a warning") {
  Eigen::MatrixXd x(200, 1);
  CounterRng rng(mix64(5));
  for (int i = 0; i < 200; ++i) x(i, 0) = 40.0 * rng.next_uniform() - 20.0;
  std::vector<std::string> warnings;
  (void)Basis::build(x, BasisSpec{1, false}, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("standardization") != std::string::npos);
}

TEST_CASE("hand dataset calibration solves in closed form") {
  const DyadDataset ds = testutil::hand_dataset();
  const EstimandView v = make_view(ds, EstimandSpec::parse("dte1"));
  const Basis b = Basis::build(v.x, BasisSpec{2, true}, nullptr);
  CHECK(b.size() == 1);  // no covariates to expand
  const Eigen::MatrixXd rows = b.eval_rows(v.x);
  const SieveFit fit = solve_calibration(v, rows);

  // Balanced arms: dot_m1(beta0) = 1/0.5 = 2 on both arms.
  CHECK(fit.psi.minCoeff() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.psi.maxCoeff() == doctest::Approx(2.0).epsilon(1e-9));
  // Signed weighted treatment mean is 0.25, so alpha = -atanh(0.25).
  CHECK(fit.alpha(0) ==
        doctest::Approx(-0.25541281188299536).epsilon(1e-7));
  CHECK(fit.phi(0) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("calibration first-order conditions hold to 1e-8") {
  const EstimandView v = dgp_view(4000, 11);
  const Basis b = Basis::build(v.x, BasisSpec{2, true}, nullptr);
  const Eigen::MatrixXd rows = b.eval_rows(v.x);
  const SieveFit fit = solve_calibration(v, rows);
  CHECK(fit.resid_beta <= 1e-8);
  CHECK(fit.resid_gamma <= 1e-8);
  CHECK(fit.resid_alpha <= 1e-8);

  // And recomputed from scratch, componentwise.
  const CalibrationResiduals r = calibration_residuals(v, rows, fit);
  CHECK(r.beta <= 1e-8);
  CHECK(r.gamma <= 1e-8);
  CHECK(r.alpha <= 1e-8);
}

TEST_CASE("weight ranges follow the link functions") {
  const EstimandView v = dgp_view(3000, 12);
  const Basis b = Basis::build(v.x, BasisSpec{2, true}, nullptr);
  const SieveFit fit = solve_calibration(v, b.eval_rows(v.x));
  CHECK(fit.psi.minCoeff() > 1.0);
  CHECK(fit.phi.minCoeff() > -1.0);
  CHECK(fit.phi.maxCoeff() < 1.0);
}

TEST_CASE("analytic gradients match central finite differences") {
  const EstimandView v = dgp_view(800, 13);
  const Basis b = Basis::build(v.x, BasisSpec{2, true}, nullptr);
  const Eigen::MatrixXd rows = b.eval_rows(v.x);
  const int k = b.size();

  // A plausible psi for the H1 target.
  const SieveFit fit = solve_calibration(v, rows);
  const Eigen::ArrayXd dsgn = 2.0 * v.z - 1.0;
  const Eigen::ArrayXd target = dsgn * v.da * v.ind * fit.psi;
  const Eigen::ArrayXd arm1 = v.z;

  CounterRng rng(mix64(14));
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd c(k);
    for (int j = 0; j < k; ++j) c(j) = 0.5 * rng.next_normal();

    const Eigen::VectorXd g1 = h1_grad(rows, target, c);
    const Eigen::VectorXd g2 = h2_arm_grad(rows, arm1, c);
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd up = c, dn = c;
      up(j) += h;
      dn(j) -= h;
      const double fd1 =
          (h1_value(rows, target, up) - h1_value(rows, target, dn)) / (2 * h);
      const double fd2 = (h2_arm_value(rows, arm1, up) -
                          h2_arm_value(rows, arm1, dn)) /
                         (2 * h);
      CHECK(std::fabs(g1(j) - fd1) <=
            1e-6 * std::max(1.0, std::fabs(fd1)));
      CHECK(std::fabs(g2(j) - fd2) <=
            1e-6 * std::max(1.0, std::fabs(fd2)));
    }
  }
}

TEST_CASE("newton iterations never decrease the objectives") {
  const EstimandView v = dgp_view(5000, 15);
  const Basis b = Basis::build(v.x, BasisSpec{2, true}, nullptr);
  const SieveFit fit = solve_calibration(v, b.eval_rows(v.x));
  auto non_decreasing = [](const std::vector<double>& trace) {
    for (size_t i = 1; i < trace.size(); ++i) {
      if (trace[i] < trace[i - 1] - 1e-9 * (1.0 + std::fabs(trace[i - 1]))) {
        return false;
      }
    }
    return true;
  };
  CHECK(fit.h2_trace_beta.size() >= 2);
  CHECK(non_decreasing(fit.h2_trace_beta));
  CHECK(non_decreasing(fit.h2_trace_gamma));
  CHECK(non_decreasing(fit.h1_trace));
}

TEST_CASE("degree-2 solutions still satisfy the degree-1 moments") {
  const EstimandView v = dgp_view(4000, 16);
  const Basis b1 = Basis::build(v.x, BasisSpec{1, true}, nullptr);
  const Basis b2 = Basis::build(v.x, BasisSpec{2, true}, nullptr);
  const Eigen::MatrixXd rows1 = b1.eval_rows(v.x);
  const Eigen::MatrixXd rows2 = b2.eval_rows(v.x);
  const SieveFit f1 = solve_calibration(v, rows1);
  const SieveFit f2 = solve_calibration(v, rows2);

  const int k1 = b2.prefix_size(1);
  REQUIRE(k1 == b1.size());
  const CalibrationResiduals sub = calibration_residuals(v, rows2, f2, k1);
  const CalibrationResiduals full1 = calibration_residuals(v, rows1, f1);
  CHECK(sub.beta <= std::max(full1.beta, 1e-8));
  CHECK(sub.gamma <= std::max(full1.gamma, 1e-8));
  CHECK(sub.alpha <= std::max(full1.alpha, 1e-8));
}

TEST_CASE("calibrated weights track the inverse propensity and delta") {
  const EstimandView v = dgp_view(10000, 17);
  const Basis b = Basis::build(v.x, BasisSpec{2, true}, nullptr);
  const SieveFit fit = solve_calibration(v, b.eval_rows(v.x));
  const NuisanceValues oracle = oracle_values(v);

  double mae_psi = 0.0, mae_phi = 0.0;
  for (int i = 0; i < v.n(); ++i) {
    mae_psi += std::fabs(fit.psi(i) - 1.0 / oracle.pi_obs(i));
    mae_phi += std::fabs(fit.phi(i) - oracle.delta(i));
  }
  mae_psi /= v.n();
  mae_phi /= v.n();
  CHECK(mae_psi < 0.05);
  CHECK(mae_phi < 0.05);
}

TEST_CASE("sieve point estimate approaches the truth at n=10000") {
  DgpConfig cfg;
  cfg.n = 10000;
  cfg.seed = 18;
  const DyadDataset ds = generate(cfg);
  EstimateOptions opts;
  opts.method = Method::Sieve;
  const EstimateReport rep = estimate(ds, EstimandSpec::parse("dte1"), opts);
  CHECK(std::fabs(rep.point - 7.0) < 0.5);
  CHECK(rep.diag.calib_resid_alpha <= 1e-8);
  CHECK(rep.diag.calib_resid_beta <= 1e-8);
  CHECK(rep.diag.calib_resid_gamma <= 1e-8);
}

TEST_CASE("weak calibration aborts the sieve estimator") {
  // A treatment unrelated to the instrument drives phi towards zero.
  const int n = 2000;
  CounterRng rng(mix64(19));
  Eigen::MatrixXd x(n, 2);
  Eigen::ArrayXi z1(n), z2(n), d1(n), d2(n);
  Eigen::ArrayXd y1(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 2.0 * rng.next_uniform() - 1.0;
    x(i, 1) = 2.0 * rng.next_uniform() - 1.0;
    z1(i) = rng.next_bernoulli(0.5);
    z2(i) = rng.next_bernoulli(0.5);
    d1(i) = rng.next_bernoulli(0.5);
    d2(i) = rng.next_bernoulli(0.5);
    y1(i) = rng.next_normal();
  }
  const DyadDataset ds(x, z1, z2, d1, d2, y1, std::nullopt);
  EstimateOptions opts;
  opts.method = Method::Sieve;
  try {
    estimate(ds, EstimandSpec::parse("dte1"), opts);
    FAIL("expected a weak-IV abort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::WeakIv);
  }
}
