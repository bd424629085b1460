#include <cmath>

#include "doctest.h"
#include "dyadiv/rng.hpp"
#include "dyadiv/simharness.hpp"
#include "testutil.hpp"

using namespace dyadiv;

TEST_CASE("instrument arms are balanced on average") {
  DgpConfig cfg;
  cfg.n = 100000;
  cfg.seed = 1;
  const DyadDataset ds = generate(cfg);
  CHECK(std::fabs(ds.z1().cast<double>().mean() - 0.5) < 0.01);
  CHECK(std::fabs(ds.z2().cast<double>().mean() - 0.5) < 0.01);
  CHECK(ds.has_y2());
  CHECK(ds.covariate_dim() == 2);
}

TEST_CASE("generation is deterministic per seed, including serialization") {
  DgpConfig cfg;
  cfg.n = 500;
  cfg.seed = 99;
  const DyadDataset a = generate(cfg);
  const DyadDataset b = generate(cfg);
  CHECK(a.equals(b));
  const std::string p1 = testutil::temp_path("gen1");
  const std::string p2 = testutil::temp_path("gen2");
  a.write_csv(p1);
  b.write_csv(p2);
  CHECK(testutil::read_file(p1) == testutil::read_file(p2));

  cfg.seed = 100;
  CHECK(!generate(cfg).equals(a));
}

TEST_CASE("sample size floor is enforced") {
  DgpConfig cfg;
  cfg.n = 50;
  CHECK_THROWS_AS(generate(cfg), Error);
}

TEST_CASE("true values match the design arithmetic") {
  const TrueValues t = true_values();
  CHECK(t.dte1 == 7.0);
  CHECK(t.dte0 == 5.0);
  CHECK(t.ste1 == 3.0);
  CHECK(t.ste0 == 1.0);
  CHECK(t.ite == t.dte1 - t.dte0);
  CHECK(true_value("ste0") == 1.0);
  CHECK_THROWS_AS(true_value("nope"), Error);
}

TEST_CASE("brute-force averaging of the outcome models recovers 7") {
  // Independent re-statement: average the (1,1) vs (0,1) contrast over
  // covariate draws; the latent terms cancel in the difference.
  CounterRng rng(mix64(424242));
  const int draws = 10000000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double x1 = 2.0 * rng.next_uniform() - 1.0;
    const double x2 = 2.0 * rng.next_uniform() - 1.0;
    const double u1 = 0.5 * (1.0 - rng.next_uniform());
    const double u2 = 0.5 * (1.0 - rng.next_uniform());
    acc += testutil::ref_po_mean(1, 1, x1, x2, u1, u2) -
           testutil::ref_po_mean(0, 1, x1, x2, u1, u2);
  }
  CHECK(std::fabs(acc / draws - 7.0) < 0.01);
}

TEST_CASE("quadrature oracle agrees with brute-force latent integration") {
  struct Probe {
    double x1, x2;
    Target target;
    int level;
  };
  const std::vector<Probe> probes = {{0.3, -0.4, Target::Dte, 1},
                                     {-0.6, 0.2, Target::Dte, 0},
                                     {0.0, 0.0, Target::Ste, 1},
                                     {0.5, 0.5, Target::Ste, 0}};
  const int draws = 400000;
  for (const Probe& p : probes) {
    const OracleNuisances o = oracle_at(p.x1, p.x2, p.target, p.level);
    const double pz = testutil::ref_inst(p.x1, p.x2);
    auto bern = [](double m, int d) { return d == 1 ? m : 1.0 - m; };
    const double mu_mc = testutil::mc_over_u(
        [&](double u1, double u2) {
          const double m0 = testutil::ref_uptake(0, p.x1, p.x2, u1, u2);
          const double m1 = testutil::ref_uptake(1, p.x1, p.x2, u1, u2);
          const double q = pz * bern(m1, p.level) + (1 - pz) * bern(m0, p.level);
          return m0 * q;
        },
        draws, 7);
    const double delta_mc = testutil::mc_over_u(
        [&](double u1, double u2) {
          const double m0 = testutil::ref_uptake(0, p.x1, p.x2, u1, u2);
          const double m1 = testutil::ref_uptake(1, p.x1, p.x2, u1, u2);
          const double q = pz * bern(m1, p.level) + (1 - pz) * bern(m0, p.level);
          return (m1 - m0) * q;
        },
        draws, 8);
    const double eta_mc = testutil::mc_over_u(
        [&](double u1, double u2) {
          const double m0 = testutil::ref_uptake(0, p.x1, p.x2, u1, u2);
          const double m1 = testutil::ref_uptake(1, p.x1, p.x2, u1, u2);
          const double q = pz * bern(m1, p.level) + (1 - pz) * bern(m0, p.level);
          const bool direct = p.target == Target::Dte;
          const double ya = direct
                                ? testutil::ref_po_mean(1, p.level, p.x1, p.x2, u1, u2)
                                : testutil::ref_po_mean(p.level, 1, p.x1, p.x2, u1, u2);
          const double yb = direct
                                ? testutil::ref_po_mean(0, p.level, p.x1, p.x2, u1, u2)
                                : testutil::ref_po_mean(p.level, 0, p.x1, p.x2, u1, u2);
          return q * (m0 * ya + (1 - m0) * yb);
        },
        draws, 9);
    CHECK(std::fabs(o.mu - mu_mc) < 5e-4);
    CHECK(std::fabs(o.delta - delta_mc) < 5e-4);
    CHECK(std::fabs(o.eta - eta_mc) < 5e-3);
    CHECK(o.pi1 == doctest::Approx(pz).epsilon(1e-12));
  }
}

TEST_CASE("observed conditional outcome means match the selection oracle") {
  // E[Y1 | D1=1, D2=1, X in bin] compared with the latent-integration
  // oracle; conditioning on the realized treatments tilts the confounder
  // law, which the oracle integral reproduces.
  DgpConfig cfg;
  cfg.n = 400000;
  cfg.seed = 31;
  const DyadDataset ds = generate(cfg);

  auto cell_oracle = [&](double x1, double x2) {
    const double pz = testutil::ref_inst(x1, x2);
    double num = 0.0, den = 0.0;
    const int g = 64;
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const double u1 = 0.5 * (i + 0.5) / g;
        const double u2 = 0.5 * (j + 0.5) / g;
        for (int z1 = 0; z1 <= 1; ++z1) {
          for (int z2 = 0; z2 <= 1; ++z2) {
            const double pzz = (z1 ? pz : 1 - pz) * (z2 ? pz : 1 - pz);
            const double m1 = testutil::ref_uptake(z1, x1, x2, u1, u2);
            const double m2 = testutil::ref_uptake(z2, x1, x2, u1, u2);
            const double w = pzz * m1 * m2;
            num += w * testutil::ref_po_mean(1, 1, x1, x2, u1, u2);
            den += w;
          }
        }
      }
    }
    return num / den;
  };

  // Covariate bins around two interior points.
  for (const auto& center : {std::pair{0.4, 0.4}, std::pair{-0.4, 0.0}}) {
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < ds.n(); ++i) {
      if (ds.d1()(i) == 1 && ds.d2()(i) == 1 &&
          std::fabs(ds.x()(i, 0) - center.first) < 0.1 &&
          std::fabs(ds.x()(i, 1) - center.second) < 0.1) {
        acc += ds.y1()(i);
        ++count;
      }
    }
    REQUIRE(count > 500);
    const double mean = acc / count;
    const double oracle = cell_oracle(center.first, center.second);
    // Bin width contributes curvature error on top of the MC noise.
    CHECK(std::fabs(mean - oracle) < 0.12);
  }
}

TEST_CASE("peer treatment is independent of the ego instrument given x") {
  DgpConfig cfg;
  cfg.n = 200000;
  cfg.seed = 41;
  const DyadDataset ds = generate(cfg);
  // Within coarse covariate bins, cov(D2, Z1) should vanish.
  const int bins = 4;
  for (int b1 = 0; b1 < bins; ++b1) {
    for (int b2 = 0; b2 < bins; ++b2) {
      double sz = 0, sd = 0, szd = 0;
      int m = 0;
      for (int i = 0; i < ds.n(); ++i) {
        const int i1 = static_cast<int>((ds.x()(i, 0) + 1.0) / 2.0 * bins);
        const int i2 = static_cast<int>((ds.x()(i, 1) + 1.0) / 2.0 * bins);
        if (std::min(i1, bins - 1) == b1 && std::min(i2, bins - 1) == b2) {
          sz += ds.z1()(i);
          sd += ds.d2()(i);
          szd += ds.z1()(i) * ds.d2()(i);
          ++m;
        }
      }
      REQUIRE(m > 2000);
      const double cov = szd / m - (sz / m) * (sd / m);
      // MC bound: sd(cov_hat) ~ 0.25 / sqrt(m).
      CHECK(std::fabs(cov) < 4.0 * 0.25 / std::sqrt(static_cast<double>(m)));
    }
  }
}

TEST_CASE("pattern values keep their admissible ranges") {
  DgpConfig cfg;
  cfg.n = 2000;
  cfg.seed = 51;
  const DyadDataset ds = generate(cfg);
  const EstimandView v = make_view(ds, EstimandSpec::parse("dte1"));
  for (MisspecPattern p :
       {MisspecPattern::OnlyIpwCorrect, MisspecPattern::OnlyGCorrect,
        MisspecPattern::OnlyRegCorrect}) {
    const NuisanceValues nv = pattern_values(v, p);
    CHECK(nv.pi1.minCoeff() >= 0.02);
    CHECK(nv.pi1.maxCoeff() <= 0.98);
    CHECK(nv.delta.minCoeff() >= 0.02);
    CHECK(nv.delta.maxCoeff() < 1.0);
    CHECK(nv.mu.minCoeff() >= 0.01);
    CHECK(nv.mu.maxCoeff() <= 0.99);
  }
  // The none pattern is the oracle itself.
  const NuisanceValues a = pattern_values(v, MisspecPattern::None);
  const NuisanceValues b = oracle_values(v);
  CHECK((a.omega == b.omega).all());
}

TEST_CASE("mc table runs, warns on low reps, and is schedule-independent") {
  McConfig cfg;
  cfg.reps = 6;
  cfg.ns = {400};
  cfg.methods = {"parametric", "wald"};
  cfg.estimands = {"dte1", "ite"};
  cfg.seed = 4;
  cfg.bootstrap_b = 20;
  cfg.threads = 1;
  const McTable a = run_mc(cfg);
  REQUIRE(a.rows.size() == 4);
  CHECK(a.warnings.size() == 1);
  for (const McRow& r : a.rows) {
    CHECK(std::isfinite(r.bias));
    CHECK(r.sd >= 0.0);
    CHECK((std::isnan(r.cp) || (r.cp >= 0.0 && r.cp <= 1.0)));
  }

  McConfig cfg2 = cfg;
  cfg2.threads = 2;
  const McTable b = run_mc(cfg2);
  CHECK(a.to_csv() == b.to_csv());

  // CSV shape: header plus one line per (estimand, method, n).
  const std::string csv = a.to_csv();
  CHECK(csv.find("estimand,method,n,bias,sd,cp,failures") == 0);
}

TEST_CASE("mc table without bootstrap leaves coverage empty") {
  McConfig cfg;
  cfg.reps = 5;
  cfg.ns = {300};
  cfg.methods = {"wald"};
  cfg.estimands = {"dte0"};
  cfg.seed = 6;
  cfg.bootstrap_b = 0;
  const McTable t = run_mc(cfg);
  REQUIRE(t.rows.size() == 1);
  CHECK(std::isnan(t.rows[0].cp));
  CHECK(t.rows[0].failures == 0);
}
