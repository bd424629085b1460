#include "dyadiv/sieve.hpp"

#include <algorithm>
#include <cmath>

namespace dyadiv {

namespace {

// m1(v) = v - exp(-v); dot_m1(v) = 1 + exp(-v).
double m1(double v) { return v - std::exp(-v); }
double dot_m1(double v) { return 1.0 + std::exp(-v); }

// m2(v) = -log(e^v + e^-v), computed stably; dot_m2(v) = -tanh(v).
double m2(double v) {
  const double a = std::fabs(v);
  return -(a + std::log1p(std::exp(-2.0 * a)));
}

void enumerate_monomials(int nvars, int degree,
                         std::vector<std::vector<int>>* out) {
  // Graded order: all monomials of total degree t before degree t+1;
  // lexicographic within a degree.
  std::vector<int> cur(nvars, 0);
  for (int t = 0; t <= degree; ++t) {
    std::vector<int> expo(nvars, 0);
    // Iterate compositions of t into nvars parts, lexicographically.
    std::function<void(int, int)> rec = [&](int pos, int rem) {
      if (pos == nvars - 1) {
        expo[pos] = rem;
        out->push_back(expo);
        return;
      }
      for (int e = rem; e >= 0; --e) {
        expo[pos] = e;
        rec(pos + 1, rem - e);
      }
    };
    if (nvars == 0) {
      if (t == 0) out->push_back({});
    } else {
      rec(0, t);
    }
  }
}

struct NewtonResult {
  Eigen::VectorXd coef;
  int iterations;
  std::vector<double> trace;
};

// Maximize a concave sample objective by Newton with Armijo backtracking.
template <typename Value, typename Grad, typename NegHess>
NewtonResult newton_maximize(int dim, Value value, Grad grad, NegHess neghess,
                             double grad_tol, int max_iter,
                             const char* label) {
  NewtonResult res;
  res.coef = Eigen::VectorXd::Zero(dim);
  double f = value(res.coef);
  res.trace.push_back(f);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const Eigen::VectorXd g = grad(res.coef);
    if (g.norm() <= grad_tol) return res;
    const Eigen::MatrixXd nh = neghess(res.coef);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(nh);
    if (ldlt.info() != Eigen::Success ||
        (ldlt.vectorD().array() < 1e-13).any()) {
      fail(ErrorKind::Singular,
           std::string(label) +
               ": Hessian is singular; reduce the basis size");
    }
    const Eigen::VectorXd step = ldlt.solve(g);
    const double slope = g.dot(step);
    const double noise = 1e-13 * (1.0 + std::fabs(f));
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      const Eigen::VectorXd cand = res.coef + t * step;
      const double fc = value(cand);
      if (std::isfinite(fc) && fc >= f + 1e-4 * t * slope - noise) {
        res.coef = cand;
        f = fc;
        res.trace.push_back(f);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      fail(ErrorKind::Convergence,
           std::string(label) + ": line search stalled with gradient norm " +
               std::to_string(g.norm()));
    }
  }
  fail(ErrorKind::Convergence,
       std::string(label) + ": no convergence in " + std::to_string(max_iter) +
           " iterations, gradient norm " +
           std::to_string(grad(res.coef).norm()));
}

}  // namespace

Basis Basis::build(const Eigen::MatrixXd& x, const BasisSpec& spec,
                   std::vector<std::string>* warnings) {
  if (spec.degree < 0) fail(ErrorKind::Usage, "basis degree must be >= 0");
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());

  Basis b;
  b.center_ = Eigen::VectorXd::Zero(p);
  b.scale_ = Eigen::VectorXd::Ones(p);
  for (int j = 0; j < p; ++j) {
    const double mean = x.col(j).mean();
    const double var =
        n > 1 ? (x.col(j).array() - mean).square().sum() / (n - 1) : 0.0;
    if (var <= 1e-24) continue;  // constant columns add nothing to the span
    b.kept_.push_back(j);
    if (spec.standardize) {
      b.center_(j) = mean;
      b.scale_(j) = std::sqrt(var);
    }
  }
  if (!spec.standardize && warnings) {
    for (int j : b.kept_) {
      const double lo = x.col(j).minCoeff(), hi = x.col(j).maxCoeff();
      if (lo < -10.0 || hi > 10.0) {
        warnings->push_back("covariate x" + std::to_string(j + 1) +
                            " has range beyond [-10,10] and standardization "
                            "is disabled");
        break;
      }
    }
  }

  std::vector<std::vector<int>> expo;
  enumerate_monomials(static_cast<int>(b.kept_.size()), spec.degree, &expo);
  b.exponents_ = std::move(expo);

  const int K = b.size();
  if (4 * K >= n) {
    fail(ErrorKind::Usage, "basis size K=" + std::to_string(K) +
                               " must satisfy K < n/4 with n=" +
                               std::to_string(n) + "; lower the degree");
  }
  return b;
}

Eigen::VectorXd Basis::eval(const Eigen::VectorXd& x) const {
  const int k = static_cast<int>(kept_.size());
  Eigen::VectorXd s(k);
  for (int j = 0; j < k; ++j) {
    const int col = kept_[j];
    s(j) = (x(col) - center_(col)) / scale_(col);
  }
  Eigen::VectorXd v(size());
  for (int m = 0; m < size(); ++m) {
    double prod = 1.0;
    for (int j = 0; j < k; ++j) {
      for (int e = 0; e < exponents_[m][j]; ++e) prod *= s(j);
    }
    v(m) = prod;
  }
  return v;
}

Eigen::MatrixXd Basis::eval_rows(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd v(x.rows(), size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    v.row(i) = eval(x.row(i).transpose()).transpose();
  }
  return v;
}

int Basis::prefix_size(int d) const {
  int count = 0;
  for (const auto& e : exponents_) {
    int tot = 0;
    for (int v : e) tot += v;
    if (tot <= d) ++count;
  }
  return count;
}

double h2_arm_value(const Eigen::MatrixXd& basis_rows,
                    const Eigen::ArrayXd& arm, const Eigen::VectorXd& coef) {
  const Eigen::ArrayXd t = (basis_rows * coef).array();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    acc += (arm(i) != 0.0 ? m1(t(i)) : 0.0) - t(i);
  }
  return acc / static_cast<double>(t.size());
}

Eigen::VectorXd h2_arm_grad(const Eigen::MatrixXd& basis_rows,
                            const Eigen::ArrayXd& arm,
                            const Eigen::VectorXd& coef) {
  const Eigen::ArrayXd t = (basis_rows * coef).array();
  Eigen::ArrayXd w(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    w(i) = (arm(i) != 0.0 ? dot_m1(t(i)) : 0.0) - 1.0;
  }
  return basis_rows.transpose() * w.matrix() / static_cast<double>(t.size());
}

double h1_value(const Eigen::MatrixXd& basis_rows,
                const Eigen::ArrayXd& signed_target,
                const Eigen::VectorXd& coef) {
  const Eigen::ArrayXd t = (basis_rows * coef).array();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    acc += m2(t(i)) - signed_target(i) * t(i);
  }
  return acc / static_cast<double>(t.size());
}

Eigen::VectorXd h1_grad(const Eigen::MatrixXd& basis_rows,
                        const Eigen::ArrayXd& signed_target,
                        const Eigen::VectorXd& coef) {
  const Eigen::ArrayXd t = (basis_rows * coef).array();
  const Eigen::ArrayXd w = -t.tanh() - signed_target;
  return basis_rows.transpose() * w.matrix() / static_cast<double>(t.size());
}

SieveFit solve_calibration(const EstimandView& view,
                           const Eigen::MatrixXd& basis_rows, double grad_tol,
                           int max_iter) {
  const int m = view.n();
  const int K = static_cast<int>(basis_rows.cols());
  const Eigen::ArrayXd arm1 = view.z;
  const Eigen::ArrayXd arm0 = 1.0 - view.z;
  if (arm1.sum() == 0.0 || arm0.sum() == 0.0) {
    fail(ErrorKind::Precondition,
         "calibration requires both instrument arms to be non-empty");
  }

  SieveFit fit;

  // H2 is separable: each arm solves its own concave problem.
  auto solve_arm = [&](const Eigen::ArrayXd& arm, const char* label,
                       std::vector<double>* trace, int* iters) {
    auto val = [&](const Eigen::VectorXd& c) {
      return h2_arm_value(basis_rows, arm, c);
    };
    auto grd = [&](const Eigen::VectorXd& c) {
      return h2_arm_grad(basis_rows, arm, c);
    };
    auto nhess = [&](const Eigen::VectorXd& c) {
      const Eigen::ArrayXd t = (basis_rows * c).array();
      Eigen::ArrayXd w(m);
      for (int i = 0; i < m; ++i) {
        w(i) = arm(i) != 0.0 ? std::exp(-t(i)) : 0.0;
      }
      return Eigen::MatrixXd(basis_rows.transpose() *
                             w.matrix().asDiagonal() * basis_rows / m);
    };
    NewtonResult r = newton_maximize(K, val, grd, nhess, grad_tol, max_iter,
                                     label);
    *trace = std::move(r.trace);
    *iters = r.iterations;
    return r.coef;
  };

  fit.beta = solve_arm(arm1, "H2 (z=1 arm)", &fit.h2_trace_beta, &fit.iter_h2);
  int it_gamma = 0;
  fit.gamma = solve_arm(arm0, "H2 (z=0 arm)", &fit.h2_trace_gamma, &it_gamma);
  fit.iter_h2 = std::max(fit.iter_h2, it_gamma);

  const Eigen::ArrayXd tb = (basis_rows * fit.beta).array();
  const Eigen::ArrayXd tg = (basis_rows * fit.gamma).array();
  fit.psi.resize(m);
  for (int i = 0; i < m; ++i) {
    fit.psi(i) = view.z(i) != 0.0 ? dot_m1(tb(i)) : dot_m1(tg(i));
  }

  // H1 target: (-1)^(1-z) * da * I(db=d) * psi.
  const Eigen::ArrayXd dsgn = 2.0 * view.z - 1.0;
  const Eigen::ArrayXd target = dsgn * view.da * view.ind * fit.psi;
  {
    auto val = [&](const Eigen::VectorXd& c) {
      return h1_value(basis_rows, target, c);
    };
    auto grd = [&](const Eigen::VectorXd& c) {
      return h1_grad(basis_rows, target, c);
    };
    auto nhess = [&](const Eigen::VectorXd& c) {
      const Eigen::ArrayXd t = (basis_rows * c).array();
      const Eigen::ArrayXd w = 1.0 - t.tanh().square();  // sech^2
      return Eigen::MatrixXd(basis_rows.transpose() *
                             w.matrix().asDiagonal() * basis_rows / m);
    };
    NewtonResult r =
        newton_maximize(K, val, grd, nhess, grad_tol, max_iter, "H1");
    fit.alpha = r.coef;
    fit.h1_trace = std::move(r.trace);
    fit.iter_h1 = r.iterations;
  }
  fit.phi = -(basis_rows * fit.alpha).array().tanh();

  const CalibrationResiduals res =
      calibration_residuals(view, basis_rows, fit, 0);
  fit.resid_beta = res.beta;
  fit.resid_gamma = res.gamma;
  fit.resid_alpha = res.alpha;
  return fit;
}

CalibrationResiduals calibration_residuals(const EstimandView& view,
                                           const Eigen::MatrixXd& basis_rows,
                                           const SieveFit& fit, int k) {
  const int m = view.n();
  const int K = static_cast<int>(basis_rows.cols());
  if (k <= 0 || k > K) k = K;
  const Eigen::MatrixXd v = basis_rows.leftCols(k);
  const Eigen::ArrayXd dsgn = 2.0 * view.z - 1.0;

  const Eigen::VectorXd ones_mom = v.colwise().mean().transpose();
  const Eigen::VectorXd mom_b =
      v.transpose() * (view.z * fit.psi).matrix() / m;
  const Eigen::VectorXd mom_g =
      v.transpose() * ((1.0 - view.z) * fit.psi).matrix() / m;
  const Eigen::VectorXd mom_phi = v.transpose() * fit.phi.matrix() / m;
  const Eigen::VectorXd mom_t =
      v.transpose() * (dsgn * view.da * view.ind * fit.psi).matrix() / m;

  CalibrationResiduals r;
  r.beta = (mom_b - ones_mom).lpNorm<Eigen::Infinity>();
  r.gamma = (mom_g - ones_mom).lpNorm<Eigen::Infinity>();
  r.alpha = (mom_phi - mom_t).lpNorm<Eigen::Infinity>();
  return r;
}

}  // namespace dyadiv
