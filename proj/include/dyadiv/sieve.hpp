#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dyadiv/dataset.hpp"

namespace dyadiv {

struct BasisSpec {
  int degree = 2;
  bool standardize = true;
};

// Polynomial basis over (optionally standardized) covariates. The constant
// monomial comes first and lower-degree monomials precede higher ones, so
// bases of increasing degree are nested.
class Basis {
 public:
  static Basis build(const Eigen::MatrixXd& x, const BasisSpec& spec,
                     std::vector<std::string>* warnings);

  int size() const { return static_cast<int>(exponents_.size()); }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd eval_rows(const Eigen::MatrixXd& x) const;

  // Number of leading monomials with total degree <= d.
  int prefix_size(int d) const;

 private:
  std::vector<std::vector<int>> exponents_;  // per monomial, per kept column
  std::vector<int> kept_;
  Eigen::VectorXd center_, scale_;
};

// Calibrated weights: psi approximates 1/pi, phi approximates delta. The
// links are the derivatives of m1(v) = v - exp(-v) and
// m2(v) = -log(e^v + e^-v), i.e. psi > 1 and |phi| < 1 by construction.
struct SieveFit {
  Eigen::VectorXd alpha, beta, gamma;
  Eigen::ArrayXd psi;  // per-row, both arms folded in
  Eigen::ArrayXd phi;
  double resid_beta = 0.0, resid_gamma = 0.0, resid_alpha = 0.0;  // inf-norms
  std::vector<double> h2_trace_beta, h2_trace_gamma, h1_trace;
  int iter_h2 = 0, iter_h1 = 0;
};

// Sample objectives and analytic gradients, exposed for verification.
double h2_arm_value(const Eigen::MatrixXd& basis_rows,
                    const Eigen::ArrayXd& arm, const Eigen::VectorXd& coef);
Eigen::VectorXd h2_arm_grad(const Eigen::MatrixXd& basis_rows,
                            const Eigen::ArrayXd& arm,
                            const Eigen::VectorXd& coef);
double h1_value(const Eigen::MatrixXd& basis_rows,
                const Eigen::ArrayXd& signed_target,
                const Eigen::VectorXd& coef);
Eigen::VectorXd h1_grad(const Eigen::MatrixXd& basis_rows,
                        const Eigen::ArrayXd& signed_target,
                        const Eigen::VectorXd& coef);

// Maximizes the two concave calibration objectives (instrument arms first,
// then the signed treatment moment) by Newton with backtracking.
// grad_tol applies to the sample gradient 2-norm.
SieveFit solve_calibration(const EstimandView& view,
                           const Eigen::MatrixXd& basis_rows,
                           double grad_tol = 1e-12, int max_iter = 200);

// First-order-condition residuals of a fit, componentwise inf-norms:
// beta arm, gamma arm, alpha moment. Restricted to the first k basis
// columns when k > 0.
struct CalibrationResiduals {
  double beta, gamma, alpha;
};
CalibrationResiduals calibration_residuals(const EstimandView& view,
                                           const Eigen::MatrixXd& basis_rows,
                                           const SieveFit& fit, int k = 0);

}  // namespace dyadiv
