#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dyadiv/errors.hpp"

namespace dyadiv {

// One dyad: covariates X shared by the pair, per-unit instrument Z, binary
// treatment D and real outcome Y. y2 is optional so that ego-only analyses
// can run on files without the partner outcome.
struct DyadRow {
  Eigen::VectorXd x;
  int z1 = 0, z2 = 0, d1 = 0, d2 = 0;
  double y1 = 0.0;
  std::optional<double> y2;
};

enum class Y2Mode { AutoDetect, Required, Forbidden };

// Immutable collection of dyads, stored column-wise.
class DyadDataset {
 public:
  explicit DyadDataset(const std::vector<DyadRow>& rows);
  DyadDataset(Eigen::MatrixXd x, Eigen::ArrayXi z1, Eigen::ArrayXi z2,
              Eigen::ArrayXi d1, Eigen::ArrayXi d2, Eigen::ArrayXd y1,
              std::optional<Eigen::ArrayXd> y2);

  static DyadDataset load_csv(const std::string& path,
                              Y2Mode mode = Y2Mode::AutoDetect);
  void write_csv(const std::string& path) const;

  int n() const { return static_cast<int>(z1_.size()); }
  int covariate_dim() const { return static_cast<int>(x_.cols()); }
  bool has_y2() const { return y2_.has_value(); }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::ArrayXi& z1() const { return z1_; }
  const Eigen::ArrayXi& z2() const { return z2_; }
  const Eigen::ArrayXi& d1() const { return d1_; }
  const Eigen::ArrayXi& d2() const { return d2_; }
  const Eigen::ArrayXd& y1() const { return y1_; }
  const Eigen::ArrayXd& y2() const;

  DyadRow row(int i) const;

  // Exchanges (z1,d1,y1) with (z2,d2,y2) in every row; x is unchanged.
  // An involution. Requires y2.
  DyadDataset swap_roles() const;

  // Both instrument arms must be non-empty before any estimation.
  void check_overlap() const;

  bool equals(const DyadDataset& other) const;

 private:
  void validate() const;

  Eigen::MatrixXd x_;
  Eigen::ArrayXi z1_, z2_, d1_, d2_;
  Eigen::ArrayXd y1_;
  std::optional<Eigen::ArrayXd> y2_;
};

enum class Target { Dte, Ste, Ite };
enum class Ego { Unit1, Unit2 };

// Which causal contrast is estimated and for which unit.
struct EstimandSpec {
  Target target = Target::Dte;
  int peer_level = 1;  // ignored for ITE
  Ego ego = Ego::Unit1;

  static EstimandSpec parse(const std::string& label, Ego ego = Ego::Unit1);
  std::string label() const;
};

// Per-row pieces of the signed moment: sign (-1)^(1-z1), numerator
// I(d2=d)*y1 and denominator d1*I(d2=d). Expects an ego-unit-1 direct-effect
// spec; spillover callers swap roles first.
struct SignedTerms {
  double sign;
  double w_num;
  double w_den;
};
SignedTerms signed_indicator_terms(const DyadRow& row,
                                   const EstimandSpec& spec);

// A dataset reduced to the columns one direct-effect estimation needs:
// active instrument z, active treatment da, peer-level indicator
// ind = I(db = d), outcome y. Spillover estimands are materialized through
// swap_roles, so every estimator downstream only ever sees this form.
struct EstimandView {
  Eigen::MatrixXd x;            // covariates (peer IV appended in ITE mode)
  Eigen::ArrayXd z;             // active instrument, 0/1
  Eigen::ArrayXd da;            // active treatment, 0/1
  Eigen::ArrayXd ind;           // I(db = peer_level)
  Eigen::ArrayXd y;             // analyzed outcome
  Eigen::ArrayXd zb;            // the other unit's instrument
  std::vector<int> rows;        // indices into the source dataset
  int peer_level = 1;
  Target target = Target::Dte;  // Dte or Ste (ITE resolves to two views)

  int n() const { return static_cast<int>(z.size()); }
};

// idx = nullptr means all rows in order; otherwise a resample/selection.
// augment_peer_iv appends zb as an extra covariate column (ITE
// conditioning mode).
EstimandView make_view(const DyadDataset& ds, const EstimandSpec& spec,
                       const std::vector<int>* idx = nullptr,
                       bool augment_peer_iv = false);

}  // namespace dyadiv
