#include "dyadiv/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dyadiv {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s, int line_no, const std::string& col) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) +
                               ": cannot parse value '" + s + "' in column " +
                               col);
  }
  if (!std::isfinite(v)) {
    fail(ErrorKind::Domain, "line " + std::to_string(line_no) +
                                ": non-finite value in column " + col);
  }
  return v;
}

int parse_binary(const std::string& s, int line_no, const std::string& col) {
  double v = parse_double(s, line_no, col);
  if (v != 0.0 && v != 1.0) {
    fail(ErrorKind::Domain, "line " + std::to_string(line_no) + ": column " +
                                col + " must be 0 or 1, got '" + s + "'");
  }
  return static_cast<int>(v);
}

void append_g17(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

DyadDataset::DyadDataset(const std::vector<DyadRow>& rows) {
  if (rows.empty()) fail(ErrorKind::Domain, "dataset must be non-empty");
  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(rows[0].x.size());
  const bool with_y2 = rows[0].y2.has_value();
  x_.resize(n, p);
  z1_.resize(n);
  z2_.resize(n);
  d1_.resize(n);
  d2_.resize(n);
  y1_.resize(n);
  if (with_y2) y2_ = Eigen::ArrayXd(n);
  for (int i = 0; i < n; ++i) {
    const DyadRow& r = rows[i];
    if (static_cast<int>(r.x.size()) != p) {
      fail(ErrorKind::Schema, "row " + std::to_string(i + 1) + " has " +
                                  std::to_string(r.x.size()) +
                                  " covariates, expected " + std::to_string(p));
    }
    if (r.y2.has_value() != with_y2) {
      fail(ErrorKind::Schema,
           "row " + std::to_string(i + 1) + ": inconsistent presence of y2");
    }
    x_.row(i) = r.x.transpose();
    z1_(i) = r.z1;
    z2_(i) = r.z2;
    d1_(i) = r.d1;
    d2_(i) = r.d2;
    y1_(i) = r.y1;
    if (with_y2) (*y2_)(i) = *r.y2;
  }
  validate();
}

DyadDataset::DyadDataset(Eigen::MatrixXd x, Eigen::ArrayXi z1,
                         Eigen::ArrayXi z2, Eigen::ArrayXi d1,
                         Eigen::ArrayXi d2, Eigen::ArrayXd y1,
                         std::optional<Eigen::ArrayXd> y2)
    : x_(std::move(x)),
      z1_(std::move(z1)),
      z2_(std::move(z2)),
      d1_(std::move(d1)),
      d2_(std::move(d2)),
      y1_(std::move(y1)),
      y2_(std::move(y2)) {
  validate();
}

void DyadDataset::validate() const {
  const int n = static_cast<int>(z1_.size());
  if (n == 0) fail(ErrorKind::Domain, "dataset must be non-empty");
  if (x_.rows() != n || z2_.size() != n || d1_.size() != n ||
      d2_.size() != n || y1_.size() != n ||
      (y2_ && y2_->size() != n)) {
    fail(ErrorKind::Schema, "column length mismatch");
  }
  auto check_binary = [&](const Eigen::ArrayXi& a, const char* name) {
    for (int i = 0; i < n; ++i) {
      if (a(i) != 0 && a(i) != 1) {
        fail(ErrorKind::Domain, std::string(name) + " must be binary (row " +
                                    std::to_string(i + 1) + ")");
      }
    }
  };
  check_binary(z1_, "z1");
  check_binary(z2_, "z2");
  check_binary(d1_, "d1");
  check_binary(d2_, "d2");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(y1_(i)))
      fail(ErrorKind::Domain, "y1 must be finite (row " + std::to_string(i + 1) + ")");
    if (y2_ && !std::isfinite((*y2_)(i)))
      fail(ErrorKind::Domain, "y2 must be finite (row " + std::to_string(i + 1) + ")");
    for (int j = 0; j < x_.cols(); ++j) {
      if (!std::isfinite(x_(i, j)))
        fail(ErrorKind::Domain, "x must be finite (row " + std::to_string(i + 1) + ")");
    }
  }
}

const Eigen::ArrayXd& DyadDataset::y2() const {
  if (!y2_) fail(ErrorKind::Precondition, "dataset has no y2 column");
  return *y2_;
}

DyadRow DyadDataset::row(int i) const {
  DyadRow r;
  r.x = x_.row(i).transpose();
  r.z1 = z1_(i);
  r.z2 = z2_(i);
  r.d1 = d1_(i);
  r.d2 = d2_(i);
  r.y1 = y1_(i);
  if (y2_) r.y2 = (*y2_)(i);
  return r;
}

DyadDataset DyadDataset::swap_roles() const {
  if (!y2_) {
    fail(ErrorKind::Precondition,
         "swap_roles requires y2 for every row (partner outcome missing)");
  }
  return DyadDataset(x_, z2_, z1_, d2_, d1_, *y2_, y1_);
}

void DyadDataset::check_overlap() const {
  const double m1 = z1_.cast<double>().mean();
  const double m2 = z2_.cast<double>().mean();
  if (m1 <= 0.0 || m1 >= 1.0) {
    fail(ErrorKind::Precondition,
         "degenerate instrument arm: mean(z1) = " + std::to_string(m1));
  }
  if (m2 <= 0.0 || m2 >= 1.0) {
    fail(ErrorKind::Precondition,
         "degenerate instrument arm: mean(z2) = " + std::to_string(m2));
  }
}

bool DyadDataset::equals(const DyadDataset& other) const {
  if (n() != other.n() || covariate_dim() != other.covariate_dim() ||
      has_y2() != other.has_y2()) {
    return false;
  }
  if (x_ != other.x_) return false;
  if ((z1_ != other.z1_).any() || (z2_ != other.z2_).any() ||
      (d1_ != other.d1_).any() || (d2_ != other.d2_).any()) {
    return false;
  }
  if ((y1_ != other.y1_).any()) return false;
  if (y2_ && ((*y2_) != (*other.y2_)).any()) return false;
  return true;
}

DyadDataset DyadDataset::load_csv(const std::string& path, Y2Mode mode) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Schema, "empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line);

  // Header is x1..xp,z1,z2,d1,d2,y1[,y2]; p is inferred.
  int p = 0;
  while (p < static_cast<int>(header.size()) &&
         header[p] == "x" + std::to_string(p + 1)) {
    ++p;
  }
  const std::vector<std::string> tail_req = {"z1", "z2", "d1", "d2", "y1"};
  const int ncols = static_cast<int>(header.size());
  bool with_y2;
  if (ncols == p + 5) {
    with_y2 = false;
  } else if (ncols == p + 6 && header[p + 5] == "y2") {
    with_y2 = true;
  } else {
    fail(ErrorKind::Schema,
         "unexpected header: want x1..xp,z1,z2,d1,d2,y1[,y2], got '" + line + "'");
  }
  for (int j = 0; j < 5; ++j) {
    if (header[p + j] != tail_req[j]) {
      fail(ErrorKind::Schema, "header column " + std::to_string(p + j + 1) +
                                  " must be '" + tail_req[j] + "', got '" +
                                  header[p + j] + "'");
    }
  }
  if (mode == Y2Mode::Required && !with_y2)
    fail(ErrorKind::Schema, "y2 column required but absent in " + path);
  if (mode == Y2Mode::Forbidden && with_y2)
    fail(ErrorKind::Schema, "unexpected y2 column in " + path);

  std::vector<DyadRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (static_cast<int>(f.size()) != ncols) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(ncols) + " fields, got " +
                                 std::to_string(f.size()));
    }
    DyadRow r;
    r.x.resize(p);
    for (int j = 0; j < p; ++j) {
      r.x(j) = parse_double(f[j], line_no, header[j]);
    }
    r.z1 = parse_binary(f[p + 0], line_no, "z1");
    r.z2 = parse_binary(f[p + 1], line_no, "z2");
    r.d1 = parse_binary(f[p + 2], line_no, "d1");
    r.d2 = parse_binary(f[p + 3], line_no, "d2");
    r.y1 = parse_double(f[p + 4], line_no, "y1");
    if (with_y2) r.y2 = parse_double(f[p + 5], line_no, "y2");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorKind::Schema, "no data rows in " + path);
  return DyadDataset(rows);
}

void DyadDataset::write_csv(const std::string& path) const {
  std::string out;
  const int p = covariate_dim();
  for (int j = 0; j < p; ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "z1,z2,d1,d2,y1";
  if (y2_) out += ",y2";
  out += "\n";
  for (int i = 0; i < n(); ++i) {
    for (int j = 0; j < p; ++j) {
      append_g17(out, x_(i, j));
      out += ",";
    }
    out += std::to_string(z1_(i)) + "," + std::to_string(z2_(i)) + "," +
           std::to_string(d1_(i)) + "," + std::to_string(d2_(i)) + ",";
    append_g17(out, y1_(i));
    if (y2_) {
      out += ",";
      append_g17(out, (*y2_)(i));
    }
    out += "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write '" + path + "'");
  f << out;
  if (!f) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

EstimandSpec EstimandSpec::parse(const std::string& label, Ego ego) {
  EstimandSpec s;
  s.ego = ego;
  if (label == "dte1") {
    s.target = Target::Dte;
    s.peer_level = 1;
  } else if (label == "dte0") {
    s.target = Target::Dte;
    s.peer_level = 0;
  } else if (label == "ste1") {
    s.target = Target::Ste;
    s.peer_level = 1;
  } else if (label == "ste0") {
    s.target = Target::Ste;
    s.peer_level = 0;
  } else if (label == "ite") {
    s.target = Target::Ite;
  } else {
    fail(ErrorKind::Usage, "unknown estimand '" + label +
                               "' (want dte1|dte0|ste1|ste0|ite)");
  }
  return s;
}

std::string EstimandSpec::label() const {
  switch (target) {
    case Target::Dte: return peer_level == 1 ? "dte1" : "dte0";
    case Target::Ste: return peer_level == 1 ? "ste1" : "ste0";
    case Target::Ite: return "ite";
  }
  return "?";
}

SignedTerms signed_indicator_terms(const DyadRow& row,
                                   const EstimandSpec& spec) {
  if (spec.target != Target::Dte || spec.ego != Ego::Unit1) {
    fail(ErrorKind::Precondition,
         "signed_indicator_terms expects an ego-unit-1 direct-effect spec; "
         "apply swap_roles first");
  }
  SignedTerms t;
  t.sign = row.z1 == 1 ? 1.0 : -1.0;
  const double ind = (row.d2 == spec.peer_level) ? 1.0 : 0.0;
  t.w_num = ind * row.y1;
  t.w_den = row.d1 * ind;
  return t;
}

EstimandView make_view(const DyadDataset& ds, const EstimandSpec& spec,
                       const std::vector<int>* idx, bool augment_peer_iv) {
  if (spec.target == Target::Ite) {
    fail(ErrorKind::Usage, "ITE resolves to two direct-effect views");
  }
  // Spillover and ego-unit-2 estimands go through the role swap. For the
  // spillover effect the analyzed outcome stays with the original ego, i.e.
  // it is the y2 column of the swapped dataset.
  const bool need_swap =
      (spec.target == Target::Ste) != (spec.ego == Ego::Unit2);
  const bool outcome_from_partner = spec.target == Target::Ste;
  std::optional<DyadDataset> swapped;
  if (spec.target == Target::Ste || spec.ego == Ego::Unit2) {
    swapped = ds.swap_roles();
  }
  const DyadDataset& src = need_swap ? *swapped : ds;

  std::vector<int> rows;
  if (idx) {
    rows = *idx;
    for (int i : rows) {
      if (i < 0 || i >= ds.n())
        fail(ErrorKind::Domain, "row index out of range: " + std::to_string(i));
    }
  } else {
    rows.resize(ds.n());
    for (int i = 0; i < ds.n(); ++i) rows[i] = i;
  }
  const int m = static_cast<int>(rows.size());
  const int p = ds.covariate_dim();

  EstimandView v;
  v.peer_level = spec.peer_level;
  v.target = spec.target;
  v.rows = rows;
  v.x.resize(m, p + (augment_peer_iv ? 1 : 0));
  v.z.resize(m);
  v.da.resize(m);
  v.ind.resize(m);
  v.y.resize(m);
  v.zb.resize(m);
  const Eigen::ArrayXd& outcome =
      outcome_from_partner ? src.y2() : src.y1();
  for (int k = 0; k < m; ++k) {
    const int i = rows[k];
    v.x.row(k).head(p) = ds.x().row(i);
    v.z(k) = src.z1()(i);
    v.da(k) = src.d1()(i);
    v.ind(k) = (src.d2()(i) == spec.peer_level) ? 1.0 : 0.0;
    v.y(k) = outcome(i);
    v.zb(k) = src.z2()(i);
    if (augment_peer_iv) v.x(k, p) = v.zb(k);
  }
  return v;
}

}  // namespace dyadiv
