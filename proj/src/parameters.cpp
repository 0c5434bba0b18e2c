#include "mheq/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mheq::params {

namespace {

void require_psd(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string("parameters: ") + name +
                                " has non-finite entries");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument(std::string("parameters: ") + name +
                                " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.eigenvalues()(0) < -1e-10 * scale) {
    throw std::invalid_argument(std::string("parameters: ") + name +
                                " is not positive semidefinite");
  }
}

void require_finite(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string("parameters: ") + name +
                                " has non-finite entries");
  }
}

}  // namespace

void ParameterVector::validate() const {
  if (!std::isfinite(q_e) || !std::isfinite(r_e) || !std::isfinite(f2) ||
      !std::isfinite(theta_c)) {
    throw std::invalid_argument("parameters: non-finite scalar entry");
  }
  if (q_e < 0.0 || r_e < 0.0) {
    throw std::invalid_argument("parameters: q_e and r_e must be nonnegative");
  }
  require_psd(A_r, "A_r");
  require_psd(M_f, "M_f");
  require_psd(M, "M");
  require_finite(f1, "f1");
  require_finite(theta_r, "theta_r");
  require_finite(A_bias, "A_bias");
  require_finite(B_bias, "B_bias");
  require_finite(theta_lo, "theta_lo");
  require_finite(theta_hi, "theta_hi");
}

Eigen::VectorXd flatten(const ParameterVector& t) {
  Eigen::VectorXd v(kNumParams);
  v(0) = t.q_e;
  v(1) = t.r_e;
  v(2) = t.A_r(0, 0);
  v(3) = t.A_r(1, 0);
  v(4) = t.A_r(1, 1);
  v(5) = t.f1(0);
  v(6) = t.f1(1);
  v(7) = t.f2;
  v(8) = t.theta_c;
  v(9) = t.M_f(0, 0);
  v(10) = t.M_f(1, 0);
  v(11) = t.M_f(1, 1);
  v(12) = t.theta_r(0);
  v(13) = t.theta_r(1);
  v(14) = t.theta_r(2);
  v(15) = t.M(0, 0);
  v(16) = t.M(1, 0);
  v(17) = t.M(1, 1);
  v(18) = t.M(2, 0);
  v(19) = t.M(2, 1);
  v(20) = t.M(2, 2);
  v(21) = t.A_bias(0, 0);
  v(22) = t.A_bias(0, 1);
  v(23) = t.A_bias(1, 0);
  v(24) = t.A_bias(1, 1);
  v(25) = t.B_bias(0);
  v(26) = t.B_bias(1);
  v(27) = t.theta_lo(0);
  v(28) = t.theta_lo(1);
  v(29) = t.theta_hi(0);
  v(30) = t.theta_hi(1);
  return v;
}

ParameterVector unflatten(const Eigen::VectorXd& v) {
  if (v.size() != kNumParams) {
    throw std::invalid_argument("parameters: flat vector has wrong length");
  }
  ParameterVector t;
  t.q_e = v(0);
  t.r_e = v(1);
  t.A_r << v(2), v(3), v(3), v(4);
  t.f1 << v(5), v(6);
  t.f2 = v(7);
  t.theta_c = v(8);
  t.M_f << v(9), v(10), v(10), v(11);
  t.theta_r << v(12), v(13), v(14);
  t.M << v(15), v(16), v(18), v(16), v(17), v(19), v(18), v(19), v(20);
  t.A_bias << v(21), v(22), v(23), v(24);
  t.B_bias << v(25), v(26);
  t.theta_lo << v(27), v(28);
  t.theta_hi << v(29), v(30);
  return t;
}

const std::array<std::string, kNumParams>& component_names() {
  static const std::array<std::string, kNumParams> names = {
      "qe",    "re",    "ar00",  "ar10",  "ar11",  "f1_0", "f1_1",  "f2",
      "theta_c", "mf00", "mf10",  "mf11",  "thr0",  "thr1", "thr2",  "m00",
      "m10",   "m11",   "m20",   "m21",   "m22",   "ab00", "ab01",  "ab10",
      "ab11",  "bb0",   "bb1",   "tlo0",  "tlo1",  "thi0", "thi1"};
  return names;
}

ParamGroup group_of(int i) {
  if (i == 0) return ParamGroup::QE;
  if (i == 1) return ParamGroup::RE;
  if (i <= 4) return ParamGroup::Ar;
  if (i <= 6) return ParamGroup::F1;
  if (i == 7) return ParamGroup::F2;
  if (i == 8) return ParamGroup::ThetaC;
  if (i <= 11) return ParamGroup::Mf;
  if (i <= 14) return ParamGroup::ThetaR;
  if (i <= 20) return ParamGroup::M;
  if (i <= 24) return ParamGroup::ABias;
  if (i <= 26) return ParamGroup::BBias;
  if (i <= 30) return ParamGroup::ThetaBounds;
  throw std::out_of_range("parameters: flat index out of range");
}

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::QE: return "qe";
    case ParamGroup::RE: return "re";
    case ParamGroup::Ar: return "ar";
    case ParamGroup::F1: return "f1";
    case ParamGroup::F2: return "f2";
    case ParamGroup::ThetaC: return "theta_c";
    case ParamGroup::Mf: return "mf";
    case ParamGroup::ThetaR: return "theta_r";
    case ParamGroup::M: return "m";
    case ParamGroup::ABias: return "a_bias";
    case ParamGroup::BBias: return "b_bias";
    case ParamGroup::ThetaBounds: return "theta_bounds";
  }
  return "unknown";
}

StepSizes default_step_sizes() {
  StepSizes a{};
  a.fill(1e-3);
  a[static_cast<int>(ParamGroup::Ar)] = 1e-4;
  a[static_cast<int>(ParamGroup::Mf)] = 1e-4;
  a[static_cast<int>(ParamGroup::M)] = 1e-4;
  // Scaled to each group's leverage rather than uniform: model-bias entries
  // act on state-space coefficients whose natural scale is tiny (the input
  // column is O(dt^2/m) ~ 4e-3), and the estimator's linear gradient terms
  // shift the weakly observed velocity estimate with large gain, so these
  // groups take far smaller steps than the cost weights.
  a[static_cast<int>(ParamGroup::ABias)] = 1e-6;
  a[static_cast<int>(ParamGroup::BBias)] = 1e-6;
  a[static_cast<int>(ParamGroup::F1)] = 1e-4;
  a[static_cast<int>(ParamGroup::F2)] = 1e-4;
  return a;
}

GroupMask mask_all() {
  GroupMask m{};
  m.fill(true);
  return m;
}

GroupMask mask_none() {
  GroupMask m{};
  m.fill(false);
  return m;
}

GroupMask mask_mpc_only() {
  GroupMask m = mask_none();
  m[static_cast<int>(ParamGroup::ThetaC)] = true;
  m[static_cast<int>(ParamGroup::Mf)] = true;
  m[static_cast<int>(ParamGroup::ThetaR)] = true;
  m[static_cast<int>(ParamGroup::M)] = true;
  m[static_cast<int>(ParamGroup::ABias)] = true;
  m[static_cast<int>(ParamGroup::BBias)] = true;
  m[static_cast<int>(ParamGroup::ThetaBounds)] = true;
  return m;
}

GroupMask mask_mhe_only() {
  GroupMask m = mask_none();
  m[static_cast<int>(ParamGroup::QE)] = true;
  m[static_cast<int>(ParamGroup::RE)] = true;
  m[static_cast<int>(ParamGroup::Ar)] = true;
  m[static_cast<int>(ParamGroup::F1)] = true;
  m[static_cast<int>(ParamGroup::F2)] = true;
  return m;
}

}  // namespace mheq::params
