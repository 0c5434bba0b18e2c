#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

namespace mheq::params {

// Everything the learner is allowed to touch, in structured form. Symmetric
// matrices are stored in full; flatten() serializes only their lower
// triangles so the flat vector has one entry per degree of freedom.
struct ParameterVector {
  // Estimator cost: output fit, input fit, arrival weight, gradient terms.
  double q_e = 10.0;
  double r_e = 10.0;
  Eigen::Matrix2d A_r = Eigen::Matrix2d::Identity();
  Eigen::Vector2d f1 = Eigen::Vector2d::Zero();
  double f2 = 0.0;

  // Controller cost: constant offset, terminal weight, stage reference and
  // stage weight over the combined (x, u) stage vector.
  double theta_c = 0.0;
  Eigen::Matrix2d M_f = (Eigen::Matrix2d() << 10.0, 0.0, 0.0, 1.0).finished();
  Eigen::Vector3d theta_r = Eigen::Vector3d::Zero();
  Eigen::Matrix3d M =
      (Eigen::Matrix3d() << 10.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.1)
          .finished();

  // Shared prediction-model corrections (used by estimator and controller).
  Eigen::Matrix2d A_bias = Eigen::Matrix2d::Zero();
  Eigen::Vector2d B_bias = Eigen::Vector2d::Zero();

  // Constraint relaxations of the controller's state box.
  Eigen::Vector2d theta_lo = Eigen::Vector2d::Zero();
  Eigen::Vector2d theta_hi = Eigen::Vector2d::Zero();

  // Throws std::invalid_argument if a weight matrix is asymmetric, not
  // positive semidefinite (beyond tolerance), or any entry is non-finite.
  void validate() const;
};

inline constexpr int kNumParams = 31;

// Flat layout (fixed; the trace file, step sizes and sensitivities use it):
//   0 q_e | 1 r_e | 2-4 A_r (a00,a10,a11) | 5-6 f1 | 7 f2 | 8 theta_c |
//   9-11 M_f (m00,m10,m11) | 12-14 theta_r | 15-20 M (lower triangle,
//   m00,m10,m11,m20,m21,m22) | 21-24 A_bias (row-major) | 25-26 B_bias |
//   27-28 theta_lo | 29-30 theta_hi
Eigen::VectorXd flatten(const ParameterVector& theta);
ParameterVector unflatten(const Eigen::VectorXd& flat);

// Short name of each flat component, in layout order (used for CSV headers).
const std::array<std::string, kNumParams>& component_names();

// Parameter groups share a step size and an enable flag.
enum class ParamGroup {
  QE,
  RE,
  Ar,
  F1,
  F2,
  ThetaC,
  Mf,
  ThetaR,
  M,
  ABias,
  BBias,
  ThetaBounds,
};

inline constexpr int kNumGroups = 12;

ParamGroup group_of(int flat_index);
std::string to_string(ParamGroup g);

// Per-group learning rates, indexed by ParamGroup.
using StepSizes = std::array<double, kNumGroups>;
StepSizes default_step_sizes();

// Per-group enable mask. Scenarios freeze groups by clearing entries.
using GroupMask = std::array<bool, kNumGroups>;
GroupMask mask_all();
GroupMask mask_none();
GroupMask mask_mpc_only();  // controller cost, model corrections, box shifts
GroupMask mask_mhe_only();  // estimator cost groups

}  // namespace mheq::params
