#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "mheq/parameters.hpp"

namespace mheq::rl {

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// True task stage cost used to score closed-loop behavior: quadratic state
// and input terms plus a weighted one-sided penalty outside the state box.
struct BaselineCost {
  Eigen::Vector2d q = Eigen::Vector2d::Ones();
  double r = 1e-2;
  Eigen::Vector2d w = Eigen::Vector2d::Constant(10.0);
  Eigen::Vector2d state_lb = (Eigen::Vector2d() << 0.0, -10.0).finished();
  Eigen::Vector2d state_ub = (Eigen::Vector2d() << 10.0, 10.0).finished();
};

double baseline_cost(const BaselineCost& cost, const Eigen::Vector2d& x,
                     double u);

// Temporal-difference error: stage cost plus discounted next value minus the
// action value of the transition.
double td_error(double stage_cost, double next_value, double action_value,
                double gamma);

// Total objective derivative: the direct parameter derivative plus the chain
// through the estimate (dxhat_dtheta is 2 x kNumParams).
Eigen::VectorXd total_gradient(const Eigen::VectorXd& dq_dtheta,
                               const Eigen::Vector2d& dq_dx0,
                               const Eigen::MatrixXd& dxhat_dtheta);

// Nearest symmetric positive semidefinite matrix in the Frobenius norm:
// eigendecompose and clip negative eigenvalues. Returns the input unchanged
// (bit-exact) when it is already positive semidefinite within tolerance.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m);

// One temporal-difference update restricted to the enabled groups, with the
// stepped weight matrices projected back onto the positive semidefinite
// cone (scalar weights are clamped at zero). Groups whose step is zero are
// passed through bit-identically. Throws NonFiniteGradient on non-finite
// delta or gradient entries.
params::ParameterVector constrained_step(const params::ParameterVector& theta,
                                         double delta,
                                         const Eigen::VectorXd& grad,
                                         const params::StepSizes& alphas,
                                         const params::GroupMask& mask);

}  // namespace mheq::rl
