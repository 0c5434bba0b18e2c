#include "mheq/rl.hpp"

#include <algorithm>
#include <cmath>

namespace mheq::rl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double baseline_cost(const BaselineCost& cost, const Eigen::Vector2d& x,
                     double u) {
  const Eigen::Vector2d over = (x - cost.state_ub).cwiseMax(0.0);
  const Eigen::Vector2d under = (cost.state_lb - x).cwiseMax(0.0);
  return 0.5 * x.dot(cost.q.asDiagonal() * x) + 0.5 * cost.r * u * u +
         cost.w.dot(over + under);
}

double td_error(double stage_cost, double next_value, double action_value,
                double gamma) {
  return stage_cost + gamma * next_value - action_value;
}

Eigen::VectorXd total_gradient(const Eigen::VectorXd& dq_dtheta,
                               const Eigen::Vector2d& dq_dx0,
                               const Eigen::MatrixXd& dxhat_dtheta) {
  if (dxhat_dtheta.rows() != 2 || dxhat_dtheta.cols() != dq_dtheta.size()) {
    throw std::invalid_argument("rl: estimate sensitivity has wrong shape");
  }
  return dq_dtheta + dxhat_dtheta.transpose() * dq_dx0;
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("rl: project_psd needs a square matrix");
  }
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  if (eig.eigenvalues()(0) >= -1e-12 * scale) {
    return m;
  }
  const VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  const MatrixXd proj = eig.eigenvectors() * clipped.asDiagonal() *
                        eig.eigenvectors().transpose();
  return 0.5 * (proj + proj.transpose());
}

params::ParameterVector constrained_step(const params::ParameterVector& theta,
                                         double delta,
                                         const Eigen::VectorXd& grad,
                                         const params::StepSizes& alphas,
                                         const params::GroupMask& mask) {
  if (grad.size() != params::kNumParams) {
    throw std::invalid_argument("rl: gradient has wrong length");
  }
  if (!std::isfinite(delta) || !grad.allFinite()) {
    throw NonFiniteGradient("rl: non-finite temporal-difference update");
  }

  VectorXd flat = params::flatten(theta);
  std::array<bool, params::kNumGroups> stepped{};
  for (int j = 0; j < params::kNumParams; ++j) {
    const auto g = static_cast<int>(params::group_of(j));
    if (!mask[g]) continue;
    const double step = alphas[g] * delta * grad(j);
    if (step != 0.0) {
      flat(j) += step;
      stepped[g] = true;
    }
  }

  params::ParameterVector out = params::unflatten(flat);
  // Keep the quadratic weights in the feasible cone, touching only blocks
  // that actually moved so frozen blocks stay bit-identical.
  if (stepped[static_cast<int>(params::ParamGroup::QE)]) {
    out.q_e = std::max(0.0, out.q_e);
  }
  if (stepped[static_cast<int>(params::ParamGroup::RE)]) {
    out.r_e = std::max(0.0, out.r_e);
  }
  if (stepped[static_cast<int>(params::ParamGroup::Ar)]) {
    out.A_r = project_psd(out.A_r);
  }
  if (stepped[static_cast<int>(params::ParamGroup::Mf)]) {
    out.M_f = project_psd(out.M_f);
  }
  if (stepped[static_cast<int>(params::ParamGroup::M)]) {
    out.M = project_psd(out.M);
  }
  return out;
}

}  // namespace mheq::rl
