#include "mheq/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mheq::mpc {

namespace {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  if (!(gamma > 0.0) || gamma > 1.0) {
    throw std::invalid_argument("mpc: gamma must be in (0, 1]");
  }
  if ((w.array() < 0.0).any() || (w_f.array() < 0.0).any()) {
    throw std::invalid_argument("mpc: slack penalties must be nonnegative");
  }
  if ((state_lb.array() > state_ub.array()).any()) {
    throw std::invalid_argument("mpc: state bounds are inverted");
  }
  if (!(u_min < u_max)) {
    throw std::invalid_argument("mpc: input bounds are inverted");
  }
}

qp::QpProblem build_problem(const MpcConfig& cfg,
                            const model::ControlModel& model,
                            const params::ParameterVector& theta,
                            const Eigen::Vector2d& x0,
                            std::optional<double> fixed_first_input,
                            ProblemLayout* layout_out) {
  cfg.validate();
  ProblemLayout lay;
  lay.horizon = cfg.horizon;
  lay.first_input_fixed = fixed_first_input.has_value();
  const int n = cfg.horizon;
  const int nv = lay.num_vars();

  qp::QpProblem p;
  p.H = MatrixXd::Zero(nv, nv);
  p.g = VectorXd::Zero(nv);
  p.c0 = theta.theta_c;
  p.Aeq = MatrixXd::Zero(lay.num_eq(), nv);
  p.beq = VectorXd::Zero(lay.num_eq());
  p.Ain = MatrixXd::Zero(lay.num_ineq(), nv);
  p.bin = VectorXd::Zero(lay.num_ineq());

  // Discounted stage costs over the combined stage vector (x_i, u_i).
  double gp = 1.0;
  for (int i = 0; i < n; ++i) {
    const int idx[3] = {lay.xi(i), lay.xi(i) + 1, lay.ui(i)};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        p.H(idx[a], idx[b]) += gp * theta.M(a, b);
      }
    }
    const Vector3d gv = -gp * (theta.M * theta.theta_r);
    for (int a = 0; a < 3; ++a) p.g(idx[a]) += gv(a);
    p.c0 += 0.5 * gp * theta.theta_r.dot(theta.M * theta.theta_r);
    p.g.segment<2>(lay.si(i)) += 0.5 * gp * cfg.w;
    gp *= cfg.gamma;
  }
  // Terminal cost and terminal slack penalty (gp == gamma^horizon here).
  p.H.block<2, 2>(lay.xi(n), lay.xi(n)) += gp * theta.M_f;
  p.g.segment<2>(lay.si(n)) += 0.5 * gp * cfg.w_f;

  // Dynamics, initial state, and the optional pinned first input.
  for (int i = 0; i < n; ++i) {
    p.Aeq.block<2, 2>(lay.dyn_row(i), lay.xi(i + 1)) =
        Eigen::Matrix2d::Identity();
    p.Aeq.block<2, 2>(lay.dyn_row(i), lay.xi(i)) = -model.A;
    p.Aeq.block<2, 1>(lay.dyn_row(i), lay.ui(i)) = -model.B;
  }
  p.Aeq.block<2, 2>(lay.init_row(), lay.xi(0)) = Eigen::Matrix2d::Identity();
  p.beq.segment<2>(lay.init_row()) = x0;
  if (lay.first_input_fixed) {
    p.Aeq(lay.fixed_input_row(), lay.ui(0)) = 1.0;
    p.beq(lay.fixed_input_row()) = *fixed_first_input;
  }

  // Input bounds on the free inputs.
  for (int j = 0; j < lay.num_free_inputs(); ++j) {
    const int i = lay.free_input(j);
    p.Ain(lay.input_row(j, true), lay.ui(i)) = 1.0;
    p.bin(lay.input_row(j, true)) = cfg.u_max;
    p.Ain(lay.input_row(j, false), lay.ui(i)) = -1.0;
    p.bin(lay.input_row(j, false)) = -cfg.u_min;
  }
  // Softened state box with learned shifts, and slack nonnegativity.
  for (int i = 0; i <= n; ++i) {
    for (int r = 0; r < 2; ++r) {
      p.Ain(lay.box_upper_row(i, r), lay.xi(i) + r) = 1.0;
      p.Ain(lay.box_upper_row(i, r), lay.si(i) + r) = -1.0;
      p.bin(lay.box_upper_row(i, r)) = cfg.state_ub(r) + theta.theta_hi(r);

      p.Ain(lay.box_lower_row(i, r), lay.xi(i) + r) = -1.0;
      p.Ain(lay.box_lower_row(i, r), lay.si(i) + r) = -1.0;
      p.bin(lay.box_lower_row(i, r)) = -(cfg.state_lb(r) + theta.theta_lo(r));

      p.Ain(lay.slack_row(i, r), lay.si(i) + r) = -1.0;
      p.bin(lay.slack_row(i, r)) = 0.0;
    }
  }

  if (layout_out != nullptr) *layout_out = lay;
  return p;
}

MpcSolution solve(const MpcConfig& cfg, const model::ControlModel& model,
                  const params::ParameterVector& theta,
                  const Eigen::Vector2d& x0,
                  std::optional<double> fixed_first_input,
                  const qp::SolveOptions& opts) {
  MpcSolution sol;
  sol.problem =
      build_problem(cfg, model, theta, x0, fixed_first_input, &sol.layout);
  sol.point = qp::solve_qp(sol.problem, opts);
  if (sol.point.status != qp::SolveStatus::Solved) {
    throw std::runtime_error("mpc: control QP not solved (" +
                             qp::to_string(sol.point.status) + ")");
  }
  sol.objective = sol.point.objective;
  sol.u0 = sol.point.p(sol.layout.ui(0));
  return sol;
}

double value(const MpcConfig& cfg, const model::ControlModel& model,
             const params::ParameterVector& theta, const Eigen::Vector2d& x0,
             const qp::SolveOptions& opts) {
  return solve(cfg, model, theta, x0, std::nullopt, opts).objective;
}

double policy(const MpcConfig& cfg, const model::ControlModel& model,
              const params::ParameterVector& theta, const Eigen::Vector2d& x0,
              const qp::SolveOptions& opts) {
  const MpcSolution sol = solve(cfg, model, theta, x0, std::nullopt, opts);
  return std::clamp(sol.u0, cfg.u_min, cfg.u_max);
}

double action_value(const MpcConfig& cfg, const model::ControlModel& model,
                    const params::ParameterVector& theta,
                    const Eigen::Vector2d& x0, double action,
                    const qp::SolveOptions& opts) {
  return solve(cfg, model, theta, x0, action, opts).objective;
}

QGradient sensitivities(const MpcConfig& cfg,
                        const params::ParameterVector& theta,
                        const MpcSolution& sol, const qp::SolveOptions& opts) {
  const ProblemLayout& lay = sol.layout;
  const int n = lay.horizon;
  const VectorXd& p = sol.point.p;
  const VectorXd& lambda = sol.point.lambda;
  const VectorXd& mu = sol.point.mu;

  // The objective is differentiable in the parameters only at a regular
  // point: every constraint strictly active or strictly inactive, active
  // gradients independent, positive curvature on the critical cone.
  const VectorXd slack = sol.problem.bin - sol.problem.Ain * p;
  for (int i = 0; i < sol.problem.num_ineq(); ++i) {
    if (mu(i) <= opts.act_tol && slack(i) <= opts.act_tol) {
      throw RegularityError(
          "mpc: weakly active constraint, sensitivities undefined");
    }
  }
  const qp::RegularityFlags flags =
      qp::check_regularity(sol.problem, sol.point);
  if (!flags.licq) {
    throw RegularityError("mpc: active constraint gradients are dependent");
  }
  if (!flags.sosc) {
    throw RegularityError("mpc: curvature check failed at the solution");
  }

  QGradient grad;
  grad.dtheta = VectorXd::Zero(params::kNumParams);
  grad.dx0 = -lambda.segment<2>(lay.init_row());

  grad.dtheta(8) = 1.0;  // constant offset

  double gp = 1.0;
  for (int i = 0; i < n; ++i) {
    const Vector3d c(p(lay.xi(i)), p(lay.xi(i) + 1), p(lay.ui(i)));
    const Vector3d d = c - theta.theta_r;
    grad.dtheta.segment<3>(12) += -gp * (theta.M * d);
    // Stage weight, lower-triangle order; off-diagonal entries appear twice.
    grad.dtheta(15) += 0.5 * gp * d(0) * d(0);
    grad.dtheta(16) += gp * d(1) * d(0);
    grad.dtheta(17) += 0.5 * gp * d(1) * d(1);
    grad.dtheta(18) += gp * d(2) * d(0);
    grad.dtheta(19) += gp * d(2) * d(1);
    grad.dtheta(20) += 0.5 * gp * d(2) * d(2);
    // Model corrections through the dynamics multipliers.
    const Vector2d lam = lambda.segment<2>(lay.dyn_row(i));
    for (int r = 0; r < 2; ++r) {
      for (int col = 0; col < 2; ++col) {
        grad.dtheta(21 + 2 * r + col) += -lam(r) * p(lay.xi(i) + col);
      }
      grad.dtheta(25 + r) += -lam(r) * p(lay.ui(i));
    }
    gp *= cfg.gamma;
  }
  // Terminal weight (gp == gamma^horizon).
  const Vector2d xN = p.segment<2>(lay.xi(n));
  grad.dtheta(9) = 0.5 * gp * xN(0) * xN(0);
  grad.dtheta(10) = gp * xN(0) * xN(1);
  grad.dtheta(11) = 0.5 * gp * xN(1) * xN(1);

  // Box shifts through the box multipliers.
  for (int i = 0; i <= n; ++i) {
    for (int r = 0; r < 2; ++r) {
      grad.dtheta(27 + r) += mu(lay.box_lower_row(i, r));
      grad.dtheta(29 + r) += -mu(lay.box_upper_row(i, r));
    }
  }
  return grad;
}

}  // namespace mheq::mpc
