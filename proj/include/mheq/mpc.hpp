#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

#include "mheq/model.hpp"
#include "mheq/parameters.hpp"
#include "mheq/qp.hpp"

namespace mheq::mpc {

// Raised when the solved point is not a differentiable optimum (weakly
// active constraint, dependent active gradients, or flat curvature), so
// parametric sensitivities are not defined there.
struct RegularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MpcConfig {
  int horizon = 8;
  double gamma = 0.9;
  // Exact-penalty weights: they must dominate the hard-constraint multipliers
  // (O(5) for this plant's tracking weights) but not the reward scale. The
  // objective carries these with a factor gamma^i/2, so 20 prices a unit of
  // stage-0 violation at 10 — the same rate the baseline cost charges; a much
  // larger weight makes the temporal difference at constraint events
  // systematically negative and the bound parameters learn to loosen.
  Eigen::Vector2d w = Eigen::Vector2d::Constant(20.0);    // stage slack penalty
  Eigen::Vector2d w_f = Eigen::Vector2d::Constant(20.0);  // terminal slack penalty
  Eigen::Vector2d state_lb = (Eigen::Vector2d() << 0.0, -10.0).finished();
  Eigen::Vector2d state_ub = (Eigen::Vector2d() << 10.0, 10.0).finished();
  double u_min = -1.0;
  double u_max = 1.0;

  void validate() const;
};

// Index map of the controller QP. Decision vector: states (2 per node,
// horizon+1 nodes), then inputs (horizon), then box slacks (2 per node).
// When the first input is pinned by an equality its bounds are dropped,
// which keeps the active constraint gradients independent at saturation.
struct ProblemLayout {
  int horizon = 0;
  bool first_input_fixed = false;

  int xi(int i) const { return 2 * i; }
  int ui(int i) const { return 2 * (horizon + 1) + i; }
  int si(int i) const { return 3 * horizon + 2 + 2 * i; }
  int num_vars() const { return 5 * horizon + 4; }

  int dyn_row(int i) const { return 2 * i; }
  int init_row() const { return 2 * horizon; }
  int fixed_input_row() const { return 2 * horizon + 2; }
  int num_eq() const { return 2 * horizon + 2 + (first_input_fixed ? 1 : 0); }

  int num_free_inputs() const { return horizon - (first_input_fixed ? 1 : 0); }
  int free_input(int j) const { return first_input_fixed ? j + 1 : j; }
  int input_row(int j, bool upper) const { return 2 * j + (upper ? 0 : 1); }
  int box_upper_row(int i, int r) const {
    return 2 * num_free_inputs() + 2 * i + r;
  }
  int box_lower_row(int i, int r) const {
    return 2 * num_free_inputs() + 2 * (horizon + 1) + 2 * i + r;
  }
  int slack_row(int i, int r) const {
    return 2 * num_free_inputs() + 4 * (horizon + 1) + 2 * i + r;
  }
  int num_ineq() const { return 2 * num_free_inputs() + 6 * (horizon + 1); }
};

struct MpcSolution {
  double objective = 0.0;
  double u0 = 0.0;  // first planned input
  ProblemLayout layout;
  qp::QpProblem problem;
  qp::PrimalDualSolution point;
};

// Assembles the discounted soft-constrained tracking QP from the current
// estimate. Passing fixed_first_input pins u_0 by an equality constraint
// (the action-value problem); otherwise u_0 is optimized (value/policy).
qp::QpProblem build_problem(const MpcConfig& cfg,
                            const model::ControlModel& model,
                            const params::ParameterVector& theta,
                            const Eigen::Vector2d& x0,
                            std::optional<double> fixed_first_input,
                            ProblemLayout* layout_out = nullptr);

MpcSolution solve(const MpcConfig& cfg, const model::ControlModel& model,
                  const params::ParameterVector& theta,
                  const Eigen::Vector2d& x0,
                  std::optional<double> fixed_first_input,
                  const qp::SolveOptions& opts = {});

// Optimal objective of the free problem.
double value(const MpcConfig& cfg, const model::ControlModel& model,
             const params::ParameterVector& theta, const Eigen::Vector2d& x0,
             const qp::SolveOptions& opts = {});

// First input of the free problem, clamped to the input bounds.
double policy(const MpcConfig& cfg, const model::ControlModel& model,
              const params::ParameterVector& theta, const Eigen::Vector2d& x0,
              const qp::SolveOptions& opts = {});

// Objective with the first input pinned to `action`.
double action_value(const MpcConfig& cfg, const model::ControlModel& model,
                    const params::ParameterVector& theta,
                    const Eigen::Vector2d& x0, double action,
                    const qp::SolveOptions& opts = {});

struct QGradient {
  Eigen::VectorXd dtheta;  // params::kNumParams entries, flat layout
  Eigen::Vector2d dx0;     // derivative with respect to the initial state
};

// Exact parametric derivatives of the solved objective at the primal-dual
// point: partial derivatives of the Lagrangian in the cost parameters plus
// the initial-state multiplier. Throws RegularityError if the point fails
// strict complementarity, independence, or curvature checks.
QGradient sensitivities(const MpcConfig& cfg,
                        const params::ParameterVector& theta,
                        const MpcSolution& sol,
                        const qp::SolveOptions& opts = {});

}  // namespace mheq::mpc
