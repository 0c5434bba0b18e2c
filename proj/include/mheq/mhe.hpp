#pragma once

#include <Eigen/Dense>
#include <deque>
#include <stdexcept>

#include "mheq/model.hpp"
#include "mheq/parameters.hpp"
#include "mheq/qp.hpp"

namespace mheq::mhe {

struct WindowNotFull : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MheConfig {
  int horizon = 8;  // window spans horizon+1 measurements, horizon inputs

  void validate() const {
    if (horizon < 1) {
      throw std::invalid_argument("mhe: horizon must be >= 1");
    }
  }
};

// Rolling store of the most recent horizon+1 measurements and the horizon
// inputs applied between them. Measurements lead inputs by one: push the new
// measurement at the start of a step, the chosen input at the end.
class MeasurementWindow {
 public:
  explicit MeasurementWindow(int horizon);

  void add_measurement(double y);
  void add_input(double u);
  bool ready() const;
  int horizon() const { return horizon_; }

  // Oldest-first copies; inputs() requires ready().
  Eigen::VectorXd measurements() const;
  Eigen::VectorXd inputs() const;

 private:
  int horizon_;
  std::deque<double> y_;
  std::deque<double> u_;
};

struct MheSolution {
  Eigen::MatrixXd x;       // 2 x (horizon+1), estimated window states
  Eigen::VectorXd u;       // horizon estimated inputs
  Eigen::Vector2d x_hat;   // newest state, x.col(horizon)
  qp::QpProblem problem;   // assembled equality QP (kept for sensitivities)
  qp::PrimalDualSolution point;
};

// Assembles the estimation QP over the window: arrival cost on the oldest
// state against the prior, output fit on every window state, input fit on
// every window input, linear gradient terms, and the prediction model as
// equality constraints. Decision vector: [x_0..x_N; u_0..u_{N-1}].
qp::QpProblem build_problem(const MheConfig& cfg,
                            const model::ControlModel& model,
                            const params::ParameterVector& theta,
                            const MeasurementWindow& window,
                            const Eigen::Vector2d& prior);

// Solves the estimation QP. Throws WindowNotFull before the window fills and
// std::runtime_error if the solve fails.
MheSolution estimate(const MheConfig& cfg, const model::ControlModel& model,
                     const params::ParameterVector& theta,
                     const MeasurementWindow& window,
                     const Eigen::Vector2d& prior,
                     const qp::SolveOptions& opts = {});

// Jacobian of the newest estimated state with respect to the flat parameter
// vector (2 x kNumParams), from the implicit-function derivative of the
// estimator's KKT conditions at the solved primal-dual point. Columns of
// parameters the estimator never sees are zero.
Eigen::MatrixXd state_sensitivity(const MheConfig& cfg,
                                  const params::ParameterVector& theta,
                                  const MeasurementWindow& window,
                                  const Eigen::Vector2d& prior,
                                  const MheSolution& sol);

// Prior for the next step's window: the smoothed estimate of the state that
// becomes the window's oldest entry after one shift.
Eigen::Vector2d advance_prior(const MheSolution& sol);

}  // namespace mheq::mhe
