#include "mheq/mhe.hpp"

#include <string>

namespace mheq::mhe {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Decision-vector offsets: states first (2 per node), then inputs.
int xi(int i) { return 2 * i; }
int ui(int n_horizon, int i) { return 2 * (n_horizon + 1) + i; }

}  // namespace

MeasurementWindow::MeasurementWindow(int horizon) : horizon_(horizon) {
  if (horizon < 1) {
    throw std::invalid_argument("mhe: window horizon must be >= 1");
  }
}

void MeasurementWindow::add_measurement(double y) {
  if (static_cast<int>(y_.size()) == horizon_ + 1) {
    y_.pop_front();
    u_.pop_front();
  }
  y_.push_back(y);
}

void MeasurementWindow::add_input(double u) {
  if (u_.size() >= y_.size()) {
    throw std::logic_error("mhe: input pushed before its measurement");
  }
  u_.push_back(u);
}

bool MeasurementWindow::ready() const {
  return static_cast<int>(y_.size()) == horizon_ + 1;
}

Eigen::VectorXd MeasurementWindow::measurements() const {
  VectorXd out(static_cast<int>(y_.size()));
  for (int i = 0; i < out.size(); ++i) out(i) = y_[i];
  return out;
}

Eigen::VectorXd MeasurementWindow::inputs() const {
  VectorXd out(static_cast<int>(u_.size()));
  for (int i = 0; i < out.size(); ++i) out(i) = u_[i];
  return out;
}

qp::QpProblem build_problem(const MheConfig& cfg,
                            const model::ControlModel& model,
                            const params::ParameterVector& theta,
                            const MeasurementWindow& window,
                            const Eigen::Vector2d& prior) {
  cfg.validate();
  if (!window.ready()) {
    throw WindowNotFull("mhe: window is not full yet");
  }
  const int n = cfg.horizon;
  const int nv = 2 * (n + 1) + n;
  const int ne = 2 * n;
  const VectorXd y = window.measurements();
  const VectorXd u_bar = window.inputs();

  qp::QpProblem p;
  p.H = MatrixXd::Zero(nv, nv);
  p.g = VectorXd::Zero(nv);
  p.c0 = 0.0;
  p.Aeq = MatrixXd::Zero(ne, nv);
  p.beq = VectorXd::Zero(ne);
  p.Ain = MatrixXd::Zero(0, nv);
  p.bin = VectorXd::Zero(0);

  // Arrival cost ||x_0 - prior||^2_{A_r}.
  p.H.block<2, 2>(xi(0), xi(0)) += 2.0 * theta.A_r;
  p.g.segment<2>(xi(0)) += -2.0 * theta.A_r * prior;
  p.c0 += prior.dot(theta.A_r * prior);

  for (int i = 0; i <= n; ++i) {
    // Output fit q_e * (y_i - x_i[0])^2 and state gradient term f1' x_i.
    p.H(xi(i), xi(i)) += 2.0 * theta.q_e;
    p.g(xi(i)) += -2.0 * theta.q_e * y(i);
    p.c0 += theta.q_e * y(i) * y(i);
    p.g.segment<2>(xi(i)) += theta.f1;
  }
  for (int i = 0; i < n; ++i) {
    // Input fit r_e * (u_i - u_bar_i)^2 and input gradient term f2 * u_i.
    p.H(ui(n, i), ui(n, i)) += 2.0 * theta.r_e;
    p.g(ui(n, i)) += -2.0 * theta.r_e * u_bar(i);
    p.c0 += theta.r_e * u_bar(i) * u_bar(i);
    p.g(ui(n, i)) += theta.f2;

    // Dynamics x_{i+1} = A x_i + B u_i.
    p.Aeq.block<2, 2>(2 * i, xi(i + 1)) = Eigen::Matrix2d::Identity();
    p.Aeq.block<2, 2>(2 * i, xi(i)) = -model.A;
    p.Aeq.block<2, 1>(2 * i, ui(n, i)) = -model.B;
  }
  return p;
}

MheSolution estimate(const MheConfig& cfg, const model::ControlModel& model,
                     const params::ParameterVector& theta,
                     const MeasurementWindow& window,
                     const Eigen::Vector2d& prior,
                     const qp::SolveOptions& opts) {
  MheSolution sol;
  sol.problem = build_problem(cfg, model, theta, window, prior);
  sol.point = qp::solve_qp(sol.problem, opts);
  if (sol.point.status != qp::SolveStatus::Solved) {
    throw std::runtime_error("mhe: estimation QP not solved (" +
                             qp::to_string(sol.point.status) + ")");
  }
  const int n = cfg.horizon;
  sol.x.resize(2, n + 1);
  for (int i = 0; i <= n; ++i) sol.x.col(i) = sol.point.p.segment<2>(xi(i));
  sol.u = sol.point.p.segment(2 * (n + 1), n);
  sol.x_hat = sol.x.col(n);
  return sol;
}

Eigen::MatrixXd state_sensitivity(const MheConfig& cfg,
                                  const params::ParameterVector& theta,
                                  const MeasurementWindow& window,
                                  const Eigen::Vector2d& prior,
                                  const MheSolution& sol) {
  (void)theta;
  const int n = cfg.horizon;
  const int nv = 2 * (n + 1) + n;
  const int ne = 2 * n;
  const int nz = nv + ne;
  const VectorXd y = window.measurements();
  const VectorXd u_bar = window.inputs();
  const VectorXd& lambda = sol.point.lambda;

  // KKT residual map R(z, theta) = [H p + g + Aeq' lambda; Aeq p - beq].
  MatrixXd K = MatrixXd::Zero(nz, nz);
  K.topLeftCorner(nv, nv) = sol.problem.H;
  K.topRightCorner(nv, ne) = sol.problem.Aeq.transpose();
  K.bottomLeftCorner(ne, nv) = sol.problem.Aeq;

  MatrixXd dR = MatrixXd::Zero(nz, params::kNumParams);

  // q_e: stationarity of x_i[0] rows carries 2 q_e (x_i[0] - y_i).
  for (int i = 0; i <= n; ++i) {
    dR(xi(i), 0) = 2.0 * (sol.x(0, i) - y(i));
  }
  // r_e: stationarity of u_i rows carries 2 r_e (u_i - u_bar_i).
  for (int i = 0; i < n; ++i) {
    dR(ui(n, i), 1) = 2.0 * (sol.u(i) - u_bar(i));
  }
  // A_r entries (a00, a10, a11) act on the x_0 stationarity rows through
  // 2 A_r (x_0 - prior); the off-diagonal entry appears in both positions.
  {
    const Eigen::Vector2d e = sol.x.col(0) - prior;
    dR(xi(0) + 0, 2) = 2.0 * e(0);
    dR(xi(0) + 0, 3) = 2.0 * e(1);
    dR(xi(0) + 1, 3) = 2.0 * e(0);
    dR(xi(0) + 1, 4) = 2.0 * e(1);
  }
  // f1, f2 enter the gradient linearly on every node.
  for (int i = 0; i <= n; ++i) {
    dR(xi(i) + 0, 5) = 1.0;
    dR(xi(i) + 1, 6) = 1.0;
  }
  for (int i = 0; i < n; ++i) {
    dR(ui(n, i), 7) = 1.0;
  }
  // Model corrections enter through the equality constraints: the
  // stationarity rows pick up -lambda terms, the constraint rows -x or -u.
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d lam = lambda.segment<2>(2 * i);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        const int col = 21 + 2 * r + c;
        dR(xi(i) + c, col) += -lam(r);
        dR(nv + 2 * i + r, col) += -sol.x(c, i);
      }
      const int col_b = 25 + r;
      dR(ui(n, i), col_b) += -lam(r);
      dR(nv + 2 * i + r, col_b) += -sol.u(i);
    }
  }

  const MatrixXd dz = qp::solve_kkt_sensitivity(K, dR);
  return dz.middleRows(xi(n), 2);
}

Eigen::Vector2d advance_prior(const MheSolution& sol) {
  return sol.x.col(1);
}

}  // namespace mheq::mhe
