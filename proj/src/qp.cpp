#include "mheq/qp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mheq::qp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double inf_norm(const VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

double objective_value(const QpProblem& qp, const VectorXd& p) {
  return 0.5 * p.dot(qp.H * p) + qp.g.dot(p) + qp.c0;
}

std::vector<int> extract_active_set(const QpProblem& qp,
                                    const VectorXd& p,
                                    const VectorXd& mu,
                                    double act_tol) {
  std::vector<int> active;
  for (int i = 0; i < qp.num_ineq(); ++i) {
    const double slack = qp.bin(i) - qp.Ain.row(i).dot(p);
    if (mu(i) > act_tol || slack < act_tol) active.push_back(i);
  }
  return active;
}

// Longest step alpha in [0, 1] keeping v + alpha*dv >= (1 - tau)*v.
double step_to_boundary(const VectorXd& v, const VectorXd& dv, double tau) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -tau * v(i) / dv(i));
  }
  return alpha;
}

PrimalDualSolution finalize(const QpProblem& qp, const SolveOptions& opts,
                            VectorXd p, VectorXd lambda, VectorXd mu,
                            SolveStatus status, int iterations) {
  PrimalDualSolution sol;
  sol.p = std::move(p);
  sol.lambda = std::move(lambda);
  sol.mu = std::move(mu);
  sol.objective = objective_value(qp, sol.p);
  sol.active_set = extract_active_set(qp, sol.p, sol.mu, opts.act_tol);
  sol.status = status;
  sol.iterations = iterations;
  sol.kkt_residual = kkt_residual(qp, sol);
  if (status == SolveStatus::Solved && sol.kkt_residual > opts.tol) {
    sol.status = SolveStatus::MaxIterations;
  }
  return sol;
}

// Equality feasibility pre-check shared by both paths.
bool equalities_consistent(const QpProblem& qp, double tol) {
  if (qp.num_eq() == 0) return true;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(qp.Aeq);
  const VectorXd pf = qr.solve(qp.beq);
  const double res = inf_norm(qp.Aeq * pf - qp.beq);
  return res <= std::max(tol, 1e-10) * (1.0 + inf_norm(qp.beq));
}

PrimalDualSolution solve_equality_qp(const QpProblem& qp,
                                     const SolveOptions& opts,
                                     const MatrixXd& Hs) {
  const int n = qp.num_vars();
  const int me = qp.num_eq();

  if (!equalities_consistent(qp, opts.tol)) {
    return finalize(qp, opts, VectorXd::Zero(n), VectorXd::Zero(me),
                    VectorXd(), SolveStatus::Infeasible, 0);
  }

  MatrixXd K = MatrixXd::Zero(n + me, n + me);
  K.topLeftCorner(n, n) = Hs;
  if (me > 0) {
    K.topRightCorner(n, me) = qp.Aeq.transpose();
    K.bottomLeftCorner(me, n) = qp.Aeq;
  }
  VectorXd rhs(n + me);
  rhs.head(n) = -qp.g;
  rhs.tail(me) = qp.beq;

  Eigen::FullPivLU<MatrixXd> lu(K);
  VectorXd z;
  if (lu.isInvertible()) {
    z = lu.solve(rhs);
  } else {
    // Singular KKT: either the reduced Hessian is singular but the problem is
    // still bounded (pick the minimum-norm solution), or there is a direction
    // of unbounded descent and stationarity cannot be satisfied.
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(K);
    z = cod.solve(rhs);
    const VectorXd res = K * z - rhs;
    if (inf_norm(res.head(n)) > opts.tol * (1.0 + inf_norm(qp.g))) {
      return finalize(qp, opts, VectorXd::Zero(n), VectorXd::Zero(me),
                      VectorXd(), SolveStatus::Unbounded, 0);
    }
  }
  return finalize(qp, opts, z.head(n), z.tail(me), VectorXd(),
                  SolveStatus::Solved, 1);
}

PrimalDualSolution solve_ipm(const QpProblem& qp, const SolveOptions& opts,
                             const MatrixXd& Hs) {
  const int n = qp.num_vars();
  const int me = qp.num_eq();
  const int mi = qp.num_ineq();

  if (!equalities_consistent(qp, opts.tol)) {
    return finalize(qp, opts, VectorXd::Zero(n), VectorXd::Zero(me),
                    VectorXd::Zero(mi), SolveStatus::Infeasible, 0);
  }

  // Mehrotra-style starting point: minimum-norm equality-feasible primal
  // (bounded even when the objective is linear in some variables),
  // least-squares multipliers, then shifts that put slacks and multipliers
  // well inside the positive orthant at a matched scale.
  VectorXd p = VectorXd::Zero(n);
  VectorXd lambda = VectorXd::Zero(me);
  VectorXd mu_hat = VectorXd::Zero(mi);
  if (me > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(qp.Aeq);
    const VectorXd p0 = cod.solve(qp.beq);
    if (p0.allFinite()) p = p0;
  }
  {
    MatrixXd At(n, me + mi);
    if (me > 0) At.leftCols(me) = qp.Aeq.transpose();
    At.rightCols(mi) = qp.Ain.transpose();
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(At);
    const VectorXd lm = cod.solve(-(Hs * p + qp.g));
    if (lm.allFinite()) {
      lambda = lm.head(me);
      mu_hat = lm.tail(mi);
    }
  }
  const VectorXd s_hat = qp.bin - qp.Ain * p;
  double shift_s = std::max(0.0, -1.5 * s_hat.minCoeff());
  double shift_m = std::max(0.0, -1.5 * mu_hat.minCoeff());
  const VectorXd s1 = s_hat.array() + shift_s;
  const VectorXd m1 = mu_hat.array() + shift_m;
  const double pair = s1.dot(m1);
  shift_s += 0.5 * std::max(pair, 0.0) / std::max(m1.sum(), 1.0);
  shift_m += 0.5 * std::max(pair, 0.0) / std::max(s1.sum(), 1.0);
  VectorXd s = (s_hat.array() + shift_s).cwiseMax(1e-2).matrix();
  VectorXd mu = (mu_hat.array() + shift_m).cwiseMax(1e-2).matrix();

  // Track the best iterate seen: late iterations can lose accuracy to the
  // extreme scaling of nearly active constraints.
  VectorXd best_p = p, best_lambda = lambda, best_mu = mu;
  double best_res = std::numeric_limits<double>::infinity();

  // Predictor-corrector steps can enter a limit cycle when a constraint is
  // weakly active (degenerate complementarity); a stalled complementarity
  // norm triggers a couple of damped pure-centering steps to rebalance.
  std::array<double, 8> comp_hist;
  comp_hist.fill(std::numeric_limits<double>::infinity());
  int center_steps = 0;

  int it = 0;
  bool converged = false;
  for (; it < opts.max_iterations; ++it) {
    const VectorXd r_d =
        Hs * p + qp.g + qp.Aeq.transpose() * lambda + qp.Ain.transpose() * mu;
    const VectorXd r_e = qp.Aeq * p - qp.beq;
    const VectorXd r_i = qp.Ain * p + s - qp.bin;
    const VectorXd comp = s.cwiseProduct(mu);
    const double mu_avg = comp.sum() / mi;

    const double comp_norm = inf_norm(comp);
    if (center_steps == 0 && it >= 8 &&
        comp_norm > 0.5 * comp_hist[static_cast<std::size_t>(it % 8)]) {
      center_steps = 2;
    }
    comp_hist[static_cast<std::size_t>(it % 8)] = comp_norm;

    const double res =
        std::max({inf_norm(r_d), inf_norm(r_e), inf_norm(r_i), comp_norm});
    if (res < best_res) {
      best_res = res;
      best_p = p;
      best_lambda = lambda;
      best_mu = mu;
    }
    if (res <= opts.tol) {
      converged = true;
      break;
    }

    const VectorXd d = mu.cwiseQuotient(s);
    MatrixXd K = MatrixXd::Zero(n + me, n + me);
    K.topLeftCorner(n, n) =
        Hs + qp.Ain.transpose() * d.asDiagonal() * qp.Ain;
    // Tiny static regularization keyed to the objective scale keeps the
    // saddle-point factorization nonsingular without biasing the steps.
    const double reg = 1e-12 * (1.0 + Hs.cwiseAbs().maxCoeff());
    K.topLeftCorner(n, n) += reg * MatrixXd::Identity(n, n);
    if (me > 0) {
      K.topRightCorner(n, me) = qp.Aeq.transpose();
      K.bottomLeftCorner(me, n) = qp.Aeq;
      K.bottomRightCorner(me, me) = -reg * MatrixXd::Identity(me, me);
    }
    Eigen::FullPivLU<MatrixXd> lu;
    // The default rank threshold would discard the O(1) equality pivots once
    // the barrier scaling dominates the matrix; K is regularized and therefore
    // nonsingular, so keep every pivot and repair roundoff by refinement.
    lu.setThreshold(1e-30);
    lu.compute(K);

    bool solve_ok = true;
    auto newton_step = [&](const VectorXd& r_c) {
      VectorXd rhs(n + me);
      rhs.head(n) = -r_d - qp.Ain.transpose() *
                               ((mu.cwiseProduct(r_i) - r_c).cwiseQuotient(s));
      rhs.tail(me) = -r_e;
      VectorXd z = lu.solve(rhs);
      // Iterative refinement: the diagonal scaling spans many orders of
      // magnitude near the solution and a single backsolve loses digits.
      const double rhs_scale = 1.0 + inf_norm(rhs);
      for (int pass = 0; pass < 8; ++pass) {
        const VectorXd resid = rhs - K * z;
        if (!resid.allFinite() || inf_norm(resid) <= 1e-13 * rhs_scale) break;
        z += lu.solve(resid);
      }
      if (!z.allFinite() || inf_norm(rhs - K * z) > 1e-7 * rhs_scale) {
        solve_ok = false;
      }
      const VectorXd dp = z.head(n);
      const VectorXd ds = -r_i - qp.Ain * dp;
      const VectorXd dmu = -(r_c + mu.cwiseProduct(ds)).cwiseQuotient(s);
      return std::make_tuple(dp, VectorXd(z.tail(me)), ds, dmu);
    };

    // Affine scaling (predictor) step.
    const auto [dp_aff, dl_aff, ds_aff, dmu_aff] = newton_step(comp);
    if (!solve_ok) break;  // factorization too inaccurate to trust
    const double ap_aff = step_to_boundary(s, ds_aff, 1.0);
    const double ad_aff = step_to_boundary(mu, dmu_aff, 1.0);
    const double mu_aff = (s + ap_aff * ds_aff).dot(mu + ad_aff * dmu_aff) / mi;
    double sigma = std::pow(mu_aff / mu_avg, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);
    double tau = std::min(0.99999, std::max(0.995, 1.0 - mu_avg));
    if (center_steps > 0) {
      --center_steps;
      sigma = 1.0;
      tau = 0.8;
    }

    // Corrector step. The centering target is floored so complementarity
    // products settle just below the tolerance instead of collapsing to
    // machine zero, which would make the scaling matrix astronomically
    // ill-conditioned while the dual residual still needs polishing.
    const double target = std::max(sigma * mu_avg, 0.2 * opts.tol);
    const VectorXd r_c = comp + ds_aff.cwiseProduct(dmu_aff) -
                         target * VectorXd::Ones(mi);
    const auto [dp, dl, ds, dmu] = newton_step(r_c);
    if (!solve_ok) break;
    const double alpha =
        std::min(step_to_boundary(s, ds, tau), step_to_boundary(mu, dmu, tau));
    if (!std::isfinite(alpha) || alpha < 1e-12) break;

    p += alpha * dp;
    lambda += alpha * dl;
    s += alpha * ds;
    mu += alpha * dmu;
    if (!p.allFinite() || !s.allFinite() || !mu.allFinite()) break;
  }

  if (converged) {
    return finalize(qp, opts, p, lambda, mu, SolveStatus::Solved, it);
  }
  return finalize(qp, opts, best_p, best_lambda, best_mu,
                  SolveStatus::MaxIterations, it);
}

}  // namespace

void QpProblem::validate() const {
  const auto n = H.rows();
  if (H.cols() != n) throw std::invalid_argument("qp: H must be square");
  if (g.size() != n) throw std::invalid_argument("qp: g size mismatch");
  if (n > 0) {
    const double hnorm = H.cwiseAbs().maxCoeff();
    const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * hnorm) {
      throw std::invalid_argument("qp: H is not symmetric");
    }
  }
  if (Aeq.rows() != beq.size()) {
    throw std::invalid_argument("qp: Aeq/beq row mismatch");
  }
  if (Aeq.rows() > 0 && Aeq.cols() != n) {
    throw std::invalid_argument("qp: Aeq column mismatch");
  }
  if (Ain.rows() != bin.size()) {
    throw std::invalid_argument("qp: Ain/bin row mismatch");
  }
  if (Ain.rows() > 0 && Ain.cols() != n) {
    throw std::invalid_argument("qp: Ain column mismatch");
  }
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "solved";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

PrimalDualSolution solve_qp(const QpProblem& problem, const SolveOptions& opts) {
  problem.validate();
  const MatrixXd Hs = 0.5 * (problem.H + problem.H.transpose());
  if (problem.num_ineq() == 0) {
    return solve_equality_qp(problem, opts, Hs);
  }
  return solve_ipm(problem, opts, Hs);
}

double kkt_residual(const QpProblem& problem, const PrimalDualSolution& sol) {
  const int me = problem.num_eq();
  const int mi = problem.num_ineq();

  VectorXd stat = problem.H * sol.p + problem.g;
  if (me > 0) stat += problem.Aeq.transpose() * sol.lambda;
  if (mi > 0) stat += problem.Ain.transpose() * sol.mu;
  double r = inf_norm(stat);

  if (me > 0) r = std::max(r, inf_norm(problem.Aeq * sol.p - problem.beq));
  if (mi > 0) {
    const VectorXd viol = problem.Ain * sol.p - problem.bin;
    r = std::max(r, viol.cwiseMax(0.0).maxCoeff());
    r = std::max(r, (-sol.mu).cwiseMax(0.0).maxCoeff());
    r = std::max(r, sol.mu.cwiseProduct(viol).cwiseAbs().maxCoeff());
  }
  return r;
}

RegularityFlags check_regularity(const QpProblem& problem,
                                 const PrimalDualSolution& sol,
                                 double threshold) {
  const int n = problem.num_vars();
  const int me = problem.num_eq();
  const auto active = extract_active_set(problem, sol.p, sol.mu, 1e-6);
  const int ma = me + static_cast<int>(active.size());

  RegularityFlags flags;
  if (ma == 0) {
    flags.licq = true;
  } else {
    MatrixXd J(ma, n);
    if (me > 0) J.topRows(me) = problem.Aeq;
    for (int i = 0; i < static_cast<int>(active.size()); ++i) {
      J.row(me + i) = problem.Ain.row(active[i]);
    }
    Eigen::JacobiSVD<MatrixXd> svd(J, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    flags.licq = ma <= n && sv(sv.size() - 1) > threshold * std::max(1.0, smax);

    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
      if (sv(i) > threshold * std::max(1.0, smax)) ++rank;
    }
    const MatrixXd Z = svd.matrixV().rightCols(n - rank);
    if (Z.cols() == 0) {
      flags.sosc = true;
    } else {
      const MatrixXd Hred = Z.transpose() * problem.H * Z;
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(
          0.5 * (Hred + Hred.transpose()));
      flags.sosc = eig.eigenvalues()(0) > threshold;
    }
    return flags;
  }

  // No active constraints: the critical cone is the whole space.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(
      0.5 * (problem.H + problem.H.transpose()));
  flags.sosc = n == 0 || eig.eigenvalues()(0) > threshold;
  return flags;
}

Eigen::MatrixXd solve_kkt_sensitivity(const Eigen::MatrixXd& kkt_jacobian,
                                      const Eigen::MatrixXd& param_jacobian) {
  if (kkt_jacobian.rows() != kkt_jacobian.cols()) {
    throw std::invalid_argument("kkt_jacobian must be square");
  }
  if (param_jacobian.rows() != kkt_jacobian.rows()) {
    throw std::invalid_argument("param_jacobian row mismatch");
  }
  if (kkt_jacobian.rows() == 0 || param_jacobian.cols() == 0) {
    return MatrixXd::Zero(kkt_jacobian.rows(), param_jacobian.cols());
  }
  Eigen::FullPivLU<MatrixXd> lu(kkt_jacobian);
  if (!lu.isInvertible()) {
    throw SingularKktError("KKT Jacobian is singular");
  }
  const MatrixXd X = lu.solve(-param_jacobian);
  const double res = (kkt_jacobian * X + param_jacobian).cwiseAbs().maxCoeff();
  const double scale = 1.0 + param_jacobian.cwiseAbs().maxCoeff() +
                       kkt_jacobian.cwiseAbs().maxCoeff() *
                           X.cwiseAbs().maxCoeff();
  if (res > 1e-8 * scale) {
    throw SingularKktError("KKT Jacobian is too ill-conditioned");
  }
  return X;
}

}  // namespace mheq::qp
