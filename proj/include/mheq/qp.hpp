#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace mheq::qp {

// min 1/2 p'Hp + g'p + c0   s.t.  Aeq p = beq,  Ain p <= bin
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double c0 = 0.0;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd Ain;
  Eigen::VectorXd bin;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_eq() const { return static_cast<int>(Aeq.rows()); }
  int num_ineq() const { return static_cast<int>(Ain.rows()); }

  // Checks dimensions and symmetry of H (|H - H'| <= 1e-12 |H|).
  void validate() const;
};

enum class SolveStatus { Solved, Infeasible, Unbounded, MaxIterations };

std::string to_string(SolveStatus s);

struct PrimalDualSolution {
  Eigen::VectorXd p;
  Eigen::VectorXd lambda;  // equality multipliers
  Eigen::VectorXd mu;      // inequality multipliers, >= 0
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::vector<int> active_set;  // indices of active inequalities
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
};

struct SolveOptions {
  double tol = 1e-8;
  double act_tol = 1e-6;  // active if mu_i > act_tol or slack_i < act_tol
  int max_iterations = 60;
};

struct RegularityFlags {
  bool licq = false;
  bool sosc = false;
};

// Raised when a KKT system needed for a sensitivity solve is numerically
// singular; the learning step that asked for it must be aborted.
struct SingularKktError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Direct KKT factorization when there are no inequalities, Mehrotra
// predictor-corrector interior point otherwise.
PrimalDualSolution solve_qp(const QpProblem& problem,
                            const SolveOptions& opts = {});

// Max norm over stationarity, primal feasibility, mu >= 0 violation and
// complementarity |mu_i (Ain p - bin)_i|.
double kkt_residual(const QpProblem& problem, const PrimalDualSolution& sol);

// LICQ: active constraint gradients have full row rank. SOSC: the Hessian,
// reduced to the null space of the active constraint gradients, is positive
// definite. threshold guards both rank and eigenvalue tests.
RegularityFlags check_regularity(const QpProblem& problem,
                                 const PrimalDualSolution& sol,
                                 double threshold = 1e-8);

// Solves kkt_jacobian * X = -param_jacobian. Throws SingularKktError if the
// Jacobian is singular beyond the conditioning threshold.
Eigen::MatrixXd solve_kkt_sensitivity(const Eigen::MatrixXd& kkt_jacobian,
                                      const Eigen::MatrixXd& param_jacobian);

}  // namespace mheq::qp
