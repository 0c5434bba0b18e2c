#include <cmath>
#include <vector>

#include "doctest.h"
#include "mheq/qp.hpp"
#include "mheq/rng.hpp"
#include "oracles.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using mheq::GaussianStream;
using mheq::qp::QpProblem;
using mheq::qp::SolveStatus;

namespace {

QpProblem empty_constraints(int n) {
  QpProblem qp;
  qp.H = MatrixXd::Identity(n, n);
  qp.g = VectorXd::Zero(n);
  qp.Aeq.resize(0, n);
  qp.beq.resize(0);
  qp.Ain.resize(0, n);
  qp.bin.resize(0);
  return qp;
}

// min 1/2 p^2 subject to p = 3.
QpProblem pinned_scalar() {
  QpProblem qp = empty_constraints(1);
  qp.Aeq = MatrixXd::Constant(1, 1, 1.0);
  qp.beq = VectorXd::Constant(1, 3.0);
  return qp;
}

}  // namespace

TEST_SUITE("qp") {

TEST_CASE("single equality: projection onto p = 3") {
  const QpProblem qp = pinned_scalar();
  const auto sol = mheq::qp::solve_qp(qp);
  REQUIRE(sol.status == SolveStatus::Solved);
  CHECK(sol.p(0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(sol.lambda(0) == doctest::Approx(-3.0).epsilon(1e-10));
  CHECK(sol.objective == doctest::Approx(4.5).epsilon(1e-10));
}

TEST_CASE("single inequality: projection onto the halfspace p1 <= -1") {
  QpProblem qp = empty_constraints(3);
  qp.Ain = MatrixXd::Zero(1, 3);
  qp.Ain(0, 0) = 1.0;
  qp.bin = VectorXd::Constant(1, -1.0);
  const auto sol = mheq::qp::solve_qp(qp);
  REQUIRE(sol.status == SolveStatus::Solved);
  CHECK(sol.p(0) == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(std::abs(sol.p(1)) <= 1e-8);
  CHECK(std::abs(sol.p(2)) <= 1e-8);
  CHECK(sol.mu(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.active_set == std::vector<int>{0});
}

TEST_CASE("kkt residual certifies exact solutions and flags perturbations") {
  const QpProblem qp = pinned_scalar();
  mheq::qp::PrimalDualSolution sol;
  sol.p = VectorXd::Constant(1, 3.0);
  sol.lambda = VectorXd::Constant(1, -3.0);
  sol.mu.resize(0);
  CHECK(mheq::qp::kkt_residual(qp, sol) <= 1e-12);

  sol.p(0) = 3.0 + 1e-3;
  CHECK(mheq::qp::kkt_residual(qp, sol) >= 5e-4);

  QpProblem zero;
  zero.H = MatrixXd::Zero(1, 1);
  zero.g = VectorXd::Zero(1);
  zero.Aeq.resize(0, 1);
  zero.beq.resize(0);
  zero.Ain.resize(0, 1);
  zero.bin.resize(0);
  mheq::qp::PrimalDualSolution origin;
  origin.p = VectorXd::Zero(1);
  origin.lambda.resize(0);
  origin.mu.resize(0);
  CHECK(mheq::qp::kkt_residual(zero, origin) == 0.0);
}

TEST_CASE("regularity flags detect rank and curvature failures") {
  const QpProblem qp = pinned_scalar();
  const auto sol = mheq::qp::solve_qp(qp);
  const auto flags = mheq::qp::check_regularity(qp, sol);
  CHECK(flags.licq);
  CHECK(flags.sosc);

  // The same constraint twice: gradients are linearly dependent.
  QpProblem dup = qp;
  dup.Aeq = MatrixXd::Constant(2, 1, 1.0);
  dup.beq = VectorXd::Constant(2, 3.0);
  const auto dup_sol = mheq::qp::solve_qp(dup);
  CHECK_FALSE(mheq::qp::check_regularity(dup, dup_sol).licq);

  // Flat objective on a one-dimensional feasible subspace.
  QpProblem flat = empty_constraints(2);
  flat.H = MatrixXd::Zero(2, 2);
  flat.Aeq = MatrixXd::Zero(1, 2);
  flat.Aeq(0, 0) = 1.0;
  flat.beq = VectorXd::Constant(1, 1.0);
  const auto flat_sol = mheq::qp::solve_qp(flat);
  CHECK_FALSE(mheq::qp::check_regularity(flat, flat_sol).sosc);
}

TEST_CASE("infeasible equalities and unbounded descent are reported") {
  QpProblem contradiction = empty_constraints(1);
  contradiction.Aeq = MatrixXd::Constant(2, 1, 1.0);
  contradiction.beq = (VectorXd(2) << 1.0, 2.0).finished();
  CHECK(mheq::qp::solve_qp(contradiction).status == SolveStatus::Infeasible);

  QpProblem slope = empty_constraints(1);
  slope.H = MatrixXd::Zero(1, 1);
  slope.g = VectorXd::Constant(1, -1.0);
  CHECK(mheq::qp::solve_qp(slope).status == SolveStatus::Unbounded);
}

TEST_CASE("validate rejects asymmetric Hessians and bad dimensions") {
  QpProblem qp = empty_constraints(2);
  CHECK_NOTHROW(qp.validate());
  qp.H(0, 1) = 1.0;  // asymmetric
  CHECK_THROWS_AS(qp.validate(), std::invalid_argument);
  qp = empty_constraints(2);
  qp.g.resize(3);
  CHECK_THROWS_AS(qp.validate(), std::invalid_argument);
}

TEST_CASE("kkt sensitivity solves the implicit-function system") {
  const MatrixXd m = (MatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const MatrixXd x_identity =
      mheq::qp::solve_kkt_sensitivity(MatrixXd::Identity(2, 2), m);
  CHECK((x_identity + m).cwiseAbs().maxCoeff() <= 1e-14);

  const MatrixXd diag = (MatrixXd(2, 2) << 2, 0, 0, 4).finished();
  const MatrixXd rhs = MatrixXd::Constant(2, 1, 1.0);
  const MatrixXd x_diag = mheq::qp::solve_kkt_sensitivity(diag, rhs);
  CHECK(x_diag(0, 0) == doctest::Approx(-0.5));
  CHECK(x_diag(1, 0) == doctest::Approx(-0.25));

  CHECK_THROWS_AS(
      mheq::qp::solve_kkt_sensitivity(MatrixXd::Zero(2, 2), rhs),
      mheq::qp::SingularKktError);
}

TEST_CASE("kkt sensitivity matches finite differences on a parametric QP") {
  GaussianStream rng(17);
  const int n = 5;
  const int me = 2;
  const int ntheta = 3;

  QpProblem qp;
  qp.H = oracles::random_psd(rng, n, 1.0);
  VectorXd g0(n);
  for (int i = 0; i < n; ++i) g0(i) = rng.sample();
  MatrixXd g_theta(n, ntheta);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ntheta; ++j) g_theta(i, j) = rng.sample();
  }
  qp.Aeq = MatrixXd(me, n);
  for (int i = 0; i < me; ++i) {
    for (int j = 0; j < n; ++j) qp.Aeq(i, j) = rng.sample();
  }
  qp.beq = (VectorXd(me) << 1.0, -0.5).finished();
  qp.g = g0;
  qp.Ain.resize(0, n);
  qp.bin.resize(0);

  MatrixXd kkt = MatrixXd::Zero(n + me, n + me);
  kkt.topLeftCorner(n, n) = qp.H;
  kkt.topRightCorner(n, me) = qp.Aeq.transpose();
  kkt.bottomLeftCorner(me, n) = qp.Aeq;
  MatrixXd param_jac = MatrixXd::Zero(n + me, ntheta);
  param_jac.topRows(n) = g_theta;

  const MatrixXd x = mheq::qp::solve_kkt_sensitivity(kkt, param_jac);

  const double h = 1e-5;
  auto solve_at = [&](const VectorXd& theta) {
    QpProblem shifted = qp;
    shifted.g = g0 + g_theta * theta;
    const auto sol = mheq::qp::solve_qp(shifted);
    REQUIRE(sol.status == SolveStatus::Solved);
    VectorXd z(n + me);
    z.head(n) = sol.p;
    z.tail(me) = sol.lambda;
    return z;
  };
  for (int j = 0; j < ntheta; ++j) {
    VectorXd theta = VectorXd::Zero(ntheta);
    theta(j) = h;
    const VectorXd plus = solve_at(theta);
    theta(j) = -h;
    const VectorXd minus = solve_at(theta);
    const VectorXd fd = (plus - minus) / (2.0 * h);
    for (int i = 0; i < n + me; ++i) {
      const double rel =
          std::abs(x(i, j) - fd(i)) / std::max(1.0, std::abs(fd(i)));
      CHECK(rel <= 1e-6);
    }
  }

  // The sensitivity satisfies the defining linear system.
  CHECK((kkt * x + param_jac).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("random problems match the active-set enumeration oracle") {
  GaussianStream rng(2024);
  // Objective magnitudes here reach the hundreds, so ask the solver for a
  // residual small enough that the absolute objective bound is meaningful.
  mheq::qp::SolveOptions opts;
  opts.tol = 1e-10;
  opts.max_iterations = 150;
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(20));
    const int me = static_cast<int>(rng.uniform_index(
        static_cast<std::uint64_t>(std::max(1, std::min(n, 4)))));
    const int mi = static_cast<int>(rng.uniform_index(11));
    const QpProblem qp = oracles::random_qp(rng, n, me, mi);

    const auto sol = mheq::qp::solve_qp(qp, opts);
    REQUIRE(sol.status == SolveStatus::Solved);
    CHECK(sol.kkt_residual <= 1e-9);
    if (mi > 0) CHECK(sol.mu.minCoeff() >= -1e-8);

    const auto oracle = oracles::enumerate_qp(qp);
    REQUIRE(oracle.found);
    CHECK(std::abs(sol.objective - oracle.objective) <= 1e-8);
    CHECK((sol.p - oracle.p).cwiseAbs().maxCoeff() <= 1e-6);

    // Duality: complementarity makes the Lagrangian equal the objective.
    double lagrangian = 0.5 * sol.p.dot(qp.H * sol.p) + qp.g.dot(sol.p) +
                        qp.c0;
    if (me > 0) lagrangian += sol.lambda.dot(qp.Aeq * sol.p - qp.beq);
    if (mi > 0) lagrangian += sol.mu.dot(qp.Ain * sol.p - qp.bin);
    CHECK(std::abs(lagrangian - sol.objective) <= 1e-7);
    ++solved;
  }
  CHECK(solved == 60);
}

}  // TEST_SUITE
