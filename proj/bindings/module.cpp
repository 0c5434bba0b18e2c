// Python bindings: thin wrappers that accept the JSON experiment
// configuration and numpy arrays, and return plain dict/array results.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "mheq/config.hpp"
#include "mheq/experiment.hpp"
#include "mheq/mhe.hpp"
#include "mheq/model.hpp"
#include "mheq/mpc.hpp"
#include "mheq/parameters.hpp"
#include "mheq/qp.hpp"
#include "mheq/rl.hpp"

namespace py = pybind11;
namespace ex = mheq::experiment;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

ex::ExperimentConfig parse_config(const std::string& config_json) {
  return mheq::config::from_json_text(config_json);
}

mheq::model::ControlModel model_from(const ex::ExperimentConfig& cfg) {
  const auto t = mheq::model::make_template(cfg.plant.dt,
                                            cfg.plant.m1 + cfg.plant.m2);
  return mheq::model::apply_bias(t, cfg.theta0.A_bias, cfg.theta0.B_bias);
}

py::dict episode_to_dict(const ex::EpisodeResult& result) {
  const int n = static_cast<int>(result.records.size());
  VectorXi k(n);
  MatrixXd x_true(n, 4);
  VectorXd y(n);
  MatrixXd x_hat(n, 2);
  VectorXd u(n), stage_cost(n), td(n), value(n), q_value(n), j_cost(n);
  MatrixXd theta(n, mheq::params::kNumParams);
  for (int i = 0; i < n; ++i) {
    const auto& r = result.records[static_cast<std::size_t>(i)];
    k(i) = r.k;
    x_true.row(i) = r.x_true.transpose();
    y(i) = r.y;
    x_hat.row(i) = r.x_hat.transpose();
    u(i) = r.u;
    stage_cost(i) = r.stage_cost;
    td(i) = r.td_error;
    value(i) = r.value;
    q_value(i) = r.q_value;
    j_cost(i) = r.j_cost;
    theta.row(i) = r.theta.transpose();
  }
  py::dict out;
  out["k"] = k;
  out["x_true"] = x_true;
  out["y"] = y;
  out["x_hat"] = x_hat;
  out["u"] = u;
  out["stage_cost"] = stage_cost;
  out["td_error"] = td;
  out["value"] = value;
  out["q_value"] = q_value;
  out["j_cost"] = j_cost;
  out["theta"] = theta;
  out["theta_final"] = result.theta_final;
  out["updates_applied"] = result.updates_applied;
  out["regularity_skips"] = result.regularity_skips;
  out["gradient_rejections"] = result.gradient_rejections;
  return out;
}

py::dict run_episode_py(const std::string& config_json) {
  return episode_to_dict(ex::run_episode(parse_config(config_json)));
}

py::dict run_scenarios_py(const std::string& config_json, int num_seeds) {
  const auto cmp = ex::run_scenarios(parse_config(config_json), num_seeds);
  py::list runs;
  for (const auto& s : cmp.runs) {
    py::dict row;
    row["scenario"] = ex::to_string(s.scenario);
    row["seed"] = s.seed;
    row["mean_cost"] = s.mean_cost;
    row["tail_mean_cost"] = s.tail_mean_cost;
    row["cumulative_violation"] = s.cumulative_violation;
    runs.append(row);
  }
  py::dict out;
  out["runs"] = runs;
  py::dict tail, violation;
  for (int i = 0; i < 3; ++i) {
    const auto name = ex::to_string(static_cast<ex::Scenario>(i));
    tail[py::str(name)] = cmp.mean_tail_cost[static_cast<std::size_t>(i)];
    violation[py::str(name)] =
        cmp.mean_violation[static_cast<std::size_t>(i)];
  }
  out["mean_tail_cost"] = tail;
  out["mean_violation"] = violation;
  out["num_seeds"] = cmp.num_seeds;
  return out;
}

py::dict gradient_audit_py(const std::string& config_json, int checkpoints,
                           const std::string& mode, double fd_step) {
  ex::AuditMode audit_mode;
  if (mode == "full") {
    audit_mode = ex::AuditMode::Full;
  } else if (mode == "controller_only") {
    audit_mode = ex::AuditMode::ControllerOnly;
  } else {
    throw std::invalid_argument(
        "audit mode must be 'full' or 'controller_only', got '" + mode + "'");
  }
  const auto audit = ex::gradient_audit(parse_config(config_json),
                                        checkpoints, audit_mode, fd_step);
  py::list rows;
  for (const auto& r : audit.rows) {
    py::dict row;
    row["k"] = r.k;
    row["index"] = r.index;
    row["name"] = r.name;
    row["analytic"] = r.analytic;
    row["finite_difference"] = r.finite_difference;
    row["abs_error"] = r.abs_error;
    row["rel_error"] = r.rel_error;
    rows.append(row);
  }
  py::dict out;
  out["rows"] = rows;
  out["max_rel_error"] = audit.max_rel_error;
  out["checkpoints"] = audit.checkpoints;
  return out;
}

py::dict solve_qp_py(const MatrixXd& H, const VectorXd& g,
                     const MatrixXd& Aeq, const VectorXd& beq,
                     const MatrixXd& Ain, const VectorXd& bin) {
  mheq::qp::QpProblem problem;
  problem.H = H;
  problem.g = g;
  problem.Aeq = Aeq;
  problem.beq = beq;
  problem.Ain = Ain;
  problem.bin = bin;
  problem.validate();
  const auto sol = mheq::qp::solve_qp(problem);
  py::dict out;
  out["status"] = mheq::qp::to_string(sol.status);
  out["p"] = sol.p;
  out["objective"] = sol.objective;
  out["lambda"] = sol.lambda;
  out["mu"] = sol.mu;
  out["kkt_residual"] = sol.kkt_residual;
  out["iterations"] = sol.iterations;
  out["active_set"] = sol.active_set;
  return out;
}

double mpc_value_py(const std::string& config_json, const Vector2d& x0) {
  const auto cfg = parse_config(config_json);
  return mheq::mpc::value(cfg.mpc, model_from(cfg), cfg.theta0, x0,
                          cfg.solver);
}

double mpc_policy_py(const std::string& config_json, const Vector2d& x0) {
  const auto cfg = parse_config(config_json);
  return mheq::mpc::policy(cfg.mpc, model_from(cfg), cfg.theta0, x0,
                           cfg.solver);
}

double mpc_action_value_py(const std::string& config_json,
                           const Vector2d& x0, double action) {
  const auto cfg = parse_config(config_json);
  return mheq::mpc::action_value(cfg.mpc, model_from(cfg), cfg.theta0, x0,
                                 action, cfg.solver);
}

py::dict estimate_py(const std::string& config_json, const VectorXd& y,
                     const VectorXd& u, const Vector2d& prior) {
  const auto cfg = parse_config(config_json);
  const int h = cfg.mhe.horizon;
  if (y.size() != h + 1 || u.size() != h) {
    throw std::invalid_argument(
        "estimate: need horizon+1 measurements and horizon inputs");
  }
  mheq::mhe::MeasurementWindow window(h);
  for (int i = 0; i < h; ++i) {
    window.add_measurement(y(i));
    window.add_input(u(i));
  }
  window.add_measurement(y(h));
  const auto sol = mheq::mhe::estimate(cfg.mhe, model_from(cfg), cfg.theta0,
                                       window, prior, cfg.solver);
  py::dict out;
  out["x"] = sol.x;
  out["u"] = sol.u;
  out["x_hat"] = sol.x_hat;
  out["objective"] = sol.point.objective;
  return out;
}

double baseline_cost_py(const Vector2d& x, double u, const Vector2d& q,
                        double r) {
  mheq::rl::BaselineCost cost;
  cost.q = q;
  cost.r = r;
  return mheq::rl::baseline_cost(cost, x, u);
}

}  // namespace

PYBIND11_MODULE(_mheq, m) {
  m.doc() =
      "Joint estimator/controller tuning testbed: moving-horizon estimation "
      "and model predictive control as value-function approximators with "
      "exact parametric sensitivities and temporal-difference updates.";

  m.def("default_config_json",
        [] { return mheq::config::to_json_text(ex::ExperimentConfig{}); },
        "Default experiment configuration as a JSON string.");
  m.def("component_names",
        [] { return mheq::params::component_names(); },
        "Names of the flat parameter components, in layout order.");
  m.def("run_episode", &run_episode_py, py::arg("config_json"),
        "Run one closed-loop learning episode; returns per-step arrays.");
  m.def("run_scenarios", &run_scenarios_py, py::arg("config_json"),
        py::arg("num_seeds"),
        "Run the three-scenario comparison on matched seeds.");
  m.def("gradient_audit", &gradient_audit_py, py::arg("config_json"),
        py::arg("checkpoints") = 20, py::arg("mode") = "full",
        py::arg("fd_step") = 1e-5,
        "Compare analytic parameter gradients against finite differences.");
  m.def("solve_qp", &solve_qp_py, py::arg("H"), py::arg("g"), py::arg("Aeq"),
        py::arg("beq"), py::arg("Ain"), py::arg("bin"),
        "Solve min 1/2 p'Hp + g'p s.t. Aeq p = beq, Ain p <= bin.");
  m.def("mpc_value", &mpc_value_py, py::arg("config_json"), py::arg("x0"),
        "Optimal controller objective from a state estimate.");
  m.def("mpc_policy", &mpc_policy_py, py::arg("config_json"), py::arg("x0"),
        "First input of the optimal control sequence.");
  m.def("mpc_action_value", &mpc_action_value_py, py::arg("config_json"),
        py::arg("x0"), py::arg("action"),
        "Controller objective with the first input pinned.");
  m.def("estimate", &estimate_py, py::arg("config_json"), py::arg("y"),
        py::arg("u"), py::arg("prior"),
        "Moving-horizon estimate from a full measurement/input window.");
  m.def("baseline_cost", &baseline_cost_py, py::arg("x"), py::arg("u"),
        py::arg("q") = Vector2d::Ones(), py::arg("r") = 1e-2,
        "Quadratic stage cost plus one-sided box penalty.");
  m.def("td_error", &mheq::rl::td_error, py::arg("stage_cost"),
        py::arg("next_value"), py::arg("action_value"), py::arg("gamma"),
        "Temporal-difference error L + gamma*V - Q.");
  m.def("project_psd", &mheq::rl::project_psd, py::arg("m"),
        "Nearest positive-semidefinite matrix in the Frobenius norm.");
}
