#include "mheq/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace mheq::config {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw std::invalid_argument("config: " + where + " must be an object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in " + where);
    }
  }
}

// json's get<> silently converts booleans to numbers; reject them instead.
double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) {
    throw std::invalid_argument("config: " + where + " must be a number");
  }
  return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) {
    throw std::invalid_argument("config: " + where + " must be an integer");
  }
  return j.get<int>();
}

std::uint64_t as_seed(const json& j) {
  if (!j.is_number_integer() ||
      (!j.is_number_unsigned() && j.get<long long>() < 0)) {
    throw std::invalid_argument("config: seed must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) {
    throw std::invalid_argument("config: " + where + " must be a string");
  }
  return j.get<std::string>();
}

std::vector<double> as_list(const json& j, const std::string& where,
                            std::size_t size) {
  if (!j.is_array() || j.size() != size) {
    throw std::invalid_argument("config: " + where + " must be an array of " +
                                std::to_string(size) + " numbers");
  }
  std::vector<double> out;
  out.reserve(size);
  for (const auto& e : j) out.push_back(as_number(e, where + " entry"));
  return out;
}

Eigen::Vector2d as_vec2(const json& j, const std::string& where) {
  const auto v = as_list(j, where, 2);
  return Eigen::Vector2d(v[0], v[1]);
}

Eigen::Vector3d as_vec3(const json& j, const std::string& where) {
  const auto v = as_list(j, where, 3);
  return Eigen::Vector3d(v[0], v[1], v[2]);
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& where, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw std::invalid_argument("config: " + where + " must be a " +
                                std::to_string(n) + "x" + std::to_string(n) +
                                " array of rows");
  }
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r) {
    const auto row = as_list(j[r], where + " row", static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) m(r, c) = row[c];
  }
  return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

void parse_plant(const json& j, plant::PlantParams& p) {
  check_keys(j, "plant", {"m1", "m2", "k", "b", "dt", "sigma_zeta",
                          "sigma_eta", "rk4_substeps"});
  if (j.contains("m1")) p.m1 = as_number(j.at("m1"), "m1");
  if (j.contains("m2")) p.m2 = as_number(j.at("m2"), "m2");
  if (j.contains("k")) p.k = as_number(j.at("k"), "k");
  if (j.contains("b")) p.b = as_number(j.at("b"), "b");
  if (j.contains("dt")) p.dt = as_number(j.at("dt"), "dt");
  if (j.contains("sigma_zeta")) p.sigma_zeta = as_number(j.at("sigma_zeta"), "sigma_zeta");
  if (j.contains("sigma_eta")) p.sigma_eta = as_number(j.at("sigma_eta"), "sigma_eta");
  if (j.contains("rk4_substeps")) {
    p.rk4_substeps = as_int(j.at("rk4_substeps"), "rk4_substeps");
  }
}

void parse_mpc(const json& j, mpc::MpcConfig& c) {
  check_keys(j, "mpc",
             {"horizon", "gamma", "slack_weight", "terminal_slack_weight",
              "state_lb", "state_ub", "u_min", "u_max"});
  if (j.contains("horizon")) c.horizon = as_int(j.at("horizon"), "horizon");
  if (j.contains("gamma")) c.gamma = as_number(j.at("gamma"), "gamma");
  if (j.contains("slack_weight")) {
    c.w = as_vec2(j.at("slack_weight"), "mpc.slack_weight");
  }
  if (j.contains("terminal_slack_weight")) {
    c.w_f = as_vec2(j.at("terminal_slack_weight"), "mpc.terminal_slack_weight");
  }
  if (j.contains("state_lb")) {
    c.state_lb = as_vec2(j.at("state_lb"), "mpc.state_lb");
  }
  if (j.contains("state_ub")) {
    c.state_ub = as_vec2(j.at("state_ub"), "mpc.state_ub");
  }
  if (j.contains("u_min")) c.u_min = as_number(j.at("u_min"), "u_min");
  if (j.contains("u_max")) c.u_max = as_number(j.at("u_max"), "u_max");
}

void parse_theta(const json& j, params::ParameterVector& t) {
  check_keys(j, "theta0",
             {"q_e", "r_e", "A_r", "f1", "f2", "theta_c", "M_f", "theta_r",
              "M", "A_bias", "B_bias", "theta_lo", "theta_hi"});
  if (j.contains("q_e")) t.q_e = as_number(j.at("q_e"), "q_e");
  if (j.contains("r_e")) t.r_e = as_number(j.at("r_e"), "r_e");
  if (j.contains("A_r")) t.A_r = as_matrix(j.at("A_r"), "theta0.A_r", 2);
  if (j.contains("f1")) t.f1 = as_vec2(j.at("f1"), "theta0.f1");
  if (j.contains("f2")) t.f2 = as_number(j.at("f2"), "f2");
  if (j.contains("theta_c")) t.theta_c = as_number(j.at("theta_c"), "theta_c");
  if (j.contains("M_f")) t.M_f = as_matrix(j.at("M_f"), "theta0.M_f", 2);
  if (j.contains("theta_r")) {
    t.theta_r = as_vec3(j.at("theta_r"), "theta0.theta_r");
  }
  if (j.contains("M")) t.M = as_matrix(j.at("M"), "theta0.M", 3);
  if (j.contains("A_bias")) {
    t.A_bias = as_matrix(j.at("A_bias"), "theta0.A_bias", 2);
  }
  if (j.contains("B_bias")) {
    t.B_bias = as_vec2(j.at("B_bias"), "theta0.B_bias");
  }
  if (j.contains("theta_lo")) {
    t.theta_lo = as_vec2(j.at("theta_lo"), "theta0.theta_lo");
  }
  if (j.contains("theta_hi")) {
    t.theta_hi = as_vec2(j.at("theta_hi"), "theta0.theta_hi");
  }
}

void parse_step_sizes(const json& j, params::StepSizes& a) {
  check_keys(j, "step_sizes",
             {"qe", "re", "ar", "f1", "f2", "theta_c", "mf", "theta_r", "m",
              "a_bias", "b_bias", "theta_bounds"});
  for (int g = 0; g < params::kNumGroups; ++g) {
    const std::string name =
        params::to_string(static_cast<params::ParamGroup>(g));
    if (j.contains(name)) a[g] = as_number(j.at(name), name);
  }
}

void parse_baseline(const json& j, rl::BaselineCost& b) {
  check_keys(j, "baseline", {"q", "r", "w", "state_lb", "state_ub"});
  if (j.contains("q")) b.q = as_vec2(j.at("q"), "baseline.q");
  if (j.contains("r")) b.r = as_number(j.at("r"), "r");
  if (j.contains("w")) b.w = as_vec2(j.at("w"), "baseline.w");
  if (j.contains("state_lb")) {
    b.state_lb = as_vec2(j.at("state_lb"), "baseline.state_lb");
  }
  if (j.contains("state_ub")) {
    b.state_ub = as_vec2(j.at("state_ub"), "baseline.state_ub");
  }
}

void parse_solver(const json& j, qp::SolveOptions& s) {
  check_keys(j, "solver", {"tol", "act_tol", "max_iterations"});
  if (j.contains("tol")) s.tol = as_number(j.at("tol"), "tol");
  if (j.contains("act_tol")) s.act_tol = as_number(j.at("act_tol"), "act_tol");
  if (j.contains("max_iterations")) {
    s.max_iterations = as_int(j.at("max_iterations"), "max_iterations");
  }
}

}  // namespace

experiment::ExperimentConfig from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") +
                                e.what());
  }
  check_keys(j, "configuration root",
             {"plant", "x0", "mhe", "mpc", "theta0", "step_sizes",
              "sigma_explore", "scenario", "schedule", "steps", "seed",
              "baseline", "j_window", "solver", "gradient_reject"});

  experiment::ExperimentConfig cfg;
  if (j.contains("plant")) parse_plant(j.at("plant"), cfg.plant);
  if (j.contains("x0")) {
    const auto v = as_list(j.at("x0"), "x0", 4);
    cfg.x0 = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
  }
  if (j.contains("mhe")) {
    check_keys(j.at("mhe"), "mhe", {"horizon"});
    if (j.at("mhe").contains("horizon")) {
      cfg.mhe.horizon = as_int(j.at("mhe").at("horizon"), "mhe.horizon");
    }
  }
  if (j.contains("mpc")) parse_mpc(j.at("mpc"), cfg.mpc);
  if (j.contains("theta0")) parse_theta(j.at("theta0"), cfg.theta0);
  if (j.contains("step_sizes")) {
    parse_step_sizes(j.at("step_sizes"), cfg.step_sizes);
  }
  if (j.contains("sigma_explore")) {
    cfg.sigma_explore = as_number(j.at("sigma_explore"), "sigma_explore");
  }
  if (j.contains("scenario")) {
    cfg.scenario =
        experiment::scenario_from_string(as_string(j.at("scenario"), "scenario"));
  }
  if (j.contains("schedule")) {
    check_keys(j.at("schedule"), "schedule", {"mpc_start", "mhe_start"});
    if (j.at("schedule").contains("mpc_start")) {
      cfg.schedule.mpc_start = as_int(j.at("schedule").at("mpc_start"), "schedule.mpc_start");
    }
    if (j.at("schedule").contains("mhe_start")) {
      cfg.schedule.mhe_start = as_int(j.at("schedule").at("mhe_start"), "schedule.mhe_start");
    }
  }
  if (j.contains("steps")) cfg.steps = as_int(j.at("steps"), "steps");
  if (j.contains("seed")) cfg.seed = as_seed(j.at("seed"));
  if (j.contains("baseline")) parse_baseline(j.at("baseline"), cfg.baseline);
  if (j.contains("j_window")) cfg.j_window = as_int(j.at("j_window"), "j_window");
  if (j.contains("solver")) parse_solver(j.at("solver"), cfg.solver);
  if (j.contains("gradient_reject")) {
    cfg.gradient_reject = as_number(j.at("gradient_reject"), "gradient_reject");
  }
  cfg.validate();
  return cfg;
}

experiment::ExperimentConfig load(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::invalid_argument("config: cannot open " + path);
  }
  std::stringstream buf;
  buf << f.rdbuf();
  return from_json_text(buf.str());
}

std::string to_json_text(const experiment::ExperimentConfig& cfg) {
  json j;
  j["plant"] = {{"m1", cfg.plant.m1},
                {"m2", cfg.plant.m2},
                {"k", cfg.plant.k},
                {"b", cfg.plant.b},
                {"dt", cfg.plant.dt},
                {"sigma_zeta", cfg.plant.sigma_zeta},
                {"sigma_eta", cfg.plant.sigma_eta},
                {"rk4_substeps", cfg.plant.rk4_substeps}};
  j["x0"] = vec_to_json(cfg.x0);
  j["mhe"] = {{"horizon", cfg.mhe.horizon}};
  j["mpc"] = {{"horizon", cfg.mpc.horizon},
              {"gamma", cfg.mpc.gamma},
              {"slack_weight", vec_to_json(cfg.mpc.w)},
              {"terminal_slack_weight", vec_to_json(cfg.mpc.w_f)},
              {"state_lb", vec_to_json(cfg.mpc.state_lb)},
              {"state_ub", vec_to_json(cfg.mpc.state_ub)},
              {"u_min", cfg.mpc.u_min},
              {"u_max", cfg.mpc.u_max}};
  j["theta0"] = {{"q_e", cfg.theta0.q_e},
                 {"r_e", cfg.theta0.r_e},
                 {"A_r", mat_to_json(cfg.theta0.A_r)},
                 {"f1", vec_to_json(cfg.theta0.f1)},
                 {"f2", cfg.theta0.f2},
                 {"theta_c", cfg.theta0.theta_c},
                 {"M_f", mat_to_json(cfg.theta0.M_f)},
                 {"theta_r", vec_to_json(cfg.theta0.theta_r)},
                 {"M", mat_to_json(cfg.theta0.M)},
                 {"A_bias", mat_to_json(cfg.theta0.A_bias)},
                 {"B_bias", vec_to_json(cfg.theta0.B_bias)},
                 {"theta_lo", vec_to_json(cfg.theta0.theta_lo)},
                 {"theta_hi", vec_to_json(cfg.theta0.theta_hi)}};
  json steps = json::object();
  for (int g = 0; g < params::kNumGroups; ++g) {
    steps[params::to_string(static_cast<params::ParamGroup>(g))] =
        cfg.step_sizes[g];
  }
  j["step_sizes"] = steps;
  j["sigma_explore"] = cfg.sigma_explore;
  j["scenario"] = experiment::to_string(cfg.scenario);
  j["schedule"] = {{"mpc_start", cfg.schedule.mpc_start},
                   {"mhe_start", cfg.schedule.mhe_start}};
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  j["baseline"] = {{"q", vec_to_json(cfg.baseline.q)},
                   {"r", cfg.baseline.r},
                   {"w", vec_to_json(cfg.baseline.w)},
                   {"state_lb", vec_to_json(cfg.baseline.state_lb)},
                   {"state_ub", vec_to_json(cfg.baseline.state_ub)}};
  j["j_window"] = cfg.j_window;
  j["solver"] = {{"tol", cfg.solver.tol},
                 {"act_tol", cfg.solver.act_tol},
                 {"max_iterations", cfg.solver.max_iterations}};
  j["gradient_reject"] = cfg.gradient_reject;
  return j.dump(2) + "\n";
}

}  // namespace mheq::config
