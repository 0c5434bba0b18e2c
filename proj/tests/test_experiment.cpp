#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mheq/config.hpp"
#include "mheq/experiment.hpp"
#include "mheq/parameters.hpp"

using Eigen::Vector4d;
using Eigen::VectorXd;
namespace ex = mheq::experiment;

namespace {

ex::ExperimentConfig short_config(ex::Scenario scenario, int steps,
                                  int mpc_start, int mhe_start) {
  ex::ExperimentConfig cfg;
  cfg.scenario = scenario;
  cfg.steps = steps;
  cfg.schedule.mpc_start = mpc_start;
  cfg.schedule.mhe_start = mhe_start;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

bool estimator_indices_frozen(const VectorXd& a, const VectorXd& b) {
  for (int i = 0; i <= 7; ++i) {
    if (a(i) != b(i)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("identical config and seed reproduce the episode exactly") {
  const auto cfg = short_config(ex::Scenario::MpcAndMhe, 160, 20, 60);
  const auto first = ex::run_episode(cfg);
  const auto second = ex::run_episode(cfg);
  REQUIRE(first.records.size() == second.records.size());
  REQUIRE(static_cast<int>(first.records.size()) == cfg.steps);
  for (std::size_t k = 0; k < first.records.size(); ++k) {
    const auto& a = first.records[k];
    const auto& b = second.records[k];
    CHECK(a.x_true == b.x_true);
    CHECK(a.u == b.u);
    CHECK(a.y == b.y);
    CHECK(a.theta == b.theta);
    CHECK(a.td_error == b.td_error);
  }
  CHECK(first.theta_final == second.theta_final);
  CHECK(first.updates_applied == second.updates_applied);
  CHECK(first.gradient_rejections == second.gradient_rejections);
}

TEST_CASE("no-learning scenario never moves a parameter") {
  const auto cfg = short_config(ex::Scenario::NoLearning, 120, 20, 40);
  const auto result = ex::run_episode(cfg);
  const VectorXd flat0 = mheq::params::flatten(cfg.theta0);
  for (const auto& r : result.records) {
    CHECK(r.theta == flat0);
  }
  CHECK(result.theta_final == flat0);
  CHECK(result.updates_applied == 0);
}

TEST_CASE("controller-only scenario respects the schedule and the mask") {
  const auto cfg = short_config(ex::Scenario::MpcOnly, 250, 30, 120);
  const auto result = ex::run_episode(cfg);
  const VectorXd flat0 = mheq::params::flatten(cfg.theta0);

  bool controller_moved = false;
  for (const auto& r : result.records) {
    // Estimator entries (q_e, r_e, A_r, f1, f2) stay at their initial
    // values for the entire run in this scenario.
    CHECK(estimator_indices_frozen(r.theta, flat0));
    if (r.k <= cfg.schedule.mpc_start) {
      CHECK(r.theta == flat0);
    } else if ((r.theta - flat0).cwiseAbs().maxCoeff() > 0.0) {
      controller_moved = true;
    }
  }
  CHECK(controller_moved);
  CHECK(result.updates_applied > 0);
}

TEST_CASE("joint scenario releases estimator parameters at their start step") {
  const auto cfg = short_config(ex::Scenario::MpcAndMhe, 120, 20, 40);
  const auto result = ex::run_episode(cfg);
  const VectorXd flat0 = mheq::params::flatten(cfg.theta0);

  bool estimator_moved = false;
  for (const auto& r : result.records) {
    if (r.k <= cfg.schedule.mhe_start) {
      CHECK(estimator_indices_frozen(r.theta, flat0));
    } else if (!estimator_indices_frozen(r.theta, flat0)) {
      estimator_moved = true;
    }
  }
  CHECK(estimator_moved);
}

TEST_CASE("scenarios on one seed share the trajectory until learning starts") {
  const int mpc_start = 30;
  const auto none = ex::run_episode(
      short_config(ex::Scenario::NoLearning, 90, mpc_start, 60));
  const auto ctrl = ex::run_episode(
      short_config(ex::Scenario::MpcOnly, 90, mpc_start, 60));
  const auto joint = ex::run_episode(
      short_config(ex::Scenario::MpcAndMhe, 90, mpc_start, 60));
  for (int k = 0; k <= mpc_start; ++k) {
    CHECK(none.records[k].x_true == ctrl.records[k].x_true);
    CHECK(none.records[k].x_true == joint.records[k].x_true);
    CHECK(none.records[k].u == ctrl.records[k].u);
    CHECK(none.records[k].u == joint.records[k].u);
  }
}

TEST_CASE("true-state violation measures the mass-1 coordinates") {
  const mheq::rl::BaselineCost cost;
  CHECK(ex::true_state_violation(cost, Vector4d::Zero()) == 0.0);
  CHECK(ex::true_state_violation(cost, Vector4d(5.0, -3.0, 2.0, 99.0)) == 0.0);
  // Position one below the box, velocity ten above: 1 + 10.
  CHECK(ex::true_state_violation(cost, Vector4d(-1.0, 5.0, 20.0, 0.0)) ==
        doctest::Approx(11.0));
}

TEST_CASE("windowed return matches a direct discounted sum of the trace") {
  const auto cfg = short_config(ex::Scenario::MpcAndMhe, 140, 20, 50);
  const auto result = ex::run_episode(cfg);
  const double gamma = cfg.mpc.gamma;
  for (std::size_t k = 0; k < result.records.size(); ++k) {
    double expect = 0.0;
    const int lo = std::max(0, static_cast<int>(k) - (cfg.j_window - 1));
    for (int i = lo; i <= static_cast<int>(k); ++i) {
      expect += std::pow(gamma, static_cast<int>(k) - i) *
                result.records[static_cast<std::size_t>(i)].stage_cost;
    }
    CHECK(result.records[k].j_cost ==
          doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("scenario sweep aggregates per-run statistics faithfully") {
  auto base = short_config(ex::Scenario::MpcAndMhe, 120, 20, 50);
  base.seed = 7;
  const auto cmp = ex::run_scenarios(base, 2);
  REQUIRE(cmp.num_seeds == 2);
  REQUIRE(cmp.runs.size() == 6);

  const ex::Scenario order[3] = {ex::Scenario::NoLearning,
                                 ex::Scenario::MpcOnly,
                                 ex::Scenario::MpcAndMhe};
  for (int s = 0; s < 3; ++s) {
    double tail_sum = 0.0;
    double viol_sum = 0.0;
    for (int j = 0; j < 2; ++j) {
      const auto& stats = cmp.runs[static_cast<std::size_t>(2 * s + j)];
      CHECK(stats.scenario == order[s]);
      CHECK(stats.seed == base.seed + static_cast<std::uint64_t>(j));

      auto cfg = base;
      cfg.scenario = order[s];
      cfg.seed = stats.seed;
      const auto episode = ex::run_episode(cfg);
      const int n = static_cast<int>(episode.records.size());
      const int tail_start = n - n / 4;
      double mean = 0.0;
      double tail = 0.0;
      double viol = 0.0;
      for (int k = 0; k < n; ++k) {
        const auto& r = episode.records[static_cast<std::size_t>(k)];
        mean += r.stage_cost;
        if (k >= tail_start) tail += r.stage_cost;
        viol += ex::true_state_violation(base.baseline, r.x_true);
      }
      mean /= n;
      tail /= n - tail_start;
      CHECK(stats.mean_cost == doctest::Approx(mean).epsilon(1e-12));
      CHECK(stats.tail_mean_cost == doctest::Approx(tail).epsilon(1e-12));
      CHECK(stats.cumulative_violation ==
            doctest::Approx(viol).epsilon(1e-12));
      tail_sum += stats.tail_mean_cost;
      viol_sum += stats.cumulative_violation;
    }
    CHECK(cmp.mean_tail_cost[static_cast<std::size_t>(s)] ==
          doctest::Approx(tail_sum / 2).epsilon(1e-12));
    CHECK(cmp.mean_violation[static_cast<std::size_t>(s)] ==
          doctest::Approx(viol_sum / 2).epsilon(1e-12));
  }
}

TEST_CASE("gradient audit stays within tolerance on a short run") {
  auto cfg = short_config(ex::Scenario::MpcAndMhe, 200, 30, 100);
  const auto direct =
      ex::gradient_audit(cfg, 3, ex::AuditMode::ControllerOnly, 1e-5);
  CHECK(direct.checkpoints == 3);
  CHECK_FALSE(direct.rows.empty());
  CHECK(direct.max_rel_error <= 1e-4);

  const auto chained = ex::gradient_audit(cfg, 3, ex::AuditMode::Full, 1e-5);
  CHECK(chained.max_rel_error <= 1e-3);
  double top = 0.0;
  for (const auto& row : chained.rows) {
    top = std::max(top, row.rel_error);
    CHECK(row.abs_error ==
          doctest::Approx(std::abs(row.analytic - row.finite_difference)));
  }
  CHECK(top == doctest::Approx(chained.max_rel_error));
}

TEST_CASE("configuration serializes and parses losslessly") {
  ex::ExperimentConfig cfg;
  cfg.steps = 321;
  cfg.seed = 99;
  cfg.scenario = ex::Scenario::MpcOnly;
  cfg.sigma_explore = 0.05;
  cfg.theta0.f1 = Eigen::Vector2d(0.01, -0.02);
  const std::string text = mheq::config::to_json_text(cfg);
  const auto parsed = mheq::config::from_json_text(text);
  CHECK(mheq::config::to_json_text(parsed) == text);
  CHECK(parsed.steps == 321);
  CHECK(parsed.seed == 99);
  CHECK(parsed.scenario == ex::Scenario::MpcOnly);
  CHECK(mheq::params::flatten(parsed.theta0) ==
        mheq::params::flatten(cfg.theta0));

  CHECK_THROWS_AS(mheq::config::from_json_text("{\"bogus\": 1}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(mheq::config::from_json_text("{\"steps\": true}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(mheq::config::from_json_text("not json"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ex::scenario_from_string("everything"),
                  std::invalid_argument);

  ex::ExperimentConfig bad = cfg;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.sigma_explore = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.j_window = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.schedule.mpc_start = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("trace files are byte-identical across repeated writes") {
  const auto cfg = short_config(ex::Scenario::MpcAndMhe, 60, 15, 30);
  const auto result = ex::run_episode(cfg);
  const std::string path_a = "trace_check_a.csv";
  const std::string path_b = "trace_check_b.csv";
  ex::write_trace_csv(path_a, result);
  ex::write_trace_csv(path_b, result);
  const std::string a = read_file(path_a);
  const std::string b = read_file(path_b);
  CHECK(a == b);
  CHECK_FALSE(a.empty());

  std::istringstream lines(a);
  std::string header;
  REQUIRE(std::getline(lines, header));
  CHECK(header.rfind("k,x1,x2,x3,x4,y,xhat1,xhat2,u,L,delta,V,Q,J", 0) == 0);
  int columns = 1;
  for (const char c : header) {
    if (c == ',') ++columns;
  }
  CHECK(columns == 14 + mheq::params::kNumParams);
  int rows = 0;
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == cfg.steps);
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

}  // TEST_SUITE
