#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mheq/mhe.hpp"
#include "mheq/mpc.hpp"
#include "mheq/plant.hpp"
#include "mheq/rl.hpp"

namespace mheq::experiment {

enum class Scenario { NoLearning, MpcOnly, MpcAndMhe };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

// Staged activation: controller parameters start learning at mpc_start and
// estimator parameters join at mhe_start (when the scenario tunes them);
// learning then runs to the end of the episode.
struct Schedule {
  int mpc_start = 100;
  int mhe_start = 600;

  void validate() const;
};

struct ExperimentConfig {
  plant::PlantParams plant;
  Eigen::Vector4d x0 = Eigen::Vector4d(1.0, 1.0, 0.0, 0.0);
  mhe::MheConfig mhe;
  mpc::MpcConfig mpc;
  params::ParameterVector theta0;
  params::StepSizes step_sizes = params::default_step_sizes();
  double sigma_explore = 0.1;
  Scenario scenario = Scenario::MpcAndMhe;
  Schedule schedule;
  int steps = 1200;
  std::uint64_t seed = 1;
  rl::BaselineCost baseline;
  int j_window = 50;
  qp::SolveOptions solver;
  // Updates whose elementwise step |delta * grad| exceeds this are dropped.
  double gradient_reject = 1e3;

  void validate() const;
};

struct StepRecord {
  int k = 0;
  Eigen::Vector4d x_true = Eigen::Vector4d::Zero();
  double y = 0.0;
  Eigen::Vector2d x_hat = Eigen::Vector2d::Zero();
  double u = 0.0;
  double stage_cost = 0.0;
  // Temporal-difference error of the transition leaving this step; it needs
  // the next step's value, so it is filled in one step later (the final
  // record keeps zero).
  double td_error = 0.0;
  double value = 0.0;
  double q_value = 0.0;
  // Discounted stage cost over the trailing window of steps.
  double j_cost = 0.0;
  // Flat parameter snapshot at the end of this step's processing.
  Eigen::VectorXd theta;
};

struct EpisodeResult {
  std::vector<StepRecord> records;
  Eigen::VectorXd theta_final;
  int updates_applied = 0;
  int regularity_skips = 0;
  int gradient_rejections = 0;
};

// Called once per step with the finalized record (after its td_error is
// known), in step order.
using StepObserver = std::function<void(const StepRecord&)>;

// Runs one closed-loop episode: estimate, control with exploration, score,
// and (per scenario and schedule) apply temporal-difference updates with
// exact parametric gradients. Noise and exploration draw from three streams
// derived from the seed, so runs with equal seeds see matched noise.
EpisodeResult run_episode(const ExperimentConfig& cfg,
                          const StepObserver& observer = {});

struct ScenarioStats {
  Scenario scenario = Scenario::NoLearning;
  std::uint64_t seed = 0;
  double mean_cost = 0.0;             // stage cost, whole episode
  double tail_mean_cost = 0.0;        // stage cost, final quarter
  double cumulative_violation = 0.0;  // summed true-state box violation
};

struct CompareResult {
  std::vector<ScenarioStats> runs;  // scenario-major, then seed
  // Means over seeds, indexed by static_cast<int>(Scenario).
  std::array<double, 3> mean_tail_cost{};
  std::array<double, 3> mean_violation{};
  int num_seeds = 0;
};

// Runs all three scenarios on matched seeds (base seed, base seed + 1, ...).
CompareResult run_scenarios(const ExperimentConfig& base, int num_seeds);

// Box violation of the true plant state against the task bounds, measured on
// the model coordinates (position and velocity of mass 1).
double true_state_violation(const rl::BaselineCost& cost,
                            const Eigen::Vector4d& x_true);

enum class AuditMode {
  Full,          // finite differences through estimator and controller
  ControllerOnly // estimate held fixed; direct parameter derivative only
};

struct AuditRow {
  int k = 0;
  int index = 0;
  std::string name;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
};

struct AuditResult {
  std::vector<AuditRow> rows;
  double max_rel_error = 0.0;
  int checkpoints = 0;
};

// Replays an episode, samples (seeded by the config) checkpoints among the
// steps where a gradient was computed, and compares every analytic component
// against a central finite difference of the re-solved pipeline.
AuditResult gradient_audit(const ExperimentConfig& cfg, int checkpoints = 20,
                           AuditMode mode = AuditMode::Full,
                           double fd_step = 1e-5);

// All writers print floating-point values with nine significant digits.
void write_trace_csv(const std::string& path, const EpisodeResult& result);
void write_compare_report(const std::string& txt_path,
                          const std::string& csv_path,
                          const CompareResult& result);
void write_audit_report(const std::string& path, const AuditResult& result);

}  // namespace mheq::experiment
