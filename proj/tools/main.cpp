#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mheq/config.hpp"
#include "mheq/experiment.hpp"

namespace fs = std::filesystem;

namespace {

using namespace mheq;

experiment::ExperimentConfig resolve_config(
    const std::string& config_path, const std::string& scenario,
    const std::optional<std::uint64_t>& seed, const std::optional<int>& steps) {
  experiment::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = config::load(config_path);
  if (!scenario.empty()) {
    cfg.scenario = experiment::scenario_from_string(scenario);
  }
  if (seed) cfg.seed = *seed;
  if (steps) cfg.steps = *steps;
  cfg.validate();
  return cfg;
}

int cmd_run(const experiment::ExperimentConfig& cfg, const fs::path& out_dir,
            bool quiet) {
  const experiment::EpisodeResult result = experiment::run_episode(cfg);
  const fs::path trace = out_dir / "trace.csv";
  experiment::write_trace_csv(trace.string(), result);
  if (!quiet) {
    const int n = static_cast<int>(result.records.size());
    const int tail_start = n - n / 4;
    double tail = 0.0;
    for (int i = tail_start; i < n; ++i) {
      tail += result.records[i].stage_cost;
    }
    tail /= std::max(1, n - tail_start);
    std::cout << "scenario " << experiment::to_string(cfg.scenario)
              << ", seed " << cfg.seed << ", " << n << " steps\n"
              << "updates applied: " << result.updates_applied
              << ", regularity skips: " << result.regularity_skips
              << ", gradient rejections: " << result.gradient_rejections
              << "\n"
              << "mean stage cost (final quarter): " << tail << "\n"
              << "trace written to " << trace.string() << "\n";
  }
  return 0;
}

int cmd_compare(const experiment::ExperimentConfig& cfg, int num_seeds,
                const fs::path& out_dir, bool quiet) {
  const experiment::CompareResult result =
      experiment::run_scenarios(cfg, num_seeds);
  const fs::path txt = out_dir / "report.txt";
  const fs::path csv = out_dir / "report.csv";
  experiment::write_compare_report(txt.string(), csv.string(), result);
  if (!quiet) {
    std::cout << "means over " << num_seeds << " matched seeds:\n";
    constexpr experiment::Scenario kAll[3] = {
        experiment::Scenario::NoLearning, experiment::Scenario::MpcOnly,
        experiment::Scenario::MpcAndMhe};
    for (const auto sc : kAll) {
      const int i = static_cast<int>(sc);
      std::cout << "  " << experiment::to_string(sc)
                << ": tail mean cost " << result.mean_tail_cost[i]
                << ", cumulative violation " << result.mean_violation[i]
                << "\n";
    }
    std::cout << "report written to " << txt.string() << " and "
              << csv.string() << "\n";
  }
  return 0;
}

int cmd_audit(const experiment::ExperimentConfig& cfg, int checkpoints,
              const std::string& mode_name, double fd_step,
              const fs::path& out_dir, bool quiet) {
  experiment::AuditMode mode;
  if (mode_name == "full") {
    mode = experiment::AuditMode::Full;
  } else if (mode_name == "controller_only") {
    mode = experiment::AuditMode::ControllerOnly;
  } else {
    throw std::invalid_argument("audit: unknown mode '" + mode_name +
                                "' (expected full or controller_only)");
  }
  const experiment::AuditResult result =
      experiment::gradient_audit(cfg, checkpoints, mode, fd_step);
  const fs::path txt = out_dir / "audit.txt";
  experiment::write_audit_report(txt.string(), result);
  if (!quiet) {
    std::cout << "audited " << result.checkpoints << " checkpoints, "
              << result.rows.size() << " gradient components\n"
              << "max relative error: " << result.max_rel_error << "\n"
              << "details written to " << txt.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Closed-loop tuning of a moving-horizon estimator and model predictive "
      "controller by temporal-difference learning on a two-mass benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scenario;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  bool quiet = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON configuration file (defaults apply when omitted)");
    cmd->add_option("--seed", seed, "override the base random seed");
    cmd->add_option("--steps", steps, "override the episode length");
    cmd->add_option("--out", out_dir, "output directory (created if missing)");
    cmd->add_flag("--quiet", quiet, "suppress console summaries");
  };

  CLI::App* run_cmd =
      app.add_subcommand("run", "run one episode and write trace.csv");
  add_common(run_cmd);
  run_cmd->add_option("--scenario", scenario,
                      "no_learning | mpc_only | mpc_and_mhe");

  CLI::App* compare_cmd = app.add_subcommand(
      "compare",
      "run every scenario on matched seeds and write report.txt/report.csv");
  add_common(compare_cmd);
  int num_seeds = 5;
  compare_cmd->add_option("--num-seeds", num_seeds,
                          "matched seeds per scenario");

  CLI::App* audit_cmd = app.add_subcommand(
      "audit",
      "compare analytic parameter gradients against finite differences and "
      "write audit.txt");
  add_common(audit_cmd);
  int checkpoints = 20;
  std::string mode = "full";
  double fd_step = 1e-5;
  audit_cmd->add_option("--checkpoints", checkpoints,
                        "number of audited steps");
  audit_cmd->add_option("--mode", mode, "full | controller_only");
  audit_cmd->add_option("--fd-step", fd_step, "central difference step");

  CLI11_PARSE(app, argc, argv);

  try {
    const experiment::ExperimentConfig cfg =
        resolve_config(config_path, scenario, seed, steps);
    const fs::path out(out_dir);
    fs::create_directories(out);

    if (run_cmd->parsed()) return cmd_run(cfg, out, quiet);
    if (compare_cmd->parsed()) {
      return cmd_compare(cfg, num_seeds, out, quiet);
    }
    if (audit_cmd->parsed()) {
      return cmd_audit(cfg, checkpoints, mode, fd_step, out, quiet);
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
