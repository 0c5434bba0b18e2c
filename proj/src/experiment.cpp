#include "mheq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "mheq/model.hpp"
#include "mheq/rng.hpp"

namespace mheq::experiment {

namespace {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector4d;
using Eigen::VectorXd;

// Everything needed to re-solve one step's estimator/controller pair at
// perturbed parameters; captured where the episode computed a gradient.
struct GradientProbe {
  int k = 0;
  params::ParameterVector theta;
  mhe::MeasurementWindow window{1};
  Vector2d prior = Vector2d::Zero();
  Vector2d x_hat = Vector2d::Zero();
  double u = 0.0;
  VectorXd grad_total;
  VectorXd grad_direct;
};

using ProbeSink = std::function<void(const GradientProbe&)>;


std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

EpisodeResult run_episode_impl(const ExperimentConfig& cfg,
                               const StepObserver& observer,
                               const ProbeSink& probe_sink) {
  cfg.validate();
  const model::ModelTemplate tmpl =
      model::make_template(cfg.plant.dt, cfg.plant.m1 + cfg.plant.m2);
  GaussianStream process_noise(derive_seed(cfg.seed, 0));
  GaussianStream measurement_noise(derive_seed(cfg.seed, 1));
  GaussianStream exploration(derive_seed(cfg.seed, 2));

  params::ParameterVector theta = cfg.theta0;
  const bool learning = cfg.scenario != Scenario::NoLearning;
  const bool estimator_chain = cfg.scenario == Scenario::MpcAndMhe;

  Vector4d x = cfg.x0;
  mhe::MeasurementWindow window(cfg.mhe.horizon);
  Vector2d prior = Vector2d::Zero();
  Vector2d propagated = Vector2d::Zero();

  struct Pending {
    double stage_cost = 0.0;
    double q_value = 0.0;
    bool learnable = false;
    bool has_grad = false;
    bool estimator_params = false;
    VectorXd grad;
  };
  std::optional<Pending> pending;
  std::deque<double> cost_window;

  EpisodeResult out;
  out.records.reserve(static_cast<std::size_t>(cfg.steps));

  for (int k = 0; k < cfg.steps; ++k) {
    try {
      const model::ControlModel mdl =
          model::apply_bias(tmpl, theta.A_bias, theta.B_bias);
      const Vector4d x_k = x;
      const double y = plant::measure(cfg.plant, x, measurement_noise);
      window.add_measurement(y);
      if (k == 0) {
        // Before any estimate exists, seed both the arrival prior and the
        // dead-reckoned state from the first measurement at rest.
        prior = Vector2d(y, 0.0);
        propagated = Vector2d(y, 0.0);
      }
      const Vector2d prior_k = prior;

      Vector2d x_hat;
      std::optional<mhe::MheSolution> est;
      if (window.ready()) {
        est = mhe::estimate(cfg.mhe, mdl, theta, window, prior_k, cfg.solver);
        x_hat = est->x_hat;
        prior = mhe::advance_prior(*est);
      } else {
        x_hat = propagated;
      }

      const mpc::MpcSolution vsol =
          mpc::solve(cfg.mpc, mdl, theta, x_hat, std::nullopt, cfg.solver);
      const double v_value = vsol.objective;
      const double pi = std::clamp(vsol.u0, cfg.mpc.u_min, cfg.mpc.u_max);
      // The exploration draw happens every step so equal seeds see the same
      // noise regardless of scenario.
      const double z = exploration.sample();
      const double u = std::clamp(pi + cfg.sigma_explore * z, cfg.mpc.u_min,
                                  cfg.mpc.u_max);

      const mpc::MpcSolution qsol =
          mpc::solve(cfg.mpc, mdl, theta, x_hat, u, cfg.solver);
      const double q_value = qsol.objective;

      // Gradient of this step's action value, taken while theta still
      // matches the solved subproblems. Controller parameters learn from
      // mpc_start on; estimator parameters join at mhe_start when the
      // scenario tunes them.
      const bool learnable =
          learning && window.ready() && k >= cfg.schedule.mpc_start;
      const bool estimator_params =
          estimator_chain && k >= cfg.schedule.mhe_start;
      bool has_grad = false;
      VectorXd grad;
      if (learnable) {
        try {
          const mpc::QGradient qg =
              mpc::sensitivities(cfg.mpc, theta, qsol, cfg.solver);
          if (estimator_chain) {
            const MatrixXd dxhat =
                mhe::state_sensitivity(cfg.mhe, theta, window, prior_k, *est);
            grad = rl::total_gradient(qg.dtheta, qg.dx0, dxhat);
          } else {
            grad = qg.dtheta;
          }
          has_grad = true;
          if (probe_sink) {
            GradientProbe probe;
            probe.k = k;
            probe.theta = theta;
            probe.window = window;
            probe.prior = prior_k;
            probe.x_hat = x_hat;
            probe.u = u;
            probe.grad_total = grad;
            probe.grad_direct = qg.dtheta;
            probe_sink(probe);
          }
        } catch (const mpc::RegularityError&) {
          // Not a differentiable point; skip this transition's update.
          ++out.regularity_skips;
        }
      }

      // The previous transition's temporal difference closes with this
      // step's value; record it and (gates permitting) update theta.
      if (pending) {
        const double delta = rl::td_error(pending->stage_cost, v_value,
                                          pending->q_value, cfg.mpc.gamma);
        out.records.back().td_error = delta;
        if (pending->learnable && pending->has_grad) {
          const double step_norm =
              (delta * pending->grad).cwiseAbs().maxCoeff();
          if (step_norm > cfg.gradient_reject) {
            ++out.gradient_rejections;
          } else {
            const params::GroupMask mask = pending->estimator_params
                                               ? params::mask_all()
                                               : params::mask_mpc_only();
            theta = rl::constrained_step(theta, delta, pending->grad,
                                         cfg.step_sizes, mask);
            ++out.updates_applied;
          }
        }
        if (observer) observer(out.records.back());
      }

      x = plant::step_plant(cfg.plant, x, u, process_noise);
      // The reward is the environment's evaluation of the transition, so it
      // reads the true model-coordinate state; the estimate only influences
      // it through the control it produced. Scoring the estimate itself
      // would let the estimator parameters lower the cost by biasing the
      // estimate instead of improving the closed loop.
      const double stage =
          rl::baseline_cost(cfg.baseline, Vector2d(x_k(0), x_k(2)), u);
      cost_window.push_back(stage);
      if (static_cast<int>(cost_window.size()) > cfg.j_window) {
        cost_window.pop_front();
      }
      double j_cost = 0.0;
      double weight = 1.0;
      for (auto it = cost_window.rbegin(); it != cost_window.rend(); ++it) {
        j_cost += weight * *it;
        weight *= cfg.mpc.gamma;
      }

      if (!window.ready()) {
        propagated = mdl.A * propagated + mdl.B * u;
      }
      window.add_input(u);

      StepRecord rec;
      rec.k = k;
      rec.x_true = x_k;
      rec.y = y;
      rec.x_hat = x_hat;
      rec.u = u;
      rec.stage_cost = stage;
      rec.value = v_value;
      rec.q_value = q_value;
      rec.j_cost = j_cost;
      rec.theta = params::flatten(theta);
      out.records.push_back(std::move(rec));

      pending = Pending{stage,    q_value,          learnable,
                        has_grad, estimator_params, std::move(grad)};
    } catch (const std::exception& e) {
      throw std::runtime_error("experiment: aborted at step " +
                               std::to_string(k) + ": " + e.what());
    }
  }
  if (!out.records.empty() && observer) observer(out.records.back());
  out.theta_final = params::flatten(theta);
  return out;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::NoLearning: return "no_learning";
    case Scenario::MpcOnly: return "mpc_only";
    case Scenario::MpcAndMhe: return "mpc_and_mhe";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "no_learning") return Scenario::NoLearning;
  if (name == "mpc_only") return Scenario::MpcOnly;
  if (name == "mpc_and_mhe") return Scenario::MpcAndMhe;
  throw std::invalid_argument(
      "experiment: unknown scenario '" + name +
      "' (expected no_learning, mpc_only, or mpc_and_mhe)");
}

void Schedule::validate() const {
  if (mpc_start < 0 || mhe_start < 0) {
    throw std::invalid_argument(
        "experiment: schedule start indices must be >= 0");
  }
}

void ExperimentConfig::validate() const {
  plant.validate();
  mhe.validate();
  mpc.validate();
  theta0.validate();
  schedule.validate();
  if (steps < 1) throw std::invalid_argument("experiment: steps must be >= 1");
  if (!(sigma_explore >= 0.0) || !std::isfinite(sigma_explore)) {
    throw std::invalid_argument("experiment: sigma_explore must be finite and >= 0");
  }
  if (j_window < 1) {
    throw std::invalid_argument("experiment: j_window must be >= 1");
  }
  if (!(gradient_reject > 0.0)) {
    throw std::invalid_argument("experiment: gradient_reject must be positive");
  }
  if (!(solver.tol > 0.0) || !(solver.act_tol > 0.0)) {
    throw std::invalid_argument("experiment: solver tolerances must be positive");
  }
  for (const double a : step_sizes) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw std::invalid_argument("experiment: step sizes must be finite and >= 0");
    }
  }
}

EpisodeResult run_episode(const ExperimentConfig& cfg,
                          const StepObserver& observer) {
  return run_episode_impl(cfg, observer, {});
}

double true_state_violation(const rl::BaselineCost& cost,
                            const Eigen::Vector4d& x_true) {
  // Model coordinates of the true plant state: position and velocity of
  // mass 1, the body the reduced model describes.
  const Vector2d pos(x_true(0), x_true(2));
  const Vector2d over = (pos - cost.state_ub).cwiseMax(0.0);
  const Vector2d under = (cost.state_lb - pos).cwiseMax(0.0);
  return (over + under).sum();
}

CompareResult run_scenarios(const ExperimentConfig& base, int num_seeds) {
  if (num_seeds < 1) {
    throw std::invalid_argument("experiment: num_seeds must be >= 1");
  }
  CompareResult out;
  out.num_seeds = num_seeds;
  constexpr Scenario kAll[3] = {Scenario::NoLearning, Scenario::MpcOnly,
                                Scenario::MpcAndMhe};
  for (const Scenario sc : kAll) {
    double tail_sum = 0.0;
    double viol_sum = 0.0;
    for (int s = 0; s < num_seeds; ++s) {
      ExperimentConfig cfg = base;
      cfg.scenario = sc;
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      const EpisodeResult ep = run_episode(cfg);

      ScenarioStats st;
      st.scenario = sc;
      st.seed = cfg.seed;
      const int n = static_cast<int>(ep.records.size());
      const int tail_start = n - n / 4;
      double sum = 0.0;
      double tail = 0.0;
      double viol = 0.0;
      for (int i = 0; i < n; ++i) {
        sum += ep.records[i].stage_cost;
        viol += true_state_violation(cfg.baseline, ep.records[i].x_true);
        if (i >= tail_start) tail += ep.records[i].stage_cost;
      }
      st.mean_cost = sum / n;
      st.tail_mean_cost = tail / std::max(1, n - tail_start);
      st.cumulative_violation = viol;
      out.runs.push_back(st);
      tail_sum += st.tail_mean_cost;
      viol_sum += st.cumulative_violation;
    }
    out.mean_tail_cost[static_cast<int>(sc)] = tail_sum / num_seeds;
    out.mean_violation[static_cast<int>(sc)] = viol_sum / num_seeds;
  }
  return out;
}

AuditResult gradient_audit(const ExperimentConfig& cfg, int checkpoints,
                           AuditMode mode, double fd_step) {
  if (checkpoints < 1) {
    throw std::invalid_argument("experiment: checkpoints must be >= 1");
  }
  if (!(fd_step > 0.0)) {
    throw std::invalid_argument("experiment: fd_step must be positive");
  }
  ExperimentConfig run_cfg = cfg;
  run_cfg.scenario = mode == AuditMode::Full ? Scenario::MpcAndMhe
                                             : Scenario::MpcOnly;
  std::vector<GradientProbe> probes;
  run_episode_impl(run_cfg, {},
                   [&](const GradientProbe& p) { probes.push_back(p); });
  if (probes.empty()) {
    throw std::runtime_error(
        "experiment: no gradient checkpoints were reached; widen the "
        "schedule or raise the step count");
  }

  const model::ModelTemplate tmpl =
      model::make_template(cfg.plant.dt, cfg.plant.m1 + cfg.plant.m2);
  const int count = std::min<int>(checkpoints, static_cast<int>(probes.size()));

  // Seeded sample without replacement, reported in step order.
  std::vector<std::size_t> picks(probes.size());
  std::iota(picks.begin(), picks.end(), std::size_t{0});
  std::mt19937_64 pick_rng(derive_seed(cfg.seed, 3));
  std::shuffle(picks.begin(), picks.end(), pick_rng);
  picks.resize(static_cast<std::size_t>(count));
  std::sort(picks.begin(), picks.end());

  AuditResult out;
  out.checkpoints = count;
  for (int c = 0; c < count; ++c) {
    const GradientProbe& probe = probes[picks[static_cast<std::size_t>(c)]];
    const VectorXd& analytic =
        mode == AuditMode::Full ? probe.grad_total : probe.grad_direct;
    const VectorXd flat = params::flatten(probe.theta);

    for (int j = 0; j < params::kNumParams; ++j) {
      const auto q_at = [&](double v) {
        VectorXd f = flat;
        f(j) = v;
        const params::ParameterVector th = params::unflatten(f);
        const model::ControlModel mdl =
            model::apply_bias(tmpl, th.A_bias, th.B_bias);
        Vector2d xh = probe.x_hat;
        if (mode == AuditMode::Full) {
          xh = mhe::estimate(run_cfg.mhe, mdl, th, probe.window, probe.prior,
                             run_cfg.solver)
                   .x_hat;
        }
        return mpc::action_value(run_cfg.mpc, mdl, th, xh, probe.u,
                                 run_cfg.solver);
      };
      const double q_plus = q_at(flat(j) + fd_step);
      const double q_minus = q_at(flat(j) - fd_step);
      const double fd = (q_plus - q_minus) / (2.0 * fd_step);

      AuditRow row;
      row.k = probe.k;
      row.index = j;
      row.name = params::component_names()[j];
      row.analytic = analytic(j);
      row.finite_difference = fd;
      row.abs_error = std::abs(fd - row.analytic);
      row.rel_error = row.abs_error / std::max(1.0, std::abs(fd));
      out.max_rel_error = std::max(out.max_rel_error, row.rel_error);
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

void write_trace_csv(const std::string& path, const EpisodeResult& result) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("experiment: cannot open " + path);
  f << "k,x1,x2,x3,x4,y,xhat1,xhat2,u,L,delta,V,Q,J";
  for (const auto& name : params::component_names()) f << "," << name;
  f << "\n";
  for (const auto& r : result.records) {
    f << r.k;
    for (int i = 0; i < 4; ++i) f << "," << fmt9(r.x_true(i));
    f << "," << fmt9(r.y) << "," << fmt9(r.x_hat(0)) << ","
      << fmt9(r.x_hat(1)) << "," << fmt9(r.u) << "," << fmt9(r.stage_cost)
      << "," << fmt9(r.td_error) << "," << fmt9(r.value) << ","
      << fmt9(r.q_value) << "," << fmt9(r.j_cost);
    for (int i = 0; i < r.theta.size(); ++i) f << "," << fmt9(r.theta(i));
    f << "\n";
  }
  if (!f) throw std::runtime_error("experiment: failed writing " + path);
}

void write_compare_report(const std::string& txt_path,
                          const std::string& csv_path,
                          const CompareResult& result) {
  {
    std::ofstream f(txt_path);
    if (!f) throw std::runtime_error("experiment: cannot open " + txt_path);
    f << "scenario comparison over " << result.num_seeds << " matched seed"
      << (result.num_seeds == 1 ? "" : "s") << "\n\n";
    f << "means over seeds:\n";
    f << "  scenario      tail_mean_cost   cumulative_violation\n";
    constexpr Scenario kAll[3] = {Scenario::NoLearning, Scenario::MpcOnly,
                                  Scenario::MpcAndMhe};
    for (const Scenario sc : kAll) {
      const int i = static_cast<int>(sc);
      f << "  " << to_string(sc);
      for (std::size_t pad = to_string(sc).size(); pad < 14; ++pad) f << ' ';
      f << fmt9(result.mean_tail_cost[i]) << "   "
        << fmt9(result.mean_violation[i]) << "\n";
    }
    f << "\nper-run results:\n";
    f << "  scenario,seed,mean_cost,tail_mean_cost,cumulative_violation\n";
    for (const auto& st : result.runs) {
      f << "  " << to_string(st.scenario) << "," << st.seed << ","
        << fmt9(st.mean_cost) << "," << fmt9(st.tail_mean_cost) << ","
        << fmt9(st.cumulative_violation) << "\n";
    }
    if (!f) throw std::runtime_error("experiment: failed writing " + txt_path);
  }
  {
    std::ofstream f(csv_path);
    if (!f) throw std::runtime_error("experiment: cannot open " + csv_path);
    f << "scenario,seed,mean_cost,tail_mean_cost,cumulative_violation\n";
    for (const auto& st : result.runs) {
      f << to_string(st.scenario) << "," << st.seed << ","
        << fmt9(st.mean_cost) << "," << fmt9(st.tail_mean_cost) << ","
        << fmt9(st.cumulative_violation) << "\n";
    }
    if (!f) throw std::runtime_error("experiment: failed writing " + csv_path);
  }
}

void write_audit_report(const std::string& path, const AuditResult& result) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("experiment: cannot open " + path);
  f << "gradient audit: " << result.checkpoints << " checkpoints, "
    << result.rows.size() << " comparisons, max relative error "
    << fmt9(result.max_rel_error) << "\n";
  f << "k,index,name,analytic,finite_difference,abs_error,rel_error\n";
  for (const auto& r : result.rows) {
    f << r.k << "," << r.index << "," << r.name << "," << fmt9(r.analytic)
      << "," << fmt9(r.finite_difference) << "," << fmt9(r.abs_error) << ","
      << fmt9(r.rel_error) << "\n";
  }
  if (!f) throw std::runtime_error("experiment: failed writing " + path);
}

}  // namespace mheq::experiment
