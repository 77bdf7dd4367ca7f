#pragma once

// Experiment orchestration behind the command-line tool. Every command writes
// into <output_dir>/<name>-<config hash>/; a failed command leaves an INVALID
// file there holding the error message.

#include <filesystem>
#include <string>
#include <vector>

#include "qbatch/approximator.hpp"
#include "qbatch/baselines.hpp"
#include "qbatch/config.hpp"
#include "qbatch/fqi.hpp"
#include "qbatch/io.hpp"
#include "qbatch/sampling.hpp"
#include "qbatch/scenario.hpp"

namespace qbatch {

enum class Command { train, baseline, scenario, compare };

inline Command command_from(const std::string& s) {
  if (s == "train") return Command::train;
  if (s == "baseline") return Command::baseline;
  if (s == "scenario") return Command::scenario;
  if (s == "compare") return Command::compare;
  throw ConfigError("unknown command '" + s + "'");
}

struct RunOptions {
  std::string method;    // baseline: "idp" or "cvp"
  std::string scenario;  // scenario: name from the config
};

struct RunArtifacts {
  std::filesystem::path dir;
  std::string config_hash;
  std::vector<std::string> files;  // relative to dir, in write order
  std::vector<std::pair<std::string, double>> metrics;  // "<file stem>.<key>"
};

inline std::filesystem::path run_directory(const RunConfig& cfg) {
  return std::filesystem::path(cfg.output_dir) / (cfg.name + "-" + config_hash(cfg));
}

template <ReactorModel M>
struct Trained {
  TransitionCube cube;
  FqiResult<StagedPolyModel> fqi;
  PolicyModel<StagedPolyModel> policy;
  Trajectory<StateOf<M>> nominal;
  Schedule nominal_schedule;
};

/// Sample, build the cube, run FQI, extract the policy and roll it out from
/// the nominal initial state.
template <ReactorModel M>
Trained<M> train_policy(const M& model, const RunConfig& cfg) {
  const IntegratorConfig ic{cfg.substeps_per_stage, model.stage_duration()};
  const EngineConfig ec = engine_config(cfg);
  const auto sc = sampling_config(cfg, model.n_stages());
  const auto samples = generate_state_samples(model, sc, ic);
  Trained<M> t;
  t.cube = build_transition_cube(model, samples, sc.action_grid, ic,
                                 {ec.mode == EngineMode::finite_horizon, model.n_stages()});
  t.fqi = run_fqi(t.cube, ec);
  t.policy = extract_policy(t.fqi.q, t.cube, ec);
  t.nominal = rollout(model, policy_controller(t.policy), ic);
  t.nominal_schedule = schedule_from(t.nominal, model.n_stages(), model.action_min());
  t.nominal_schedule.objective = t.nominal.objective;
  return t;
}

namespace detail {

class ArtifactWriter {
 public:
  ArtifactWriter(RunArtifacts& art) : art_(art) {}

  void csv(const std::string& name, const Table& t) {
    emit_csv(t, art_.dir / name);
    art_.files.push_back(name);
  }
  void text(const std::string& name, const std::string& body) {
    write_text_file(art_.dir / name, body);
    art_.files.push_back(name);
  }
  void svg(const std::string& name, const Chart& c) {
    emit_svg(c, art_.dir / name);
    art_.files.push_back(name);
  }

  /// key,value table whose first row is the config hash.
  void metrics(const std::string& name, const std::vector<std::pair<std::string, double>>& values) {
    Table t;
    t.header = {"key", "value"};
    t.add_row({"config_hash", art_.config_hash});
    const std::string stem = std::filesystem::path(name).stem().string();
    for (const auto& [k, v] : values) {
      t.add_row({k, format_number(v)});
      art_.metrics.emplace_back(stem + "." + k, v);
    }
    csv(name, t);
  }

 private:
  RunArtifacts& art_;
};

template <ReactorModel M>
Table samples_table(const TransitionCube& cube, std::size_t n_stages) {
  Table t;
  t.header = {"episode", "stage"};
  for (auto n : M::component_names) t.header.emplace_back(n);
  for (std::size_t i = 0; i < cube.m; ++i) {
    std::vector<double> row{static_cast<double>(i / n_stages), static_cast<double>(i % n_stages)};
    const auto s = cube.state(i);
    row.insert(row.end(), s.begin(), s.begin() + M::dimension);
    t.add_numbers(row);
  }
  return t;
}

template <ReactorModel M>
Table cube_table(const TransitionCube& cube) {
  Table t;
  t.header = {"sample", "action_index", "action", "applied", "reward", "terminal"};
  for (auto n : M::component_names) t.header.push_back("next_" + std::string(n));
  for (std::size_t i = 0; i < cube.m; ++i)
    for (std::size_t j = 0; j < cube.k; ++j) {
      std::vector<double> row{static_cast<double>(i),       static_cast<double>(j),
                              cube.action_grid[j],          cube.applied[i * cube.k + j],
                              cube.reward(i, j),            cube.is_terminal(i, j) ? 1.0 : 0.0};
      const auto s = cube.next_state(i, j);
      row.insert(row.end(), s.begin(), s.begin() + M::dimension);
      t.add_numbers(row);
    }
  return t;
}

inline Table diagnostics_table(const Diagnostics& d) {
  Table t;
  t.header = {"iteration", "mean_target_change", "bellman_residual", "fit_loss"};
  for (std::size_t i = 0; i < d.fit_loss.size(); ++i)
    t.add_numbers({static_cast<double>(i + 1), d.mean_target_change[i], d.bellman_residual[i], d.fit_loss[i]});
  return t;
}

inline Table trace_table(const std::vector<double>& trace) {
  Table t;
  t.header = {"round", "best_objective"};
  for (std::size_t i = 0; i < trace.size(); ++i) t.add_numbers({static_cast<double>(i + 1), trace[i]});
  return t;
}

template <ReactorModel M>
Series performance_series(const M& model, const std::string& name, const Trajectory<StateOf<M>>& traj) {
  Series s{name, traj.times, {}};
  for (const auto& x : traj.states) s.y.push_back(model.performance(x));
  return s;
}

template <ReactorModel M>
std::string metric_label(const M& model) {
  return model.reward_spec().kind == RewardKind::minimum_time ? "completion_time" : "final_yield";
}

template <ReactorModel M>
Trained<M> write_training(const M& model, const RunConfig& cfg, ArtifactWriter& out) {
  auto t = train_policy(model, cfg);
  out.csv("samples.csv", samples_table<M>(t.cube, model.n_stages()));
  out.csv("cube.csv", cube_table<M>(t.cube));
  out.csv("diagnostics.csv", diagnostics_table(t.fqi.diagnostics));
  out.text("q_model.txt", to_text(t.fqi.q.regressor));
  out.text("policy_model.txt", to_text(t.policy.regressor));
  out.csv("policy_trajectory.csv", trajectory_table(model, t.nominal));
  out.csv("policy_schedule.csv", schedule_table(t.nominal_schedule, model.stage_duration()));
  out.metrics("train_metrics.csv", {{metric_label(model), final_metric(model, t.nominal)},
                                    {"final_performance", model.performance(t.nominal.final_state())},
                                    {"final_bellman_residual", t.fqi.diagnostics.bellman_residual.back()},
                                    {"clamp_count", static_cast<double>(t.nominal.clamp_count)},
                                    {"bound_warnings", static_cast<double>(t.nominal.warnings.size())}});
  out.svg("policy_profile.svg", Chart{"Learned policy: " + std::string(M::action_name) + " profile", "time",
                                     std::string(M::action_name),
                                     {step_series("q-learning", t.nominal_schedule.actions, model.stage_duration())}});
  return t;
}

template <ReactorModel M>
OptimizerResult write_baseline(const M& model, const RunConfig& cfg, const std::string& method,
                               ArtifactWriter& out) {
  const IntegratorConfig ic{cfg.substeps_per_stage, model.stage_duration()};
  OptimizerResult res;
  if (method == "idp") {
    IdpConfig c = cfg.baselines.idp;
    c.seed = derive_seed(cfg.seed, 0x1d9);
    res = idp_optimize(model, c, ic);
  } else if (method == "cvp") {
    CvpConfig c = cfg.baselines.cvp;
    c.seed = derive_seed(cfg.seed, 0xc7f);
    res = cvp_optimize(model, c, ic);
  } else {
    throw ConfigError("unknown baseline method '" + method + "' (expected idp or cvp)");
  }
  const auto traj = rollout(model, schedule_controller(res.schedule), ic);
  const std::string p = "baseline_" + method + "_";
  out.csv(p + "schedule.csv", schedule_table(res.schedule, model.stage_duration()));
  out.csv(p + "trace.csv", trace_table(res.trace));
  out.csv(p + "trajectory.csv", trajectory_table(model, traj));
  out.metrics(p + "metrics.csv", {{metric_label(model), final_metric(model, traj)},
                                  {"evaluations", static_cast<double>(res.evaluations)}});
  res.schedule.objective = final_metric(model, traj);
  return res;
}

template <ReactorModel M>
void write_scenario(const M& model, const RunConfig& cfg, const Trained<M>& t, const Disturbance& d,
                    ArtifactWriter& out, const std::string& hash) {
  const IntegratorConfig ic{cfg.substeps_per_stage, model.stage_duration()};
  const auto report = compare_modes(model, t.policy, t.nominal_schedule, d, ic, hash);
  Table summary;
  summary.header = {"mode", "metric", "value", "rank", "config_hash"};
  Chart chart{"Scenario " + d.name, "time", "performance", {}};
  for (const auto& o : report.outcomes) {
    out.csv("scenario_" + d.name + "_" + to_string(o.mode) + ".csv", trajectory_table(model, o.trajectory));
    std::size_t rank = 0;
    while (report.ranking[rank] != o.mode) ++rank;
    summary.add_row({to_string(o.mode), report.metric_name, format_number(o.metric), std::to_string(rank + 1), hash});
    chart.series.push_back(performance_series(model, to_string(o.mode), o.trajectory));
  }
  out.csv("scenario_" + d.name + "_summary.csv", summary);
  out.svg("scenario_" + d.name + ".svg", chart);
}

template <ReactorModel M>
void run_model(const M& model, const RunConfig& cfg, Command command, const RunOptions& opt, RunArtifacts& art) {
  ArtifactWriter out(art);
  switch (command) {
    case Command::train:
      write_training(model, cfg, out);
      break;
    case Command::baseline:
      write_baseline(model, cfg, opt.method, out);
      break;
    case Command::scenario: {
      const Disturbance& d = find_scenario(cfg, opt.scenario);
      const auto t = write_training(model, cfg, out);
      write_scenario(model, cfg, t, d, out, art.config_hash);
      break;
    }
    case Command::compare: {
      const auto t = write_training(model, cfg, out);
      const auto idp = write_baseline(model, cfg, "idp", out);
      const auto cvp = write_baseline(model, cfg, "cvp", out);
      const IntegratorConfig ic{cfg.substeps_per_stage, model.stage_duration()};
      const auto constant = best_constant_schedule(model, ic, cfg.baselines.constant_levels);
      const double constant_metric = final_metric(model, rollout(model, schedule_controller(constant), ic));
      Table summary;
      summary.header = {"method", "metric", "value", "config_hash"};
      const std::string label = metric_label(model);
      summary.add_row({"cvp-direct", label, format_number(cvp.schedule.objective), art.config_hash});
      summary.add_row({"idp", label, format_number(idp.schedule.objective), art.config_hash});
      summary.add_row({"q-learning", label, format_number(final_metric(model, t.nominal)), art.config_hash});
      out.csv("compare_summary.csv", summary);
      out.metrics("constant_baseline.csv", {{"best_constant_action", constant.actions.front()}, {label, constant_metric}});
      out.svg("compare_profiles.svg",
              Chart{"Control profiles", "time", std::string(M::action_name),
                    {step_series("q-learning", t.nominal_schedule.actions, model.stage_duration()),
                     step_series("idp", idp.schedule.actions, model.stage_duration()),
                     step_series("cvp-direct", cvp.schedule.actions, model.stage_duration())}});
      for (const auto& d : cfg.scenarios) write_scenario(model, cfg, t, d, out, art.config_hash);
      break;
    }
  }
}

}  // namespace detail

inline RunArtifacts run_command(const RunConfig& cfg, Command command, const RunOptions& opt = {}) {
  RunArtifacts art;
  art.config_hash = config_hash(cfg);
  art.dir = run_directory(cfg);
  std::error_code ec;
  std::filesystem::create_directories(art.dir, ec);
  if (ec) throw IoError("cannot create run directory '" + art.dir.string() + "': " + ec.message());
  const auto marker = art.dir / "INVALID";
  std::filesystem::remove(marker, ec);
  try {
    if (command == Command::scenario) (void)find_scenario(cfg, opt.scenario);
    // Written without output_dir so the directory contents do not depend on
    // where the run was placed.
    json written = config_to_json(cfg);
    written.erase("output_dir");
    write_text_file(art.dir / "config.json", written.dump(2) + "\n");
    art.files.push_back("config.json");
    std::visit([&](const auto& model) { detail::run_model(model, cfg, command, opt, art); }, cfg.model);
  } catch (const std::exception& e) {
    try {
      write_text_file(marker, std::string(e.what()) + "\n");
    } catch (...) {
    }
    throw;
  }
  return art;
}

}  // namespace qbatch
