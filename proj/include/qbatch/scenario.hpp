#pragma once

// Disturbance injection and the three post-failure intervention modes.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "qbatch/common.hpp"
#include "qbatch/dynamics.hpp"
#include "qbatch/fqi.hpp"

namespace qbatch {

/// The action is clamped to `forced_value` over [t_start, t_end] (model time).
struct Disturbance {
  std::string name;
  double t_start = 0.0;
  double t_end = 0.0;
  double forced_value = 0.0;
};

enum class InterventionMode { intelligent, nominal_schedule, do_nothing };

inline constexpr std::array<InterventionMode, 3> all_modes{InterventionMode::intelligent,
                                                           InterventionMode::nominal_schedule,
                                                           InterventionMode::do_nothing};

inline std::string to_string(InterventionMode mode) {
  switch (mode) {
    case InterventionMode::intelligent: return "intelligent";
    case InterventionMode::nominal_schedule: return "nominal-schedule";
    case InterventionMode::do_nothing: return "do-nothing";
  }
  return "?";
}

inline InterventionMode intervention_mode_from(const std::string& s) {
  for (auto m : all_modes)
    if (to_string(m) == s) return m;
  throw ConfigError("unknown intervention mode '" + s + "'");
}

/// Half-open stage range [first, last) covered by a disturbance.
struct StageWindow {
  std::size_t first = 0;
  std::size_t last = 0;

  bool empty() const { return first == last; }
  bool contains(std::size_t stage) const { return stage >= first && stage < last; }
};

/// Snaps both ends to the nearest stage boundary.
inline StageWindow snap_window(const Disturbance& d, double stage_duration, std::size_t n_stages) {
  const double horizon = stage_duration * static_cast<double>(n_stages);
  if (!(std::isfinite(d.t_start) && std::isfinite(d.t_end)) || d.t_start < 0.0 || !(d.t_start < d.t_end) ||
      d.t_end > horizon * (1.0 + 1e-12))
    throw ConfigError("disturbance '" + d.name + "': window [" + format_values(std::vector{d.t_start, d.t_end}) +
                      "] must satisfy 0 <= t_start < t_end <= " + format_values(std::vector{horizon}));
  auto snap = [&](double t) {
    const auto k = static_cast<std::size_t>(std::llround(t / stage_duration));
    return std::min(k, n_stages);
  };
  return {snap(d.t_start), snap(d.t_end)};
}

/// Before the window the nominal schedule is followed and inside it the forced
/// value is requested; what happens after the window depends on `mode`.
template <ReactorModel M, Regressor R>
Trajectory<StateOf<M>> run_scenario(const M& model, const PolicyModel<R>& policy, const Schedule& nominal,
                                    const Disturbance& disturbance, InterventionMode mode,
                                    const IntegratorConfig& integrator) {
  const std::size_t n = model.n_stages();
  if (nominal.actions.size() != n)
    throw ConfigError("run_scenario: nominal schedule has " + std::to_string(nominal.actions.size()) +
                      " stages, model has " + std::to_string(n));
  const StageWindow w = snap_window(disturbance, integrator.stage_duration, n);
  auto feedback = policy_controller(policy);

  auto controller = [&](std::size_t stage, const StateOf<M>& x) -> double {
    if (w.empty() || stage < w.first) return nominal.actions[stage];
    if (w.contains(stage)) return disturbance.forced_value;
    switch (mode) {
      case InterventionMode::intelligent: return feedback(stage, x);
      case InterventionMode::nominal_schedule: return nominal.actions[stage];
      case InterventionMode::do_nothing: return disturbance.forced_value;
    }
    return nominal.actions[stage];
  };
  return rollout(model, controller, model.initial_state(), integrator, n);
}

/// Final metric of a trajectory: yield for terminal-yield models, completion
/// time for minimum-time models.
template <ReactorModel M>
double final_metric(const M& model, const Trajectory<StateOf<M>>& traj) {
  return model.reward_spec().kind == RewardKind::minimum_time ? completion_time(traj) : traj.objective;
}

template <ReactorModel M>
bool metric_better(const M& model, double a, double b) {
  return model.reward_spec().kind == RewardKind::minimum_time ? a < b : a > b;
}

template <class State>
struct ModeOutcome {
  InterventionMode mode{};
  Trajectory<State> trajectory;
  double metric = 0.0;
};

template <class State>
struct ScenarioReport {
  Disturbance disturbance;
  StageWindow window;
  std::string metric_name;  // "final_yield" or "completion_time"
  std::vector<ModeOutcome<State>> outcomes;  // in all_modes order
  std::vector<InterventionMode> ranking;     // best first; ties keep all_modes order
  std::string config_hash;

  const ModeOutcome<State>& outcome(InterventionMode mode) const {
    for (const auto& o : outcomes)
      if (o.mode == mode) return o;
    throw ConsistencyError("scenario report has no outcome for mode " + to_string(mode));
  }
};

template <ReactorModel M, Regressor R>
ScenarioReport<StateOf<M>> compare_modes(const M& model, const PolicyModel<R>& policy, const Schedule& nominal,
                                         const Disturbance& disturbance, const IntegratorConfig& integrator,
                                         const std::string& config_hash = {}) {
  ScenarioReport<StateOf<M>> report;
  report.disturbance = disturbance;
  report.window = snap_window(disturbance, integrator.stage_duration, model.n_stages());
  report.metric_name = model.reward_spec().kind == RewardKind::minimum_time ? "completion_time" : "final_yield";
  report.config_hash = config_hash;
  for (auto mode : all_modes) {
    auto traj = run_scenario(model, policy, nominal, disturbance, mode, integrator);
    const double metric = final_metric(model, traj);
    report.outcomes.push_back({mode, std::move(traj), metric});
  }
  std::vector<std::size_t> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return metric_better(model, report.outcomes[a].metric, report.outcomes[b].metric);
  });
  for (auto i : order) report.ranking.push_back(report.outcomes[i].mode);
  return report;
}

}  // namespace qbatch
