#pragma once

// Fixed-step RK4 integration over zero-order-hold control stages, and the
// open-/closed-loop rollout drivers built on it.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "qbatch/common.hpp"

namespace qbatch {

struct IntegratorConfig {
  std::size_t substeps_per_stage = 20;
  double stage_duration = 0.1;

  void validate() const {
    if (substeps_per_stage < 1) throw ConfigError("substeps_per_stage must be >= 1");
    if (!(stage_duration > 0.0)) throw ConfigError("stage_duration must be > 0");
  }
  double substep() const { return stage_duration / static_cast<double>(substeps_per_stage); }
};

enum class RewardKind { terminal_yield, minimum_time };

/// Objective specialization of a model. Terminal-yield models maximize
/// performance(x(t_f)); minimum-time models minimize the time at which
/// performance(x) first reaches `target`.
struct RewardSpec {
  RewardKind kind = RewardKind::terminal_yield;
  std::size_t yield_index = 0;
  double target = 0.0;
};

struct ConstraintFlags {
  bool volume = false;
  bool safety = false;
  bool any() const { return volume || safety; }
};

template <class M>
concept ReactorModel = requires(const M& m, typename M::state_type& x, const typename M::state_type& cx,
                                double u, const IntegratorConfig& cfg) {
  typename M::state_type;
  { M::dimension } -> std::convertible_to<std::size_t>;
  { m.derivatives(cx, u) } -> std::same_as<typename M::state_type>;
  { m.clamp_nonnegative(x) } -> std::convertible_to<int>;
  { m.check_constraints(cx) } -> std::same_as<ConstraintFlags>;
  { m.project_action(cx, u, cfg) } -> std::convertible_to<double>;
  { m.reward_spec() } -> std::same_as<RewardSpec>;
  { m.performance(cx) } -> std::convertible_to<double>;
  { m.is_terminal(cx) } -> std::convertible_to<bool>;
  { m.initial_state() } -> std::same_as<typename M::state_type>;
  { m.action_min() } -> std::convertible_to<double>;
  { m.action_max() } -> std::convertible_to<double>;
  { m.n_stages() } -> std::convertible_to<std::size_t>;
  { m.stage_duration() } -> std::convertible_to<double>;
};

template <ReactorModel M>
using StateOf = typename M::state_type;

template <ReactorModel M>
IntegratorConfig integrator_for(const M& model, std::size_t substeps = 20) {
  return IntegratorConfig{substeps, model.stage_duration()};
}

// ---------------------------------------------------------------------------
// RK4
// ---------------------------------------------------------------------------

/// One classical Runge-Kutta step of dx/dt = derivs(x, u) with u held.
template <std::size_t N, class Derivs>
std::array<double, N> rk4_step(const std::array<double, N>& x, double u, double dt, const Derivs& derivs) {
  auto checked = [&](const std::array<double, N>& at) {
    std::array<double, N> d = derivs(at, u);
    if (!all_finite(d))
      throw IntegrationError("non-finite derivative at state " + format_values(at),
                             std::vector<double>(at.begin(), at.end()));
    return d;
  };
  std::array<double, N> tmp{};
  const auto k1 = checked(x);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const auto k2 = checked(tmp);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const auto k3 = checked(tmp);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + dt * k3[i];
  const auto k4 = checked(tmp);
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Stage simulation
// ---------------------------------------------------------------------------

/// Reward for moving from `before` to `after` over `dt`.
///
/// Terminal-yield: increment of the yield, so rewards telescope to
/// y(t_f) - y(t_0). Minimum-time: -dt while the target is unmet, the
/// linearly interpolated fraction of dt on the crossing step, 0 afterwards.
template <ReactorModel M>
double stage_reward(const M& model, const StateOf<M>& before, const StateOf<M>& after, double dt) {
  const RewardSpec spec = model.reward_spec();
  const double pb = model.performance(before);
  const double pa = model.performance(after);
  if (spec.kind == RewardKind::terminal_yield) return pa - pb;
  if (pb >= spec.target) return 0.0;
  if (pa < spec.target) return -dt;
  return -dt * (spec.target - pb) / (pa - pb);
}

template <class State>
struct StageResult {
  State next_state{};
  double stage_reward = 0.0;
  int clamp_count = 0;
  ConstraintFlags constraint_active{};
};

/// Integrates one stage with `action` held constant. Substep observer, if
/// given, sees every post-clamp state.
template <ReactorModel M, class Observer>
StageResult<StateOf<M>> simulate_stage(const M& model, const StateOf<M>& state, double action,
                                       const IntegratorConfig& config, Observer&& observe) {
  config.validate();
  const double h = config.substep();
  auto derivs = [&model](const StateOf<M>& x, double u) { return model.derivatives(x, u); };

  StageResult<StateOf<M>> result;
  StateOf<M> x = state;
  for (std::size_t s = 0; s < config.substeps_per_stage; ++s) {
    StateOf<M> next = rk4_step(x, action, h, derivs);
    result.clamp_count += model.clamp_nonnegative(next);
    result.stage_reward += stage_reward(model, x, next, h);
    const ConstraintFlags flags = model.check_constraints(next);
    result.constraint_active.volume = result.constraint_active.volume || flags.volume;
    result.constraint_active.safety = result.constraint_active.safety || flags.safety;
    observe(next);
    x = next;
  }
  result.next_state = x;
  return result;
}

template <ReactorModel M>
StageResult<StateOf<M>> simulate_stage(const M& model, const StateOf<M>& state, double action,
                                       const IntegratorConfig& config) {
  return simulate_stage(model, state, action, config, [](const StateOf<M>&) {});
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Piecewise-constant open-loop control, one action per stage.
struct Schedule {
  std::vector<double> actions;
  double objective = 0.0;
};

template <class State>
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<double> actions;
  std::vector<double> stage_rewards;
  double objective = 0.0;
  bool target_reached = false;
  int clamp_count = 0;
  std::vector<std::string> warnings;

  std::size_t stage_count() const { return actions.size(); }
  const State& final_state() const { return states.back(); }
};

/// Final performance for yield models, negative completion time for
/// minimum-time models (negative elapsed time when the target is never met).
template <ReactorModel M>
double objective_of(const M& model, const Trajectory<StateOf<M>>& traj) {
  if (model.reward_spec().kind == RewardKind::terminal_yield) return model.performance(traj.final_state());
  double total = 0.0;
  for (double r : traj.stage_rewards) total += r;
  return total;
}

/// Positive completion time of a minimum-time trajectory (elapsed time when
/// the target was not met).
template <class State>
double completion_time(const Trajectory<State>& traj) {
  double total = 0.0;
  for (double r : traj.stage_rewards) total += r;
  return -total;
}

/// Drives the model for up to `n_stages` stages. `controller(stage, state)`
/// returns the requested action, which is always passed through
/// project_action. Minimum-time rollouts stop at the first terminal state
/// (target met or time cutoff).
template <ReactorModel M, class Controller>
Trajectory<StateOf<M>> rollout(const M& model, Controller&& controller, const StateOf<M>& initial,
                               const IntegratorConfig& config, std::size_t n_stages) {
  Trajectory<StateOf<M>> traj;
  traj.times.push_back(0.0);
  traj.states.push_back(initial);
  const bool min_time = model.reward_spec().kind == RewardKind::minimum_time;
  auto met = [&](const StateOf<M>& s) { return min_time && model.performance(s) >= model.reward_spec().target; };
  traj.target_reached = met(initial);
  bool done = min_time && model.is_terminal(initial);

  StateOf<M> x = initial;
  for (std::size_t stage = 0; stage < n_stages && !done; ++stage) {
    const double requested = controller(stage, static_cast<const StateOf<M>&>(x));
    if (!std::isfinite(requested))
      throw DomainError("rollout: controller returned a non-finite action at stage " + std::to_string(stage));
    if (requested < model.action_min() || requested > model.action_max())
      traj.warnings.push_back("stage " + std::to_string(stage) + ": requested action " +
                              format_values(std::span<const double>(&requested, 1)) + " outside bounds");
    const double u = model.project_action(x, requested, config);
    const auto res = simulate_stage(model, x, u, config);
    x = res.next_state;
    traj.actions.push_back(u);
    traj.stage_rewards.push_back(res.stage_reward);
    traj.clamp_count += res.clamp_count;
    traj.times.push_back(static_cast<double>(stage + 1) * config.stage_duration);
    traj.states.push_back(x);
    traj.target_reached = met(x);
    done = min_time && model.is_terminal(x);
  }
  traj.objective = objective_of(model, traj);
  return traj;
}

template <ReactorModel M, class Controller>
Trajectory<StateOf<M>> rollout(const M& model, Controller&& controller, const IntegratorConfig& config) {
  return rollout(model, std::forward<Controller>(controller), model.initial_state(), config, model.n_stages());
}

/// Open-loop controller over a schedule.
inline auto schedule_controller(const Schedule& schedule) {
  return [&schedule](std::size_t stage, const auto&) {
    if (stage >= schedule.actions.size()) throw ConfigError("schedule shorter than the stage count");
    return schedule.actions[stage];
  };
}

template <class State>
Schedule schedule_from(const Trajectory<State>& traj, std::size_t n_stages, double pad_value) {
  Schedule s;
  s.actions = traj.actions;
  s.actions.resize(n_stages, pad_value);
  s.objective = traj.objective;
  return s;
}

}  // namespace qbatch
