#pragma once

// Deterministic fitted Q-iteration over a transition cube.
//
// Each round computes one-step backups r + max_a' Q(s', a') for every cube
// entry and regresses them on (state, action). After the last round the
// greedy action at every sampled state is found by the same two-action
// search and a policy regressor is fitted from states to those actions.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <type_traits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbatch/approximator.hpp"
#include "qbatch/common.hpp"
#include "qbatch/sampling.hpp"

namespace qbatch {

enum class EngineMode { stationary, finite_horizon };

inline std::string to_string(EngineMode mode) {
  return mode == EngineMode::stationary ? "stationary" : "finite-horizon";
}

inline EngineMode engine_mode_from(const std::string& s) {
  if (s == "stationary") return EngineMode::stationary;
  if (s == "finite-horizon") return EngineMode::finite_horizon;
  throw ConfigError("unknown engine mode '" + s + "'");
}

struct EngineConfig {
  std::size_t n_iterations = 30;
  EngineMode mode = EngineMode::stationary;
  double lambda = 1e-3;

  void validate() const {
    if (n_iterations < 1) throw ConfigError("engine: n_iterations must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("engine: lambda must be >= 0");
  }
};

template <class R>
concept Regressor = requires(const R& r, std::span<const double> x) {
  { r.predict(x) } -> std::convertible_to<double>;
};

/// Fits a PolyRidgeModel with a fixed ridge strength.
struct RidgeFitter {
  double lambda = 1e-3;
  PolyRidgeModel operator()(const Matrix& X, std::span<const double> y) const { return ridge_fit(X, y, lambda); }
};

/// Default regressor: one global quadratic in stationary mode, one quadratic
/// per stage (keyed on the appended stage column) in finite-horizon mode.
struct StagedRidgeFitter {
  double lambda = 1e-3;
  std::optional<std::size_t> stage_column;
  StagedPolyModel operator()(const Matrix& X, std::span<const double> y) const {
    return staged_ridge_fit(X, y, lambda, stage_column);
  }
};

inline StagedRidgeFitter default_fitter(const TransitionCube& cube, const EngineConfig& config) {
  StagedRidgeFitter f{config.lambda, std::nullopt};
  if (config.mode == EngineMode::finite_horizon) f.stage_column = cube.dim - 1;
  return f;
}

template <Regressor R>
struct QModel {
  R regressor;
  std::vector<double> action_grid;
  EngineMode mode = EngineMode::stationary;
  std::size_t state_dim = 0;  // includes the stage feature in finite-horizon mode

  double value(std::span<const double> state, double action) const {
    std::array<double, max_input_dim> row{};
    std::copy(state.begin(), state.end(), row.begin());
    row[state.size()] = action;
    return regressor.predict(std::span<const double>(row.data(), state.size() + 1));
  }

  double max_value(std::span<const double> state) const {
    double best = -std::numeric_limits<double>::infinity();
    for (double a : action_grid) best = std::max(best, value(state, a));
    return best;
  }
};

/// Index of the largest value; ties go to the smallest grid action regardless
/// of the grid's storage order.
inline std::size_t argmax_lowest_action(std::span<const double> values, std::span<const double> grid) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[best] || (values[j] == values[best] && grid[j] < grid[best])) best = j;
  }
  return best;
}

template <Regressor R>
double greedy_action(const QModel<R>& q, std::span<const double> state) {
  std::vector<double> values(q.action_grid.size());
  for (std::size_t j = 0; j < values.size(); ++j) values[j] = q.value(state, q.action_grid[j]);
  return q.action_grid[argmax_lowest_action(values, q.action_grid)];
}

/// Backup targets for every cube entry. With no model (first round) the
/// target is the reward alone; terminal successors never bootstrap.
template <Regressor R>
std::vector<double> q_backup_targets(const TransitionCube& cube, const QModel<R>* q) {
  std::vector<double> targets(cube.m * cube.k);
  for (std::size_t i = 0; i < cube.m; ++i)
    for (std::size_t j = 0; j < cube.k; ++j) {
      double t = cube.reward(i, j);
      if (q != nullptr && !cube.is_terminal(i, j)) t += q->max_value(cube.next_state(i, j));
      targets[i * cube.k + j] = t;
    }
  return targets;
}

inline std::vector<double> q_backup_targets(const TransitionCube& cube) {
  return q_backup_targets<PolyRidgeModel>(cube, nullptr);
}

/// Mean |Q(s,a) - (r + max_a' Q(s',a'))| over the cube.
template <Regressor R>
double bellman_residual(const QModel<R>& q, const TransitionCube& cube) {
  if (cube.m * cube.k == 0) return 0.0;
  const auto targets = q_backup_targets(cube, &q);
  double total = 0.0;
  for (std::size_t i = 0; i < cube.m; ++i)
    for (std::size_t j = 0; j < cube.k; ++j)
      total += std::abs(q.value(cube.state(i), cube.action_grid[j]) - targets[i * cube.k + j]);
  return total / static_cast<double>(cube.m * cube.k);
}

/// (state, action) design matrix, rows ordered (i, j) like the cube.
inline Matrix q_design_matrix(const TransitionCube& cube) {
  Matrix X(static_cast<Eigen::Index>(cube.m * cube.k), static_cast<Eigen::Index>(cube.dim + 1));
  for (std::size_t i = 0; i < cube.m; ++i)
    for (std::size_t j = 0; j < cube.k; ++j) {
      const auto r = static_cast<Eigen::Index>(i * cube.k + j);
      const auto s = cube.state(i);
      for (std::size_t c = 0; c < cube.dim; ++c) X(r, static_cast<Eigen::Index>(c)) = s[c];
      X(r, static_cast<Eigen::Index>(cube.dim)) = cube.action_grid[j];
    }
  return X;
}

struct Diagnostics {
  std::vector<double> mean_target_change;
  std::vector<double> bellman_residual;
  std::vector<double> fit_loss;  // mean squared training residual
};

template <Regressor R>
struct FqiResult {
  QModel<R> q;
  Diagnostics diagnostics;
};

template <class Fitter>
auto run_fqi(const TransitionCube& cube, const EngineConfig& config, const Fitter& fit) {
  using R = std::invoke_result_t<const Fitter&, const Matrix&, std::span<const double>>;
  config.validate();
  if (cube.m * cube.k == 0) throw DomainError("run_fqi: empty cube");
  if (config.mode == EngineMode::finite_horizon && !cube.stage_feature)
    throw ConfigError("run_fqi: finite-horizon mode needs a cube built with the stage feature");

  const Matrix X = q_design_matrix(cube);
  FqiResult<R> out;
  out.q.action_grid = cube.action_grid;
  out.q.mode = config.mode;
  out.q.state_dim = cube.dim;
  bool have_model = false;
  std::vector<double> previous(cube.m * cube.k, 0.0);

  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    const auto targets = q_backup_targets(cube, have_model ? &out.q : nullptr);
    double change = 0.0;
    for (std::size_t e = 0; e < targets.size(); ++e) change += std::abs(targets[e] - previous[e]);
    out.diagnostics.mean_target_change.push_back(change / static_cast<double>(targets.size()));
    previous = targets;

    try {
      out.q.regressor = fit(X, std::span<const double>(targets));
    } catch (const Error& err) {
      throw DomainError("run_fqi: regression failed at iteration " + std::to_string(it + 1) + ": " + err.what());
    }
    have_model = true;

    double loss = 0.0;
    for (std::size_t e = 0; e < targets.size(); ++e) {
      const double r = out.q.regressor.predict(
                           std::span<const double>(X.row(static_cast<Eigen::Index>(e)).data(), cube.dim + 1)) -
                       targets[e];
      loss += r * r;
    }
    out.diagnostics.fit_loss.push_back(loss / static_cast<double>(targets.size()));
    out.diagnostics.bellman_residual.push_back(bellman_residual(out.q, cube));
  }
  return out;
}

inline FqiResult<StagedPolyModel> run_fqi(const TransitionCube& cube, const EngineConfig& config) {
  return run_fqi(cube, config, default_fitter(cube, config));
}

/// Fitted state -> action map. Queries are clipped to the grid's range.
template <Regressor R>
struct PolicyModel {
  R regressor;
  double action_lo = 0.0;
  double action_hi = 0.0;
  EngineMode mode = EngineMode::stationary;

  double raw(std::span<const double> state) const { return regressor.predict(state); }
  double action(std::span<const double> state) const { return std::clamp(raw(state), action_lo, action_hi); }
};

struct PolicyLabels {
  std::vector<double> labels;
  std::vector<double> label_values;  // best backup value per sample
};

/// Greedy label per sample: argmax_j [r(i,j) + max_a' Q(s'(i,j), a')].
template <Regressor R>
PolicyLabels policy_labels(const QModel<R>& q, const TransitionCube& cube) {
  const auto targets = q_backup_targets(cube, &q);
  PolicyLabels fit;
  for (std::size_t i = 0; i < cube.m; ++i) {
    const std::span<const double> row(targets.data() + i * cube.k, cube.k);
    const std::size_t j = argmax_lowest_action(row, cube.action_grid);
    fit.labels.push_back(cube.action_grid[j]);
    fit.label_values.push_back(row[j]);
  }
  return fit;
}

template <Regressor R, class Fitter>
auto extract_policy(const QModel<R>& q, const TransitionCube& cube, const Fitter& fit) {
  using P = std::invoke_result_t<const Fitter&, const Matrix&, std::span<const double>>;
  const auto labels = policy_labels(q, cube).labels;
  Matrix X(static_cast<Eigen::Index>(cube.m), static_cast<Eigen::Index>(cube.dim));
  for (std::size_t i = 0; i < cube.m; ++i) {
    const auto s = cube.state(i);
    for (std::size_t c = 0; c < cube.dim; ++c) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = s[c];
  }
  PolicyModel<P> policy;
  policy.regressor = fit(X, std::span<const double>(labels));
  const auto [lo, hi] = std::minmax_element(cube.action_grid.begin(), cube.action_grid.end());
  policy.action_lo = *lo;
  policy.action_hi = *hi;
  policy.mode = q.mode;
  return policy;
}

template <Regressor R>
PolicyModel<StagedPolyModel> extract_policy(const QModel<R>& q, const TransitionCube& cube, const EngineConfig& config) {
  return extract_policy(q, cube, default_fitter(cube, config));
}

/// Closed-loop controller for a typed model state. In finite-horizon mode the
/// stage index is appended to the policy input. Returns the unclipped policy
/// output; rollout projection clips it and records a warning.
template <Regressor R>
auto policy_controller(const PolicyModel<R>& policy) {
  return [&policy](std::size_t stage, const auto& state) {
    std::array<double, max_input_dim> row{};
    std::copy(state.begin(), state.end(), row.begin());
    std::size_t n = state.size();
    if (policy.mode == EngineMode::finite_horizon) row[n++] = static_cast<double>(stage);
    return policy.raw(std::span<const double>(row.data(), n));
  };
}

}  // namespace qbatch
