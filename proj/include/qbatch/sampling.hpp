#pragma once

// Two-phase sample generation: random-action episodes produce state samples,
// then every sample is paired with every grid action to fill the transition
// cube used by fitted Q-iteration.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qbatch/common.hpp"
#include "qbatch/dynamics.hpp"
#include "qbatch/models/region.hpp"

namespace qbatch {

struct SamplingConfig {
  std::size_t n_episodes = 40;
  std::size_t n_stages = 10;
  std::uint64_t seed = 1;
  InitRegion init_region;
  std::vector<double> action_grid;

  std::size_t sample_count() const { return n_episodes * n_stages; }

  void validate() const {
    if (n_episodes < 1) throw ConfigError("sampling: n_episodes must be >= 1");
    if (n_stages < 1) throw ConfigError("sampling: n_stages must be >= 1");
    if (action_grid.size() < 2) throw ConfigError("sampling: action grid needs at least 2 values");
    for (std::size_t i = 1; i < action_grid.size(); ++i)
      if (!(action_grid[i] > action_grid[i - 1])) throw ConfigError("sampling: action grid must be strictly increasing");
  }
};

struct Provenance {
  std::size_t episode = 0;
  std::size_t stage = 0;
};

template <class State>
struct StateSampleSet {
  std::vector<State> rows;
  std::vector<Provenance> provenance;

  std::size_t size() const { return rows.size(); }
};

/// Each episode draws an initial state from the region and applies uniformly
/// drawn grid actions; the state at the start of each stage is recorded.
/// Episode e uses its own stream derive_seed(seed, e), so the output does not
/// depend on generation order.
template <ReactorModel M>
StateSampleSet<StateOf<M>> generate_state_samples(const M& model, const SamplingConfig& config,
                                                  const IntegratorConfig& integrator) {
  config.validate();
  StateSampleSet<StateOf<M>> set;
  set.rows.reserve(config.sample_count());
  set.provenance.reserve(config.sample_count());
  for (std::size_t e = 0; e < config.n_episodes; ++e) {
    Rng rng(derive_seed(config.seed, e));
    StateOf<M> x = model.sample_initial(config.init_region, rng);
    if (!model.state_valid(x))
      throw ConfigError("sampling: initial state " + format_values(x) + " violates the model's state invariants");
    for (std::size_t s = 0; s < config.n_stages; ++s) {
      set.rows.push_back(x);
      set.provenance.push_back({e, s});
      const double a = config.action_grid[rng.index(config.action_grid.size())];
      const double u = model.project_action(x, a, integrator);
      x = simulate_stage(model, x, u, integrator).next_state;
    }
  }
  return set;
}

/// Model-agnostic m x k table of (state, action) -> (next state, reward).
///
/// When `stage_feature` is set the stage index is appended to every state
/// row, and successors of the last stage are terminal.
struct TransitionCube {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t dim = 0;
  bool stage_feature = false;
  std::vector<double> action_grid;
  std::vector<double> states;       // m x dim
  std::vector<double> next_states;  // m x k x dim
  std::vector<double> rewards;      // m x k
  std::vector<double> applied;      // m x k, action after projection
  std::vector<std::uint8_t> terminal;  // m x k

  std::span<const double> state(std::size_t i) const { return {states.data() + i * dim, dim}; }
  std::span<const double> next_state(std::size_t i, std::size_t j) const {
    return {next_states.data() + (i * k + j) * dim, dim};
  }
  double reward(std::size_t i, std::size_t j) const { return rewards[i * k + j]; }
  bool is_terminal(std::size_t i, std::size_t j) const { return terminal[i * k + j] != 0; }

  void resize(std::size_t rows, std::size_t actions, std::size_t d) {
    m = rows;
    k = actions;
    dim = d;
    states.assign(m * dim, 0.0);
    next_states.assign(m * k * dim, 0.0);
    rewards.assign(m * k, 0.0);
    applied.assign(m * k, 0.0);
    terminal.assign(m * k, 0);
  }
};

struct CubeOptions {
  bool stage_feature = false;
  std::size_t horizon = 0;  // stages; used with stage_feature
};

template <ReactorModel M>
TransitionCube build_transition_cube(const M& model, const StateSampleSet<StateOf<M>>& samples,
                                     const std::vector<double>& action_grid, const IntegratorConfig& integrator,
                                     const CubeOptions& options = {}) {
  if (samples.size() == 0) throw DomainError("build_transition_cube: empty sample set");
  if (action_grid.empty()) throw DomainError("build_transition_cube: empty action grid");
  constexpr std::size_t n = M::dimension;
  TransitionCube cube;
  cube.stage_feature = options.stage_feature;
  cube.action_grid = action_grid;
  cube.resize(samples.size(), action_grid.size(), n + (options.stage_feature ? 1 : 0));

  for (std::size_t i = 0; i < cube.m; ++i) {
    const auto& x = samples.rows[i];
    const std::size_t stage = samples.provenance[i].stage;
    double* row = cube.states.data() + i * cube.dim;
    std::copy(x.begin(), x.end(), row);
    if (options.stage_feature) row[n] = static_cast<double>(stage);
    for (std::size_t j = 0; j < cube.k; ++j) {
      const double u = model.project_action(x, action_grid[j], integrator);
      StageResult<StateOf<M>> res;
      try {
        res = simulate_stage(model, x, u, integrator);
      } catch (const IntegrationError& err) {
        throw IntegrationError("cube entry (" + std::to_string(i) + ", " + std::to_string(j) + "): " + err.what(),
                               err.state());
      }
      const std::size_t e = i * cube.k + j;
      double* next = cube.next_states.data() + e * cube.dim;
      std::copy(res.next_state.begin(), res.next_state.end(), next);
      bool term = model.reward_spec().kind == RewardKind::minimum_time && model.is_terminal(res.next_state);
      if (options.stage_feature) {
        next[n] = static_cast<double>(stage + 1);
        term = term || stage + 1 >= options.horizon;
      }
      cube.rewards[e] = res.stage_reward;
      cube.applied[e] = u;
      cube.terminal[e] = term ? 1 : 0;
    }
  }
  return cube;
}

}  // namespace qbatch
