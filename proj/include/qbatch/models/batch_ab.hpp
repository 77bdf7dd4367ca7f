#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

#include "qbatch/dynamics.hpp"
#include "qbatch/models/region.hpp"

namespace qbatch {

/// Batch reactor A -> B -> C with temperature as the manipulated variable.
/// State (x1, x2): mole fractions of A and B. Objective: x2 at t_f.
struct BatchABModel {
  using state_type = std::array<double, 2>;
  static constexpr std::size_t dimension = 2;
  static constexpr std::array<std::string_view, 2> component_names{"x1", "x2"};
  static constexpr std::string_view action_name = "T";
  static constexpr std::string_view kind = "batch_ab";

  double T_min = 298.0;
  double T_max = 398.0;
  double t_f = 1.0;
  std::size_t stages = 10;
  double k_a = 4000.0;
  double E_a = 2500.0;
  double k_b = 6.2e5;
  double E_b = 5000.0;
  state_type x0{1.0, 0.0};

  void validate() const {
    if (!(T_min < T_max)) throw ConfigError("batch_ab: T_min must be < T_max");
    if (!(t_f > 0.0)) throw ConfigError("batch_ab: t_f must be > 0");
    if (stages < 1) throw ConfigError("batch_ab: n_stages must be >= 1");
  }

  state_type derivatives(const state_type& x, double T) const {
    const double r1 = k_a * std::exp(-E_a / T) * x[0] * x[0];
    const double r2 = k_b * std::exp(-E_b / T) * x[1];
    return {-r1, r1 - r2};
  }

  int clamp_nonnegative(state_type& x) const {
    int n = 0;
    for (double& v : x)
      if (v < 0.0) {
        v = 0.0;
        ++n;
      }
    return n;
  }

  ConstraintFlags check_constraints(const state_type&) const { return {}; }

  double project_action(const state_type&, double T, const IntegratorConfig&) const {
    return std::clamp(T, T_min, T_max);
  }

  RewardSpec reward_spec() const { return {RewardKind::terminal_yield, 1, 0.0}; }
  double performance(const state_type& x) const { return x[1]; }
  bool is_terminal(const state_type&) const { return false; }
  state_type initial_state() const { return x0; }
  double action_min() const { return T_min; }
  double action_max() const { return T_max; }
  std::size_t n_stages() const { return stages; }
  double stage_duration() const { return t_f / static_cast<double>(stages); }

  std::vector<double> default_action_grid() const {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(T_min + (T_max - T_min) * i / 10.0);
    return grid;
  }

  InitRegion default_init_region() const { return {{0.5, 1.0}, {0.0, 1.0}}; }

  bool state_valid(const state_type& x) const {
    return all_finite(x) && x[0] >= 0.0 && x[1] >= 0.0 && x[0] + x[1] <= 1.0 + 1e-9;
  }

  /// Draws x1 uniformly from its interval, then x2 from its interval capped
  /// at 1 - x1 so that x1 + x2 <= 1.
  state_type sample_initial(const InitRegion& region, Rng& rng) const {
    check_region(region, dimension, "batch_ab");
    if (region[0].lo < 0.0 || region[0].hi > 1.0 || region[1].lo < 0.0 || region[0].lo + region[1].lo > 1.0)
      throw ConfigError("batch_ab: init region outside 0 <= x1, x2 and x1 + x2 <= 1");
    const double x1 = rng.uniform(region[0].lo, region[0].hi);
    const double hi2 = std::max(region[1].lo, std::min(region[1].hi, 1.0 - x1));
    return {x1, rng.uniform(region[1].lo, hi2)};
  }
};

}  // namespace qbatch
