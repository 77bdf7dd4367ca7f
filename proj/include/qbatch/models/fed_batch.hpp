#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "qbatch/dynamics.hpp"
#include "qbatch/models/region.hpp"

namespace qbatch {

/// Isothermal fed-batch reactor, A + B -> C and 2B -> D, with B fed at
/// concentration b_feed. State (cA, cB, cC, cD, V); objective cC(t_f).
///
/// Kinetic constants are not part of the model definition. They come from the
/// run configuration, which also records whether they were taken from the
/// literature (`sourced`) or calibrated locally.
struct FedBatchParams {
  double k1 = 0.05;
  double k2 = 0.1;
  double b_feed = 1.0;
  double u_min = 0.0;
  double u_max = 0.01;
  double V_max = 1.0;
  double t_f = 120.0;
  std::size_t n_stages = 10;
  std::array<double, 5> initial{0.2, 0.0, 0.0, 0.0, 0.5};
  bool sourced = false;
  std::string source_note;

  void validate() const {
    if (!(k1 > 0.0 && k2 > 0.0 && b_feed > 0.0)) throw ConfigError("fed_batch: k1, k2, b_feed must be > 0");
    if (!(u_min <= u_max)) throw ConfigError("fed_batch: u_min must be <= u_max");
    if (!(t_f > 0.0)) throw ConfigError("fed_batch: t_f must be > 0");
    if (n_stages < 1) throw ConfigError("fed_batch: n_stages must be >= 1");
    if (!(initial[4] > 0.0 && initial[4] <= V_max)) throw ConfigError("fed_batch: initial V must be in (0, V_max]");
  }
};

struct FedBatchModel {
  using state_type = std::array<double, 5>;
  static constexpr std::size_t dimension = 5;
  static constexpr std::array<std::string_view, 5> component_names{"cA", "cB", "cC", "cD", "V"};
  static constexpr std::string_view action_name = "u";
  static constexpr std::string_view kind = "fed_batch";

  FedBatchParams params;

  void validate() const { params.validate(); }

  /// Well-mixed balances: the fed species gets (u/V)(b_feed - cB), every
  /// other species is diluted by -(u/V)c.
  state_type derivatives(const state_type& x, double u) const {
    const double V = x[4];
    if (!(V > 0.0)) throw DomainError("fed_batch: V must be > 0, got state " + format_values(x));
    const double r1 = params.k1 * x[0] * x[1];
    const double r2 = params.k2 * x[1] * x[1];
    const double d = u / V;
    return {-r1 - d * x[0], -r1 - 2.0 * r2 + d * (params.b_feed - x[1]), r1 - d * x[2], r2 - d * x[3], u};
  }

  int clamp_nonnegative(state_type& x) const {
    int n = 0;
    for (std::size_t i = 0; i < 4; ++i)
      if (x[i] < 0.0) {
        x[i] = 0.0;
        ++n;
      }
    return n;
  }

  ConstraintFlags check_constraints(const state_type& x) const { return {x[4] > params.V_max + 1e-9, false}; }

  double project_action(const state_type& x, double u, const IntegratorConfig& cfg) const {
    u = std::clamp(u, params.u_min, params.u_max);
    const double cap = std::max(0.0, (params.V_max - x[4]) / cfg.stage_duration);
    return std::max(params.u_min, std::min(u, cap));
  }

  RewardSpec reward_spec() const { return {RewardKind::terminal_yield, 2, 0.0}; }
  double performance(const state_type& x) const { return x[2]; }
  bool is_terminal(const state_type&) const { return false; }
  state_type initial_state() const { return params.initial; }
  double action_min() const { return params.u_min; }
  double action_max() const { return params.u_max; }
  std::size_t n_stages() const { return params.n_stages; }
  double stage_duration() const { return params.t_f / static_cast<double>(params.n_stages); }

  std::vector<double> default_action_grid() const {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(params.u_min + (params.u_max - params.u_min) * i / 10.0);
    return grid;
  }

  InitRegion default_init_region() const {
    const auto& s = params.initial;
    return {{0.1, 0.2}, {s[1], s[1]}, {s[2], s[2]}, {s[3], s[3]}, {0.5, 0.9}};
  }

  bool state_valid(const state_type& x) const {
    if (!all_finite(x)) return false;
    for (std::size_t i = 0; i < 4; ++i)
      if (x[i] < 0.0) return false;
    return x[4] > 0.0 && x[4] <= params.V_max + 1e-9;
  }

  state_type sample_initial(const InitRegion& region, Rng& rng) const {
    check_region(region, dimension, "fed_batch");
    for (std::size_t i = 0; i < 4; ++i)
      if (region[i].lo < 0.0) throw ConfigError("fed_batch: init region allows negative concentrations");
    if (!(region[4].lo > 0.0) || region[4].hi > params.V_max + 1e-9)
      throw ConfigError("fed_batch: init region V outside (0, V_max]");
    state_type x{};
    for (std::size_t i = 0; i < dimension; ++i) x[i] = rng.uniform(region[i].lo, region[i].hi);
    return x;
  }
};

}  // namespace qbatch
