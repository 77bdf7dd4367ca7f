#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qbatch/dynamics.hpp"
#include "qbatch/models/region.hpp"

namespace qbatch {

/// Heat-release data for the cooling-failure bound on cB.
struct SafetyBlock {
  double dH = -60000.0;  // J/mol
  double rho = 900.0;    // g/l
  double cp = 4.2;       // J/(g K)
  double T = 343.15;     // K
  double T_max = 353.15; // K
};

/// Largest cB for which an adiabatic runaway stays below T_max:
/// rho * cp * (T_max - T) / (-dH).
inline double cb_max_from_safety(const SafetyBlock& s) {
  if (!(-s.dH > 0.0)) throw ConfigError("semi_batch: reaction enthalpy must be negative (exothermic)");
  if (s.T_max < s.T) throw ConfigError("semi_batch: T_max must be >= T");
  return s.rho * s.cp * (s.T_max - s.T) / (-s.dH);
}

/// Semi-batch A + B -> C, B fed at cB_in. Minimum-time objective on the
/// product concentration reconstructed from the A balance.
struct SemiBatchParams {
  double k = 0.0482;     // l/(mol h)
  double cB_in = 2.0;    // mol/l
  double cA0 = 2.0;      // mol/l
  double cB0 = 0.63;     // mol/l
  double cC0 = 0.0;      // mol/l
  double V0 = 0.7;       // l
  double V_max = 1.0;    // l
  double u_max = 0.1;    // l/h
  double target_cC = 0.7;
  double t_max = 50.0;   // h
  std::size_t n_stages = 10;
  std::optional<SafetyBlock> safety = SafetyBlock{};
  double cB_max_value = 0.63;  // used only when `safety` is absent

  double cB_max() const { return safety ? cb_max_from_safety(*safety) : cB_max_value; }

  void validate() const {
    if (!(k > 0.0 && cB_in > 0.0)) throw ConfigError("semi_batch: k and cB_in must be > 0");
    if (!(V0 > 0.0 && V0 <= V_max)) throw ConfigError("semi_batch: V0 must be in (0, V_max]");
    if (!(u_max >= 0.0)) throw ConfigError("semi_batch: u_max must be >= 0");
    if (!(t_max > 0.0)) throw ConfigError("semi_batch: t_max must be > 0");
    if (n_stages < 1) throw ConfigError("semi_batch: n_stages must be >= 1");
    (void)cB_max();
  }
};

/// Product concentration from the A balance:
/// cC = (cA0 V0 + cC0 V0 - cA V) / V.
inline double cC_from_balance(double cA, double V, const SemiBatchParams& p) {
  if (!(V > 0.0)) throw DomainError("semi_batch: V must be > 0");
  const double cC = (p.cA0 * p.V0 + p.cC0 * p.V0 - cA * V) / V;
  if (cC < -1e-9) throw ConsistencyError("semi_batch: negative product concentration from A balance");
  return cC;
}

struct SemiBatchModel {
  /// (cA, cB, V, t_elapsed)
  using state_type = std::array<double, 4>;
  static constexpr std::size_t dimension = 4;
  static constexpr std::array<std::string_view, 4> component_names{"cA", "cB", "V", "t"};
  static constexpr std::string_view action_name = "u";
  static constexpr std::string_view kind = "semi_batch";

  /// Search tolerance on cB during projection; invariants are asserted at 1e-6.
  static constexpr double safety_search_tol = 1e-9;

  SemiBatchParams params;

  void validate() const { params.validate(); }

  state_type derivatives(const state_type& x, double u) const {
    const double V = x[2];
    if (!(V > 0.0)) throw DomainError("semi_batch: V must be > 0, got state " + format_values(x));
    const double r = params.k * x[0] * x[1];
    const double d = u / V;
    return {-r - d * x[0], -r + d * (params.cB_in - x[1]), u, 1.0};
  }

  int clamp_nonnegative(state_type& x) const {
    int n = 0;
    for (std::size_t i = 0; i < 2; ++i)
      if (x[i] < 0.0) {
        x[i] = 0.0;
        ++n;
      }
    return n;
  }

  ConstraintFlags check_constraints(const state_type& x) const {
    return {x[2] > params.V_max + 1e-9, x[1] > params.cB_max() + 1e-6};
  }

  double cC(const state_type& x) const { return cC_from_balance(x[0], x[2], params); }

  /// Clip to [0, u_max], cap the volume at V_max by the end of the stage, then
  /// bisect (to 1e-6) for the largest feed that keeps cB <= cB_max at every
  /// substep of the stage.
  double project_action(const state_type& x, double u, const IntegratorConfig& cfg) const {
    u = std::clamp(u, 0.0, params.u_max);
    u = std::min(u, std::max(0.0, (params.V_max - x[2]) / cfg.stage_duration));
    if (u <= 0.0) return 0.0;
    const double cb_max = params.cB_max();
    if (keeps_cb_below(x, u, cfg, cb_max)) return u;
    double lo = 0.0;
    double hi = u;
    while (hi - lo > 1e-6) {
      const double mid = 0.5 * (lo + hi);
      if (keeps_cb_below(x, mid, cfg, cb_max))
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  }

  bool keeps_cb_below(const state_type& x0, double u, const IntegratorConfig& cfg, double cb_max) const {
    const double h = cfg.substep();
    auto derivs = [this](const state_type& s, double v) { return derivatives(s, v); };
    state_type x = x0;
    for (std::size_t s = 0; s < cfg.substeps_per_stage; ++s) {
      x = rk4_step(x, u, h, derivs);
      clamp_nonnegative(x);
      if (x[1] > cb_max + safety_search_tol) return false;
    }
    return true;
  }

  RewardSpec reward_spec() const { return {RewardKind::minimum_time, 0, params.target_cC}; }
  double performance(const state_type& x) const { return cC(x); }
  bool is_terminal(const state_type& x) const {
    return cC(x) >= params.target_cC || x[3] >= params.t_max - 1e-9;
  }
  state_type initial_state() const { return {params.cA0, params.cB0, params.V0, 0.0}; }
  double action_min() const { return 0.0; }
  double action_max() const { return params.u_max; }
  std::size_t n_stages() const { return params.n_stages; }
  double stage_duration() const { return params.t_max / static_cast<double>(params.n_stages); }

  std::vector<double> default_action_grid() const {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(params.u_max * i / 10.0);
    return grid;
  }

  InitRegion default_init_region() const {
    return {{0.3 * params.cA0, params.cA0}, {params.cB0, params.cB0}, {params.V0, params.V0}, {0.0, 0.0}};
  }

  bool state_valid(const state_type& x) const {
    return all_finite(x) && x[0] >= 0.0 && x[1] >= 0.0 && x[1] <= params.cB_max() + 1e-6 && x[2] > 0.0 &&
           x[2] <= params.V_max + 1e-9 && x[3] >= 0.0;
  }

  state_type sample_initial(const InitRegion& region, Rng& rng) const {
    check_region(region, dimension, "semi_batch");
    if (region[0].lo < 0.0 || region[1].lo < 0.0) throw ConfigError("semi_batch: init region allows negative concentrations");
    if (region[1].hi > params.cB_max() + 1e-6) throw ConfigError("semi_batch: init region cB above cB_max");
    if (!(region[2].lo > 0.0) || region[2].hi > params.V_max + 1e-9) throw ConfigError("semi_batch: init region V outside (0, V_max]");
    if (region[3].lo < 0.0) throw ConfigError("semi_batch: init region t must be >= 0");
    state_type x{};
    for (std::size_t i = 0; i < dimension; ++i) x[i] = rng.uniform(region[i].lo, region[i].hi);
    return x;
  }
};

}  // namespace qbatch
