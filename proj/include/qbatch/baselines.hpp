#pragma once

// Open-loop comparison methods over the piecewise-constant control space:
// Luus-style iterative dynamic programming, and a multi-restart Nelder-Mead
// search ("cvp-direct") used in place of an interior-point NLP solver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "qbatch/common.hpp"
#include "qbatch/dynamics.hpp"

namespace qbatch {

struct IdpConfig {
  std::size_t candidates_per_stage = 15;
  std::size_t passes = 20;
  double contraction = 0.85;
  std::uint64_t seed = 1;
  /// When non-empty, the first pass tries exactly these values at every stage
  /// instead of random candidates.
  std::vector<double> first_pass_grid;

  void validate() const {
    if (candidates_per_stage < 2) throw ConfigError("idp: candidates_per_stage must be >= 2");
    if (passes < 1) throw ConfigError("idp: passes must be >= 1");
    if (!(contraction > 0.0 && contraction < 1.0)) throw ConfigError("idp: contraction must be in (0, 1)");
  }
};

struct CvpConfig {
  std::size_t restarts = 5;
  double tolerance = 1e-8;
  std::size_t max_evaluations = 5000;
  std::uint64_t seed = 1;

  void validate() const {
    if (restarts < 1) throw ConfigError("cvp: restarts must be >= 1");
    if (max_evaluations < 1) throw ConfigError("cvp: max_evaluations must be >= 1");
  }
};

struct OptimizerResult {
  Schedule schedule;
  std::vector<double> trace;  // best objective after each pass / restart
  std::size_t evaluations = 0;
};

/// Objective of the open-loop rollout of `schedule` (to be maximized).
template <ReactorModel M>
double evaluate_schedule(const M& model, const Schedule& schedule, const IntegratorConfig& config) {
  if (schedule.actions.size() != model.n_stages())
    throw ConfigError("evaluate_schedule: schedule has " + std::to_string(schedule.actions.size()) +
                      " stages, model has " + std::to_string(model.n_stages()));
  return rollout(model, schedule_controller(schedule), model.initial_state(), config, model.n_stages()).objective;
}

using ScheduleObjective = std::function<double(const std::vector<double>&)>;

/// Backward-sweep region-contraction IDP on a generic schedule objective.
inline OptimizerResult idp_optimize(std::size_t n_stages, double lo, double hi, const ScheduleObjective& objective,
                                    const IdpConfig& config) {
  config.validate();
  OptimizerResult out;
  std::vector<double> incumbent(n_stages, 0.5 * (lo + hi));
  double best = objective(incumbent);
  out.evaluations = 1;
  double region = hi - lo;
  Rng rng(derive_seed(config.seed, 0x1d9));

  for (std::size_t pass = 0; pass < config.passes; ++pass) {
    for (std::size_t s = n_stages; s-- > 0;) {
      std::vector<double> candidates;
      if (pass == 0 && !config.first_pass_grid.empty()) {
        candidates = config.first_pass_grid;
      } else {
        for (std::size_t c = 0; c < config.candidates_per_stage; ++c)
          candidates.push_back(incumbent[s] + region * (rng.uniform() - 0.5));
      }
      const double keep = incumbent[s];
      double chosen = keep;
      for (double c : candidates) {
        incumbent[s] = std::clamp(c, lo, hi);
        const double value = objective(incumbent);
        ++out.evaluations;
        if (value > best) {
          best = value;
          chosen = incumbent[s];
        }
      }
      incumbent[s] = chosen;
    }
    out.trace.push_back(best);
    region *= config.contraction;
  }
  out.schedule.actions = incumbent;
  out.schedule.objective = best;
  return out;
}

/// Replaces each action by what the model actually applies after projection
/// (stages after an early minimum-time stop keep the lower bound).
template <ReactorModel M>
Schedule feasible_schedule(const M& model, const Schedule& schedule, const IntegratorConfig& integrator) {
  const auto traj = rollout(model, schedule_controller(schedule), model.initial_state(), integrator, model.n_stages());
  return schedule_from(traj, model.n_stages(), model.action_min());
}

template <ReactorModel M>
OptimizerResult idp_optimize(const M& model, const IdpConfig& config, const IntegratorConfig& integrator) {
  auto out = idp_optimize(model.n_stages(), model.action_min(), model.action_max(),
                      [&](const std::vector<double>& u) {
                        return evaluate_schedule(model, Schedule{u, 0.0}, integrator);
                      },
                      config);
  out.schedule = feasible_schedule(model, out.schedule, integrator);
  return out;
}

namespace detail {

/// Nelder-Mead maximization on the unit box (points outside are clamped
/// before evaluation). Returns the best vertex.
inline std::pair<std::vector<double>, double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                                          std::vector<double> start, double step, double tol,
                                                          std::size_t max_evals, std::size_t& evals) {
  const std::size_t n = start.size();
  auto clamp01 = [](std::vector<double> x) {
    for (double& v : x) v = std::clamp(v, 0.0, 1.0);
    return x;
  };
  // Work on the negated objective so the simplex logic is the usual minimizer.
  auto g = [&](const std::vector<double>& x) {
    ++evals;
    return -f(clamp01(x));
  };

  std::vector<std::vector<double>> pts(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += (start[i] + step <= 1.0 ? step : -step);
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = g(pts[i]);
  std::size_t used = n + 1;

  std::vector<std::size_t> order(n + 1);
  while (used < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t ib = order.front();
    const std::size_t iw = order.back();
    const std::size_t isw = order[n - 1];
    if (vals[iw] - vals[ib] <= tol) {
      double diam = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t c = 0; c < n; ++c) diam = std::max(diam, std::abs(pts[i][c] - pts[ib][c]));
      if (diam <= 1e-6 || vals[iw] - vals[ib] <= 0.0) break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != iw)
        for (std::size_t c = 0; c < n; ++c) centroid[c] += pts[i][c] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t c = 0; c < n; ++c) p[c] = centroid[c] + t * (pts[iw][c] - centroid[c]);
      return p;
    };

    auto xr = along(-1.0);
    const double fr = g(xr);
    ++used;
    if (fr < vals[ib]) {
      auto xe = along(-2.0);
      const double fe = g(xe);
      ++used;
      if (fe < fr) {
        pts[iw] = xe;
        vals[iw] = fe;
      } else {
        pts[iw] = xr;
        vals[iw] = fr;
      }
    } else if (fr < vals[isw]) {
      pts[iw] = xr;
      vals[iw] = fr;
    } else {
      const bool outside = fr < vals[iw];
      auto xc = along(outside ? -0.5 : 0.5);
      const double fc = g(xc);
      ++used;
      if (fc < (outside ? fr : vals[iw])) {
        pts[iw] = xc;
        vals[iw] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == ib) continue;
          for (std::size_t c = 0; c < n; ++c) pts[i][c] = pts[ib][c] + 0.5 * (pts[i][c] - pts[ib][c]);
          vals[i] = g(pts[i]);
          ++used;
        }
      }
    }
  }
  const auto ib = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {clamp01(pts[ib]), -vals[ib]};
}

}  // namespace detail

/// Multi-restart Nelder-Mead over the piecewise-constant parameterization.
/// Restart 0 starts at the middle of the action range, later restarts at
/// seeded uniform points. Bounds are enforced by projection.
inline OptimizerResult cvp_optimize(std::size_t n_stages, double lo, double hi, const ScheduleObjective& objective,
                                    const CvpConfig& config) {
  config.validate();
  OptimizerResult out;
  const double width = hi - lo;
  auto to_actions = [&](const std::vector<double>& z) {
    std::vector<double> u(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) u[i] = lo + width * z[i];
    return u;
  };
  auto f = [&](const std::vector<double>& z) { return objective(to_actions(z)); };

  Rng rng(derive_seed(config.seed, 0xc7f));
  std::vector<double> best_z;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < config.restarts; ++r) {
    std::vector<double> start(n_stages, 0.5);
    if (r > 0)
      for (double& v : start) v = rng.uniform();
    auto [z, value] = detail::nelder_mead(f, start, 0.1, config.tolerance, config.max_evaluations, out.evaluations);
    // One polishing pass from the converged point with a small simplex.
    auto [z2, value2] = detail::nelder_mead(f, z, 0.01, config.tolerance, config.max_evaluations, out.evaluations);
    if (value2 > value) {
      z = z2;
      value = value2;
    }
    if (value > best) {
      best = value;
      best_z = z;
    }
    out.trace.push_back(best);
  }
  out.schedule.actions = to_actions(best_z);
  out.schedule.objective = best;
  return out;
}

template <ReactorModel M>
OptimizerResult cvp_optimize(const M& model, const CvpConfig& config, const IntegratorConfig& integrator) {
  auto out = cvp_optimize(model.n_stages(), model.action_min(), model.action_max(),
                          [&](const std::vector<double>& u) {
                            return evaluate_schedule(model, Schedule{u, 0.0}, integrator);
                          },
                          config);
  out.schedule = feasible_schedule(model, out.schedule, integrator);
  return out;
}

/// Best constant-control schedule over `levels` evenly spaced values of the
/// action range (both ends included).
template <ReactorModel M>
Schedule best_constant_schedule(const M& model, const IntegratorConfig& integrator, std::size_t levels) {
  Schedule best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < levels; ++i) {
    const double u = model.action_min() +
                     (model.action_max() - model.action_min()) * static_cast<double>(i) / static_cast<double>(levels - 1);
    Schedule s{std::vector<double>(model.n_stages(), u), 0.0};
    s.objective = evaluate_schedule(model, s, integrator);
    if (s.objective > best.objective) best = s;
  }
  return best;
}

}  // namespace qbatch
