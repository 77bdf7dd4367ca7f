#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qbatch/baselines.hpp"
#include "qbatch/dynamics.hpp"
#include "qbatch/models/batch_ab.hpp"
#include "qbatch/models/fed_batch.hpp"
#include "qbatch/models/semi_batch.hpp"
#include "toy_models.hpp"

using namespace qbatch;
using qbatch::testing::DecayModel;
using qbatch::testing::PushModel;
using qbatch::testing::ReachModel;

namespace {

using S1 = std::array<double, 1>;
auto decay = [](const S1& x, double) { return S1{-x[0]}; };

double decay_error(int steps) {
  S1 x{1.0};
  const double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) x = rk4_step(x, 0.0, h, decay);
  return std::abs(x[0] - std::exp(-1.0));
}

/// Plain RK4 with many substeps, no clamp, as an independent reference.
template <class M>
StateOf<M> reference_stage(const M& m, StateOf<M> x, double u, double duration, int steps) {
  auto f = [&](const StateOf<M>& s, double v) { return m.derivatives(s, v); };
  for (int i = 0; i < steps; ++i) x = rk4_step(x, u, duration / steps, f);
  return x;
}

}  // namespace

TEST(Rk4, ExponentialSingleStep) {
  const S1 x = rk4_step(S1{1.0}, 0.0, 0.1, decay);
  EXPECT_NEAR(x[0], 0.9048375, 1e-6);
  EXPECT_NEAR(x[0], std::exp(-0.1), 1e-6);
}

TEST(Rk4, ZeroDerivativeLeavesStateUnchanged) {
  auto zero = [](const std::array<double, 3>&, double) { return std::array<double, 3>{}; };
  const std::array<double, 3> x{0.3, -2.0, 7.5};
  EXPECT_EQ(rk4_step(x, 1.0, 0.37, zero), x);
}

TEST(Rk4, SingleStepErrorShrinksSixteenfold) {
  const double e1 = std::abs(rk4_step(S1{1.0}, 0.0, 0.1, decay)[0] - std::exp(-0.1));
  S1 half{1.0};
  half = rk4_step(half, 0.0, 0.05, decay);
  half = rk4_step(half, 0.0, 0.05, decay);
  const double e2 = std::abs(half[0] - std::exp(-0.1));
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Rk4, GlobalConvergenceRatio) {
  for (int n : {10, 20, 40}) {
    const double ratio = decay_error(n) / decay_error(2 * n);
    EXPECT_GE(ratio, 12.0) << n;
    EXPECT_LE(ratio, 20.0) << n;
  }
}

TEST(Rk4, NonFiniteDerivativeThrows) {
  auto bad = [](const S1&, double) { return S1{std::nan("")}; };
  EXPECT_THROW(rk4_step(S1{1.0}, 0.0, 0.1, bad), IntegrationError);
}

TEST(SimulateStage, MatchesHighResolutionReference) {
  BatchABModel m;
  const IntegratorConfig cfg{20, 0.1};
  const auto res = simulate_stage(m, {1.0, 0.0}, 398.0, cfg);
  const auto ref = reference_stage(m, BatchABModel::state_type{1.0, 0.0}, 398.0, 0.1, 10000);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(res.next_state[i], ref[i], 1e-5);
}

TEST(SimulateStage, VanishingDuration) {
  BatchABModel m;
  const IntegratorConfig cfg{1, 1e-12};
  const auto res = simulate_stage(m, {0.7, 0.2}, 350.0, cfg);
  EXPECT_NEAR(res.next_state[0], 0.7, 1e-9);
  EXPECT_NEAR(res.next_state[1], 0.2, 1e-9);
  EXPECT_NEAR(res.stage_reward, 0.0, 1e-9);
}

TEST(SimulateStage, FedBatchFixedPoint) {
  FedBatchModel m;
  const FedBatchModel::state_type x{0.0, 0.0, 0.0, 0.0, 0.6};
  const auto res = simulate_stage(m, x, 0.0, integrator_for(m));
  EXPECT_EQ(res.next_state, x);
  EXPECT_EQ(res.stage_reward, 0.0);
}

TEST(SimulateStage, ClampCountsNegativeExcursions) {
  // Constant drain dx/dt = -1 from x = 0.5 crosses zero halfway through.
  struct Drain : DecayModel {
    state_type derivatives(const state_type&, double) const { return {-1.0}; }
    int clamp_nonnegative(state_type& x) const {
      if (x[0] < 0.0) {
        x[0] = 0.0;
        return 1;
      }
      return 0;
    }
  } m;
  const auto res = simulate_stage(m, {0.5}, 0.0, IntegratorConfig{4, 1.0});
  EXPECT_EQ(res.next_state[0], 0.0);
  EXPECT_EQ(res.clamp_count, 2);
}

TEST(StageReward, IdenticalStatesGiveZero) {
  BatchABModel m;
  EXPECT_EQ(stage_reward(m, {0.4, 0.3}, {0.4, 0.3}, 0.1), 0.0);
  SemiBatchModel s;
  const auto x = s.initial_state();
  // Before the target, an unchanged state still costs the elapsed time.
  EXPECT_DOUBLE_EQ(stage_reward(s, x, x, 0.5), -0.5);
}

TEST(StageReward, MinimumTimeCrossingIsInterpolated) {
  ReachModel m;
  EXPECT_DOUBLE_EQ(stage_reward(m, {0.0}, {0.5}, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(stage_reward(m, {0.5}, {1.5}, 1.0), -0.5);
  EXPECT_DOUBLE_EQ(stage_reward(m, {1.0}, {2.0}, 1.0), 0.0);
}

TEST(StageReward, TelescopesToYieldIncrement) {
  BatchABModel m;
  const auto cfg = integrator_for(m);
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> T(298.0, 398.0);
  for (int trial = 0; trial < 20; ++trial) {
    Schedule s;
    for (int k = 0; k < 10; ++k) s.actions.push_back(T(gen));
    const auto traj = rollout(m, schedule_controller(s), cfg);
    double sum = 0.0;
    for (double r : traj.stage_rewards) sum += r;
    EXPECT_NEAR(sum, traj.final_state()[1] - traj.states.front()[1], 1e-9);
  }
}

TEST(Rollout, ZeroStagesKeepsInitialState) {
  BatchABModel m;
  const auto traj = rollout(m, [](std::size_t, const auto&) { return 350.0; }, m.initial_state(),
                            integrator_for(m), 0);
  ASSERT_EQ(traj.states.size(), 1u);
  EXPECT_EQ(traj.states[0], m.initial_state());
  EXPECT_EQ(traj.objective, 0.0);
}

TEST(Rollout, OpenLoopMatchesEvaluateSchedule) {
  BatchABModel m;
  const auto cfg = integrator_for(m);
  Schedule s{{360, 350, 340, 335, 330, 330, 328, 327, 326, 325}, 0.0};
  const auto traj = rollout(m, schedule_controller(s), cfg);
  EXPECT_EQ(traj.objective, evaluate_schedule(m, s, cfg));
}

TEST(Rollout, StateIgnoringPolicyMatchesOpenLoop) {
  FedBatchModel m;
  const auto cfg = integrator_for(m);
  Schedule s{{0.01, 0.008, 0.006, 0.005, 0.004, 0.003, 0.002, 0.001, 0.0, 0.0}, 0.0};
  const auto open = rollout(m, schedule_controller(s), cfg);
  const auto closed = rollout(m, [&](std::size_t k, const FedBatchModel::state_type&) { return s.actions[k]; }, cfg);
  EXPECT_EQ(open.states, closed.states);
  EXPECT_EQ(open.objective, closed.objective);
}

TEST(Rollout, Deterministic) {
  SemiBatchModel m;
  const auto cfg = integrator_for(m);
  Schedule s{{0.03, 0.02, 0.01, 0, 0, 0, 0, 0, 0, 0}, 0.0};
  const auto a = rollout(m, schedule_controller(s), cfg);
  const auto b = rollout(m, schedule_controller(s), cfg);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.stage_rewards, b.stage_rewards);
}

TEST(Rollout, OutOfBoundsRequestIsProjectedAndWarned) {
  BatchABModel m;
  const auto traj = rollout(m, [](std::size_t, const auto&) { return 500.0; }, integrator_for(m));
  for (double u : traj.actions) EXPECT_EQ(u, 398.0);
  EXPECT_EQ(traj.warnings.size(), 10u);
}

TEST(Rollout, NonFiniteRequestThrows) {
  BatchABModel m;
  EXPECT_THROW(rollout(m, [](std::size_t, const auto&) { return std::nan(""); }, integrator_for(m)), DomainError);
}

TEST(Rollout, MinimumTimeStopsAtTarget) {
  ReachModel m;
  const auto traj = rollout(m, [](std::size_t, const auto&) { return 0.8; }, integrator_for(m));
  // 0.4 per stage: crosses 1.0 during stage 2, at 2.5 stages = 1.25 time units.
  EXPECT_EQ(traj.stage_count(), 3u);
  EXPECT_TRUE(traj.target_reached);
  EXPECT_NEAR(completion_time(traj), 1.25, 1e-12);
}

TEST(Rollout, MinimumTimeMissReportsHorizon) {
  ReachModel m;
  const auto traj = rollout(m, [](std::size_t, const auto&) { return 0.0; }, integrator_for(m));
  EXPECT_FALSE(traj.target_reached);
  EXPECT_EQ(traj.stage_count(), 10u);
  EXPECT_NEAR(completion_time(traj), 5.0, 1e-12);
}

TEST(Integrator, RejectsBadConfig) {
  EXPECT_THROW((IntegratorConfig{0, 0.1}.validate()), ConfigError);
  EXPECT_THROW((IntegratorConfig{20, 0.0}.validate()), ConfigError);
}
