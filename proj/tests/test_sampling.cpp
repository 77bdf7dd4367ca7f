#include <algorithm>

#include <gtest/gtest.h>

#include "qbatch/models/batch_ab.hpp"
#include "qbatch/models/semi_batch.hpp"
#include "qbatch/sampling.hpp"
#include "toy_models.hpp"

using namespace qbatch;

namespace {

SamplingConfig case1_sampling(std::uint64_t seed = 1) {
  BatchABModel m;
  SamplingConfig c;
  c.seed = seed;
  c.init_region = m.default_init_region();
  c.action_grid = m.default_action_grid();
  return c;
}

}  // namespace

TEST(Sampling, DefaultSizeIs400) {
  BatchABModel m;
  const auto set = generate_state_samples(m, case1_sampling(), integrator_for(m));
  EXPECT_EQ(set.size(), 400u);
  EXPECT_EQ(set.provenance[0].episode, 0u);
  EXPECT_EQ(set.provenance[399].episode, 39u);
  EXPECT_EQ(set.provenance[399].stage, 9u);
}

TEST(Sampling, SingleRowIsTheInitialDraw) {
  BatchABModel m;
  auto c = case1_sampling(5);
  c.n_episodes = 1;
  c.n_stages = 1;
  const auto set = generate_state_samples(m, c, integrator_for(m));
  ASSERT_EQ(set.size(), 1u);
  Rng rng(derive_seed(5, 0));
  EXPECT_EQ(set.rows[0], m.sample_initial(c.init_region, rng));
}

TEST(Sampling, RowsStayOnSimplex) {
  BatchABModel m;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto set = generate_state_samples(m, case1_sampling(seed), integrator_for(m));
    for (const auto& x : set.rows) EXPECT_LE(x[0] + x[1], 1.0 + 1e-9);
  }
}

TEST(Sampling, Reproducible) {
  BatchABModel m;
  const auto a = generate_state_samples(m, case1_sampling(9), integrator_for(m));
  const auto b = generate_state_samples(m, case1_sampling(9), integrator_for(m));
  EXPECT_EQ(a.rows, b.rows);
  const auto c = generate_state_samples(m, case1_sampling(10), integrator_for(m));
  EXPECT_NE(a.rows, c.rows);
}

TEST(Sampling, EpisodesAreIndependentStreams) {
  // Episode e's rows do not depend on how many episodes are generated.
  BatchABModel m;
  auto small = case1_sampling(4);
  small.n_episodes = 3;
  const auto a = generate_state_samples(m, small, integrator_for(m));
  const auto b = generate_state_samples(m, case1_sampling(4), integrator_for(m));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.rows[i], b.rows[i]);
}

TEST(Sampling, CoverageOfX1) {
  BatchABModel m;
  const auto set = generate_state_samples(m, case1_sampling(), integrator_for(m));
  double lo = 1.0, hi = 0.0;
  for (const auto& x : set.rows) {
    lo = std::min(lo, x[0]);
    hi = std::max(hi, x[0]);
  }
  // The initial box reaches x1 = 1 only in the limit; 0.95 is the
  // reachable end of "[0.55, 1.0]" for 40 uniform draws.
  EXPECT_LE(lo, 0.55);
  EXPECT_GE(hi, 0.95);
}

TEST(Sampling, RejectsBadConfig) {
  BatchABModel m;
  auto c = case1_sampling();
  c.n_episodes = 0;
  EXPECT_THROW(generate_state_samples(m, c, integrator_for(m)), ConfigError);
  c = case1_sampling();
  c.action_grid = {300, 300, 310};
  EXPECT_THROW(generate_state_samples(m, c, integrator_for(m)), ConfigError);
  c = case1_sampling();
  c.init_region = {{0.5, 1.0}};
  EXPECT_THROW(generate_state_samples(m, c, integrator_for(m)), ConfigError);
}

TEST(Cube, ShapeAndRecomputation) {
  BatchABModel m;
  const auto ic = integrator_for(m);
  auto c = case1_sampling(2);
  c.n_episodes = 3;
  const auto set = generate_state_samples(m, c, ic);
  const auto cube = build_transition_cube(m, set, c.action_grid, ic);
  EXPECT_EQ(cube.m, 30u);
  EXPECT_EQ(cube.k, 11u);
  EXPECT_EQ(cube.dim, 2u);
  for (std::size_t i = 0; i < cube.m; ++i)
    for (std::size_t j = 0; j < cube.k; ++j) {
      const auto res = simulate_stage(m, set.rows[i], c.action_grid[j], ic);
      EXPECT_EQ(cube.next_state(i, j)[0], res.next_state[0]);
      EXPECT_EQ(cube.next_state(i, j)[1], res.next_state[1]);
      EXPECT_EQ(cube.reward(i, j), res.stage_reward);
      EXPECT_FALSE(cube.is_terminal(i, j));
    }
}

TEST(Cube, SingleEntry) {
  BatchABModel m;
  StateSampleSet<BatchABModel::state_type> set;
  set.rows.push_back({1.0, 0.0});
  set.provenance.push_back({0, 0});
  const auto cube = build_transition_cube(m, set, {350.0}, integrator_for(m));
  EXPECT_EQ(cube.m, 1u);
  EXPECT_EQ(cube.k, 1u);
}

TEST(Cube, StageFeatureAndHorizonTerminals) {
  BatchABModel m;
  auto c = case1_sampling(3);
  c.n_episodes = 2;
  const auto ic = integrator_for(m);
  const auto set = generate_state_samples(m, c, ic);
  const auto cube = build_transition_cube(m, set, c.action_grid, ic, {true, 10});
  EXPECT_EQ(cube.dim, 3u);
  for (std::size_t i = 0; i < cube.m; ++i) {
    const double stage = cube.state(i)[2];
    EXPECT_EQ(stage, static_cast<double>(set.provenance[i].stage));
    for (std::size_t j = 0; j < cube.k; ++j) {
      EXPECT_EQ(cube.next_state(i, j)[2], stage + 1.0);
      EXPECT_EQ(cube.is_terminal(i, j), stage == 9.0);
    }
  }
}

TEST(Cube, MinimumTimeTerminals) {
  qbatch::testing::ReachModel m;
  StateSampleSet<std::array<double, 1>> set;
  set.rows = {{0.0}, {0.8}};
  set.provenance = {{0, 0}, {0, 1}};
  const auto cube = build_transition_cube(m, set, {0.0, 1.0}, integrator_for(m));
  EXPECT_FALSE(cube.is_terminal(0, 0));
  EXPECT_FALSE(cube.is_terminal(0, 1));
  EXPECT_FALSE(cube.is_terminal(1, 0));
  EXPECT_TRUE(cube.is_terminal(1, 1));
  EXPECT_NEAR(cube.reward(1, 1), -0.2, 1e-12);
}

TEST(Cube, SemiBatchAppliedActionsAreProjected) {
  SemiBatchModel m;
  const auto ic = integrator_for(m);
  SamplingConfig c;
  c.n_episodes = 4;
  c.init_region = m.default_init_region();
  c.action_grid = m.default_action_grid();
  const auto set = generate_state_samples(m, c, ic);
  const auto cube = build_transition_cube(m, set, c.action_grid, ic);
  for (std::size_t e = 0; e < cube.m * cube.k; ++e) EXPECT_LE(cube.applied[e], cube.action_grid[e % cube.k]);
  for (std::size_t i = 0; i < cube.m; ++i)
    for (std::size_t j = 0; j < cube.k; ++j) EXPECT_LE(cube.next_state(i, j)[1], m.params.cB_max() + 1e-6);
}

TEST(Cube, EmptyInputsRejected) {
  BatchABModel m;
  StateSampleSet<BatchABModel::state_type> empty;
  EXPECT_THROW(build_transition_cube(m, empty, {300.0}, integrator_for(m)), DomainError);
}
