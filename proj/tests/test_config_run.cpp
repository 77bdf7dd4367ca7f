#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "qbatch/config.hpp"
#include "qbatch/run.hpp"

using namespace qbatch;
namespace fs = std::filesystem;

namespace {

const fs::path config_dir = QBATCH_CONFIG_DIR;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qbatch_run_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig small_case1(const fs::path& out) {
  auto cfg = config_from_text(R"({"schema_version": 1, "name": "small", "model": {"kind": "batch_ab"},
    "sampling": {"n_episodes": 8}, "engine": {"n_iterations": 6},
    "scenarios": [{"name": "heat", "window": [0.2, 0.6], "forced_value": 298}]})");
  cfg.output_dir = out.string();
  return cfg;
}

std::string expect_config_error(const std::string& text) {
  try {
    config_from_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return {};
}

}  // namespace

TEST(Config, MissingFileNamesPath) {
  try {
    load_config("/nonexistent/dir/run.json");
    FAIL();
  } catch (const NotFoundError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/run.json"), std::string::npos);
  }
}

TEST(Config, MinimalCase1FillsDefaults) {
  const auto cfg = config_from_text(R"({"schema_version": 1, "model": {"kind": "batch_ab"}})");
  EXPECT_EQ(cfg.n_episodes, 40u);
  EXPECT_EQ(cfg.n_iterations, 30u);
  EXPECT_EQ(cfg.substeps_per_stage, 20u);
  EXPECT_EQ(cfg.mode, EngineMode::finite_horizon);
  const auto& m = std::get<BatchABModel>(cfg.model);
  EXPECT_EQ(m.n_stages(), 10u);
  ASSERT_EQ(cfg.action_grid.size(), 11u);
  for (std::size_t i = 0; i < 11; ++i) EXPECT_DOUBLE_EQ(cfg.action_grid[i], 298.0 + 10.0 * static_cast<double>(i));
  EXPECT_EQ(cfg.init_region.size(), 2u);
}

TEST(Config, SemiBatchDefaultsToStationary) {
  const auto cfg = config_from_text(R"({"schema_version": 1, "model": {"kind": "semi_batch"}})");
  EXPECT_EQ(cfg.mode, EngineMode::stationary);
}

TEST(Config, SerializeLoadIdentity) {
  for (const char* name : {"case1.json", "case2.json", "case3.json"}) {
    const auto a = load_config(config_dir / name);
    const auto text = config_text(a);
    const auto b = config_from_text(text);
    EXPECT_EQ(config_text(b), text) << name;
    EXPECT_EQ(config_hash(a), config_hash(b));
  }
}

TEST(Config, HashIgnoresOutputDirOnly) {
  auto a = load_config(config_dir / "case1.json");
  auto b = a;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = a.seed + 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, UnknownKeysRejectedByName) {
  EXPECT_NE(expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"}, "sed": 3})").find("sed"),
            std::string::npos);
  EXPECT_NE(expect_config_error(
                R"({"schema_version": 1, "model": {"kind": "batch_ab", "params": {"T_mx": 1}}})")
                .find("model.params.T_mx"),
            std::string::npos);
  EXPECT_NE(expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"},
      "engine": {"iterations": 3}})")
                .find("engine.iterations"),
            std::string::npos);
}

TEST(Config, StructuralErrors) {
  expect_config_error(R"({"model": {"kind": "batch_ab"}})");
  expect_config_error(R"({"schema_version": 2, "model": {"kind": "batch_ab"}})");
  expect_config_error(R"({"schema_version": 1})");
  expect_config_error(R"({"schema_version": 1, "model": {"kind": "cstr"}})");
  expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"}, "seed": "one"})");
  expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"}, "sampling": {"n_episodes": 0}})");
  expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"}, "engine": {"mode": "sometimes"}})");
  expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"},
      "scenarios": [{"name": "a", "window": [0.2, 1.5], "forced_value": 300}]})");
  expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"},
      "scenarios": [{"name": "a", "window": [0.2, 0.4], "forced_value": 300},
                    {"name": "a", "window": [0.2, 0.4], "forced_value": 300}]})");
  expect_config_error(R"({"schema_version": 1, "model": {"kind": "batch_ab"},
      "scenarios": [{"name": "a b", "window": [0.2, 0.4], "forced_value": 300}]})");
  expect_config_error("{ not json");
}

TEST(Config, ShippedConfigsLoad) {
  const auto c1 = load_config(config_dir / "case1.json");
  EXPECT_TRUE(std::holds_alternative<BatchABModel>(c1.model));
  EXPECT_EQ(c1.scenarios.size(), 2u);
  const auto c2 = load_config(config_dir / "case2.json");
  EXPECT_TRUE(std::holds_alternative<FedBatchModel>(c2.model));
  EXPECT_FALSE(std::get<FedBatchModel>(c2.model).params.sourced);
  const auto c3 = load_config(config_dir / "case3.json");
  EXPECT_TRUE(std::holds_alternative<SemiBatchModel>(c3.model));
  EXPECT_EQ(find_scenario(c3, "pump_failure").forced_value, 0.0);
  EXPECT_THROW(find_scenario(c3, "meteor"), ConfigError);
}

TEST(Commands, Names) {
  EXPECT_EQ(command_from("compare"), Command::compare);
  EXPECT_THROW(command_from("frobnicate"), ConfigError);
}

TEST(Run, TrainTwiceIsByteIdentical) {
  TempDir a, b;
  const auto ra = run_command(small_case1(a.path), Command::train);
  const auto rb = run_command(small_case1(b.path), Command::train);
  EXPECT_EQ(ra.config_hash, rb.config_hash);
  EXPECT_EQ(ra.dir.filename(), rb.dir.filename());
  ASSERT_EQ(ra.files, rb.files);
  for (const auto& f : ra.files) EXPECT_EQ(read_text_file(ra.dir / f), read_text_file(rb.dir / f)) << f;
  for (const char* f : {"config.json", "samples.csv", "cube.csv", "diagnostics.csv", "q_model.txt",
                        "policy_model.txt", "policy_trajectory.csv", "policy_schedule.csv", "train_metrics.csv",
                        "policy_profile.svg"})
    EXPECT_TRUE(fs::exists(ra.dir / f)) << f;
  EXPECT_FALSE(fs::exists(ra.dir / "INVALID"));
  // The written config reloads to the same hash.
  EXPECT_EQ(config_hash(load_config(ra.dir / "config.json")), ra.config_hash);
}

TEST(Run, MetricsCarryConfigHash) {
  TempDir tmp;
  const auto art = run_command(small_case1(tmp.path), Command::train);
  const auto t = read_csv(art.dir / "train_metrics.csv");
  ASSERT_FALSE(t.rows.empty());
  EXPECT_EQ(t.rows[0][0], "config_hash");
  EXPECT_EQ(t.rows[0][1], art.config_hash);
}

TEST(Run, FailureLeavesInvalidMarker) {
  TempDir tmp;
  const auto cfg = small_case1(tmp.path);
  EXPECT_THROW(run_command(cfg, Command::scenario, {"", "meteor"}), ConfigError);
  const auto dir = run_directory(cfg);
  ASSERT_TRUE(fs::exists(dir / "INVALID"));
  EXPECT_NE(read_text_file(dir / "INVALID").find("meteor"), std::string::npos);
  // A later successful run clears the marker.
  run_command(cfg, Command::scenario, {"", "heat"});
  EXPECT_FALSE(fs::exists(dir / "INVALID"));
  const auto summary = read_csv(dir / "scenario_heat_summary.csv");
  EXPECT_EQ(summary.rows.size(), 3u);
}

TEST(Run, CompareWritesThreeRowSummary) {
  TempDir tmp;
  auto cfg = small_case1(tmp.path);
  cfg.baselines.cvp.restarts = 2;
  cfg.baselines.idp.passes = 3;
  const auto art = run_command(cfg, Command::compare);
  const auto t = read_csv(art.dir / "compare_summary.csv");
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][0], "cvp-direct");
  EXPECT_EQ(t.rows[1][0], "idp");
  EXPECT_EQ(t.rows[2][0], "q-learning");
  for (const auto& r : t.rows) EXPECT_EQ(r[3], art.config_hash);
  EXPECT_GT(t.number(0, 2), 0.5);
  EXPECT_TRUE(fs::exists(art.dir / "scenario_heat.svg"));
}
