#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <random>

#include "qbatch/io.hpp"
#include "qbatch/models/batch_ab.hpp"

using namespace qbatch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qbatch_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Numbers, RoundTripExactly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(parse_number(format_number(v)), v);
  }
  EXPECT_EQ(parse_number(format_number(0.1)), 0.1);
  EXPECT_EQ(parse_number(format_number(std::numeric_limits<double>::denorm_min())),
            std::numeric_limits<double>::denorm_min());
}

TEST(Numbers, ParseRejectsJunk) {
  EXPECT_THROW(parse_number(""), IoError);
  EXPECT_THROW(parse_number("1.5x"), IoError);
  EXPECT_THROW(parse_number("abc"), IoError);
}

TEST(Csv, EmptyTableIsHeaderOnly) {
  TempDir tmp;
  Table t;
  t.header = {"a", "b"};
  emit_csv(t, tmp.path / "e.csv");
  EXPECT_EQ(read_text_file(tmp.path / "e.csv"), "a,b\n");
  const auto back = read_csv(tmp.path / "e.csv");
  EXPECT_EQ(back.header, t.header);
  EXPECT_TRUE(back.rows.empty());
}

TEST(Csv, RoundTripIsExact) {
  TempDir tmp;
  Table t;
  t.header = {"label", "x", "y"};
  t.add_row({"first", format_number(1.0 / 3.0), ""});
  t.add_row({"second", format_number(-2.5e-300), format_number(7.0)});
  emit_csv(t, tmp.path / "t.csv");
  const auto back = read_csv(tmp.path / "t.csv");
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.number(0, 1), 1.0 / 3.0);
  EXPECT_EQ(back.column("y"), 2u);
  EXPECT_THROW(back.column("z"), DomainError);
  EXPECT_EQ(to_csv(back), read_text_file(tmp.path / "t.csv"));
}

TEST(Csv, RaggedRowsRejected) {
  Table t;
  t.header = {"a", "b"};
  EXPECT_THROW(t.add_row({"1"}), DomainError);
  t.rows.push_back({"1", "2", "3"});
  EXPECT_THROW(to_csv(t), DomainError);
  EXPECT_THROW(table_from_csv("a,b\n1,2\n3\n"), IoError);
  EXPECT_THROW(table_from_csv(""), IoError);
}

TEST(Csv, SeparatorsInCellsRejected) {
  Table t;
  t.header = {"a"};
  t.add_row({"x,y"});
  EXPECT_THROW(to_csv(t), DomainError);
}

TEST(Csv, MissingFileIsIoError) { EXPECT_THROW(read_text_file("/nonexistent/qbatch/file.csv"), IoError); }

TEST(TrajectoryTable, ColumnsAndCumulative) {
  BatchABModel m;
  const auto ic = integrator_for(m);
  const Schedule s{std::vector<double>(10, 340.0), 0.0};
  const auto traj = rollout(m, schedule_controller(s), ic);
  const auto t = trajectory_table(m, traj);
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "x1", "x2", "action", "stage_reward", "cumulative_reward"}));
  ASSERT_EQ(t.rows.size(), 11u);
  EXPECT_EQ(t.rows.back()[3], "");
  EXPECT_EQ(t.rows.back()[4], "");
  EXPECT_EQ(t.number(0, 5), 0.0);
  EXPECT_NEAR(t.number(10, 5), traj.objective, 1e-12);
  EXPECT_NEAR(t.number(10, 2), traj.states.back()[1], 0.0);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(t.number(k, 3), 340.0);
}

TEST(ScheduleTable, Layout) {
  const auto t = schedule_table(Schedule{{1.0, 2.0}, 0.0}, 0.5);
  EXPECT_EQ(t.header, (std::vector<std::string>{"stage", "t_start", "action"}));
  EXPECT_EQ(t.number(1, 1), 0.5);
  EXPECT_EQ(t.number(1, 2), 2.0);
}

TEST(Svg, SingleSeriesSinglePolyline) {
  Chart c{"one", "t", "u", {{"s", {0.0, 1.0}, {2.0, 3.0}}}};
  const auto svg = render_svg(c);
  EXPECT_EQ(count(svg, "<polyline"), 1u);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Svg, Deterministic) {
  Chart c{"a & b", "t", "u", {step_series("p", {1, 2, 3}, 0.1), {"q", {0, 0.3}, {0, 3}}}};
  EXPECT_EQ(render_svg(c), render_svg(c));
  EXPECT_EQ(count(render_svg(c), "<polyline"), 2u);
  EXPECT_NE(render_svg(c).find("a &amp; b"), std::string::npos);
}

TEST(Svg, ConstantSeriesRenders) {
  Chart c{"flat", "t", "u", {{"s", {0.0, 0.0}, {1.0, 1.0}}}};
  EXPECT_NO_THROW(render_svg(c));
}

TEST(Svg, InvalidInputRejected) {
  EXPECT_THROW(render_svg(Chart{"x", "t", "u", {}}), DomainError);
  EXPECT_THROW(render_svg(Chart{"x", "t", "u", {{"s", {}, {}}}}), DomainError);
  EXPECT_THROW(render_svg(Chart{"x", "t", "u", {{"s", {0, 1}, {0}}}}), DomainError);
  EXPECT_THROW(render_svg(Chart{"x", "t", "u", {{"s", {0, 1}, {0, std::nan("")}}}}), DomainError);
}

TEST(Svg, StepSeries) {
  const auto s = step_series("u", {5.0, 6.0}, 2.0);
  EXPECT_EQ(s.x, (std::vector<double>{0, 2, 2, 4}));
  EXPECT_EQ(s.y, (std::vector<double>{5, 5, 6, 6}));
}
