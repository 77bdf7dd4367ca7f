#pragma once

// CSV tables and a small SVG line-chart writer.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qbatch/common.hpp"
#include "qbatch/dynamics.hpp"

namespace qbatch {

/// 17 significant digits, enough to round-trip any double.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_number(const std::string& s) {
  if (s.empty()) throw IoError("parse_number: empty field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw IoError("parse_number: not a number: '" + s + "'");
  return v;
}

/// Rectangular text table. Cells are kept as strings so label columns (mode
/// names, hashes) can sit next to numbers.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size())
      throw DomainError("table: row has " + std::to_string(row.size()) + " cells, header has " +
                        std::to_string(header.size()));
    rows.push_back(std::move(row));
  }

  void add_numbers(const std::vector<double>& values) {
    std::vector<std::string> row;
    row.reserve(values.size());
    for (double v : values) row.push_back(format_number(v));
    add_row(std::move(row));
  }

  double number(std::size_t row, std::size_t col) const { return parse_number(rows.at(row).at(col)); }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DomainError("table: no column '" + name + "'");
  }
};

namespace detail {
inline void check_cell(const std::string& cell) {
  if (cell.find_first_of(",\n\r\"") != std::string::npos)
    throw DomainError("csv: cell contains a separator or quote: '" + cell + "'");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  if (line.empty()) out.emplace_back();
  return out;
}
}  // namespace detail

inline std::string to_csv(const Table& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      detail::check_cell(cells[i]);
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) {
    if (r.size() != table.header.size()) throw DomainError("csv: table is not rectangular");
    line(r);
  }
  return out;
}

inline Table table_from_csv(const std::string& text) {
  Table t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw IoError("csv: missing header");
  t.header = detail::split_csv_line(line);
  while (std::getline(is, line)) {
    auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size())
      throw IoError("csv: row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void emit_csv(const Table& table, const std::filesystem::path& path) { write_text_file(path, to_csv(table)); }

inline Table read_csv(const std::filesystem::path& path) { return table_from_csv(read_text_file(path)); }

/// One row per recorded state. `action` and `stage_reward` belong to the stage
/// starting at that row and are blank on the final row; `cumulative_reward`
/// is the return collected up to the row's time.
template <ReactorModel M>
Table trajectory_table(const M&, const Trajectory<StateOf<M>>& traj) {
  Table t;
  t.header.push_back("t");
  for (auto name : M::component_names) t.header.emplace_back(name);
  t.header.insert(t.header.end(), {"action", "stage_reward", "cumulative_reward"});
  double cumulative = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::vector<std::string> row{format_number(traj.times[k])};
    for (double v : traj.states[k]) row.push_back(format_number(v));
    if (k < traj.actions.size()) {
      row.push_back(format_number(traj.actions[k]));
      row.push_back(format_number(traj.stage_rewards[k]));
    } else {
      row.insert(row.end(), {"", ""});
    }
    row.push_back(format_number(cumulative));
    if (k < traj.stage_rewards.size()) cumulative += traj.stage_rewards[k];
    t.add_row(std::move(row));
  }
  return t;
}

inline Table schedule_table(const Schedule& s, double stage_duration) {
  Table t;
  t.header = {"stage", "t_start", "action"};
  for (std::size_t k = 0; k < s.actions.size(); ++k)
    t.add_numbers({static_cast<double>(k), stage_duration * static_cast<double>(k), s.actions[k]});
  return t;
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Stage-wise action profile drawn as steps: (t_k, u_k), (t_{k+1}, u_k), ...
inline Series step_series(const std::string& name, const std::vector<double>& actions, double stage_duration) {
  Series s{name, {}, {}};
  for (std::size_t k = 0; k < actions.size(); ++k) {
    s.x.insert(s.x.end(), {stage_duration * static_cast<double>(k), stage_duration * static_cast<double>(k + 1)});
    s.y.insert(s.y.end(), {actions[k], actions[k]});
  }
  return s;
}

namespace detail {
inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}
}  // namespace detail

/// Fixed 720x440 layout, five ticks per axis, legend on the right.
inline std::string render_svg(const Chart& chart) {
  if (chart.series.empty()) throw DomainError("svg: no series to plot");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series) {
    if (s.x.size() != s.y.size()) throw DomainError("svg: series '" + s.name + "' has mismatched x/y lengths");
    if (s.x.empty()) throw DomainError("svg: series '" + s.name + "' is empty");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        throw DomainError("svg: series '" + s.name + "' has a non-finite point");
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
  if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  constexpr double W = 720, H = 440, L = 70, R = 560, T = 40, B = 380;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (R - L); };
  auto py = [&](double y) { return B - (y - y0) / (y1 - y0) * (B - T); };
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  using detail::fixed;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << (L + R) / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
     << detail::svg_escape(chart.title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << R << "\" y2=\"" << B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    os << "<line x1=\"" << fixed(px(xv), 2) << "\" y1=\"" << B << "\" x2=\"" << fixed(px(xv), 2) << "\" y2=\""
       << B + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(px(xv), 2) << "\" y=\"" << B + 18 << "\" text-anchor=\"middle\">"
       << detail::tick_label(xv) << "</text>\n";
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << fixed(py(yv), 2) << "\" x2=\"" << L << "\" y2=\""
       << fixed(py(yv), 2) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << fixed(py(yv) + 4, 2) << "\" text-anchor=\"end\">"
       << detail::tick_label(yv) << "</text>\n";
  }
  os << "<text x=\"" << (L + R) / 2 << "\" y=\"" << H - 20 << "\" text-anchor=\"middle\">"
     << detail::svg_escape(chart.x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << (T + B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (T + B) / 2
     << ")\">" << detail::svg_escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = colors[k % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << ' ';
      os << fixed(px(s.x[i]), 2) << ',' << fixed(py(s.y[i]), 2);
    }
    os << "\"/>\n";
    const double ly = T + 10 + 20 * static_cast<double>(k);
    os << "<line x1=\"" << R + 15 << "\" y1=\"" << fixed(ly, 2) << "\" x2=\"" << R + 40 << "\" y2=\"" << fixed(ly, 2)
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << R + 46 << "\" y=\"" << fixed(ly + 4, 2) << "\">" << detail::svg_escape(s.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void emit_svg(const Chart& chart, const std::filesystem::path& path) { write_text_file(path, render_svg(chart)); }

}  // namespace qbatch
