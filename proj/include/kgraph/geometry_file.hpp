#pragma once

// Tabulated charts. File layout:
//
//   name = <identifier>
//   grid = nx, ny, x0, y0, hx, hy
//   ric_lower = <number>            (optional)
//   [sigma11]
//   <ny rows of nx comma-separated values, row j at y = y0 + j*hy>
//   [sigma12] [sigma22] [f] [delta1] [delta2]   (same shape)
//
// Values between nodes are bilinearly interpolated; queries up to one table
// cell outside the table are linearly extrapolated, anything further throws.

#include "kgraph/errors.hpp"
#include "kgraph/geometry.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace kgraph {

struct ChartTable {
  std::string name;
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0, hx = 1, hy = 1;
  double ric_lower = std::numeric_limits<double>::quiet_NaN();
  // sigma11, sigma12, sigma22, f, delta1, delta2; each ny*nx row-major.
  std::array<std::vector<double>, 6> data;

  static constexpr std::array<const char*, 6> kKeys = {"sigma11", "sigma12", "sigma22",
                                                       "f",       "delta1",  "delta2"};

  double interpolate(int which, const Vec2& p) const {
    const double sx = (p.x() - x0) / hx;
    const double sy = (p.y() - y0) / hy;
    if (sx < -1.0 || sy < -1.0 || sx > nx || sy > ny)
      throw ChartDomainError(name + ": point " + format_point(p) + " outside chart table");
    const int i = std::clamp(static_cast<int>(std::floor(sx)), 0, nx - 2);
    const int j = std::clamp(static_cast<int>(std::floor(sy)), 0, ny - 2);
    const double tx = sx - i;
    const double ty = sy - j;
    const auto& v = data[which];
    const auto at = [&](int a, int b) { return v[static_cast<std::size_t>(b) * nx + a]; };
    return (1 - tx) * (1 - ty) * at(i, j) + tx * (1 - ty) * at(i + 1, j) +
           (1 - tx) * ty * at(i, j + 1) + tx * ty * at(i + 1, j + 1);
  }
};

inline SubmersionChart chart_from_table(ChartTable table) {
  auto t = std::make_shared<const ChartTable>(std::move(table));
  bool identity = true;
  for (std::size_t k = 0; k < t->data[0].size(); ++k)
    identity = identity && t->data[0][k] == 1.0 && t->data[1][k] == 0.0 && t->data[2][k] == 1.0;
  return SubmersionChart(
      t->name,
      [t](const Vec2& p) -> Mat2 {
        const double s12 = t->interpolate(1, p);
        Mat2 m;
        m << t->interpolate(0, p), s12, s12, t->interpolate(2, p);
        return m;
      },
      [t](const Vec2& p) { return t->interpolate(3, p); },
      [t](const Vec2& p) -> Vec2 { return Vec2(t->interpolate(4, p), t->interpolate(5, p)); },
      t->ric_lower, identity);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_csv_numbers(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const std::string c = trim(cell);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(c, &used);
    } catch (const std::exception&) {
      throw FormatError(where + ": bad number '" + c + "'");
    }
    if (used != c.size())
      throw FormatError(where + ": bad number '" + c + "'");
    out.push_back(v);
  }
  return out;
}

} // namespace detail

inline ChartTable read_chart_table(std::istream& in, const std::string& source = "geometry") {
  ChartTable t;
  bool have_grid = false;
  int block = -1;
  std::string line;
  int lineno = 0;
  const auto where = [&] { return source + ":" + std::to_string(lineno); };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError(where() + ": unterminated section header");
      const std::string key = detail::trim(line.substr(1, line.size() - 2));
      const auto it = std::find(ChartTable::kKeys.begin(), ChartTable::kKeys.end(), key);
      if (it == ChartTable::kKeys.end())
        throw FormatError(where() + ": unknown table '" + key + "'");
      if (!have_grid)
        throw FormatError(where() + ": table before 'grid'");
      block = static_cast<int>(it - ChartTable::kKeys.begin());
      if (!t.data[block].empty())
        throw FormatError(where() + ": duplicate table '" + key + "'");
      continue;
    }
    if (block < 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw FormatError(where() + ": expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key == "name") {
        t.name = value;
      } else if (key == "grid") {
        const auto v = detail::parse_csv_numbers(value, where());
        if (v.size() != 6)
          throw FormatError(where() + ": grid needs nx, ny, x0, y0, hx, hy");
        t.nx = static_cast<int>(v[0]);
        t.ny = static_cast<int>(v[1]);
        t.x0 = v[2];
        t.y0 = v[3];
        t.hx = v[4];
        t.hy = v[5];
        if (t.nx < 2 || t.ny < 2 || !(t.hx > 0) || !(t.hy > 0) || t.nx != v[0] || t.ny != v[1])
          throw FormatError(where() + ": grid needs integer nx, ny >= 2 and hx, hy > 0");
        have_grid = true;
      } else if (key == "ric_lower") {
        t.ric_lower = detail::parse_csv_numbers(value, where()).at(0);
      } else {
        throw FormatError(where() + ": unknown key '" + key + "'");
      }
      continue;
    }
    const auto row = detail::parse_csv_numbers(line, where());
    if (static_cast<int>(row.size()) != t.nx)
      throw FormatError(where() + ": expected " + std::to_string(t.nx) + " values, got " +
                        std::to_string(row.size()));
    auto& dst = t.data[block];
    if (static_cast<int>(dst.size()) >= t.nx * t.ny)
      throw FormatError(where() + ": too many rows in table '" +
                        std::string(ChartTable::kKeys[block]) + "'");
    dst.insert(dst.end(), row.begin(), row.end());
  }
  if (!have_grid)
    throw FormatError(source + ": missing 'grid'");
  if (t.name.empty())
    throw FormatError(source + ": missing 'name'");
  for (std::size_t k = 0; k < t.data.size(); ++k)
    if (static_cast<int>(t.data[k].size()) != t.nx * t.ny)
      throw FormatError(source + ": table '" + std::string(ChartTable::kKeys[k]) +
                        "' incomplete or missing");
  return t;
}

inline SubmersionChart read_geometry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open geometry file '" + path + "'");
  return chart_from_table(read_chart_table(in, path));
}

// Samples any chart on a node table; useful for exporting built-ins.
inline ChartTable tabulate_chart(const SubmersionChart& chart, int nx, int ny, double x0,
                                 double y0, double hx, double hy) {
  ChartTable t;
  t.name = chart.name();
  t.nx = nx;
  t.ny = ny;
  t.x0 = x0;
  t.y0 = y0;
  t.hx = hx;
  t.hy = hy;
  t.ric_lower = chart.ric_lower();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 p(x0 + i * hx, y0 + j * hy);
      const Mat2 s = chart.metric(p);
      const Vec2 d = chart.delta(p);
      const std::array<double, 6> v = {s(0, 0), s(0, 1), s(1, 1), chart.f(p), d.x(), d.y()};
      for (int k = 0; k < 6; ++k)
        t.data[k].push_back(v[k]);
    }
  return t;
}

inline void write_chart_table(std::ostream& out, const ChartTable& t) {
  out << std::setprecision(17);
  out << "name = " << t.name << "\n";
  out << "grid = " << t.nx << ", " << t.ny << ", " << t.x0 << ", " << t.y0 << ", " << t.hx
      << ", " << t.hy << "\n";
  if (!std::isnan(t.ric_lower))
    out << "ric_lower = " << t.ric_lower << "\n";
  for (std::size_t k = 0; k < t.data.size(); ++k) {
    out << "[" << ChartTable::kKeys[k] << "]\n";
    for (int j = 0; j < t.ny; ++j) {
      for (int i = 0; i < t.nx; ++i)
        out << (i ? ", " : "") << t.data[k][static_cast<std::size_t>(j) * t.nx + i];
      out << "\n";
    }
  }
}

} // namespace kgraph
