#pragma once

// Grid construction against a chart, stencil evaluation, quadrature and
// field CSV I/O.

#include "kgraph/distance.hpp"
#include "kgraph/geometry_file.hpp"
#include "kgraph/grid_domain.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace kgraph {

// Rejects degenerate chart data at every point the operator will touch.
inline void validate_chart_on_grid(const GridDomain& g, const SubmersionChart& chart) {
  for (int k = 0; k < g.size(); ++k)
    chart.validate_at(g.position(k));
  for (const Crossing& c : g.crossings)
    chart.validate_at(c.point);
  for (const Face& f : g.faces)
    chart.validate_at(f.point);
}

inline GridDomain build_grid(const DomainSpec& spec, double h, const SubmersionChart& chart) {
  GridDomain g = build_topology(spec, h);
  validate_chart_on_grid(g, chart);
  g.dist = distance_field(g, chart).values;
  g.analytic_distance = chart.has_identity_metric();
  for (Crossing& c : g.crossings)
    c.eta = inward_unit_normal(chart, spec, closest_boundary_param(spec, c.point));
  return g;
}

inline void require_unknown(const GridDomain& g, int unknown) {
  if (unknown < 0 || unknown >= g.size())
    throw StencilUnavailable("no stencil at unknown index " + std::to_string(unknown));
}

inline Vec2 gradient_at(const GridDomain& g, const ScalarField& u, int unknown) {
  require_unknown(g, unknown);
  const auto& f = g.grad_forms[unknown];
  return Vec2(f[0].eval(u), f[1].eval(u));
}

inline Mat2 hessian_at(const GridDomain& g, const ScalarField& u, int unknown) {
  require_unknown(g, unknown);
  const auto& f = g.hess_forms[unknown];
  const double xy = f[1].eval(u);
  Mat2 m;
  m << f[0].eval(u), xy, xy, f[2].eval(u);
  return m;
}

// Unknown index of a grid node, or StencilUnavailable for nodes outside Omega.
inline int unknown_at_node(const GridDomain& g, int node) {
  if (node < 0 || node >= g.nx * g.ny || g.unknown_of[node] < 0)
    throw StencilUnavailable("node " + format_point(g.node_position(node)) +
                             " carries no stencil");
  return g.unknown_of[node];
}

inline double integrate(const GridDomain& g, const std::vector<double>& values,
                        const SubmersionChart& chart) {
  double acc = 0.0;
  for (const QuadratureCell& c : g.cells) {
    double v = 0.0;
    for (int k : c.from)
      v += values[k];
    v /= static_cast<double>(c.from.size());
    acc += v * std::sqrt(chart.metric(g.node_position(c.node)).determinant()) * c.fraction;
  }
  return acc * g.h * g.h;
}

inline double integrate(const GridDomain& g, const ScalarField& field,
                        const SubmersionChart& chart) {
  return integrate(g, field.values, chart);
}

// CSV rows "x,y,value" over the unknowns in row-major node order.
inline void write_field_csv(std::ostream& out, const GridDomain& g,
                            const std::vector<double>& values,
                            const std::string& value_name = "value") {
  out << "x,y," << value_name << "\n" << std::setprecision(17);
  for (int k = 0; k < g.size(); ++k) {
    const Vec2 p = g.position(k);
    out << p.x() << "," << p.y() << "," << values[k] << "\n";
  }
}

inline void write_field_csv(const std::string& path, const GridDomain& g,
                            const std::vector<double>& values,
                            const std::string& value_name = "value") {
  std::ofstream out(path);
  if (!out)
    throw FormatError("cannot write '" + path + "'");
  write_field_csv(out, g, values, value_name);
}

inline std::vector<double> read_field_csv(std::istream& in, const GridDomain& g,
                                          const std::string& source = "field") {
  std::string line;
  if (!std::getline(in, line))
    throw FormatError(source + ": empty file");
  const std::string header = detail::trim(line);
  if (header.rfind("x,y,", 0) != 0)
    throw FormatError(source + ": header must start with 'x,y,'");
  std::vector<double> values;
  int lineno = 1;
  const double tol = 1e-9 * g.h;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty())
      continue;
    const auto row = detail::parse_csv_numbers(line, source + ":" + std::to_string(lineno));
    if (row.size() != 3)
      throw FormatError(source + ":" + std::to_string(lineno) + ": expected 3 columns");
    const int k = static_cast<int>(values.size());
    if (k >= g.size())
      throw ShapeMismatch(source + ": more rows than grid unknowns (" +
                          std::to_string(g.size()) + ")");
    const Vec2 p = g.position(k);
    if (std::abs(row[0] - p.x()) > tol || std::abs(row[1] - p.y()) > tol)
      throw ShapeMismatch(source + ":" + std::to_string(lineno) + ": node " +
                          format_point(Vec2(row[0], row[1])) + " does not match grid node " +
                          format_point(p));
    values.push_back(row[2]);
  }
  if (static_cast<int>(values.size()) != g.size())
    throw ShapeMismatch(source + ": " + std::to_string(values.size()) + " rows, grid has " +
                        std::to_string(g.size()) + " unknowns");
  return values;
}

inline std::vector<double> read_field_csv(const std::string& path, const GridDomain& g) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open '" + path + "'");
  return read_field_csv(in, g, path);
}

} // namespace kgraph
