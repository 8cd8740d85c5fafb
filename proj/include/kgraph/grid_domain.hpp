#pragma once

// Structured node grid over a base domain. Nodes strictly inside Omega carry
// unknowns; every axis link from an inside node to a non-inside neighbour is
// cut at the true boundary crossing (fraction theta of the spacing), where
// Dirichlet data lives. Difference stencils are stored as linear forms over
// node values and crossing ("trace") values.

#include "kgraph/domain.hpp"
#include "kgraph/errors.hpp"
#include "kgraph/geometry.hpp"

#include <boost/math/tools/roots.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace kgraph {

enum class NodeKind : std::uint8_t { Interior, BoundaryAdjacent, DirichletGhost, Outside };

enum Direction : int { kEast = 0, kWest = 1, kNorth = 2, kSouth = 3 };
inline constexpr std::array<int, 4> kDirAxis = {0, 0, 1, 1};
inline constexpr std::array<int, 4> kDirSign = {+1, -1, +1, -1};
inline constexpr std::array<int, 4> kOpposite = {kWest, kEast, kSouth, kNorth};

// Node values (one per unknown) plus values at boundary crossings.
struct ScalarField {
  std::vector<double> values;
  std::vector<double> trace;
};

// Contravariant components per unknown.
struct VectorField {
  std::vector<Vec2> values;
};

struct LinearForm {
  std::vector<std::pair<int, double>> nodes;
  std::vector<std::pair<int, double>> trace;

  static void accumulate(std::vector<std::pair<int, double>>& terms, int index, double c) {
    for (auto& [i, v] : terms)
      if (i == index) {
        v += c;
        return;
      }
    terms.emplace_back(index, c);
  }

  void add_node(int index, double c) { accumulate(nodes, index, c); }
  void add_trace(int index, double c) { accumulate(trace, index, c); }

  void add(const LinearForm& other, double scale) {
    for (const auto& [i, v] : other.nodes)
      add_node(i, scale * v);
    for (const auto& [i, v] : other.trace)
      add_trace(i, scale * v);
  }

  double eval(const ScalarField& u) const {
    double acc = 0.0;
    for (const auto& [i, v] : nodes)
      acc += v * u.values[i];
    for (const auto& [i, v] : trace)
      acc += v * u.trace[i];
    return acc;
  }
};

struct Link {
  bool boundary = false;
  int index = -1; // unknown index, or crossing index when boundary
  double theta = 1.0;
};

struct Crossing {
  Vec2 point;
  int unknown = -1; // inside node the link starts from
  int dir = kEast;
  double theta = 1.0;
  Vec2 eta = Vec2::Zero(); // inward unit normal (contravariant, sigma-unit)
};

// Cell face midway along a link; carries the gradient stencil at that point.
struct Face {
  Vec2 point;
  int axis = 0;
  bool boundary = false;
  std::array<LinearForm, 2> grad;
};

struct NodeFaces {
  std::array<int, 4> face{};    // face index per direction
  std::array<double, 2> weight{}; // 2 / (h_plus + h_minus) per axis
};

// Quadrature cell: node whose control cell meets Omega.
struct QuadratureCell {
  int node = -1;        // global node id
  double fraction = 0;  // clipped area fraction of the h x h cell
  std::vector<int> from; // unknowns whose mean supplies the value
};

class GridDomain {
public:
  DomainSpec spec;
  double h = 0;
  int imin = 0, jmin = 0, nx = 0, ny = 0;

  std::vector<NodeKind> kind;     // per global node
  std::vector<int> unknown_of;    // per global node, -1 if not inside
  std::vector<int> node_of;       // per unknown
  std::vector<std::array<Link, 4>> links;
  std::vector<Crossing> crossings;

  std::vector<std::array<LinearForm, 2>> grad_forms; // d_x u, d_y u
  std::vector<std::array<LinearForm, 3>> hess_forms; // d_xx, d_xy, d_yy
  std::vector<Face> faces;
  std::vector<NodeFaces> node_faces;
  std::vector<QuadratureCell> cells;

  std::vector<double> dist; // sigma-distance to the boundary, per unknown
  bool analytic_distance = false;

  int size() const { return static_cast<int>(node_of.size()); }
  int crossing_count() const { return static_cast<int>(crossings.size()); }
  int node_id(int i, int j) const { return j * nx + i; }
  int node_i(int id) const { return id % nx; }
  int node_j(int id) const { return id / nx; }

  Vec2 node_position(int id) const {
    return Vec2((imin + node_i(id)) * h, (jmin + node_j(id)) * h);
  }
  Vec2 position(int unknown) const { return node_position(node_of[unknown]); }

  bool is_interior(int unknown) const { return kind[node_of[unknown]] == NodeKind::Interior; }

  // Neighbour node id in a direction, -1 if off the node array.
  int neighbour(int id, int dir) const {
    int i = node_i(id) + (kDirAxis[dir] == 0 ? kDirSign[dir] : 0);
    int j = node_j(id) + (kDirAxis[dir] == 1 ? kDirSign[dir] : 0);
    if (i < 0 || j < 0 || i >= nx || j >= ny)
      return -1;
    return node_id(i, j);
  }

  ScalarField make_field(double value = 0.0) const {
    return {std::vector<double>(size(), value), std::vector<double>(crossings.size(), value)};
  }

  template <class Fn>
  ScalarField sample(Fn&& fn) const {
    ScalarField out = make_field();
    for (int k = 0; k < size(); ++k)
      out.values[k] = fn(position(k));
    for (int c = 0; c < crossing_count(); ++c)
      out.trace[c] = fn(crossings[c].point);
    return out;
  }
};

namespace detail {

inline Vec2 axis_unit(int axis) { return axis == 0 ? Vec2(1, 0) : Vec2(0, 1); }

// Compact one-axis stencil at an unknown: neighbour refs and distances.
struct AxisStencil {
  Link plus, minus;
  double hp = 0, hm = 0;
};

inline void add_ref(LinearForm& form, const Link& l, double c) {
  if (l.boundary)
    form.add_trace(l.index, c);
  else
    form.add_node(l.index, c);
}

// Second-order first derivative on a nonuniform three-point stencil.
inline LinearForm first_derivative(int self, const AxisStencil& s) {
  const double a = s.hp, b = s.hm;
  LinearForm f;
  add_ref(f, s.plus, b / (a * (a + b)));
  add_ref(f, s.minus, -a / (b * (a + b)));
  f.add_node(self, (a - b) / (a * b));
  return f;
}

// Second derivative on a nonuniform three-point stencil (exact on quadratics).
inline LinearForm second_derivative(int self, const AxisStencil& s) {
  const double a = s.hp, b = s.hm;
  LinearForm f;
  add_ref(f, s.plus, 2.0 / (a * (a + b)));
  add_ref(f, s.minus, 2.0 / (b * (a + b)));
  f.add_node(self, -2.0 / (a * b));
  return f;
}

} // namespace detail

// Tolerance below which a node counts as lying on the boundary (in units of h).
inline constexpr double kOnBoundaryTolerance = 1e-9;

// Node classification, boundary crossings and difference stencils. Does not
// touch the chart; see build_grid for the complete construction.
inline GridDomain build_topology(const DomainSpec& spec, double h) {
  validate_domain(spec);
  if (!(h > 0) || !std::isfinite(h))
    throw FormatError("grid spacing must be positive");
  GridDomain g;
  g.spec = spec;
  g.h = h;
  Vec2 lo, hi;
  bounding_box(spec, lo, hi);
  g.imin = static_cast<int>(std::floor(lo.x() / h)) - 1;
  g.jmin = static_cast<int>(std::floor(lo.y() / h)) - 1;
  g.nx = static_cast<int>(std::ceil(hi.x() / h)) + 1 - g.imin + 1;
  g.ny = static_cast<int>(std::ceil(hi.y() / h)) + 1 - g.jmin + 1;
  const int total = g.nx * g.ny;
  g.kind.assign(total, NodeKind::Outside);
  g.unknown_of.assign(total, -1);

  const double tol = kOnBoundaryTolerance * h;
  for (int id = 0; id < total; ++id)
    if (signed_distance(spec, g.node_position(id)) < -tol) {
      g.unknown_of[id] = static_cast<int>(g.node_of.size());
      g.node_of.push_back(id);
    }
  if (g.node_of.empty())
    throw EmptyDomain("no interior node at spacing h = " + std::to_string(h) + " in " +
                      describe(spec));

  const int n = g.size();
  g.links.resize(n);
  for (int k = 0; k < n; ++k) {
    const int id = g.node_of[k];
    const Vec2 p = g.node_position(id);
    bool complete = true;
    for (int dir = 0; dir < 4; ++dir) {
      const int nb = g.neighbour(id, dir);
      Link& l = g.links[k][dir];
      if (nb >= 0 && g.unknown_of[nb] >= 0) {
        l = Link{false, g.unknown_of[nb], 1.0};
        continue;
      }
      complete = false;
      // Root of the signed distance along the link.
      const Vec2 e = detail::axis_unit(kDirAxis[dir]) * (kDirSign[dir] * h);
      const auto sd = [&](double t) { return signed_distance(spec, p + t * e); };
      double theta = 1.0;
      if (sd(1.0) > 0.0) {
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(
            sd, 0.0, 1.0, sd(0.0), sd(1.0), boost::math::tools::eps_tolerance<double>(52),
            iters);
        theta = 0.5 * (r.first + r.second);
      }
      theta = std::clamp(theta, 1e-300, 1.0);
      Crossing c;
      c.point = p + theta * e;
      c.unknown = k;
      c.dir = dir;
      c.theta = theta;
      l = Link{true, static_cast<int>(g.crossings.size()), theta};
      g.crossings.push_back(c);
      if (nb >= 0 && g.unknown_of[nb] < 0)
        g.kind[nb] = NodeKind::DirichletGhost;
    }
    g.kind[id] = complete ? NodeKind::Interior : NodeKind::BoundaryAdjacent;
  }

  // Node gradient and Hessian stencils.
  std::vector<std::array<detail::AxisStencil, 2>> axes(n);
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < 2; ++a) {
      auto& s = axes[k][a];
      s.plus = g.links[k][a == 0 ? kEast : kNorth];
      s.minus = g.links[k][a == 0 ? kWest : kSouth];
      s.hp = s.plus.theta * h;
      s.hm = s.minus.theta * h;
    }
  g.grad_forms.resize(n);
  g.hess_forms.resize(n);
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < 2; ++a) {
      g.grad_forms[k][a] = detail::first_derivative(k, axes[k][a]);
      g.hess_forms[k][a == 0 ? 0 : 2] = detail::second_derivative(k, axes[k][a]);
    }
  for (int k = 0; k < n; ++k) {
    const auto& L = g.links[k];
    LinearForm& mixed = g.hess_forms[k][1];
    const auto inner = [&](int dir) { return !L[dir].boundary; };
    if (inner(kEast) && inner(kWest)) {
      mixed.add(g.grad_forms[L[kEast].index][1], 0.5 / h);
      mixed.add(g.grad_forms[L[kWest].index][1], -0.5 / h);
    } else if (inner(kNorth) && inner(kSouth)) {
      mixed.add(g.grad_forms[L[kNorth].index][0], 0.5 / h);
      mixed.add(g.grad_forms[L[kSouth].index][0], -0.5 / h);
    } else if (inner(kEast)) {
      mixed.add(g.grad_forms[L[kEast].index][1], 1.0 / h);
      mixed.add(g.grad_forms[k][1], -1.0 / h);
    } else if (inner(kWest)) {
      mixed.add(g.grad_forms[k][1], 1.0 / h);
      mixed.add(g.grad_forms[L[kWest].index][1], -1.0 / h);
    } else if (inner(kNorth)) {
      mixed.add(g.grad_forms[L[kNorth].index][0], 1.0 / h);
      mixed.add(g.grad_forms[k][0], -1.0 / h);
    } else if (inner(kSouth)) {
      mixed.add(g.grad_forms[k][0], 1.0 / h);
      mixed.add(g.grad_forms[L[kSouth].index][0], -1.0 / h);
    }
    // An isolated node (all four links cut) keeps a zero mixed derivative.
  }

  // Faces. Interior faces are shared by the two nodes they separate.
  g.node_faces.resize(n);
  for (int k = 0; k < n; ++k) {
    const Vec2 p = g.position(k);
    for (int dir = 0; dir < 4; ++dir) {
      const Link& l = g.links[k][dir];
      const int a = kDirAxis[dir];
      const int b = 1 - a;
      const int s = kDirSign[dir];
      if (!l.boundary) {
        if (s < 0)
          continue; // created by the neighbour
        Face f;
        f.axis = a;
        f.point = p + detail::axis_unit(a) * (0.5 * h);
        f.grad[a].add_node(l.index, 1.0 / h);
        f.grad[a].add_node(k, -1.0 / h);
        f.grad[b].add(g.grad_forms[k][b], 0.5);
        f.grad[b].add(g.grad_forms[l.index][b], 0.5);
        const int fi = static_cast<int>(g.faces.size());
        g.faces.push_back(std::move(f));
        g.node_faces[k].face[dir] = fi;
        g.node_faces[l.index].face[kOpposite[dir]] = fi;
      } else {
        const double dist = l.theta * h;
        Face f;
        f.axis = a;
        f.boundary = true;
        f.point = p + detail::axis_unit(a) * (0.5 * s * dist);
        f.grad[a].add_trace(l.index, s / dist);
        f.grad[a].add_node(k, -s / dist);
        // Transverse derivative extrapolated from the node to the face.
        const Link& opp = g.links[k][kOpposite[dir]];
        f.grad[b].add(g.grad_forms[k][b], 1.0);
        if (!opp.boundary) {
          f.grad[b].add(g.grad_forms[k][b], 0.5 * l.theta);
          f.grad[b].add(g.grad_forms[opp.index][b], -0.5 * l.theta);
        }
        const int fi = static_cast<int>(g.faces.size());
        g.faces.push_back(std::move(f));
        g.node_faces[k].face[dir] = fi;
      }
    }
    for (int a = 0; a < 2; ++a)
      g.node_faces[k].weight[a] = 2.0 / (axes[k][a].hp + axes[k][a].hm);
  }

  // Control cells meeting Omega, area fractions by 4x4 subsampling.
  for (int id = 0; id < total; ++id) {
    const Vec2 c = g.node_position(id);
    const double sd = signed_distance(spec, c);
    if (sd > h) // cell cannot reach Omega
      continue;
    double fraction = 0;
    if (sd < -h) {
      fraction = 1.0;
    } else {
      int count = 0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const Vec2 q = c + h * Vec2(-0.5 + (a + 0.5) / 4.0, -0.5 + (b + 0.5) / 4.0);
          if (signed_distance(spec, q) < 0)
            ++count;
        }
      fraction = count / 16.0;
    }
    if (fraction <= 0)
      continue;
    QuadratureCell cell{id, fraction, {}};
    if (g.unknown_of[id] >= 0) {
      cell.from.push_back(g.unknown_of[id]);
    } else {
      for (int dir = 0; dir < 4; ++dir)
        if (int nb = g.neighbour(id, dir); nb >= 0 && g.unknown_of[nb] >= 0)
          cell.from.push_back(g.unknown_of[nb]);
      if (cell.from.empty()) {
        // Diagonal or farther: nearest unknown within two rings.
        double best = 1e300;
        const int i0 = g.node_i(id), j0 = g.node_j(id);
        for (int dj = -2; dj <= 2; ++dj)
          for (int di = -2; di <= 2; ++di) {
            const int i = i0 + di, j = j0 + dj;
            if (i < 0 || j < 0 || i >= g.nx || j >= g.ny)
              continue;
            const int u = g.unknown_of[g.node_id(i, j)];
            if (u >= 0 && di * di + dj * dj < best) {
              best = di * di + dj * dj;
              cell.from.assign(1, u);
            }
          }
      }
      if (cell.from.empty())
        continue;
    }
    g.cells.push_back(std::move(cell));
  }
  return g;
}

} // namespace kgraph
