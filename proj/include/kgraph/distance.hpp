#pragma once

// sigma-distance from grid unknowns to the boundary. Identity-metric charts
// use the exact Euclidean distance; general metrics use fast marching for
// |grad d|_sigma = 1 with a semi-Lagrangian update over the 8-neighbourhood.

#include "kgraph/domain.hpp"
#include "kgraph/geometry.hpp"
#include "kgraph/grid_domain.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

namespace kgraph {

inline double sigma_length(const Mat2& sigma, const Vec2& v) { return std::sqrt(v.dot(sigma * v)); }

// Inward unit normal (contravariant, |eta|_sigma = 1) at a boundary parameter.
inline Vec2 inward_unit_normal(const SubmersionChart& chart, const DomainSpec& spec,
                               const BoundaryParam& p) {
  const Vec2 x = boundary_point(spec, p);
  const Vec2 n = euclidean_inward_normal(spec, p);
  const Mat2 inv = inverse_metric_at(chart, x);
  return inv * n / std::sqrt(n.dot(inv * n));
}

// sigma-distance from x to the tangent line of the boundary at its Euclidean
// closest point, using the metric frozen at x.
inline double linearized_boundary_distance(const SubmersionChart& chart, const DomainSpec& spec,
                                           const Vec2& x) {
  const BoundaryParam bp = closest_boundary_param(spec, x);
  const Vec2 n = euclidean_inward_normal(spec, bp);
  const Mat2 inv = inverse_metric_at(chart, x);
  return std::abs(n.dot(x - boundary_point(spec, bp))) / std::sqrt(n.dot(inv * n));
}

inline std::vector<double> fast_marching_distance(const GridDomain& g,
                                                  const SubmersionChart& chart) {
  const int n = g.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(n, inf);
  std::vector<char> accepted(n, 0);
  std::vector<Mat2> metric(n);
  for (int k = 0; k < n; ++k)
    metric[k] = chart.metric(g.position(k));

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (int k = 0; k < n; ++k)
    if (!g.is_interior(k)) {
      d[k] = linearized_boundary_distance(chart, g.spec, g.position(k));
      heap.emplace(d[k], k);
    }

  // 8-neighbourhood in ring order, so consecutive entries span a triangle.
  static constexpr int ring[8][2] = {{1, 0},  {1, 1},   {0, 1},  {-1, 1},
                                     {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
  const auto unknown_at = [&](int k, int r) {
    const int id = g.node_of[k];
    const int i = g.node_i(id) + ring[r][0], j = g.node_j(id) + ring[r][1];
    if (i < 0 || j < 0 || i >= g.nx || j >= g.ny)
      return -1;
    return g.unknown_of[g.node_id(i, j)];
  };

  const auto update = [&](int k) {
    const Vec2 x = g.position(k);
    const Mat2& s = metric[k];
    double best = d[k];
    int nb[8];
    for (int r = 0; r < 8; ++r) {
      nb[r] = unknown_at(k, r);
      if (nb[r] >= 0 && !accepted[nb[r]])
        nb[r] = -1;
    }
    for (int r = 0; r < 8; ++r) {
      const int a = nb[r];
      if (a < 0)
        continue;
      const Vec2 pa = g.position(a);
      best = std::min(best, d[a] + sigma_length(s, x - pa));
      const int b = nb[(r + 1) % 8];
      if (b < 0)
        continue;
      const Vec2 pb = g.position(b);
      const auto cost = [&](double lam) {
        return (1 - lam) * d[a] + lam * d[b] + sigma_length(s, x - ((1 - lam) * pa + lam * pb));
      };
      const auto m = boost::math::tools::brent_find_minima(cost, 0.0, 1.0, 40);
      best = std::min(best, m.second);
    }
    return best;
  };

  while (!heap.empty()) {
    const auto [dk, k] = heap.top();
    heap.pop();
    if (accepted[k] || dk > d[k])
      continue;
    accepted[k] = 1;
    for (int r = 0; r < 8; ++r) {
      const int m = unknown_at(k, r);
      if (m < 0 || accepted[m])
        continue;
      const double cand = update(m);
      if (cand < d[m]) {
        d[m] = cand;
        heap.emplace(cand, m);
      }
    }
  }
  return d;
}

inline ScalarField distance_field(const GridDomain& g, const SubmersionChart& chart) {
  ScalarField out = g.make_field(0.0);
  if (chart.has_identity_metric()) {
    for (int k = 0; k < g.size(); ++k)
      out.values[k] = std::max(0.0, -signed_distance(g.spec, g.position(k)));
  } else {
    out.values = fast_marching_distance(g, chart);
  }
  return out;
}

} // namespace kgraph
