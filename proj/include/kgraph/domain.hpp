#pragma once

// Base domains Omega (disk or axis-aligned rectangle, given in chart
// coordinates) and their boundary parametrizations.

#include "kgraph/errors.hpp"
#include "kgraph/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <variant>

namespace kgraph {

struct Disk {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
};

struct Rectangle {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
};

using DomainSpec = std::variant<Disk, Rectangle>;

inline void validate_domain(const DomainSpec& spec) {
  if (const auto* d = std::get_if<Disk>(&spec)) {
    if (!(d->radius > 0) || !d->center.allFinite())
      throw FormatError("disk needs radius > 0");
  } else {
    const auto& r = std::get<Rectangle>(spec);
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0))
      throw FormatError("rectangle needs x1 > x0 and y1 > y0");
  }
}

inline std::string describe(const DomainSpec& spec) {
  char buf[160];
  if (const auto* d = std::get_if<Disk>(&spec))
    std::snprintf(buf, sizeof buf, "disk(center=(%.17g, %.17g), radius=%.17g)", d->center.x(),
                  d->center.y(), d->radius);
  else {
    const auto& r = std::get<Rectangle>(spec);
    std::snprintf(buf, sizeof buf, "rectangle(%.17g, %.17g, %.17g, %.17g)", r.x0, r.y0, r.x1,
                  r.y1);
  }
  return buf;
}

// Euclidean signed distance in chart coordinates; negative inside.
inline double signed_distance(const DomainSpec& spec, const Vec2& x) {
  if (const auto* d = std::get_if<Disk>(&spec))
    return (x - d->center).norm() - d->radius;
  const auto& r = std::get<Rectangle>(spec);
  const double dx = std::max(r.x0 - x.x(), x.x() - r.x1);
  const double dy = std::max(r.y0 - x.y(), x.y() - r.y1);
  if (dx <= 0 && dy <= 0)
    return std::max(dx, dy);
  return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
}

inline void bounding_box(const DomainSpec& spec, Vec2& lo, Vec2& hi) {
  if (const auto* d = std::get_if<Disk>(&spec)) {
    lo = d->center - Vec2::Constant(d->radius);
    hi = d->center + Vec2::Constant(d->radius);
  } else {
    const auto& r = std::get<Rectangle>(spec);
    lo = Vec2(r.x0, r.y0);
    hi = Vec2(r.x1, r.y1);
  }
}

inline double euclidean_diameter(const DomainSpec& spec) {
  if (const auto* d = std::get_if<Disk>(&spec))
    return 2.0 * d->radius;
  const auto& r = std::get<Rectangle>(spec);
  return std::hypot(r.x1 - r.x0, r.y1 - r.y0);
}

// A point of the boundary: smooth piece index plus parameter on it.
struct BoundaryParam {
  int piece = 0;
  double t = 0;
};

// Disk: one piece, t = polar angle in [0, 2 pi). Rectangle: four straight
// edges traversed counterclockwise, t = Euclidean arclength along the edge.
inline int boundary_piece_count(const DomainSpec& spec) {
  return std::holds_alternative<Disk>(spec) ? 1 : 4;
}

inline double boundary_piece_length(const DomainSpec& spec, int piece) {
  if (std::holds_alternative<Disk>(spec))
    return 2.0 * std::numbers::pi;
  const auto& r = std::get<Rectangle>(spec);
  return (piece % 2 == 0) ? (r.x1 - r.x0) : (r.y1 - r.y0);
}

// Smooth extension of each piece past its ends (circle or straight line).
inline Vec2 boundary_point(const DomainSpec& spec, int piece, double t) {
  if (const auto* d = std::get_if<Disk>(&spec))
    return d->center + d->radius * Vec2(std::cos(t), std::sin(t));
  const auto& r = std::get<Rectangle>(spec);
  switch (piece) {
  case 0: return Vec2(r.x0 + t, r.y0);
  case 1: return Vec2(r.x1, r.y0 + t);
  case 2: return Vec2(r.x1 - t, r.y1);
  default: return Vec2(r.x0, r.y1 - t);
  }
}

inline Vec2 boundary_point(const DomainSpec& spec, const BoundaryParam& p) {
  return boundary_point(spec, p.piece, p.t);
}

// Euclidean inward unit normal covector at a boundary parameter.
inline Vec2 euclidean_inward_normal(const DomainSpec& spec, const BoundaryParam& p) {
  if (std::holds_alternative<Disk>(spec))
    return -Vec2(std::cos(p.t), std::sin(p.t));
  switch (p.piece) {
  case 0: return Vec2(0, 1);
  case 1: return Vec2(-1, 0);
  case 2: return Vec2(0, -1);
  default: return Vec2(1, 0);
  }
}

// Euclidean closest boundary point.
inline BoundaryParam closest_boundary_param(const DomainSpec& spec, const Vec2& x) {
  if (const auto* d = std::get_if<Disk>(&spec)) {
    const Vec2 v = x - d->center;
    double t = std::atan2(v.y(), v.x());
    if (t < 0)
      t += 2.0 * std::numbers::pi;
    return {0, t};
  }
  const auto& r = std::get<Rectangle>(spec);
  const double cx = std::clamp(x.x(), r.x0, r.x1);
  const double cy = std::clamp(x.y(), r.y0, r.y1);
  const double dist[4] = {cy - r.y0, r.x1 - cx, r.y1 - cy, cx - r.x0};
  const int k = static_cast<int>(std::min_element(dist, dist + 4) - dist);
  switch (k) {
  case 0: return {0, cx - r.x0};
  case 1: return {1, cy - r.y0};
  case 2: return {2, r.x1 - cx};
  default: return {3, r.y1 - cy};
  }
}

} // namespace kgraph
