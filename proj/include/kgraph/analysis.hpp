#pragma once

// Geometric estimates recast as numeric certificates on a computed solution:
// cylinder mean curvature of the boundary, its evolution along inward
// parallel curves, height and boundary-gradient barriers, the flux identity
// and the angle function Theta = <N, Y>.

#include "kgraph/distance.hpp"
#include "kgraph/domain.hpp"
#include "kgraph/errors.hpp"
#include "kgraph/geometry.hpp"
#include "kgraph/grid.hpp"
#include "kgraph/operator.hpp"
#include "kgraph/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace kgraph {

inline constexpr double kHypothesisTolerance = 1e-6;
inline constexpr double kMinPrincipleSlack = 1e-6;

// Finite-difference step for pointwise chart derivatives used here.
inline constexpr double kAnalysisFdStep = 1e-5;

struct BoundarySample {
  BoundaryParam param;
  Vec2 point;
  Vec2 eta;          // inward sigma-unit normal (contravariant)
  double H_gamma = 0; // geodesic curvature of the boundary curve, inward positive
  double kappa = 0;   // eta(f) / (2 f)
  double H_cyl = 0;   // ((n-1) H_gamma + kappa) / n
  double weight = 0;  // sigma-arclength weight
};

struct BoundaryGeometry {
  int n = 2;
  std::vector<BoundarySample> samples;

  double inf_Hcyl() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : samples)
      m = std::min(m, s.H_cyl);
    return m;
  }
  double sup_Hgamma() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples)
      m = std::max(m, s.H_gamma);
    return m;
  }
  double length() const {
    double acc = 0;
    for (const auto& s : samples)
      acc += s.weight;
    return acc;
  }
};

namespace detail {

// Geodesic from x with initial sigma-unit velocity v, run for length eps.
// Returns the end point and overwrites v with the end velocity.
inline Vec2 shoot_geodesic(const SubmersionChart& chart, Vec2 x, Vec2& v, double eps) {
  if (eps == 0.0)
    return x;
  if (chart.has_identity_metric())
    return x + eps * v;
  const auto accel = [&](const Vec2& p, const Vec2& w) {
    const Christoffels g = christoffels_at(chart, p, kAnalysisFdStep);
    return Vec2(-w.dot(g[0] * w), -w.dot(g[1] * w));
  };
  const int steps = std::max(16, static_cast<int>(std::ceil(eps / 1e-3)));
  const double dt = eps / steps;
  for (int s = 0; s < steps; ++s) {
    const Vec2 k1x = v, k1v = accel(x, v);
    const Vec2 k2x = v + 0.5 * dt * k1v, k2v = accel(x + 0.5 * dt * k1x, k2x);
    const Vec2 k3x = v + 0.5 * dt * k2v, k3v = accel(x + 0.5 * dt * k2x, k3x);
    const Vec2 k4x = v + dt * k3v, k4v = accel(x + dt * k3x, k4x);
    x += dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return x;
}

// Point of the inward parallel curve at distance eps, with its normal.
inline Vec2 parallel_point(const SubmersionChart& chart, const DomainSpec& spec, int piece,
                           double t, double eps, Vec2* normal = nullptr) {
  Vec2 v = inward_unit_normal(chart, spec, {piece, t});
  const Vec2 p = shoot_geodesic(chart, boundary_point(spec, piece, t), v, eps);
  if (normal)
    *normal = v;
  return p;
}

inline double parameter_step(const DomainSpec& spec, int piece) {
  return 2e-3 * boundary_piece_length(spec, piece);
}

// Fourth-order central derivative in the boundary parameter.
template <class Fn>
auto d_dt(Fn&& fn, double t, double dt) {
  using R = std::decay_t<decltype(fn(t))>; // forces evaluation of Eigen expressions
  return R((fn(t - 2 * dt) - 8.0 * fn(t - dt) + 8.0 * fn(t + dt) - fn(t + 2 * dt)) / (12.0 * dt));
}

// Cylinder data of the parallel curve at distance eps through boundary
// parameter (piece, t); fourth-order differencing in t.
inline BoundarySample level_set_sample(const SubmersionChart& chart, const DomainSpec& spec,
                                       int piece, double t, double eps, double dt_weight) {
  const double dt = parameter_step(spec, piece);
  Vec2 P[5];
  for (int m = -2; m <= 2; ++m)
    P[m + 2] = parallel_point(chart, spec, piece, t + m * dt, eps);
  BoundarySample s;
  s.param = {piece, t};
  s.point = parallel_point(chart, spec, piece, t, eps, &s.eta);
  const Vec2 d1 = (-P[4] + 8.0 * P[3] - 8.0 * P[1] + P[0]) / (12.0 * dt);
  const Vec2 d2 = (-P[4] + 16.0 * P[3] - 30.0 * P[2] + 16.0 * P[1] - P[0]) / (12.0 * dt * dt);
  Vec2 acc = d2;
  if (!chart.has_identity_metric()) {
    const Christoffels g = christoffels_at(chart, s.point, kAnalysisFdStep);
    acc += Vec2(d1.dot(g[0] * d1), d1.dot(g[1] * d1));
  }
  const Mat2 sigma = chart.metric(s.point);
  const double speed2 = d1.dot(sigma * d1);
  s.H_gamma = acc.dot(sigma * s.eta) / speed2;
  s.kappa = kappa_vector_at(chart, s.point, kAnalysisFdStep).dot(s.eta);
  const int n = chart.dim();
  s.H_cyl = ((n - 1) * s.H_gamma + s.kappa) / n;
  s.weight = std::sqrt(speed2) * dt_weight;
  return s;
}

// Sample parameters: midpoints of equal parameter cells on each piece.
inline std::vector<std::pair<BoundaryParam, double>> boundary_cells(const DomainSpec& spec,
                                                                    int samples) {
  const int pieces = boundary_piece_count(spec);
  double total = 0;
  for (int p = 0; p < pieces; ++p)
    total += boundary_piece_length(spec, p);
  std::vector<std::pair<BoundaryParam, double>> out;
  for (int p = 0; p < pieces; ++p) {
    const double L = boundary_piece_length(spec, p);
    const int m = pieces == 1 ? samples
                              : std::max(4, static_cast<int>(std::ceil(samples * L / total)));
    for (int i = 0; i < m; ++i)
      out.push_back({{p, (i + 0.5) * L / m}, L / m});
  }
  return out;
}

} // namespace detail

// Number of samples giving sigma-arclength spacing at most h.
inline int boundary_sample_count(const SubmersionChart& chart, const DomainSpec& spec,
                                 double h) {
  double len = 0;
  for (int p = 0; p < boundary_piece_count(spec); ++p) {
    constexpr int m = 1024;
    const double L = boundary_piece_length(spec, p);
    for (int i = 0; i < m; ++i) {
      const double t = (i + 0.5) * L / m, dt = 1e-6 * L;
      const Vec2 c = boundary_point(spec, p, t);
      const Vec2 d = (boundary_point(spec, p, t + dt) - boundary_point(spec, p, t - dt)) / (2 * dt);
      len += sigma_length(chart.metric(c), d) * L / m;
    }
  }
  return std::max(16, static_cast<int>(std::ceil(len / h)));
}

inline BoundaryGeometry boundary_geometry(const SubmersionChart& chart, const DomainSpec& spec,
                                          int samples) {
  if (samples < 16)
    throw Error("boundary_geometry needs at least 16 samples");
  BoundaryGeometry out;
  out.n = chart.dim();
  for (const auto& [bp, dt] : detail::boundary_cells(spec, samples))
    out.samples.push_back(detail::level_set_sample(chart, spec, bp.piece, bp.t, 0.0, dt));
  return out;
}

// Tubular width certified for parallel curves and barrier bands: the focal
// bound 1/sup H_gamma capped by the inradius.
inline double tubular_width(const SubmersionChart& chart, const DomainSpec& spec,
                            const BoundaryGeometry& bg) {
  double inradius;
  Vec2 centre;
  if (const auto* d = std::get_if<Disk>(&spec)) {
    inradius = d->radius;
    centre = d->center;
  } else {
    const auto& r = std::get<Rectangle>(spec);
    inradius = 0.5 * std::min(r.x1 - r.x0, r.y1 - r.y0);
    centre = Vec2(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1));
  }
  if (!chart.has_identity_metric()) {
    const Eigen::SelfAdjointEigenSolver<Mat2> es(chart.metric(centre));
    inradius *= std::sqrt(es.eigenvalues().minCoeff());
  }
  const double k = bg.sup_Hgamma();
  return k > 0 ? std::min(inradius, 1.0 / k) : inradius;
}

// sigma-diameter of the domain (exact for identity metrics, bounded above
// by the largest metric stretch at the boundary samples otherwise).
inline double sigma_diameter(const SubmersionChart& chart, const DomainSpec& spec,
                             const BoundaryGeometry& bg) {
  const double d = euclidean_diameter(spec);
  if (chart.has_identity_metric())
    return d;
  double stretch = 0;
  for (const auto& s : bg.samples) {
    const Eigen::SelfAdjointEigenSolver<Mat2> es(chart.metric(s.point));
    stretch = std::max(stretch, es.eigenvalues().maxCoeff());
  }
  return d * std::sqrt(stretch);
}

struct HypothesisVerdict {
  double sup_H = 0;
  double inf_Hcyl = 0;
  double ric_lower = 0;  // NaN when the chart has no bound
  double ric_threshold = 0; // -n inf H_cyl^2
  bool H_ok = false, ric_ok = false, Hcyl_positive = false;
  double H_slack = 0, ric_slack = 0, Hcyl_slack = 0;
  bool passed = false;
};

// sup |H| over the grid (nodes and crossings) and the boundary samples, or
// over a lattice of the domain when no grid is given.
inline double sup_abs_H(const ProblemSpec& spec, const BoundaryGeometry& bg,
                        const GridDomain* g = nullptr) {
  double m = 0;
  const auto visit = [&](const Vec2& x) { m = std::max(m, std::abs(spec.H(x))); };
  for (const auto& s : bg.samples)
    visit(s.point);
  if (g) {
    for (int k = 0; k < g->size(); ++k)
      visit(g->position(k));
    for (const auto& c : g->crossings)
      visit(c.point);
  } else if (!spec.constant_H) {
    Vec2 lo, hi;
    bounding_box(spec.domain, lo, hi);
    constexpr int m_lat = 128;
    for (int j = 0; j <= m_lat; ++j)
      for (int i = 0; i <= m_lat; ++i) {
        const Vec2 x = lo + Vec2((hi - lo).x() * i / m_lat, (hi - lo).y() * j / m_lat);
        if (signed_distance(spec.domain, x) <= 0)
          visit(x);
      }
  }
  return m;
}

inline HypothesisVerdict hypothesis_check(const ProblemSpec& spec, const BoundaryGeometry& bg,
                                          const GridDomain* g = nullptr) {
  HypothesisVerdict v;
  v.sup_H = sup_abs_H(spec, bg, g);
  v.inf_Hcyl = bg.inf_Hcyl();
  v.ric_lower = spec.chart.ric_lower();
  v.ric_threshold = -bg.n * v.inf_Hcyl * v.inf_Hcyl;
  v.H_slack = v.inf_Hcyl - v.sup_H;
  v.Hcyl_slack = v.inf_Hcyl;
  v.ric_slack = v.ric_lower - v.ric_threshold; // NaN propagates
  v.H_ok = v.H_slack >= -kHypothesisTolerance;
  v.Hcyl_positive = v.inf_Hcyl > 0;
  v.ric_ok = spec.chart.ric_known() && v.ric_slack >= -kHypothesisTolerance;
  v.passed = v.H_ok && v.Hcyl_positive && v.ric_ok;
  return v;
}

// Parallel-curve evolution of H_cyl, computed directly and through the
// scalar lower envelope dH/deps = H^2 + ric_lower / n.
struct RiccatiCurve {
  std::vector<double> eps;
  std::vector<std::vector<double>> direct;   // [eps][sample]
  std::vector<std::vector<double>> envelope; // [eps][sample]; empty without a Ricci bound
  std::vector<double> inf_direct;            // per eps
  bool monotone = true;
  bool envelope_ok = true;
  double worst_envelope_gap = 0; // min of direct - envelope
  double width = 0;
};

inline RiccatiCurve riccati_evolution(const SubmersionChart& chart, const DomainSpec& spec,
                                      double eps_max, double d_eps, int samples = 64) {
  if (!(d_eps > 0) || !(eps_max >= 0))
    throw Error("riccati_evolution needs eps_max >= 0 and d_eps > 0");
  RiccatiCurve out;
  const BoundaryGeometry bg = boundary_geometry(chart, spec, samples);
  out.width = tubular_width(chart, spec, bg);
  if (eps_max >= out.width)
    throw TubularWidthExceeded("eps_max = " + std::to_string(eps_max) +
                               " reaches the tubular width " + std::to_string(out.width));
  const auto cells = detail::boundary_cells(spec, samples);
  const int steps = static_cast<int>(std::ceil(eps_max / d_eps - 1e-12));
  const int n = chart.dim();
  const bool have_ric = chart.ric_known();
  std::vector<double> env;
  for (const auto& s : bg.samples)
    env.push_back(s.H_cyl);
  const double c = have_ric ? chart.ric_lower() / n : 0.0;
  const auto rhs = [c](double y) { return y * y + c; };
  for (int step = 0; step <= steps; ++step) {
    const double e = std::min(eps_max, step * d_eps);
    std::vector<double> row;
    double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double v =
          step == 0 ? bg.samples[i].H_cyl
                    : detail::level_set_sample(chart, spec, cells[i].first.piece,
                                               cells[i].first.t, e, cells[i].second)
                          .H_cyl;
      row.push_back(v);
      inf = std::min(inf, v);
    }
    if (step > 0) {
      const double prev_e = out.eps.back();
      constexpr int sub = 8;
      const double dt = (e - prev_e) / sub;
      for (double& y : env)
        for (int k = 0; k < sub; ++k) {
          const double k1 = rhs(y), k2 = rhs(y + 0.5 * dt * k1), k3 = rhs(y + 0.5 * dt * k2),
                       k4 = rhs(y + dt * k3);
          y += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
      const auto& last = out.direct.back();
      for (std::size_t i = 0; i < row.size(); ++i)
        if (row[i] < last[i] - 1e-9 * (1 + std::abs(last[i])))
          out.monotone = false;
    }
    if (have_ric) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        const double gap = row[i] - env[i];
        out.worst_envelope_gap = std::min(out.worst_envelope_gap, gap);
        if (gap < -1e-6 * (1 + std::abs(env[i])))
          out.envelope_ok = false;
      }
      out.envelope.push_back(env);
    }
    out.eps.push_back(e);
    out.direct.push_back(std::move(row));
    out.inf_direct.push_back(inf);
  }
  return out;
}

// Barriers.

// h(d) = (e^{CA} / C)(1 - e^{-Cd}); h(0) = 0 and h'(0) = e^{CA}.
inline double height_barrier(double C, double A, double d) {
  if (d <= 0)
    return 0.0;
  return std::exp(C * A) / C * -std::expm1(-C * d);
}

// psi(d) = mu ln(1 + K d) with mu = C_b / ln(1 + K).
inline double barrier_mu(double K, double C_b) { return C_b / std::log1p(K); }
inline double gradient_barrier(double K, double C_b, double d) {
  return barrier_mu(K, C_b) * std::log1p(K * d);
}

struct BarrierParams {
  double C = 1, A = 1;     // height barrier
  double K = 1, C_b = 1;   // boundary-gradient barrier
  double band = 0;         // tubular band width the gradient barrier uses

  double mu() const { return barrier_mu(K, C_b); }
};

// Ladder 2^0 ... 2^20 used for C, K and C_b.
inline std::vector<double> barrier_ladder() {
  std::vector<double> out;
  for (int k = 0; k <= 20; ++k)
    out.push_back(std::ldexp(1.0, k));
  return out;
}

struct HeightCertificate {
  bool passed = false;
  double C = 0, A = 0;
  std::vector<double> margin; // per unknown: min of upper and lower barrier slack
  double min_margin = 0;
  int witness = -1;           // worst unknown at the last tried C
  double sup_h = 0;           // sup over the grid of h(d)
  double sup_u = 0, sup_phi = 0;
  double crude_bound = 0;     // sup h + sup |phi|
  bool crude_ok = false;
};

namespace detail {

inline double trace_sup(const std::vector<double>& t) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : t)
    m = std::max(m, v);
  return m;
}
inline double trace_inf(const std::vector<double>& t) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : t)
    m = std::min(m, v);
  return m;
}

} // namespace detail

// Upper barrier sup phi + h(d) >= u and lower barrier inf phi - h(d) <= u on
// every unknown, for the smallest C on the ladder that works.
inline HeightCertificate height_barrier_certificate(const MeanCurvatureOperator& op,
                                                    const ScalarField& u,
                                                    const BoundaryGeometry& bg,
                                                    bool strict = false) {
  const GridDomain& g = op.grid();
  HeightCertificate out;
  out.A = 1.01 * sigma_diameter(op.spec().chart, op.spec().domain, bg);
  const double phi_sup = g.crossing_count() ? detail::trace_sup(u.trace) : 0.0;
  const double phi_inf = g.crossing_count() ? detail::trace_inf(u.trace) : 0.0;
  out.sup_phi = std::max(std::abs(phi_sup), std::abs(phi_inf));
  out.sup_u = sup_norm(u.values);
  for (double C : barrier_ladder()) {
    // e^{CA} past the double range would make every field certify.
    if (C * out.A > 700)
      break;
    std::vector<double> margin(g.size());
    double worst = std::numeric_limits<double>::infinity();
    int witness = -1;
    double sup_h = 0;
    for (int k = 0; k < g.size(); ++k) {
      const double hk = height_barrier(C, out.A, g.dist[k]);
      sup_h = std::max(sup_h, hk);
      margin[k] = std::min(phi_sup + hk - u.values[k], u.values[k] - (phi_inf - hk));
      if (margin[k] < worst) {
        worst = margin[k];
        witness = k;
      }
    }
    out.C = C;
    out.margin = std::move(margin);
    out.min_margin = worst;
    out.witness = witness;
    out.sup_h = sup_h;
    if (worst >= 0) {
      out.passed = true;
      out.witness = -1;
      break;
    }
  }
  out.crude_bound = out.sup_h + out.sup_phi;
  out.crude_ok = out.sup_u <= out.crude_bound;
  out.passed = out.passed && out.crude_ok;
  if (strict && !out.passed)
    throw CertificateFailed("height barrier fails at " +
                                (out.witness >= 0 ? format_point(g.position(out.witness))
                                                  : std::string("crude bound")),
                            out.witness);
  return out;
}

// Full gradient of u at a boundary crossing: the derivative along the link
// from a one-sided quadratic through the crossing and the two nodes behind
// it, the tangential derivative from the boundary data.
struct CrossingGradient {
  Vec2 du = Vec2::Zero();
  bool reliable = false; // link not too close to tangential
  BoundaryParam param;
};

inline std::vector<CrossingGradient> crossing_gradients(const MeanCurvatureOperator& op,
                                                        const ScalarField& u) {
  const GridDomain& g = op.grid();
  const DomainSpec& spec = op.spec().domain;
  std::vector<CrossingGradient> out(g.crossing_count());
  for (int c = 0; c < g.crossing_count(); ++c) {
    const Crossing& cr = g.crossings[c];
    CrossingGradient& cg = out[c];
    cg.param = closest_boundary_param(spec, cr.point);
    const int axis = kDirAxis[cr.dir];
    const double a = cr.theta * g.h;
    const Link& back = g.links[cr.unknown][kOpposite[cr.dir]];
    double ds; // derivative along the inward link direction at the crossing
    if (!back.boundary && back.index >= 0) {
      const double b = a + g.h;
      ds = u.trace[c] * -(1.0 / a + 1.0 / b) + u.values[cr.unknown] * b / (a * g.h) -
           u.values[back.index] * a / (b * g.h);
    } else {
      ds = (u.values[cr.unknown] - u.trace[c]) / a;
    }
    const double d_axis = -kDirSign[cr.dir] * ds;

    const int piece = cg.param.piece;
    const double dt = detail::parameter_step(spec, piece);
    const Vec2 tangent = detail::d_dt(
        [&](double t) { return boundary_point(spec, piece, t); }, cg.param.t, dt);
    const double dphi = detail::d_dt(
        [&](double t) { return op.spec().phi(boundary_point(spec, piece, t)); }, cg.param.t, dt);
    Mat2 M;
    M.row(0) = detail::axis_unit(axis).transpose();
    M.row(1) = tangent.transpose();
    cg.reliable = std::abs(tangent.normalized()[axis]) <= std::sqrt(0.5) + 1e-12;
    cg.du = M.fullPivLu().solve(Vec2(d_axis, dphi));
  }
  return out;
}

struct GradientCertificate {
  bool passed = false;
  BarrierParams params;
  double tilt = 0;            // linear tilt tau of the extension (0: constant)
  bool constant_extension_ok = false;
  std::vector<int> band;      // unknowns in the band
  std::vector<double> margin; // per band unknown
  double min_margin = 0;
  int witness = -1;
  double sup_boundary_gradient = 0; // sup over reliable crossings of |Du|_sigma
  double sup_tangential = 0;        // sup |d phi / ds|_sigma over boundary samples
  double bound = 0;                 // gradient bound implied by psi'(0) = mu K
};

// Checks phi_ext + psi(d) >= u >= phi_ext - psi(d) on the band d <= band,
// phi extended constantly along inward normals, tilted by tau d when the
// constant extension violates <grad phi, eta> < <grad s, eta>.
inline GradientCertificate boundary_gradient_certificate(const MeanCurvatureOperator& op,
                                                         const ScalarField& u,
                                                         const BoundaryGeometry& bg,
                                                         double band = -1, bool strict = false) {
  const GridDomain& g = op.grid();
  const ProblemSpec& ps = op.spec();
  const SubmersionChart& chart = ps.chart;
  GradientCertificate out;
  if (band < 0)
    band = 0.5 * tubular_width(chart, ps.domain, bg);
  out.params.band = band;

  // <grad s, eta> along the boundary.
  double min_s_eta = std::numeric_limits<double>::infinity();
  for (const auto& s : bg.samples)
    min_s_eta = std::min(min_s_eta, section_gradient_s_at(chart, s.point).dot(s.eta));
  out.constant_extension_ok = min_s_eta > 0;
  out.tilt = out.constant_extension_ok ? 0.0 : min_s_eta - 0.5;

  for (const auto& s : bg.samples) {
    const int p = s.param.piece;
    const double dt = detail::parameter_step(ps.domain, p);
    const auto c = [&](double t) { return boundary_point(ps.domain, p, t); };
    const double ds = sigma_length(chart.metric(s.point), detail::d_dt(c, s.param.t, dt));
    const double dphi = detail::d_dt([&](double t) { return ps.phi(c(t)); }, s.param.t, dt);
    out.sup_tangential = std::max(out.sup_tangential, std::abs(dphi) / ds);
  }

  std::vector<double> phi_ext;
  for (int k = 0; k < g.size(); ++k)
    if (g.dist[k] <= band) {
      out.band.push_back(k);
      const Vec2 y = boundary_point(ps.domain, closest_boundary_param(ps.domain, g.position(k)));
      phi_ext.push_back(ps.phi(y) + out.tilt * g.dist[k]);
    }

  struct Candidate {
    double K, C_b, slope;
  };
  std::vector<Candidate> cands;
  for (double K : barrier_ladder())
    for (double C_b : barrier_ladder())
      cands.push_back({K, C_b, barrier_mu(K, C_b) * K});
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& x, const Candidate& y) { return x.slope < y.slope; });

  for (const Candidate& cd : cands) {
    std::vector<double> margin(out.band.size());
    double worst = std::numeric_limits<double>::infinity();
    int witness = -1;
    for (std::size_t i = 0; i < out.band.size(); ++i) {
      const int k = out.band[i];
      const double psi = gradient_barrier(cd.K, cd.C_b, g.dist[k]);
      margin[i] = std::min(phi_ext[i] + psi - u.values[k], u.values[k] - (phi_ext[i] - psi));
      if (margin[i] < worst) {
        worst = margin[i];
        witness = k;
      }
    }
    out.params.K = cd.K;
    out.params.C_b = cd.C_b;
    out.margin = std::move(margin);
    out.min_margin = out.band.empty() ? 0.0 : worst;
    out.witness = witness;
    if (out.band.empty() || worst >= 0) {
      out.passed = true;
      out.witness = -1;
      break;
    }
  }

  for (const auto& cg : crossing_gradients(op, u))
    if (cg.reliable) {
      const Vec2 x = boundary_point(ps.domain, cg.param);
      out.sup_boundary_gradient = std::max(
          out.sup_boundary_gradient, std::sqrt(cg.du.dot(inverse_metric_at(chart, x) * cg.du)));
    }
  const double normal = out.params.mu() * out.params.K + std::abs(out.tilt);
  out.bound = std::sqrt(normal * normal + out.sup_tangential * out.sup_tangential);
  out.passed = out.passed && out.sup_boundary_gradient <= out.bound;
  if (strict && !out.passed)
    throw CertificateFailed("boundary gradient barrier fails" +
                                (out.witness >= 0 ? " at " + format_point(g.position(out.witness))
                                                  : std::string()),
                            out.witness);
  return out;
}

namespace detail {

// Piecewise-linear interpolation in the boundary parameter of values known
// at scattered boundary points (periodic on a disk, clamped on edges).
class BoundaryInterpolant {
public:
  BoundaryInterpolant(const DomainSpec& spec, const std::vector<BoundaryParam>& at,
                      const std::vector<double>& values)
      : spec_(spec), pieces_(boundary_piece_count(spec)) {
    for (std::size_t i = 0; i < at.size(); ++i)
      pieces_[at[i].piece].emplace_back(at[i].t, values[i]);
    for (auto& p : pieces_)
      std::sort(p.begin(), p.end());
  }

  double operator()(const BoundaryParam& q) const {
    const auto& pts = pieces_[q.piece];
    if (pts.empty())
      return std::numeric_limits<double>::quiet_NaN();
    const bool periodic = std::holds_alternative<Disk>(spec_);
    const double L = boundary_piece_length(spec_, q.piece);
    auto it = std::lower_bound(pts.begin(), pts.end(), std::make_pair(q.t, -1e300));
    std::pair<double, double> lo, hi;
    if (it == pts.begin()) {
      if (!periodic)
        return pts.front().second;
      lo = {pts.back().first - L, pts.back().second};
      hi = pts.front();
    } else if (it == pts.end()) {
      if (!periodic)
        return pts.back().second;
      lo = pts.back();
      hi = {pts.front().first + L, pts.front().second};
    } else {
      lo = *(it - 1);
      hi = *it;
    }
    if (hi.first == lo.first)
      return lo.second;
    const double w = (q.t - lo.first) / (hi.first - lo.first);
    return (1 - w) * lo.second + w * hi.second;
  }

private:
  DomainSpec spec_;
  std::vector<std::vector<std::pair<double, double>>> pieces_;
};

} // namespace detail

// Divergence identity for one graph: the boundary integral of <Y, nu>
// against the bulk integral of n H <Y, N> over the graph.
struct FluxBalance {
  double boundary = 0;
  double bulk = 0;
  double imbalance = 0; // |boundary - bulk| / (|boundary| + |bulk| + 1)
};

inline FluxBalance flux_balance(const MeanCurvatureOperator& op, const ScalarField& u,
                                const BoundaryGeometry& bg) {
  const GridDomain& g = op.grid();
  const ProblemSpec& ps = op.spec();
  const SubmersionChart& chart = ps.chart;
  FluxBalance out;

  // <Y, nu> = f^{-1/2} <u_hat, nu_sigma>_sigma / W at the boundary.
  std::vector<BoundaryParam> at;
  std::vector<double> vals;
  const auto grads = crossing_gradients(op, u);
  for (int c = 0; c < g.crossing_count(); ++c) {
    if (!grads[c].reliable)
      continue;
    const Vec2 x = boundary_point(ps.domain, grads[c].param);
    const OperatorState s = state_from_gradient(chart, x, grads[c].du, 0.0);
    const Vec2 eta = inward_unit_normal(chart, ps.domain, grads[c].param);
    at.push_back(grads[c].param);
    vals.push_back(-s.uhat_cov.dot(eta) / (s.W * std::sqrt(chart.f(x))));
  }
  const detail::BoundaryInterpolant interp(ps.domain, at, vals);
  for (const auto& s : bg.samples)
    out.boundary += interp(s.param) * s.weight;

  // n H <Y, N> dA = n H (1 / W)(W / sqrt f) sqrt(det sigma) dx.
  std::vector<double> bulk(g.size());
  for (int k = 0; k < g.size(); ++k) {
    const Vec2 x = g.position(k);
    bulk[k] = ps.n() * ps.H(x) / std::sqrt(chart.f(x));
  }
  out.bulk = integrate(g, bulk, chart);
  out.imbalance =
      std::abs(out.boundary - out.bulk) / (std::abs(out.boundary) + std::abs(out.bulk) + 1);
  return out;
}

// Theta = <N, Y> = 1 / W on the unknowns and at the boundary crossings.
struct ThetaReport {
  std::vector<double> theta;        // per unknown
  std::vector<double> theta_trace;  // per crossing
  std::vector<double> theta_alt;    // f / W, the alternative normalization
  double max_discrepancy = 0;       // sup |1/W - f/W|
  double min_interior = 0;
  int argmin_interior = -1;
  double min_boundary = 0;          // over boundary-adjacent unknowns and crossings
  Vec2 argmin_boundary = Vec2::Zero();
  bool holds = true;
};

inline ThetaReport theta_field(const MeanCurvatureOperator& op, const ScalarField& u,
                               bool strict = false) {
  const GridDomain& g = op.grid();
  const SubmersionChart& chart = op.spec().chart;
  ThetaReport out;
  out.theta.resize(g.size());
  out.theta_alt.resize(g.size());
  out.min_interior = std::numeric_limits<double>::infinity();
  out.min_boundary = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.size(); ++k) {
    const OperatorState s = op.node_state(u, k);
    const double f = chart.f(g.position(k));
    out.theta[k] = 1.0 / s.W;
    out.theta_alt[k] = f / s.W;
    out.max_discrepancy = std::max(out.max_discrepancy, std::abs(out.theta[k] - out.theta_alt[k]));
    if (g.is_interior(k)) {
      if (out.theta[k] < out.min_interior) {
        out.min_interior = out.theta[k];
        out.argmin_interior = k;
      }
    } else if (out.theta[k] < out.min_boundary) {
      out.min_boundary = out.theta[k];
      out.argmin_boundary = g.position(k);
    }
  }
  const auto grads = crossing_gradients(op, u);
  out.theta_trace.resize(g.crossing_count());
  for (int c = 0; c < g.crossing_count(); ++c) {
    const Vec2 x = g.crossings[c].point;
    const OperatorState s = state_from_gradient(chart, x, grads[c].du, 0.0);
    out.theta_trace[c] = 1.0 / s.W;
    if (grads[c].reliable && out.theta_trace[c] < out.min_boundary) {
      out.min_boundary = out.theta_trace[c];
      out.argmin_boundary = x;
    }
  }
  out.holds = out.argmin_interior < 0 || out.min_interior >= out.min_boundary - kMinPrincipleSlack;
  if (strict && !out.holds)
    throw MinPrincipleViolated("interior minimum of Theta at " +
                                   format_point(g.position(out.argmin_interior)) +
                                   " below the boundary minimum",
                               out.argmin_interior);
  return out;
}

// Verification suite over a candidate solution.
struct VerifyItem {
  std::string name;
  bool applicable = true;
  bool passed = false;
  std::string note;
};

struct VerifyOptions {
  double residual_tol = 1e-8;
  double flux_tol = 1e-2;
  double riccati_fraction = 0.3; // eps_max as a fraction of the tubular width
  int samples = 0;               // 0: spacing h
};

struct VerifyReport {
  double residual_sup = 0;
  HypothesisVerdict hypothesis;
  BoundaryGeometry boundary;
  std::optional<RiccatiCurve> riccati;
  std::optional<HeightCertificate> height;
  std::optional<GradientCertificate> gradient;
  FluxBalance flux;
  std::optional<ThetaReport> theta;
  std::vector<VerifyItem> items;

  bool passed() const {
    for (const auto& it : items)
      if (it.applicable && !it.passed)
        return false;
    return true;
  }
};

inline VerifyReport verify_solution(const MeanCurvatureOperator& op, const ScalarField& u,
                                    const VerifyOptions& opt = {}) {
  const GridDomain& g = op.grid();
  const ProblemSpec& ps = op.spec();
  VerifyReport rep;
  const int samples =
      opt.samples > 0 ? opt.samples : boundary_sample_count(ps.chart, ps.domain, g.h);
  rep.boundary = boundary_geometry(ps.chart, ps.domain, samples);
  rep.hypothesis = hypothesis_check(ps, rep.boundary, &g);

  rep.residual_sup = sup_norm(op.residual(u, 1.0));
  const bool solved = rep.residual_sup <= opt.residual_tol;
  rep.items.push_back({"residual", true, solved,
                       "sup |Q[u] - nH| = " + std::to_string(rep.residual_sup)});
  rep.items.push_back({"hypothesis", true, rep.hypothesis.passed, ""});

  const bool certify = solved && rep.hypothesis.passed;
  {
    VerifyItem it{"riccati", rep.hypothesis.passed, false, ""};
    if (it.applicable) {
      const double width = tubular_width(ps.chart, ps.domain, rep.boundary);
      rep.riccati = riccati_evolution(ps.chart, ps.domain, opt.riccati_fraction * width,
                                      opt.riccati_fraction * width / 32, std::min(samples, 256));
      it.passed = rep.riccati->monotone && rep.riccati->envelope_ok;
    }
    rep.items.push_back(it);
  }
  {
    VerifyItem it{"height_barrier", certify, false, ""};
    if (certify) {
      rep.height = height_barrier_certificate(op, u, rep.boundary);
      it.passed = rep.height->passed;
    }
    rep.items.push_back(it);
  }
  {
    VerifyItem it{"boundary_gradient_barrier", certify, false, ""};
    if (certify) {
      rep.gradient = boundary_gradient_certificate(op, u, rep.boundary);
      it.passed = rep.gradient->passed;
    }
    rep.items.push_back(it);
  }
  {
    rep.flux = flux_balance(op, u, rep.boundary);
    VerifyItem it{"flux", solved, rep.flux.imbalance <= opt.flux_tol, ""};
    rep.items.push_back(it);
  }
  {
    VerifyItem it{"theta_min_principle", solved && ps.constant_H, false, ""};
    if (it.applicable) {
      rep.theta = theta_field(op, u);
      it.passed = rep.theta->holds;
    }
    rep.items.push_back(it);
  }
  return rep;
}

// Summary stored in a solve report.
inline HypothesisSummary summarize(const HypothesisVerdict& v) {
  return {true, v.sup_H, v.inf_Hcyl, v.ric_ok, v.passed};
}

} // namespace kgraph
