#pragma once

// Mean curvature operator of Killing graphs over a submersion chart.
//
// With u_hat_i = d_i u + f^{1/2} delta_i and W^2 = f + |u_hat|^2_sigma the
// graph has upward normal mean curvature
//
//   n H = (sqrt f / sqrt det sigma) d_i( sqrt det sigma f^{-1/2} u_hat^i / W ),
//
// which expands to div(u_hat / W) - kappa . u_hat / W. The divergence is
// discretized as flux differences across cell faces.

#include "kgraph/domain.hpp"
#include "kgraph/errors.hpp"
#include "kgraph/expression.hpp"
#include "kgraph/geometry.hpp"
#include "kgraph/grid.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace kgraph {

using SparseMatrix = Eigen::SparseMatrix<double>;
using PointFn = std::function<double(const Vec2&)>;

struct ProblemSpec {
  SubmersionChart chart;
  DomainSpec domain;
  PointFn H;
  PointFn phi;
  bool constant_H = true;

  int n() const { return chart.dim(); }
};

inline ProblemSpec make_problem(SubmersionChart chart, DomainSpec domain, const Expression& H,
                                const Expression& phi) {
  return ProblemSpec{std::move(chart), std::move(domain),
                     [H](const Vec2& x) { return H(x.x(), x.y()); },
                     [phi](const Vec2& x) { return phi(x.x(), x.y()); }, H.is_constant()};
}

inline ProblemSpec make_problem(SubmersionChart chart, DomainSpec domain, double H,
                                PointFn phi) {
  return ProblemSpec{std::move(chart), std::move(domain), [H](const Vec2&) { return H; },
                     std::move(phi), true};
}

struct OperatorState {
  Vec2 uhat;     // contravariant u_hat^j
  Vec2 uhat_cov; // covariant u_hat_j
  double W = 0;
  Mat2 A;        // W^2 sigma^ij - u_hat^i u_hat^j
  double B = 0;  // n H W^3
};

inline double w_of(const SubmersionChart& chart, const Vec2& uhat, const Vec2& x) {
  return std::sqrt(chart.f(x) + uhat.dot(chart.metric(x) * uhat));
}

inline OperatorState state_from_gradient(const SubmersionChart& chart, const Vec2& x,
                                         const Vec2& du, double nH) {
  OperatorState s;
  const Mat2 inv = inverse_metric_at(chart, x);
  s.uhat_cov = du + std::sqrt(chart.f(x)) * chart.delta(x);
  s.uhat = inv * s.uhat_cov;
  s.W = std::sqrt(chart.f(x) + s.uhat_cov.dot(s.uhat));
  s.A = s.W * s.W * inv - s.uhat * s.uhat.transpose();
  s.B = nH * s.W * s.W * s.W;
  return s;
}

inline Vec2 u_hat(const SubmersionChart& chart, const GridDomain& g, const ScalarField& u,
                  int unknown) {
  const Vec2 x = g.position(unknown);
  return inverse_metric_at(chart, x) *
         (gradient_at(g, u, unknown) + std::sqrt(chart.f(x)) * chart.delta(x));
}

struct QuasilinearCoeffs {
  Mat2 A;
  double lower = 0; // -(f + W^2) kappa_i u_hat^i
  double W = 0;
};

inline QuasilinearCoeffs quasilinear_coeffs(const ProblemSpec& spec, const GridDomain& g,
                                            const ScalarField& u, int unknown) {
  const Vec2 x = g.position(unknown);
  const OperatorState s = state_from_gradient(spec.chart, x, gradient_at(g, u, unknown), 0.0);
  const Vec2 kappa = kappa_vector_at(spec.chart, x, g.h);
  return {s.A, -(spec.chart.f(x) + s.W * s.W) * kappa.dot(s.uhat), s.W};
}

class MeanCurvatureOperator {
public:
  MeanCurvatureOperator(ProblemSpec spec, const GridDomain& grid)
      : spec_(std::move(spec)), g_(&grid) {
    const GridDomain& g = grid;
    const SubmersionChart& c = spec_.chart;
    face_.resize(g.faces.size());
    for (std::size_t i = 0; i < g.faces.size(); ++i) {
      const Vec2 p = g.faces[i].point;
      FaceGeometry& fg = face_[i];
      fg.inv = inverse_metric_at(c, p);
      fg.f = c.f(p);
      fg.X = std::sqrt(fg.f) * c.delta(p);
      fg.rho = std::sqrt(c.metric(p).determinant() / fg.f);
    }
    const int n = g.size();
    node_.resize(n);
    for (int k = 0; k < n; ++k) {
      const Vec2 p = g.position(k);
      NodeGeometry& ng = node_[k];
      ng.inv = inverse_metric_at(c, p);
      ng.f = c.f(p);
      ng.X = std::sqrt(ng.f) * c.delta(p);
      ng.scale = std::sqrt(ng.f / c.metric(p).determinant());
      ng.nH = spec_.n() * spec_.H(p);
      if (!std::isfinite(ng.nH))
        throw NonFiniteValue("H not finite at " + format_point(p));
      ng.kappa = kappa_vector_at(c, p, g.h);
      ng.gamma_sym = christoffels_at(c, p, g.h);
      ng.dX = tilt_jacobian_at(c, p, g.h);
      ng.gamma = gamma_at(c, p, g.h);
    }
    phi_trace_.resize(g.crossings.size());
    for (std::size_t i = 0; i < g.crossings.size(); ++i) {
      phi_trace_[i] = spec_.phi(g.crossings[i].point);
      if (!std::isfinite(phi_trace_[i]))
        throw NonFiniteValue("boundary data not finite at " +
                             format_point(g.crossings[i].point));
    }
  }

  const ProblemSpec& spec() const { return spec_; }
  const GridDomain& grid() const { return *g_; }
  int size() const { return g_->size(); }

  // sigma * phi at the boundary crossings.
  std::vector<double> boundary_trace(double sigma = 1.0) const {
    std::vector<double> t(phi_trace_);
    for (double& v : t)
      v *= sigma;
    return t;
  }

  ScalarField field(const std::vector<double>& values, double sigma = 1.0) const {
    return {values, boundary_trace(sigma)};
  }

  OperatorState node_state(const ScalarField& u, int k) const {
    const NodeGeometry& ng = node_[k];
    OperatorState s;
    s.uhat_cov = gradient_at(*g_, u, k) + ng.X;
    s.uhat = ng.inv * s.uhat_cov;
    s.W = std::sqrt(ng.f + s.uhat_cov.dot(s.uhat));
    s.A = s.W * s.W * ng.inv - s.uhat * s.uhat.transpose();
    s.B = ng.nH * s.W * s.W * s.W;
    return s;
  }

  // Q[u] - n sigma H on every unknown.
  std::vector<double> residual(const ScalarField& u, double sigma = 1.0) const {
    std::vector<double> flux(g_->faces.size());
    for (std::size_t i = 0; i < g_->faces.size(); ++i) {
      const Face& face = g_->faces[i];
      const FaceGeometry& fg = face_[i];
      const Vec2 p(face.grad[0].eval(u) + fg.X.x(), face.grad[1].eval(u) + fg.X.y());
      const Vec2 up = fg.inv * p;
      flux[i] = fg.rho * up[face.axis] / std::sqrt(fg.f + p.dot(up));
    }
    std::vector<double> r(size());
    for (int k = 0; k < size(); ++k) {
      const NodeFaces& nf = g_->node_faces[k];
      const double div = nf.weight[0] * (flux[nf.face[kEast]] - flux[nf.face[kWest]]) +
                         nf.weight[1] * (flux[nf.face[kNorth]] - flux[nf.face[kSouth]]);
      r[k] = node_[k].scale * div - sigma * node_[k].nH;
      if (!std::isfinite(r[k]))
        throw NonFiniteValue("residual not finite at " + format_point(g_->position(k)));
    }
    return r;
  }

  std::vector<double> residual(const std::vector<double>& values, double sigma = 1.0) const {
    return residual(field(values, sigma), sigma);
  }

  // Nondivergence form (1/W^3)(A^ij u_hat_{j;i} - (f + W^2) kappa . u_hat) - n sigma H.
  // with_gamma adds the antisymmetric part 1/2 gamma to the covariant Hessian.
  double nondivergence_residual(const ScalarField& u, int k, double sigma = 1.0,
                                bool with_gamma = false) const {
    const NodeGeometry& ng = node_[k];
    const OperatorState s = node_state(u, k);
    const Mat2 hess = hessian_at(*g_, u, k);
    Mat2 cov; // cov(i, j) = u_hat_{j;i}
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double v = hess(i, j) + 0.5 * (ng.dX(j, i) + ng.dX(i, j));
        for (int m = 0; m < 2; ++m)
          v -= ng.gamma_sym[m](i, j) * s.uhat_cov[m];
        cov(i, j) = v;
      }
    if (with_gamma)
      cov += 0.5 * ng.gamma;
    double contraction = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        contraction += s.A(i, j) * cov(i, j);
    const double W3 = s.W * s.W * s.W;
    return (contraction - (ng.f + s.W * s.W) * ng.kappa.dot(s.uhat)) / W3 - sigma * ng.nH;
  }

  std::vector<double> nondivergence_residual(const ScalarField& u, double sigma = 1.0,
                                             bool with_gamma = false) const {
    std::vector<double> r(size());
    for (int k = 0; k < size(); ++k)
      r[k] = nondivergence_residual(u, k, sigma, with_gamma);
    return r;
  }

  // d residual / d unknowns (columns over unknowns) and, when requested,
  // d residual / d trace (columns over crossings).
  SparseMatrix jacobian(const ScalarField& u, SparseMatrix* trace_part = nullptr) const {
    const auto& faces = g_->faces;
    std::vector<std::array<double, 2>> dF(faces.size()); // d F^a / d g_b per face
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const Face& face = faces[i];
      const FaceGeometry& fg = face_[i];
      const Vec2 p(face.grad[0].eval(u) + fg.X.x(), face.grad[1].eval(u) + fg.X.y());
      const Vec2 up = fg.inv * p;
      const double W = std::sqrt(fg.f + p.dot(up));
      const int a = face.axis;
      for (int b = 0; b < 2; ++b)
        dF[i][b] = fg.rho * (W * W * fg.inv(a, b) - up[a] * up[b]) / (W * W * W);
    }
    std::vector<Eigen::Triplet<double>> t, tb;
    for (int k = 0; k < size(); ++k) {
      const NodeFaces& nf = g_->node_faces[k];
      for (int dir = 0; dir < 4; ++dir) {
        const int fi = nf.face[dir];
        const double c = node_[k].scale * nf.weight[kDirAxis[dir]] * kDirSign[dir];
        for (int b = 0; b < 2; ++b) {
          const double cb = c * dF[fi][b];
          const LinearForm& form = faces[fi].grad[b];
          for (const auto& [j, v] : form.nodes)
            t.emplace_back(k, j, cb * v);
          if (trace_part)
            for (const auto& [j, v] : form.trace)
              tb.emplace_back(k, j, cb * v);
        }
      }
    }
    SparseMatrix J(size(), size());
    J.setFromTriplets(t.begin(), t.end());
    if (trace_part) {
      *trace_part = SparseMatrix(size(), g_->crossing_count());
      trace_part->setFromTriplets(tb.begin(), tb.end());
    }
    return J;
  }

  // Colored central-difference Jacobian; 9 colors cover the stencil support.
  SparseMatrix fd_jacobian(const ScalarField& u, double eps = 1e-7) const {
    std::vector<Eigen::Triplet<double>> t;
    const int n = size();
    for (int color = 0; color < 9; ++color) {
      ScalarField up = u, um = u;
      std::vector<int> members;
      for (int k = 0; k < n; ++k) {
        const int id = g_->node_of[k];
        if ((g_->node_i(id) % 3) * 3 + g_->node_j(id) % 3 != color)
          continue;
        members.push_back(k);
        up.values[k] += eps;
        um.values[k] -= eps;
      }
      if (members.empty())
        continue;
      const auto rp = residual(up, 0.0);
      const auto rm = residual(um, 0.0);
      std::vector<int> owner(g_->nx * g_->ny, -1);
      for (int k : members)
        owner[g_->node_of[k]] = k;
      for (int row = 0; row < n; ++row) {
        const double d = (rp[row] - rm[row]) / (2 * eps);
        if (d == 0.0)
          continue;
        // The perturbed unknown influencing this row is its unique same-color
        // node within the 3x3 block around it.
        const int id = g_->node_of[row];
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int i = g_->node_i(id) + di, j = g_->node_j(id) + dj;
            if (i < 0 || j < 0 || i >= g_->nx || j >= g_->ny)
              continue;
            const int col = owner[g_->node_id(i, j)];
            if (col >= 0)
              t.emplace_back(row, col, d);
          }
      }
    }
    SparseMatrix J(n, n);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }

  // Integral of W sqrt(det sigma).
  double area_functional(const ScalarField& u) const {
    return integrate(*g_, node_field(u, [](const OperatorState& s, const NodeGeometry&) {
                       return s.W;
                     }),
                     spec_.chart);
  }

  // Area of the graph itself: integral of W f^{-1/2} sqrt(det sigma).
  double graph_area(const ScalarField& u) const {
    return integrate(*g_, node_field(u, [](const OperatorState& s, const NodeGeometry& ng) {
                       return s.W / std::sqrt(ng.f);
                     }),
                     spec_.chart);
  }

  std::vector<double> w_field(const ScalarField& u) const {
    return node_field(u, [](const OperatorState& s, const NodeGeometry&) { return s.W; });
  }

private:
  struct FaceGeometry {
    Mat2 inv;
    Vec2 X;
    double f = 1, rho = 1;
  };
  struct NodeGeometry {
    Mat2 inv;
    Vec2 X;
    double f = 1, scale = 1, nH = 0;
    Vec2 kappa;
    Christoffels gamma_sym;
    Mat2 dX, gamma;
  };

  template <class Fn>
  std::vector<double> node_field(const ScalarField& u, Fn&& fn) const {
    std::vector<double> out(size());
    for (int k = 0; k < size(); ++k)
      out[k] = fn(node_state(u, k), node_[k]);
    return out;
  }

  ProblemSpec spec_;
  const GridDomain* g_;
  std::vector<FaceGeometry> face_;
  std::vector<NodeGeometry> node_;
  std::vector<double> phi_trace_;
};

} // namespace kgraph
