#pragma once

// Damped Newton for the discrete Dirichlet problem and the continuation path
// Q_sigma[u] = n sigma H, u = sigma phi on the boundary, sigma from 0 to 1.

#include "kgraph/operator.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace kgraph {

enum class ContinuationMode { Joint, MeanCurvatureOnly };
enum class JacobianMode { Analytic, FiniteDifference };

struct SolveConfig {
  double newton_tol = 1e-10;
  int max_newton = 50;
  double armijo = 1e-4;
  double min_step = std::ldexp(1.0, -20);
  double initial_dsigma = 0.25;
  double min_dsigma = std::ldexp(1.0, -10);
  double linear_tol = 1e-12;
  double divergence_limit = 1e6;
  ContinuationMode continuation = ContinuationMode::Joint;
  JacobianMode jacobian = JacobianMode::Analytic;
};

enum class SolveStatus {
  Converged,
  ContinuationStalled,
  SingularJacobian,
  DivergedIterates,
  LineSearchFailed,
  MaxIterations,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::Converged: return "converged";
  case SolveStatus::ContinuationStalled: return "continuation_stalled";
  case SolveStatus::SingularJacobian: return "singular_jacobian";
  case SolveStatus::DivergedIterates: return "diverged_iterates";
  case SolveStatus::LineSearchFailed: return "line_search_failed";
  default: return "max_iterations";
  }
}

struct NewtonResult {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  std::vector<double> residual_history; // sup norm before each step and at exit
  std::vector<double> step_lengths;
  std::vector<double> area_history;     // graph area, when monitored
  double linear_residual = 0;           // worst relative linear residual

  bool converged() const { return status == SolveStatus::Converged; }
};

inline double sup_norm(const std::vector<double>& v) {
  double m = 0;
  for (double x : v)
    m = std::max(m, std::abs(x));
  return m;
}

inline double squared_norm(const std::vector<double>& v) {
  double m = 0;
  for (double x : v)
    m += x * x;
  return m;
}

namespace detail {

inline ScalarField continuation_field(const MeanCurvatureOperator& op,
                                      const std::vector<double>& u, double sigma,
                                      ContinuationMode mode) {
  return op.field(u, mode == ContinuationMode::Joint ? sigma : 1.0);
}

} // namespace detail

// Newton on Q[u] = n sigma H with boundary data sigma phi (or phi when only
// H is continued). With monitor_area set every accepted step must also not
// increase the graph area beyond a relative slack.
inline NewtonResult newton(const MeanCurvatureOperator& op, std::vector<double>& u, double sigma,
                           const SolveConfig& cfg, bool monitor_area = false) {
  NewtonResult out;
  const auto field = [&](const std::vector<double>& v) {
    return detail::continuation_field(op, v, sigma, cfg.continuation);
  };
  constexpr double kAreaSlack = 1e-8;
  std::vector<double> r = op.residual(field(u), sigma);
  double area = monitor_area ? op.graph_area(field(u)) : 0.0;
  if (monitor_area)
    out.area_history.push_back(area);
  for (;;) {
    const double rinf = sup_norm(r);
    out.residual_history.push_back(rinf);
    if (rinf <= cfg.newton_tol) {
      out.status = SolveStatus::Converged;
      return out;
    }
    if (out.iterations >= cfg.max_newton) {
      out.status = SolveStatus::MaxIterations;
      return out;
    }
    const ScalarField uf = field(u);
    const SparseMatrix J = cfg.jacobian == JacobianMode::Analytic ? op.jacobian(uf)
                                                                   : op.fd_jacobian(uf);
    Eigen::SparseLU<SparseMatrix> lu;
    lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      out.status = SolveStatus::SingularJacobian;
      return out;
    }
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
    Eigen::VectorXd step = lu.solve(-rv);
    if (lu.info() != Eigen::Success || !step.allFinite()) {
      out.status = SolveStatus::SingularJacobian;
      return out;
    }
    double lin = (J * step + rv).norm() / rv.norm();
    // One round of iterative refinement if the direct solve was inaccurate.
    if (lin > cfg.linear_tol) {
      step += lu.solve(-(J * step + rv));
      lin = (J * step + rv).norm() / rv.norm();
    }
    out.linear_residual = std::max(out.linear_residual, lin);

    const double r2 = squared_norm(r);
    bool accepted = false;
    for (double t = 1.0; t >= cfg.min_step; t *= 0.5) {
      std::vector<double> trial(u);
      for (std::size_t k = 0; k < trial.size(); ++k)
        trial[k] += t * step[static_cast<Eigen::Index>(k)];
      if (sup_norm(trial) > cfg.divergence_limit) {
        out.status = SolveStatus::DivergedIterates;
        return out;
      }
      std::vector<double> rt = op.residual(field(trial), sigma);
      if (squared_norm(rt) > (1.0 - 2.0 * cfg.armijo * t) * r2 || sup_norm(rt) >= rinf)
        continue;
      double trial_area = 0;
      if (monitor_area) {
        trial_area = op.graph_area(field(trial));
        if (trial_area > area * (1.0 + kAreaSlack))
          continue;
      }
      u = std::move(trial);
      r = std::move(rt);
      area = trial_area;
      if (monitor_area)
        out.area_history.push_back(area);
      out.step_lengths.push_back(t);
      accepted = true;
      break;
    }
    ++out.iterations;
    if (!accepted) {
      out.residual_history.push_back(rinf);
      out.status = SolveStatus::LineSearchFailed;
      return out;
    }
  }
}

struct HypothesisSummary {
  bool present = false;
  double sup_H = 0;
  double inf_Hcyl = 0;
  bool ric_ok = false;
  bool passed = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::ContinuationStalled;
  std::vector<double> sigma_path;  // accepted continuation values
  std::vector<int> newton_iters;   // Newton iterations per accepted value
  std::vector<double> sup_du;      // sup |Du|_sigma per accepted value
  std::vector<double> sup_u;       // sup |u| per accepted value
  std::vector<double> final_residual_history;
  double residual_final = 0;
  double last_good_sigma = 0;
  int rejected_steps = 0;
  std::string message;
  HypothesisSummary hypothesis;

  bool converged() const { return status == SolveStatus::Converged; }
};

inline double sup_gradient(const MeanCurvatureOperator& op, const ScalarField& u) {
  const GridDomain& g = op.grid();
  double m = 0;
  for (int k = 0; k < g.size(); ++k) {
    const Vec2 du = gradient_at(g, u, k);
    m = std::max(m, std::sqrt(du.dot(inverse_metric_at(op.spec().chart, g.position(k)) * du)));
  }
  return m;
}

struct MinimalGraph {
  std::vector<double> u;
  NewtonResult newton;
  double area_initial = 0; // graph area of u = 0
  double area_final = 0;
  double functional_initial = 0; // integral of W sqrt(det sigma) at u = 0
  double functional_final = 0;
};

// Critical point of the area among graphs with zero boundary values, by
// Newton from u = 0 with the graph area enforced as a descent certificate.
inline MinimalGraph minimal_initial_graph(const MeanCurvatureOperator& op,
                                          const SolveConfig& cfg) {
  MinimalGraph out;
  out.u.assign(op.size(), 0.0);
  SolveConfig c = cfg;
  c.continuation = ContinuationMode::Joint;
  const ScalarField zero = op.field(out.u, 0.0);
  out.area_initial = op.graph_area(zero);
  out.functional_initial = op.area_functional(zero);
  out.newton = newton(op, out.u, 0.0, c, true);
  const ScalarField fin = op.field(out.u, 0.0);
  out.area_final = op.graph_area(fin);
  out.functional_final = op.area_functional(fin);
  return out;
}

namespace detail {

inline void record_step(SolveReport& rep, const MeanCurvatureOperator& op,
                        const std::vector<double>& u, double sigma, const NewtonResult& nr,
                        ContinuationMode mode) {
  rep.sigma_path.push_back(sigma);
  rep.newton_iters.push_back(nr.iterations);
  rep.sup_du.push_back(sup_gradient(op, continuation_field(op, u, sigma, mode)));
  rep.sup_u.push_back(sup_norm(u));
  rep.last_good_sigma = sigma;
  rep.final_residual_history = nr.residual_history;
  rep.residual_final = nr.residual_history.back();
}

inline bool is_trivial(const MeanCurvatureOperator& op) {
  const GridDomain& g = op.grid();
  for (int k = 0; k < g.size(); ++k)
    if (op.spec().H(g.position(k)) != 0.0)
      return false;
  for (double v : op.boundary_trace(1.0))
    if (v != 0.0)
      return false;
  return true;
}

} // namespace detail

// Solves Q[u] = n H with u = phi on the boundary. Without u0 the path starts
// from the minimal graph at sigma = 0; with u0 Newton is tried at sigma = 1
// first and the path is the fallback.
inline SolveReport solve_dirichlet(const MeanCurvatureOperator& op, const SolveConfig& cfg,
                                   std::vector<double>& u,
                                   const std::optional<std::vector<double>>& u0 = std::nullopt) {
  SolveReport rep;
  const ContinuationMode mode = cfg.continuation;
  if (u0 || detail::is_trivial(op)) {
    u = u0 ? *u0 : std::vector<double>(op.size(), 0.0);
    if (static_cast<int>(u.size()) != op.size())
      throw ShapeMismatch("initial guess has " + std::to_string(u.size()) + " values, grid has " +
                          std::to_string(op.size()));
    std::vector<double> trial = u;
    const NewtonResult nr = newton(op, trial, 1.0, cfg);
    if (nr.converged()) {
      u = std::move(trial);
      detail::record_step(rep, op, u, 1.0, nr, mode);
      rep.status = SolveStatus::Converged;
      return rep;
    }
    rep.message = std::string("direct Newton from initial guess: ") + to_string(nr.status);
  }

  // Start of the path: the minimal graph with zero boundary values, or with
  // the full boundary data when only H is continued.
  NewtonResult start;
  if (mode == ContinuationMode::Joint) {
    MinimalGraph mg = minimal_initial_graph(op, cfg);
    u = std::move(mg.u);
    start = std::move(mg.newton);
  } else {
    u.assign(op.size(), 0.0);
    start = newton(op, u, 0.0, cfg);
  }
  if (!start.converged()) {
    rep.status = start.status;
    rep.message = std::string("start of path at sigma = 0: ") + to_string(start.status);
    rep.residual_final = start.residual_history.back();
    return rep;
  }
  detail::record_step(rep, op, u, 0.0, start, mode);

  std::vector<double> prev_u;
  double prev_sigma = 0;
  double sigma = 0;
  double dsigma = cfg.initial_dsigma;
  SolveStatus last_failure = SolveStatus::Converged;
  while (sigma < 1.0) {
    const double next = std::min(1.0, sigma + dsigma);
    std::vector<double> trial = u;
    if (!prev_u.empty()) {
      // Secant predictor along the path.
      const double s = (next - sigma) / (sigma - prev_sigma);
      for (std::size_t k = 0; k < trial.size(); ++k)
        trial[k] += s * (u[k] - prev_u[k]);
    }
    NewtonResult nr = newton(op, trial, next, cfg);
    if (!nr.converged() && !prev_u.empty()) {
      trial = u;
      nr = newton(op, trial, next, cfg);
    }
    if (nr.converged()) {
      prev_u = u;
      prev_sigma = sigma;
      u = std::move(trial);
      sigma = next;
      detail::record_step(rep, op, u, sigma, nr, mode);
      dsigma = std::min(cfg.initial_dsigma, 2 * dsigma);
      continue;
    }
    last_failure = nr.status;
    ++rep.rejected_steps;
    dsigma *= 0.5;
    if (dsigma < cfg.min_dsigma) {
      rep.status = SolveStatus::ContinuationStalled;
      rep.message = "continuation stalled at sigma = " + std::to_string(sigma) +
                    " (last Newton failure: " + to_string(last_failure) + ")";
      return rep;
    }
  }
  rep.status = SolveStatus::Converged;
  return rep;
}

struct ComparisonResult {
  bool applies = false;  // operator and boundary ordering hold
  bool ordered = true;   // u1 <= u2 + tol on every unknown
  int witness = -1;      // worst violating unknown, if any
  double max_excess = 0; // max of u1 - u2 over unknowns
};

// If Q[u1] >= Q[u2] + margin on all unknowns and u1 <= u2 on the boundary,
// checks u1 <= u2 + tol throughout.
inline ComparisonResult comparison_check(const MeanCurvatureOperator& op, const ScalarField& u1,
                                         const ScalarField& u2, double margin = 1e-8,
                                         double tol = 1e-6) {
  ComparisonResult out;
  const auto q1 = op.residual(u1, 0.0);
  const auto q2 = op.residual(u2, 0.0);
  bool applies = true;
  for (std::size_t k = 0; k < q1.size(); ++k)
    applies = applies && q1[k] >= q2[k] + margin;
  for (std::size_t c = 0; c < u1.trace.size(); ++c)
    applies = applies && u1.trace[c] <= u2.trace[c] + 1e-12 * (1 + std::abs(u2.trace[c]));
  out.applies = applies;
  out.max_excess = -1e300;
  for (std::size_t k = 0; k < u1.values.size(); ++k) {
    const double e = u1.values[k] - u2.values[k];
    if (e > out.max_excess) {
      out.max_excess = e;
      if (e > tol)
        out.witness = static_cast<int>(k);
    }
  }
  out.ordered = out.max_excess <= tol;
  if (out.ordered)
    out.witness = -1;
  return out;
}

} // namespace kgraph
