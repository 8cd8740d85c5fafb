#pragma once

// JSON forms of solve and verify reports (schema 1). NaN serializes as null.

#include "kgraph/analysis.hpp"
#include "kgraph/domain.hpp"
#include "kgraph/solver.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace kgraph {

inline constexpr int kReportSchema = 1;

inline nlohmann::json point_json(const Vec2& x) { return nlohmann::json::array({x.x(), x.y()}); }

inline nlohmann::json to_json(const HypothesisVerdict& v) {
  return {
      {"sup_H", v.sup_H},
      {"inf_Hcyl", v.inf_Hcyl},
      {"ric_lower", v.ric_lower},
      {"ric_threshold", v.ric_threshold},
      {"H_ok", v.H_ok},
      {"H_slack", v.H_slack},
      {"Hcyl_positive", v.Hcyl_positive},
      {"ric_ok", v.ric_ok},
      {"ric_slack", v.ric_slack},
      {"passed", v.passed},
  };
}

inline nlohmann::json run_header(const std::string& command, const std::string& geometry,
                                 const DomainSpec& domain, const GridDomain& g) {
  return {
      {"schema", kReportSchema},    {"command", command}, {"geometry", geometry},
      {"domain", describe(domain)}, {"h", g.h},           {"unknowns", g.size()},
  };
}

inline nlohmann::json to_json(const SolveReport& r) {
  return {
      {"status", to_string(r.status)},
      {"converged", r.converged()},
      {"sigma_path", r.sigma_path},
      {"newton_iters", r.newton_iters},
      {"sup_du", r.sup_du},
      {"sup_u", r.sup_u},
      {"residual_history", r.final_residual_history},
      {"residual_final", r.residual_final},
      {"last_good_sigma", r.last_good_sigma},
      {"rejected_steps", r.rejected_steps},
      {"message", r.message},
  };
}

inline nlohmann::json to_json(const VerifyReport& r, const GridDomain& g) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items)
    items.push_back({{"name", it.name},
                     {"applicable", it.applicable},
                     {"passed", it.passed},
                     {"note", it.note}});
  nlohmann::json certs = nlohmann::json::object();
  if (r.height)
    certs["height"] = {
        {"passed", r.height->passed},       {"C", r.height->C},
        {"A", r.height->A},                 {"min_margin", r.height->min_margin},
        {"sup_h", r.height->sup_h},         {"sup_u", r.height->sup_u},
        {"sup_phi", r.height->sup_phi},     {"crude_bound", r.height->crude_bound},
        {"crude_ok", r.height->crude_ok},
    };
  if (r.gradient)
    certs["boundary_gradient"] = {
        {"passed", r.gradient->passed},
        {"K", r.gradient->params.K},
        {"C_b", r.gradient->params.C_b},
        {"mu", r.gradient->params.mu()},
        {"band", r.gradient->params.band},
        {"tilt", r.gradient->tilt},
        {"constant_extension_ok", r.gradient->constant_extension_ok},
        {"band_nodes", r.gradient->band.size()},
        {"min_margin", r.gradient->min_margin},
        {"sup_boundary_gradient", r.gradient->sup_boundary_gradient},
        {"sup_tangential", r.gradient->sup_tangential},
        {"bound", r.gradient->bound},
    };
  if (r.riccati)
    certs["riccati"] = {
        {"width", r.riccati->width},
        {"eps", r.riccati->eps},
        {"inf_Hcyl", r.riccati->inf_direct},
        {"monotone", r.riccati->monotone},
        {"envelope_ok", r.riccati->envelope_ok},
        {"worst_envelope_gap", r.riccati->worst_envelope_gap},
    };
  certs["flux"] = {
      {"boundary", r.flux.boundary},
      {"bulk", r.flux.bulk},
      {"imbalance", r.flux.imbalance},
  };
  if (r.theta) {
    nlohmann::json th = {
        {"holds", r.theta->holds},
        {"min_interior", r.theta->min_interior},
        {"min_boundary", r.theta->min_boundary},
        {"argmin_boundary", point_json(r.theta->argmin_boundary)},
        {"max_discrepancy_f_over_W", r.theta->max_discrepancy},
    };
    th["argmin_interior"] = r.theta->argmin_interior >= 0
                                ? point_json(g.position(r.theta->argmin_interior))
                                : nlohmann::json(nullptr);
    certs["theta"] = th;
  }
  return {
      {"passed", r.passed()},
      {"residual_final", r.residual_sup},
      {"hypothesis", to_json(r.hypothesis)},
      {"items", items},
      {"certificates", certs},
  };
}

} // namespace kgraph
