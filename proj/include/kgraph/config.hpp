#pragma once

// Run configuration: flat "key = value" text with section headers.
//
//   [geometry]  name = euclidean | heisenberg | warped   (or file = chart.csv)
//               f = <expr>, ric_lower = <number>         (warped)
//               ric_lower = <number>                     (file; overrides the table)
//   [domain]    type = disk:       center = <x>, <y>    radius = <r>
//               type = rectangle:  x0, y0, x1, y1
//   [problem]   h = <number>, H = <expr>, phi = <expr>, output = <dir>
//   [solver]    newton_tol, max_newton, initial_dsigma, min_dsigma,
//               continuation = joint | mean_curvature,
//               jacobian = analytic | finite_difference
//
// '#' starts a comment. Numbers may be written as constant expressions
// (h = 1/64). Relative paths are taken from the config file's directory.

#include "kgraph/domain.hpp"
#include "kgraph/errors.hpp"
#include "kgraph/expression.hpp"
#include "kgraph/geometry.hpp"
#include "kgraph/geometry_file.hpp"
#include "kgraph/operator.hpp"
#include "kgraph/solver.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace kgraph {

struct RunConfig {
  std::string source = "config";
  std::filesystem::path base_dir = ".";

  std::string geometry = "euclidean";
  std::map<std::string, std::string> geometry_params;
  std::optional<std::filesystem::path> geometry_file;
  double file_ric_lower = std::numeric_limits<double>::quiet_NaN();

  DomainSpec domain = Disk{};
  double h = 1.0 / 32;
  Expression H{std::string("0")};
  Expression phi{std::string("0")};
  std::filesystem::path output = ".";
  SolveConfig solver;
};

namespace detail {

class ConfigReader {
public:
  ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw FormatError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  double number(int line, const std::string& key, const std::string& value) const {
    try {
      const Expression e(value);
      if (!e.is_constant())
        fail(line, "key '" + key + "' needs a constant, got '" + value + "'");
      const double v = e(0.0, 0.0);
      if (!std::isfinite(v))
        fail(line, "key '" + key + "' is not finite");
      return v;
    } catch (const FormatError& err) {
      if (std::string(err.what()).rfind(source_, 0) == 0)
        throw;
      fail(line, "key '" + key + "': " + err.what());
    }
  }

  Expression expression(int line, const std::string& key, const std::string& value) const {
    try {
      return Expression(value);
    } catch (const FormatError& err) {
      fail(line, "key '" + key + "': " + err.what());
    }
  }

private:
  std::string source_;
};

} // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& source = "config",
                              const std::filesystem::path& base_dir = ".") {
  RunConfig cfg;
  cfg.source = source;
  cfg.base_dir = base_dir;
  const detail::ConfigReader rd(source);

  static const std::map<std::string, std::set<std::string>> known = {
      {"geometry", {"name", "f", "ric_lower", "file"}},
      {"domain", {"type", "center", "radius", "x0", "y0", "x1", "y1"}},
      {"problem", {"h", "H", "phi", "output"}},
      {"solver",
       {"newton_tol", "max_newton", "initial_dsigma", "min_dsigma", "continuation", "jacobian"}},
  };

  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> entries;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos)
      raw.erase(hash);
    const std::string text = detail::trim(raw);
    if (text.empty())
      continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        rd.fail(line, "malformed section header '" + text + "'");
      section = detail::trim(text.substr(1, text.size() - 2));
      if (!known.count(section))
        rd.fail(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      rd.fail(line, "expected 'key = value', got '" + text + "'");
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    if (section.empty())
      rd.fail(line, "key '" + key + "' outside of any section");
    if (!known.at(section).count(key))
      rd.fail(line, "unknown key '" + key + "' in [" + section + "]");
    if (value.empty())
      rd.fail(line, "key '" + key + "' has no value");
    if (entries[section].count(key))
      rd.fail(line, "duplicate key '" + key + "' in [" + section + "]");
    entries[section][key] = {value, line};
  }

  const auto get = [&](const std::string& sec, const std::string& key)
      -> const std::pair<std::string, int>* {
    auto s = entries.find(sec);
    if (s == entries.end())
      return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };
  const auto require = [&](const std::string& sec, const std::string& key) {
    const auto* e = get(sec, key);
    if (!e)
      rd.fail(line, "missing key '" + key + "' in [" + sec + "]");
    return *e;
  };
  const auto num = [&](const std::string& sec, const std::string& key) {
    const auto [v, l] = require(sec, key);
    return rd.number(l, key, v);
  };

  // [geometry]
  if (const auto* f = get("geometry", "file")) {
    if (get("geometry", "name"))
      rd.fail(f->second, "give either 'name' or 'file' in [geometry], not both");
    cfg.geometry = "file";
    cfg.geometry_file = base_dir / f->first;
    if (const auto* r = get("geometry", "ric_lower"))
      cfg.file_ric_lower = rd.number(r->second, "ric_lower", r->first);
  } else {
    if (const auto* n = get("geometry", "name"))
      cfg.geometry = n->first;
    for (const char* key : {"f", "ric_lower"})
      if (const auto* e = get("geometry", key)) {
        if (std::string(key) == "f")
          rd.expression(e->second, key, e->first);
        else
          rd.number(e->second, key, e->first);
        cfg.geometry_params[key] = e->first;
      }
    bool found = false;
    for (const auto& b : builtin_geometries())
      found = found || b.name == cfg.geometry;
    if (!found) {
      const auto* n = get("geometry", "name");
      rd.fail(n ? n->second : line, "unknown geometry '" + cfg.geometry + "'");
    }
    if (cfg.geometry == "warped" && !cfg.geometry_params.count("f"))
      rd.fail(line, "geometry warped needs key 'f' in [geometry]");
  }

  // [domain]
  const auto [type, type_line] = require("domain", "type");
  if (type == "disk") {
    Disk d;
    if (const auto* c = get("domain", "center")) {
      const auto comma = c->first.find(',');
      if (comma == std::string::npos)
        rd.fail(c->second, "key 'center' needs 'x, y'");
      d.center = Vec2(rd.number(c->second, "center", detail::trim(c->first.substr(0, comma))),
                      rd.number(c->second, "center", detail::trim(c->first.substr(comma + 1))));
    }
    d.radius = num("domain", "radius");
    if (!(d.radius > 0))
      rd.fail(require("domain", "radius").second, "key 'radius' must be > 0");
    cfg.domain = d;
  } else if (type == "rectangle") {
    Rectangle r{num("domain", "x0"), num("domain", "y0"), num("domain", "x1"),
                num("domain", "y1")};
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0))
      rd.fail(type_line, "rectangle needs x1 > x0 and y1 > y0");
    cfg.domain = r;
  } else {
    rd.fail(type_line, "unknown domain type '" + type + "' (disk or rectangle)");
  }

  // [problem]
  cfg.h = num("problem", "h");
  if (!(cfg.h > 0))
    rd.fail(require("problem", "h").second, "key 'h' must be > 0");
  if (const auto* e = get("problem", "H"))
    cfg.H = rd.expression(e->second, "H", e->first);
  if (const auto* e = get("problem", "phi"))
    cfg.phi = rd.expression(e->second, "phi", e->first);
  if (const auto* e = get("problem", "output"))
    cfg.output = base_dir / e->first;
  else
    cfg.output = base_dir;

  // [solver]
  if (get("solver", "newton_tol")) {
    cfg.solver.newton_tol = num("solver", "newton_tol");
    if (!(cfg.solver.newton_tol > 0))
      rd.fail(require("solver", "newton_tol").second, "key 'newton_tol' must be > 0");
  }
  if (get("solver", "max_newton")) {
    const double v = num("solver", "max_newton");
    if (!(v >= 1) || v != std::floor(v))
      rd.fail(require("solver", "max_newton").second, "key 'max_newton' must be a positive integer");
    cfg.solver.max_newton = static_cast<int>(v);
  }
  if (get("solver", "initial_dsigma")) {
    cfg.solver.initial_dsigma = num("solver", "initial_dsigma");
    if (!(cfg.solver.initial_dsigma > 0 && cfg.solver.initial_dsigma <= 1))
      rd.fail(require("solver", "initial_dsigma").second, "key 'initial_dsigma' must be in (0, 1]");
  }
  if (get("solver", "min_dsigma")) {
    cfg.solver.min_dsigma = num("solver", "min_dsigma");
    if (!(cfg.solver.min_dsigma > 0))
      rd.fail(require("solver", "min_dsigma").second, "key 'min_dsigma' must be > 0");
  }
  if (const auto* e = get("solver", "continuation")) {
    if (e->first == "joint")
      cfg.solver.continuation = ContinuationMode::Joint;
    else if (e->first == "mean_curvature")
      cfg.solver.continuation = ContinuationMode::MeanCurvatureOnly;
    else
      rd.fail(e->second, "key 'continuation' must be joint or mean_curvature");
  }
  if (const auto* e = get("solver", "jacobian")) {
    if (e->first == "analytic")
      cfg.solver.jacobian = JacobianMode::Analytic;
    else if (e->first == "finite_difference")
      cfg.solver.jacobian = JacobianMode::FiniteDifference;
    else
      rd.fail(e->second, "key 'jacobian' must be analytic or finite_difference");
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open config '" + path.string() + "'");
  return parse_config(in, path.string(), path.parent_path().empty() ? "." : path.parent_path());
}

inline SubmersionChart make_chart(const RunConfig& cfg) {
  if (cfg.geometry_file) {
    ChartTable t = [&] {
      std::ifstream in(*cfg.geometry_file);
      if (!in)
        throw FormatError("cannot open geometry file '" + cfg.geometry_file->string() + "'");
      return read_chart_table(in, cfg.geometry_file->string());
    }();
    if (!std::isnan(cfg.file_ric_lower))
      t.ric_lower = cfg.file_ric_lower;
    return chart_from_table(std::move(t));
  }
  return make_builtin(cfg.geometry, cfg.geometry_params);
}

inline ProblemSpec make_problem(const RunConfig& cfg) {
  return make_problem(make_chart(cfg), cfg.domain, cfg.H, cfg.phi);
}

} // namespace kgraph
