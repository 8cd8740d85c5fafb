// kgraph: batch front end.
//
//   kgraph solve CONFIG [-o DIR]          -> DIR/u.csv, DIR/report.json
//   kgraph check CONFIG                   -> hypothesis report on stdout
//   kgraph verify CONFIG U_CSV [-o DIR]   -> DIR/verify.json and margin CSVs
//   kgraph geometries
//
// Exit codes: 0 ok, 1 input error, 2 solver did not reach sigma = 1,
// 3 hypothesis check failed, 4 verification failed.

#include "kgraph/kgraph.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace kgraph;

namespace {

enum Exit { kOk = 0, kInput = 1, kStall = 2, kHypothesis = 3, kVerify = 4 };

struct Run {
  explicit Run(RunConfig c) : cfg(std::move(c)), spec(make_problem(cfg)) {}

  RunConfig cfg;
  ProblemSpec spec;
  GridDomain grid;
  std::unique_ptr<MeanCurvatureOperator> op;
  BoundaryGeometry boundary;
  HypothesisVerdict hypothesis;
};

// Everything that can fail on bad input happens here.
std::unique_ptr<Run> prepare(const std::string& config, const std::string& output) {
  RunConfig cfg = load_config(config);
  if (!output.empty())
    cfg.output = output;
  auto run = std::make_unique<Run>(std::move(cfg));
  run->grid = build_grid(run->spec.domain, run->cfg.h, run->spec.chart);
  run->op = std::make_unique<MeanCurvatureOperator>(run->spec, run->grid);
  run->boundary = boundary_geometry(
      run->spec.chart, run->spec.domain,
      boundary_sample_count(run->spec.chart, run->spec.domain, run->cfg.h));
  run->hypothesis = hypothesis_check(run->spec, run->boundary, &run->grid);
  return run;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out)
    throw FormatError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

void print_hypothesis(const Run& run) {
  const HypothesisVerdict& v = run.hypothesis;
  std::printf("geometry     %s\n", run.spec.chart.name().c_str());
  std::printf("domain       %s\n", describe(run.spec.domain).c_str());
  std::printf("sup|H| = %.4f\n", v.sup_H);
  std::printf("inf H_cyl = %.4f\n", v.inf_Hcyl);
  if (run.spec.chart.ric_known())
    std::printf("Ricci lower bound = %.4f (needs >= -n inf H_cyl^2 = %.4f)\n", v.ric_lower,
                v.ric_threshold);
  else
    std::printf("Ricci lower bound = unknown (needs >= -n inf H_cyl^2 = %.4f)\n",
                v.ric_threshold);
  std::printf("  sup|H| <= inf H_cyl   %s (slack %.6g)\n", v.H_ok ? "pass" : "FAIL", v.H_slack);
  std::printf("  inf H_cyl > 0         %s (slack %.6g)\n", v.Hcyl_positive ? "pass" : "FAIL",
              v.Hcyl_slack);
  std::printf("  Ricci bound           %s (slack %.6g)\n", v.ric_ok ? "pass" : "FAIL",
              v.ric_slack);
  std::printf("hypothesis: %s\n", v.passed ? "pass" : "FAIL");
}

int cmd_solve(const std::string& config, const std::string& output) {
  std::unique_ptr<Run> run;
  try {
    run = prepare(config, output);
    fs::create_directories(run->cfg.output);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kgraph solve: %s\n", e.what());
    return kInput;
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> u;
  SolveReport rep;
  try {
    rep = solve_dirichlet(*run->op, run->cfg.solver, u);
  } catch (const Error& e) {
    rep.status = SolveStatus::ContinuationStalled;
    rep.message = e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.hypothesis = summarize(run->hypothesis);

  nlohmann::json j = run_header("solve", run->spec.chart.name(), run->spec.domain, run->grid);
  j.update(to_json(rep));
  j["hypothesis"] = to_json(run->hypothesis);
  j["config"] = config;
  j["runtime_seconds"] = seconds;
  try {
    write_json(run->cfg.output / "report.json", j);
    if (rep.converged())
      write_field_csv((run->cfg.output / "u.csv").string(), run->grid, u, "u");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kgraph solve: %s\n", e.what());
    return kInput;
  }

  if (!rep.converged()) {
    std::printf("status %s at sigma = %.6g: %s\n", to_string(rep.status), rep.last_good_sigma,
                rep.message.c_str());
    std::printf("hypothesis slack sup|H| <= inf H_cyl: %.6g\n", run->hypothesis.H_slack);
    return kStall;
  }
  std::printf("converged: %zu sigma steps, residual %.3e, %.2f s\n", rep.sigma_path.size(),
              rep.residual_final, seconds);
  std::printf("wrote %s\n", (run->cfg.output / "u.csv").string().c_str());
  return kOk;
}

int cmd_check(const std::string& config) {
  std::unique_ptr<Run> run;
  try {
    run = prepare(config, "");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kgraph check: %s\n", e.what());
    return kInput;
  }
  print_hypothesis(*run);
  return run->hypothesis.passed ? kOk : kHypothesis;
}

void write_band_csv(const fs::path& path, const GridDomain& g, const std::vector<int>& nodes,
                    const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out)
    throw FormatError("cannot write '" + path.string() + "'");
  out << "x,y,margin\n";
  char buf[96];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Vec2 x = g.position(nodes[i]);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x.x(), x.y(), values[i]);
    out << buf;
  }
}

int cmd_verify(const std::string& config, const std::string& field, const std::string& output) {
  std::unique_ptr<Run> run;
  ScalarField u;
  try {
    run = prepare(config, output);
    u = run->op->field(read_field_csv(field, run->grid), 1.0);
    fs::create_directories(run->cfg.output);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kgraph verify: %s\n", e.what());
    return kInput;
  }
  const VerifyReport rep = verify_solution(*run->op, u);

  nlohmann::json j = run_header("verify", run->spec.chart.name(), run->spec.domain, run->grid);
  j.update(to_json(rep, run->grid));
  j["config"] = config;
  j["field"] = field;
  try {
    write_json(run->cfg.output / "verify.json", j);
    if (rep.height)
      write_field_csv((run->cfg.output / "height_margin.csv").string(), run->grid,
                      rep.height->margin, "margin");
    if (rep.gradient)
      write_band_csv(run->cfg.output / "gradient_margin.csv", run->grid, rep.gradient->band,
                     rep.gradient->margin);
    if (rep.theta)
      write_field_csv((run->cfg.output / "theta.csv").string(), run->grid, rep.theta->theta,
                      "theta");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kgraph verify: %s\n", e.what());
    return kInput;
  }

  for (const auto& it : rep.items)
    std::printf("%-28s %s\n", it.name.c_str(),
                !it.applicable ? "n/a" : (it.passed ? "pass" : "FAIL"));
  std::printf("residual %.3e\n", rep.residual_sup);
  return rep.passed() ? kOk : kVerify;
}

int cmd_geometries() {
  for (const auto& b : builtin_geometries())
    std::printf("%-12s %-34s %s\n", b.name.c_str(),
                b.parameters.empty() ? "-" : b.parameters.c_str(), b.description.c_str());
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Killing graphs of prescribed mean curvature"};
  app.require_subcommand(1);
  std::string config, field, output;

  auto* solve = app.add_subcommand("solve", "solve the Dirichlet problem of a config");
  solve->add_option("config", config, "run configuration")->required();
  solve->add_option("-o,--output", output, "output directory (overrides the config)");

  auto* check = app.add_subcommand("check", "check the solvability hypotheses");
  check->add_option("config", config, "run configuration")->required();

  auto* verify = app.add_subcommand("verify", "certify a solution field");
  verify->add_option("config", config, "run configuration")->required();
  verify->add_option("field", field, "u.csv written by solve")->required();
  verify->add_option("-o,--output", output, "output directory (overrides the config)");

  app.add_subcommand("geometries", "list built-in geometries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  if (solve->parsed())
    return cmd_solve(config, output);
  if (check->parsed())
    return cmd_check(config);
  if (verify->parsed())
    return cmd_verify(config, field, output);
  return cmd_geometries();
}
