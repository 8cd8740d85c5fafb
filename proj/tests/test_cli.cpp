#include "kgraph/config.hpp"
#include "kgraph/grid.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace kgraph;

namespace {

const fs::path examples = KGRAPH_EXAMPLES;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kgraph_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + KGRAPH_CLI + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

struct CsvRows {
  std::string header;
  std::vector<std::array<double, 3>> rows;
};

CsvRows read_csv(const fs::path& p) {
  CsvRows out;
  std::ifstream in(p);
  std::getline(in, out.header);
  std::string line;
  while (std::getline(in, line)) {
    std::array<double, 3> r{};
    std::sscanf(line.c_str(), "%lf,%lf,%lf", &r[0], &r[1], &r[2]);
    out.rows.push_back(r);
  }
  return out;
}

void write_csv(const fs::path& p, const CsvRows& c) {
  std::ofstream out(p);
  out << c.header << "\n";
  char buf[96];
  for (const auto& r : c.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r[0], r[1], r[2]);
    out << buf;
  }
}

const char* disk_config = R"(
[geometry]
name = euclidean
[domain]
type = disk
radius = 0.5
[problem]
h = 1/16
H = %s
phi = 0
)";

std::string disk_with_H(const std::string& H) {
  char buf[256];
  std::snprintf(buf, sizeof buf, disk_config, H.c_str());
  return buf;
}

} // namespace

TEST(Config, ParsesAllSections) {
  std::istringstream in(R"(
# comment line
[geometry]
name = warped
f = exp(2*x)     # trailing comment
ric_lower = -1
[domain]
type = disk
center = 0.1, -0.2
radius = 1/4
[problem]
h = 1/64
H = 1 + 0.5*x
phi = x*y/2
output = out
[solver]
newton_tol = 1e-11
max_newton = 30
continuation = mean_curvature
jacobian = finite_difference
)");
  const RunConfig cfg = parse_config(in, "t.cfg", "/base");
  EXPECT_EQ(cfg.geometry, "warped");
  EXPECT_EQ(cfg.geometry_params.at("f"), "exp(2*x)");
  const auto& d = std::get<Disk>(cfg.domain);
  EXPECT_DOUBLE_EQ(d.center.x(), 0.1);
  EXPECT_DOUBLE_EQ(d.center.y(), -0.2);
  EXPECT_DOUBLE_EQ(d.radius, 0.25);
  EXPECT_DOUBLE_EQ(cfg.h, 1.0 / 64);
  EXPECT_DOUBLE_EQ(cfg.H(2.0, 0.0), 2.0);
  EXPECT_FALSE(cfg.H.is_constant());
  EXPECT_DOUBLE_EQ(cfg.phi(2.0, 3.0), 3.0);
  EXPECT_EQ(cfg.output, fs::path("/base/out"));
  EXPECT_EQ(cfg.solver.newton_tol, 1e-11);
  EXPECT_EQ(cfg.solver.max_newton, 30);
  EXPECT_EQ(cfg.solver.continuation, ContinuationMode::MeanCurvatureOnly);
  EXPECT_EQ(cfg.solver.jacobian, JacobianMode::FiniteDifference);
  const SubmersionChart chart = make_chart(cfg);
  EXPECT_NEAR(chart.f(Vec2(0.5, 0)), std::exp(1.0), 1e-14);
  EXPECT_EQ(chart.ric_lower(), -1.0);
}

TEST(Config, RectangleDomain) {
  std::istringstream in("[domain]\ntype = rectangle\nx0 = -1\ny0 = 0\nx1 = 1\ny1 = 1/2\n"
                        "[problem]\nh = 0.1\n");
  const RunConfig cfg = parse_config(in);
  const auto& r = std::get<Rectangle>(cfg.domain);
  EXPECT_EQ(r.x0, -1.0);
  EXPECT_EQ(r.y1, 0.5);
  EXPECT_EQ(cfg.geometry, "euclidean");
}

TEST(Config, DiagnosticsNameLineAndKey) {
  const auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_config(in, "bad.cfg");
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(message("[domain]\ntype = disk\nradius = 1\nfoo = 2\n"),
            "bad.cfg:4: unknown key 'foo' in [domain]");
  EXPECT_EQ(message("[nope]\n"), "bad.cfg:1: unknown section [nope]");
  EXPECT_EQ(message("[problem]\nh 0.1\n"), "bad.cfg:2: expected 'key = value', got 'h 0.1'");
  EXPECT_EQ(message("h = 1\n"), "bad.cfg:1: key 'h' outside of any section");
  EXPECT_EQ(message("[domain]\ntype = disk\nradius = 1\n[problem]\nh = -1\n"),
            "bad.cfg:5: key 'h' must be > 0");
  EXPECT_EQ(message("[domain]\ntype = disk\nradius = x\n[problem]\nh = 1\n"),
            "bad.cfg:3: key 'radius' needs a constant, got 'x'");
  EXPECT_NE(message("[domain]\ntype = disk\nradius = 1\n[problem]\nh = 1\nphi = sqrt(\n")
                .find("bad.cfg:6: key 'phi'"),
            std::string::npos);
  EXPECT_NE(message("[domain]\ntype = disk\nradius = 1\n").find("missing key 'h' in [problem]"),
            std::string::npos);
  EXPECT_NE(message("[geometry]\nname = hopf\n[domain]\ntype = disk\nradius = 1\n[problem]\nh=1\n")
                .find("bad.cfg:2: unknown geometry 'hopf'"),
            std::string::npos);
  EXPECT_NE(message("[domain]\ntype = disk\ntype = disk\n").find("bad.cfg:3: duplicate key"),
            std::string::npos);
}

TEST(Cli, Geometries) {
  const auto dir = scratch("geometries");
  const Outcome o = run("geometries", dir);
  EXPECT_EQ(o.code, 0);
  for (const char* name : {"euclidean", "heisenberg", "warped"})
    EXPECT_NE(o.out.find(name), std::string::npos);
}

TEST(Cli, UsageErrorsAreInputErrors) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run("", dir).code, 1);
  EXPECT_EQ(run("frobnicate", dir).code, 1);
  EXPECT_EQ(run("solve", dir).code, 1);
  EXPECT_EQ(run("--help", dir).code, 0);
}

TEST(Cli, SolveFlatZero) {
  const auto dir = scratch("flat");
  const Outcome o = run("solve " + q(examples / "flat_zero.cfg") + " -o " + q(dir), dir);
  ASSERT_EQ(o.code, 0) << o.err;
  const CsvRows u = read_csv(dir / "u.csv");
  EXPECT_EQ(u.header, "x,y,u");
  ASSERT_FALSE(u.rows.empty());
  for (const auto& r : u.rows)
    EXPECT_EQ(r[2], 0.0);
  const auto rep = read_json(dir / "report.json");
  EXPECT_EQ(rep["schema"], 1);
  EXPECT_EQ(rep["status"], "converged");
  EXPECT_EQ(rep["unknowns"].get<std::size_t>(), u.rows.size());
  EXPECT_EQ(rep["sigma_path"].size(), rep["newton_iters"].size());
  EXPECT_TRUE(rep["hypothesis"]["passed"]);
}

TEST(Cli, CapSolveVerifyRoundTrip) {
  const auto dir = scratch("cap");
  const Outcome s = run("solve " + q(examples / "cap.cfg") + " -o " + q(dir), dir);
  ASSERT_EQ(s.code, 0) << s.err;
  const auto rep = read_json(dir / "report.json");
  EXPECT_LE(rep["residual_final"].get<double>(), 1e-10);
  EXPECT_DOUBLE_EQ(rep["sigma_path"].back().get<double>(), 1.0);

  const Outcome v = run("verify " + q(examples / "cap.cfg") + " " + q(dir / "u.csv") + " -o " +
                            q(dir),
                        dir);
  EXPECT_EQ(v.code, 0) << v.out << v.err;
  const auto ver = read_json(dir / "verify.json");
  EXPECT_EQ(ver["schema"], 1);
  EXPECT_TRUE(ver["passed"]);
  EXPECT_NEAR(ver["residual_final"].get<double>(), rep["residual_final"].get<double>(), 1e-12);
  for (const auto& it : ver["items"]) {
    EXPECT_TRUE(it["applicable"]) << it["name"];
    EXPECT_TRUE(it["passed"]) << it["name"];
  }
  EXPECT_NEAR(ver["certificates"]["boundary_gradient"]["sup_boundary_gradient"].get<double>(),
              1.0 / std::sqrt(3.0), 2e-2);
  EXPECT_TRUE(fs::exists(dir / "height_margin.csv"));
  EXPECT_TRUE(fs::exists(dir / "gradient_margin.csv"));
  EXPECT_TRUE(fs::exists(dir / "theta.csv"));
}

TEST(Cli, StallReportsSigmaAndSlack) {
  const auto dir = scratch("stall");
  const Outcome o = run("solve " + q(examples / "stall.cfg") + " -o " + q(dir), dir);
  EXPECT_EQ(o.code, 2);
  const auto rep = read_json(dir / "report.json");
  EXPECT_EQ(rep["status"], "continuation_stalled");
  EXPECT_LT(rep["last_good_sigma"].get<double>(), 1.0);
  EXPECT_NEAR(rep["hypothesis"]["H_slack"].get<double>(), -9.0, 1e-6);
  EXPECT_FALSE(fs::exists(dir / "u.csv"));
}

TEST(Cli, CheckExamples) {
  const auto dir = scratch("check");
  const Outcome pass = run("check " + q(write_config(dir, "h05.cfg", disk_with_H("0.5"))), dir);
  EXPECT_EQ(pass.code, 0);
  EXPECT_NE(pass.out.find("inf H_cyl = 1.0000"), std::string::npos) << pass.out;
  const Outcome fail = run("check " + q(examples / "cap_too_curved.cfg"), dir);
  EXPECT_EQ(fail.code, 3);
  EXPECT_NE(fail.out.find("hypothesis: FAIL"), std::string::npos);
  // H = 0 passes on every built-in over a strictly convex domain.
  for (const char* geometry :
       {"name = euclidean", "name = heisenberg", "name = warped\nf = exp(2*x)\nric_lower = -1"}) {
    const std::string text = std::string("[geometry]\n") + geometry +
                             "\n[domain]\ntype = disk\nradius = 0.25\n"
                             "[problem]\nh = 1/16\nH = 0\n";
    EXPECT_EQ(run("check " + q(write_config(dir, "zero.cfg", text)), dir).code, 0) << geometry;
  }
  // Straight edges have H_cyl = 0, which the strict positivity condition rejects.
  const std::string square = "[domain]\ntype = rectangle\nx0 = 0\ny0 = 0\nx1 = 1\ny1 = 1\n"
                             "[problem]\nh = 1/16\nH = 0\n";
  const Outcome sq = run("check " + q(write_config(dir, "square.cfg", square)), dir);
  EXPECT_EQ(sq.code, 3);
  EXPECT_NE(sq.out.find("inf H_cyl = 0.0000"), std::string::npos) << sq.out;
}

TEST(Cli, VerifyRejectsCorruptedField) {
  const auto dir = scratch("corrupt");
  const fs::path cfg = write_config(dir, "cap.cfg", slurp(examples / "cap.cfg"));
  ASSERT_EQ(run("solve " + q(cfg) + " -o " + q(dir), dir).code, 0);
  CsvRows u = read_csv(dir / "u.csv");
  std::size_t centre = 0;
  for (std::size_t i = 0; i < u.rows.size(); ++i)
    if (std::hypot(u.rows[i][0], u.rows[i][1]) < std::hypot(u.rows[centre][0], u.rows[centre][1]))
      centre = i;
  u.rows[centre][2] += 0.5;
  write_csv(dir / "bad.csv", u);
  const Outcome o = run("verify " + q(cfg) + " " + q(dir / "bad.csv") + " -o " + q(dir), dir);
  EXPECT_EQ(o.code, 4);
  const auto ver = read_json(dir / "verify.json");
  EXPECT_FALSE(ver["items"][0]["passed"]);
  EXPECT_EQ(ver["items"][0]["name"], "residual");
}

TEST(Cli, VerifyShapeMismatch) {
  const auto dir = scratch("shape");
  const fs::path cfg = write_config(dir, "cap.cfg", slurp(examples / "cap.cfg"));
  ASSERT_EQ(run("solve " + q(cfg) + " -o " + q(dir), dir).code, 0);
  CsvRows u = read_csv(dir / "u.csv");
  u.rows.pop_back();
  write_csv(dir / "short.csv", u);
  EXPECT_EQ(run("verify " + q(cfg) + " " + q(dir / "short.csv"), dir).code, 1);

  // A field from a coarser grid does not fit.
  const fs::path coarse = dir / "coarse";
  ASSERT_EQ(run("solve " + q(examples / "flat_zero.cfg") + " -o " + q(coarse), dir).code, 0);
  const Outcome o = run("verify " + q(cfg) + " " + q(coarse / "u.csv"), dir);
  EXPECT_EQ(o.code, 1);
  EXPECT_FALSE(o.err.empty());
  EXPECT_EQ(run("verify " + q(cfg) + " " + q(dir / "missing.csv"), dir).code, 1);
}

TEST(Cli, InputErrorsExitOne) {
  const auto dir = scratch("input");
  const Outcome bad = run(
      "solve " + q(write_config(dir, "bad.cfg", "[domain]\ntype = disk\nradius = 1\nfoo = 1\n")),
      dir);
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("bad.cfg:4: unknown key 'foo' in [domain]"), std::string::npos)
      << bad.err;
  EXPECT_EQ(run("solve " + q(dir / "does_not_exist.cfg"), dir).code, 1);
  // Boundary data that is not finite on the closed domain.
  const std::string nan_phi = "[domain]\ntype = disk\nradius = 0.5\n[problem]\nh = 1/16\n"
                              "phi = ln(x)\n";
  EXPECT_EQ(run("solve " + q(write_config(dir, "nan.cfg", nan_phi)) + " -o " + q(dir), dir).code,
            1);
  EXPECT_EQ(run("check " + q(write_config(dir, "nan.cfg", nan_phi)), dir).code, 1);
}

TEST(Cli, HeisenbergMinimalFlux) {
  const auto dir = scratch("heis");
  ASSERT_EQ(run("solve " + q(examples / "heisenberg_saddle.cfg") + " -o " + q(dir), dir).code, 0);
  const Outcome v = run("verify " + q(examples / "heisenberg_saddle.cfg") + " " +
                            q(dir / "u.csv") + " -o " + q(dir),
                        dir);
  EXPECT_EQ(v.code, 0);
  const auto ver = read_json(dir / "verify.json");
  EXPECT_LE(std::abs(ver["certificates"]["flux"]["boundary"].get<double>()), 1e-2);
}
