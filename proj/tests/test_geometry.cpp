#include "kgraph/geometry.hpp"
#include "kgraph/geometry_file.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace kgraph;

namespace {

SubmersionChart metric_chart(SubmersionChart::MetricFn metric, bool identity = false) {
  return SubmersionChart(
      "test", std::move(metric), [](const Vec2&) { return 1.0; },
      [](const Vec2&) -> Vec2 { return Vec2::Zero(); }, 0.0, identity);
}

SubmersionChart constant_chart(const Mat2& m) {
  return metric_chart([m](const Vec2&) { return m; });
}

SubmersionChart fiber_chart(SubmersionChart::ScalarFn f, SubmersionChart::CovectorFn delta) {
  return SubmersionChart(
      "test", [](const Vec2&) -> Mat2 { return Mat2::Identity(); }, std::move(f),
      std::move(delta), 0.0, true);
}

} // namespace

TEST(InverseMetric, EuclideanIsIdentity) {
  const auto c = euclidean_chart();
  EXPECT_TRUE(inverse_metric_at(c, Vec2(0.3, -2.0)).isApprox(Mat2::Identity(), 0));
}

TEST(InverseMetric, Diagonal) {
  Mat2 m;
  m << 4, 0, 0, 1;
  const Mat2 inv = inverse_metric_at(constant_chart(m), Vec2::Zero());
  EXPECT_DOUBLE_EQ(inv(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(inv(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(inv(0, 1), 0.0);
}

TEST(InverseMetric, FullMatrixAgreesWithLu) {
  Mat2 m;
  m << 2, 1, 1, 1;
  const Mat2 inv = inverse_metric_at(constant_chart(m), Vec2::Zero());
  const Mat2 oracle = m.fullPivLu().inverse();
  EXPECT_LE((inv - oracle).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((inv * m - Mat2::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(inv(0, 1), -1.0, 1e-15);
  EXPECT_NEAR(inv(1, 1), 2.0, 1e-15);
}

TEST(InverseMetric, RejectsIndefinite) {
  Mat2 m;
  m << 1, 2, 2, 1;
  EXPECT_THROW(inverse_metric_at(constant_chart(m), Vec2::Zero()), NonPositiveDefinite);
  EXPECT_THROW(constant_chart(m).validate_at(Vec2::Zero()), NonPositiveDefinite);
}

TEST(Validation, DegenerateFiberNamesPoint) {
  const auto c = fiber_chart([](const Vec2&) { return 1e-13; },
                             [](const Vec2&) -> Vec2 { return Vec2::Zero(); });
  try {
    c.validate_at(Vec2(0.5, 0.25));
    FAIL() << "expected DegenerateFiber";
  } catch (const DegenerateFiber& e) {
    EXPECT_NE(std::string(e.what()).find("0.25"), std::string::npos);
  }
}

TEST(Christoffels, ZeroForConstantMetric) {
  const auto g = christoffels_at(euclidean_chart(), Vec2(0.1, 0.2), 1e-3);
  for (const Mat2& m : g)
    EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Christoffels, ExponentialMetricSecondOrder) {
  const auto c = metric_chart([](const Vec2& x) -> Mat2 {
    Mat2 m;
    m << std::exp(2 * x.x()), 0, 0, 1;
    return m;
  });
  const Vec2 x(0.3, -0.7);
  const auto error = [&](double h) {
    const auto g = christoffels_at(c, x, h);
    double e = std::abs(g[0](0, 0) - 1.0);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          if (!(k == 0 && i == 0 && j == 0))
            e = std::max(e, std::abs(g[k](i, j)));
    return e;
  };
  EXPECT_LE(error(1e-3), 1e-6);
  const double ratio = error(2e-2) / error(1e-2);
  EXPECT_NEAR(ratio, 4.0, 0.1);
}

TEST(Christoffels, SymmetricInLowerIndices) {
  const auto c = metric_chart([](const Vec2& x) -> Mat2 {
    Mat2 m;
    const double off = 0.3 * std::sin(x.x() * x.y());
    m << 2 + x.x() * x.x(), off, off, 1 + std::exp(x.y());
    return m;
  });
  const auto g = christoffels_at(c, Vec2(0.4, 0.9), 1e-3);
  for (const Mat2& m : g)
    EXPECT_EQ(m(0, 1), m(1, 0));
}

TEST(Kappa, ConstantFiberVanishes) {
  EXPECT_EQ(kappa_vector_at(heisenberg_chart(), Vec2(1, 2), 1e-3).norm(), 0.0);
}

TEST(Kappa, ExponentialWarp) {
  const auto c = warped_chart(Expression("exp(2*x)"), -1.0);
  for (double x : {-1.0, 0.0, 0.7}) {
    const Vec2 k = kappa_vector_at(c, Vec2(x, 0.3), 1e-4);
    EXPECT_NEAR(k.x(), 1.0, 1e-7);
    EXPECT_NEAR(k.y(), 0.0, 1e-12);
  }
}

TEST(Kappa, QuadraticFiber) {
  const auto c = warped_chart(Expression("1 + x^2"), 0.0);
  const Vec2 k = kappa_vector_at(c, Vec2(1, 0), 1e-3);
  EXPECT_NEAR(k.x(), 0.5, 1e-12);
  EXPECT_NEAR(k.y(), 0.0, 1e-12);
}

TEST(Kappa, PolynomialSecondOrder) {
  const auto c = warped_chart(Expression("2 + x^3 + y^4"), 0.0);
  const Vec2 x(0.5, -0.8);
  const double fx = 2 + 0.125 + std::pow(0.8, 4);
  const Vec2 exact(3 * 0.25 / (2 * fx), 4 * std::pow(-0.8, 3) / (2 * fx));
  const auto err = [&](double h) { return (kappa_vector_at(c, x, h) - exact).norm(); };
  EXPECT_NEAR(err(2e-2) / err(1e-2), 4.0, 0.1);
}

TEST(Gamma, VanishesWithoutTilt) {
  EXPECT_EQ(gamma_at(euclidean_chart(), Vec2(0.2, 0.1), 1e-3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(gamma_at(warped_chart(Expression("exp(2*x)"), -1), Vec2(0.2, 0.1), 1e-3)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(Gamma, HeisenbergUnitBracket) {
  for (const Vec2& x : {Vec2(0, 0), Vec2(1, 2), Vec2(-0.3, 0.8)}) {
    const Mat2 g = gamma_at(heisenberg_chart(), x, 1e-3);
    EXPECT_NEAR(g(0, 1), 1.0, 1e-12);
    EXPECT_NEAR(g(1, 0), -1.0, 1e-12);
  }
}

TEST(Gamma, ExactlyAntisymmetric) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = U(rng), b = U(rng), c0 = U(rng);
    const auto chart = fiber_chart(
        [a](const Vec2& x) { return 1.5 + a * std::sin(x.x() + 2 * x.y()); },
        [b, c0](const Vec2& x) -> Vec2 {
          return Vec2(b * x.y() * x.y() + std::cos(x.x()), c0 * x.x() * x.y());
        });
    const Mat2 g = gamma_at(chart, Vec2(U(rng), U(rng)), 1e-3);
    EXPECT_EQ(g(0, 1) + g(1, 0), 0.0);
    EXPECT_EQ(g.trace(), 0.0);
  }
}

TEST(SectionGradient, Examples) {
  EXPECT_EQ(section_gradient_s_at(euclidean_chart(), Vec2(3, 4)).norm(), 0.0);
  const Vec2 h = section_gradient_s_at(heisenberg_chart(), Vec2(1, 2));
  EXPECT_DOUBLE_EQ(h.x(), -1.0);
  EXPECT_DOUBLE_EQ(h.y(), 0.5);
  const auto c = fiber_chart([](const Vec2&) { return 4.0; },
                             [](const Vec2&) -> Vec2 { return Vec2(1, 0); });
  const Vec2 s = section_gradient_s_at(c, Vec2(0, 0));
  EXPECT_DOUBLE_EQ(s.x(), -2.0);
  EXPECT_DOUBLE_EQ(s.y(), 0.0);
}

TEST(Builtins, Registry) {
  const auto list = builtin_geometries();
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(make_builtin("heisenberg", {}).ric_lower(), -0.5);
  EXPECT_EQ(make_builtin("euclidean", {}).ric_lower(), 0.0);
  const auto w = make_builtin("warped", {{"f", "exp(2*x)"}, {"ric_lower", "-1"}});
  EXPECT_DOUBLE_EQ(w.f(Vec2(0.5, 0)), std::exp(1.0));
  EXPECT_EQ(w.ric_lower(), -1.0);
  EXPECT_FALSE(make_builtin("warped", {{"f", "2"}}).ric_known());
  EXPECT_THROW(make_builtin("warped", {}), FormatError);
  EXPECT_THROW(make_builtin("hopf", {}), FormatError);
}

TEST(Expression, Arithmetic) {
  EXPECT_DOUBLE_EQ(Expression("1 + 2*3")(0, 0), 7.0);
  EXPECT_DOUBLE_EQ(Expression("-2^2")(0, 0), -4.0);
  EXPECT_DOUBLE_EQ(Expression("2^-1")(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(Expression("x*y/2")(3, 4), 6.0);
  EXPECT_DOUBLE_EQ(Expression("r")(3, 4), 5.0);
  EXPECT_DOUBLE_EQ(Expression("-sqrt(1 - r^2)")(0.6, 0), -0.8);
  EXPECT_NEAR(Expression("sin(pi/2) + ln(e) + exp(0) + abs(-1)")(0, 0), 4.0, 1e-15);
  EXPECT_TRUE(Expression("2*pi").is_constant());
  EXPECT_FALSE(Expression("2*x").is_constant());
}

TEST(Expression, Errors) {
  EXPECT_THROW(Expression("1 +"), FormatError);
  EXPECT_THROW(Expression("foo(1)"), FormatError);
  EXPECT_THROW(Expression("z"), FormatError);
  EXPECT_THROW(Expression("(1"), FormatError);
  EXPECT_THROW(Expression("1 2"), FormatError);
}

TEST(GeometryFile, RoundTripHeisenberg) {
  const ChartTable table = tabulate_chart(heisenberg_chart(), 9, 7, -1.0, -0.75, 0.25, 0.25);
  std::stringstream ss;
  write_chart_table(ss, table);
  const SubmersionChart c = chart_from_table(read_chart_table(ss, "mem"));
  EXPECT_EQ(c.name(), "heisenberg");
  EXPECT_EQ(c.ric_lower(), -0.5);
  EXPECT_TRUE(c.has_identity_metric());
  // Bilinear interpolation reproduces the affine tilt between nodes.
  for (const Vec2& x : {Vec2(0.1, 0.2), Vec2(-0.9, 0.7), Vec2(0.95, -0.6)}) {
    EXPECT_NEAR((c.delta(x) - Vec2(0.5 * x.y(), -0.5 * x.x())).norm(), 0, 1e-14);
    EXPECT_NEAR(c.f(x), 1.0, 1e-15);
  }
  EXPECT_NEAR(gamma_at(c, Vec2(0.1, 0.1), 0.05)(0, 1), 1.0, 1e-12);
  EXPECT_THROW(c.f(Vec2(5, 0)), ChartDomainError);
}

TEST(GeometryFile, Malformed) {
  std::stringstream missing("name = t\ngrid = 2, 2, 0, 0, 1, 1\n[sigma11]\n1, 1\n1, 1\n");
  EXPECT_THROW(read_chart_table(missing), FormatError);
  std::stringstream badrow("name = t\ngrid = 2, 2, 0, 0, 1, 1\n[sigma11]\n1, 1, 1\n");
  EXPECT_THROW(read_chart_table(badrow), FormatError);
  std::stringstream badkey("name = t\ncolour = red\n");
  EXPECT_THROW(read_chart_table(badkey), FormatError);
}
