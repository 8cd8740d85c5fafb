#pragma once

// Chart of a Riemannian submersion over a 2-D base: base metric sigma_ij,
// fiber data f = 1/|Y|^2 and section tilt delta_i, plus the pointwise derived
// quantities the mean curvature operator needs.

#include "kgraph/errors.hpp"
#include "kgraph/expression.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>

namespace kgraph {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Inputs at or below this value are treated as degenerate.
inline constexpr double kDegeneracyThreshold = 1e-12;

inline std::string format_point(const Vec2& x) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << x.x() << ", " << x.y() << ")";
  return os.str();
}

class SubmersionChart {
public:
  using MetricFn = std::function<Mat2(const Vec2&)>;
  using ScalarFn = std::function<double(const Vec2&)>;
  using CovectorFn = std::function<Vec2(const Vec2&)>;

  SubmersionChart(std::string name, MetricFn metric, ScalarFn fiber, CovectorFn tilt,
                  double ric_lower, bool identity_metric = false)
      : name_(std::move(name)), metric_(std::move(metric)), fiber_(std::move(fiber)),
        tilt_(std::move(tilt)), ric_lower_(ric_lower), identity_metric_(identity_metric) {}

  int dim() const { return 2; }
  const std::string& name() const { return name_; }

  Mat2 metric(const Vec2& x) const { return metric_(x); }
  double f(const Vec2& x) const { return fiber_(x); }
  Vec2 delta(const Vec2& x) const { return tilt_(x); }

  // Lower bound for the ambient Ricci curvature; NaN when unknown.
  double ric_lower() const { return ric_lower_; }
  bool ric_known() const { return !std::isnan(ric_lower_); }

  // sigma is the identity everywhere; distances are then Euclidean.
  bool has_identity_metric() const { return identity_metric_; }

  // Asserts positive-definiteness of sigma and positivity of f at x.
  void validate_at(const Vec2& x) const {
    const Mat2 s = metric(x);
    if (!s.allFinite() || std::abs(s(0, 1) - s(1, 0)) > 1e-12 * (1.0 + s.norm()))
      throw NonPositiveDefinite(name_ + ": metric not symmetric/finite at " + format_point(x));
    const double tr = s.trace();
    const double det = s.determinant();
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    if (0.5 * tr - disc <= kDegeneracyThreshold)
      throw NonPositiveDefinite(name_ + ": metric eigenvalue <= 1e-12 at " + format_point(x));
    const double fx = f(x);
    if (!(fx > kDegeneracyThreshold))
      throw DegenerateFiber(name_ + ": f <= 1e-12 at " + format_point(x));
    if (!delta(x).allFinite())
      throw NonFiniteValue(name_ + ": tilt not finite at " + format_point(x));
  }

private:
  std::string name_;
  MetricFn metric_;
  ScalarFn fiber_;
  CovectorFn tilt_;
  double ric_lower_;
  bool identity_metric_;
};

// Built-in geometries.

inline SubmersionChart euclidean_chart() {
  return SubmersionChart(
      "euclidean", [](const Vec2&) -> Mat2 { return Mat2::Identity(); },
      [](const Vec2&) { return 1.0; }, [](const Vec2&) -> Vec2 { return Vec2::Zero(); }, 0.0,
      true);
}

// Nil_3 as a submersion over the flat plane; bundle curvature 1/2, so the
// Ricci tensor has minimum eigenvalue -1/2.
inline SubmersionChart heisenberg_chart() {
  return SubmersionChart(
      "heisenberg", [](const Vec2&) -> Mat2 { return Mat2::Identity(); },
      [](const Vec2&) { return 1.0; },
      [](const Vec2& x) -> Vec2 { return Vec2(0.5 * x.y(), -0.5 * x.x()); }, -0.5, true);
}

// Warped product over the flat plane with user fiber function; the Ricci
// lower bound must be supplied (NaN if unknown).
inline SubmersionChart warped_chart(Expression fiber, double ric_lower) {
  auto fn = [fiber](const Vec2& x) { return fiber(x.x(), x.y()); };
  return SubmersionChart(
      "warped[f=" + fiber.source() + "]", [](const Vec2&) -> Mat2 { return Mat2::Identity(); },
      fn, [](const Vec2&) -> Vec2 { return Vec2::Zero(); }, ric_lower, true);
}

struct BuiltinInfo {
  std::string name;
  std::string parameters;
  std::string description;
};

inline std::vector<BuiltinInfo> builtin_geometries() {
  return {
      {"euclidean", "", "flat R^2 x R: sigma = I, f = 1, delta = 0, Ric >= 0"},
      {"heisenberg", "", "Nil_3: sigma = I, f = 1, delta = (y/2, -x/2), Ric >= -1/2"},
      {"warped", "f = <expr>, ric_lower = <number>",
       "warped product: sigma = I, delta = 0, user fiber function f(x, y) > 0"},
  };
}

// Builds a built-in geometry from its name and a parameter map.
inline SubmersionChart make_builtin(const std::string& name,
                                    const std::map<std::string, std::string>& params) {
  if (name == "euclidean")
    return euclidean_chart();
  if (name == "heisenberg")
    return heisenberg_chart();
  if (name == "warped") {
    auto it = params.find("f");
    if (it == params.end())
      throw FormatError("geometry warped: missing parameter 'f'");
    double ric = std::numeric_limits<double>::quiet_NaN();
    if (auto r = params.find("ric_lower"); r != params.end())
      ric = Expression(r->second)(0.0, 0.0);
    return warped_chart(Expression(it->second), ric);
  }
  throw FormatError("unknown built-in geometry '" + name + "'");
}

// Derived pointwise quantities.

inline Mat2 inverse_metric_at(const SubmersionChart& chart, const Vec2& x) {
  const Mat2 s = chart.metric(x);
  const double tr = s.trace();
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  if (!(0.5 * tr - disc > kDegeneracyThreshold))
    throw NonPositiveDefinite(chart.name() + ": metric eigenvalue <= 1e-12 at " +
                              format_point(x));
  Mat2 inv;
  inv << s(1, 1) / det, -s(0, 1) / det, -s(1, 0) / det, s(0, 0) / det;
  return inv;
}

// gamma[k](i, j) = Gamma^k_ij.
using Christoffels = std::array<Mat2, 2>;

inline Christoffels christoffels_at(const SubmersionChart& chart, const Vec2& x, double h_fd) {
  const Mat2 inv = inverse_metric_at(chart, x);
  std::array<Mat2, 2> dsigma; // dsigma[l](i, j) = d_l sigma_ij
  for (int l = 0; l < 2; ++l) {
    Vec2 e = Vec2::Zero();
    e[l] = h_fd;
    dsigma[l] = (chart.metric(x + e) - chart.metric(x - e)) / (2.0 * h_fd);
  }
  Christoffels g;
  for (int k = 0; k < 2; ++k) {
    g[k].setZero();
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) {
        double acc = 0.0;
        for (int l = 0; l < 2; ++l)
          acc += inv(k, l) * (dsigma[i](j, l) + dsigma[j](i, l) - dsigma[l](i, j));
        g[k](i, j) = 0.5 * acc;
        g[k](j, i) = 0.5 * acc;
      }
  }
  return g;
}

// Covariant components of pi_* nabla_{D_0} D_0, i.e. d_i f / (2 f).
inline Vec2 kappa_vector_at(const SubmersionChart& chart, const Vec2& x, double h_fd) {
  const double fx = chart.f(x);
  Vec2 out;
  for (int i = 0; i < 2; ++i) {
    Vec2 e = Vec2::Zero();
    e[i] = h_fd;
    out[i] = (chart.f(x + e) - chart.f(x - e)) / (2.0 * h_fd) / (2.0 * fx);
  }
  return out;
}

// D_i(s) = -f^{1/2} delta_i.
inline Vec2 section_gradient_s_at(const SubmersionChart& chart, const Vec2& x) {
  return -std::sqrt(chart.f(x)) * chart.delta(x);
}

// Coordinate derivatives of X_k = f^{1/2} delta_k: result(k, j) = d_j X_k.
inline Mat2 tilt_jacobian_at(const SubmersionChart& chart, const Vec2& x, double h_fd) {
  Mat2 out;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = h_fd;
    const Vec2 plus = std::sqrt(chart.f(x + e)) * chart.delta(x + e);
    const Vec2 minus = std::sqrt(chart.f(x - e)) * chart.delta(x - e);
    out.col(j) = (plus - minus) / (2.0 * h_fd);
  }
  return out;
}

// gamma_kj = d_j(f^{1/2} delta_k) - d_k(f^{1/2} delta_j) in a coordinate frame.
inline Mat2 gamma_at(const SubmersionChart& chart, const Vec2& x, double h_fd) {
  const Mat2 dX = tilt_jacobian_at(chart, x, h_fd);
  const double g01 = dX(0, 1) - dX(1, 0);
  Mat2 g;
  g << 0.0, g01, -g01, 0.0;
  return g;
}

} // namespace kgraph
