#pragma once

// Built-in closed surfaces as chart atlases with their Riemannian data.
//
// Torus: R^2/Z^2 with the flat metric, one periodic chart, coordinates in [0,1)^2.
// Sphere: unit round sphere with two stereographic charts. Chart 0 projects
// from the north pole (its origin is the south pole), chart 1 projects from the
// south pole. The transition is the inversion w = v/|v|^2 in both directions and
// the metric is 4/(1+|v|^2)^2 times the Euclidean one in either chart.

#include <array>
#include <cmath>
#include <string>

#include "msop/error.hpp"
#include "msop/linalg2.hpp"

namespace msop {

enum class SurfaceKind { torus, sphere };

struct SurfacePoint {
  int chart = 0;
  Vec2 coords;
};

enum class Variance { covector, tangent };

/// Vector or covector components in the chart of its base point.
struct ChartVector {
  SurfacePoint base;
  Vec2 components;
  Variance variance = Variance::covector;
};

inline ChartVector make_covector(const SurfacePoint& base, const Vec2& comps) {
  if (comps.x == 0.0 && comps.y == 0.0) throw Error("geometry: covector must be nonzero");
  return {base, comps, Variance::covector};
}

inline ChartVector make_tangent(const SurfacePoint& base, const Vec2& comps) {
  if (comps.x == 0.0 && comps.y == 0.0) throw Error("geometry: tangent vector must be nonzero");
  return {base, comps, Variance::tangent};
}

using Ambient = std::array<double, 3>;

class Surface {
 public:
  static constexpr double kRechartRadius = 1.5;

  static Surface torus() { return Surface(SurfaceKind::torus); }
  static Surface sphere() { return Surface(SurfaceKind::sphere); }

  SurfaceKind kind() const { return kind_; }
  int chart_count() const { return kind_ == SurfaceKind::torus ? 1 : 2; }
  std::string name() const { return kind_ == SurfaceKind::torus ? "torus" : "sphere"; }

  /// Torus: wrap into [0,1)^2. Sphere: re-chart when |v| exceeds 1.5.
  SurfacePoint canonicalize(SurfacePoint p) const {
    if (kind_ == SurfaceKind::torus) {
      p.chart = 0;
      p.coords = {wrap_unit(p.coords.x), wrap_unit(p.coords.y)};
      return p;
    }
    if (norm(p.coords) > kRechartRadius) return transition(p, 1 - p.chart);
    return p;
  }

  SurfacePoint transition(const SurfacePoint& p, int target) const {
    check_chart(target);
    if (kind_ == SurfaceKind::torus || p.chart == target) return {target, p.coords};
    const double r2 = norm2(p.coords);
    if (r2 == 0.0) throw PoleSingularityError("geometry: point is the pole of the target chart");
    return {target, p.coords * (1.0 / r2)};
  }

  /// Jacobian of the transition map at p (maps tangent components).
  Mat2 transition_jacobian(const SurfacePoint& p, int target) const {
    check_chart(target);
    if (kind_ == SurfaceKind::torus || p.chart == target) return Mat2::identity();
    const Vec2 v = p.coords;
    const double r2 = norm2(v);
    if (r2 == 0.0) throw PoleSingularityError("geometry: point is the pole of the target chart");
    const double r4 = r2 * r2;
    return {(r2 - 2.0 * v.x * v.x) / r4, -2.0 * v.x * v.y / r4,
            -2.0 * v.x * v.y / r4, (r2 - 2.0 * v.y * v.y) / r4};
  }

  /// Moves components to the target chart: tangents by J, covectors by J^{-T}.
  ChartVector transport(const ChartVector& w, int target) const {
    const Mat2 j = transition_jacobian(w.base, target);
    const Vec2 c = w.variance == Variance::tangent ? j * w.components
                                                   : j.inverse().transpose() * w.components;
    return {transition(w.base, target), c, w.variance};
  }

  /// Metric g = conformal_factor * Euclidean in the chart of p.
  double conformal_factor(const SurfacePoint& p) const {
    if (kind_ == SurfaceKind::torus) return 1.0;
    const double q = 1.0 + norm2(p.coords);
    return 4.0 / (q * q);
  }

  /// |xi|^2 under the cometric (principal symbol of the Laplacian).
  double cometric_norm2(const ChartVector& xi) const {
    if (xi.variance != Variance::covector) throw Error("geometry: cometric_norm2 needs a covector");
    return norm2(xi.components) / conformal_factor(xi.base);
  }

  double metric_norm2(const ChartVector& v) const {
    if (v.variance != Variance::tangent) throw Error("geometry: metric_norm2 needs a tangent vector");
    return norm2(v.components) * conformal_factor(v.base);
  }

  /// Density of the Riemannian area measure relative to chart Lebesgue measure.
  double area_density(const SurfacePoint& p) const { return conformal_factor(p); }

  /// Index raising: covector -> tangent vector with the same norm.
  ChartVector raise(const ChartVector& xi) const {
    return {xi.base, xi.components * (1.0 / conformal_factor(xi.base)), Variance::tangent};
  }

  ChartVector lower(const ChartVector& v) const {
    return {v.base, v.components * conformal_factor(v.base), Variance::covector};
  }

  Ambient to_ambient(const SurfacePoint& p) const {
    const Vec2 v = p.coords;
    if (kind_ == SurfaceKind::torus) return {v.x, v.y, 0.0};
    const double r2 = norm2(v);
    const double q = 1.0 + r2;
    const double z = (r2 - 1.0) / q;
    return {2.0 * v.x / q, 2.0 * v.y / q, p.chart == 0 ? z : -z};
  }

  /// Jacobian of the chart parametrization v -> ambient point (3x2, column-major pairs).
  std::array<Vec2, 3> ambient_jacobian(const SurfacePoint& p) const {
    const Vec2 v = p.coords;
    if (kind_ == SurfaceKind::torus) return {Vec2{1.0, 0.0}, Vec2{0.0, 1.0}, Vec2{0.0, 0.0}};
    const double q = 1.0 + norm2(v);
    const double q2 = q * q;
    const double sign = p.chart == 0 ? 1.0 : -1.0;
    // Rows: d(ambient_i)/d(v1), d(ambient_i)/d(v2).
    return {Vec2{2.0 * (q - 2.0 * v.x * v.x) / q2, -4.0 * v.x * v.y / q2},
            Vec2{-4.0 * v.x * v.y / q2, 2.0 * (q - 2.0 * v.y * v.y) / q2},
            Vec2{sign * 4.0 * v.x / q2, sign * 4.0 * v.y / q2}};
  }

  SurfacePoint from_ambient(const Ambient& a) const {
    if (kind_ == SurfaceKind::torus) return canonicalize({0, {a[0], a[1]}});
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    const double x = a[0] / n, y = a[1] / n, z = a[2] / n;
    // Prefer the chart in which the point is closer to the origin.
    if (z <= 0.0) return {0, {x / (1.0 - z), y / (1.0 - z)}};
    return {1, {x / (1.0 + z), y / (1.0 + z)}};
  }

  /// Displacement from p to q expressed in p's chart (torus: shortest wrap).
  Vec2 chart_difference(const SurfacePoint& p, const SurfacePoint& q) const {
    if (kind_ == SurfaceKind::torus) {
      return {wrap_half(q.coords.x - p.coords.x), wrap_half(q.coords.y - p.coords.y)};
    }
    return transition(q, p.chart).coords - p.coords;
  }

  /// Distance used for fixed-point identification: wrapped chart distance on
  /// the torus, chordal ambient distance on the sphere.
  double distance(const SurfacePoint& p, const SurfacePoint& q) const {
    if (kind_ == SurfaceKind::torus) return norm(chart_difference(p, q));
    const Ambient a = to_ambient(p), b = to_ambient(q);
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                     (a[2] - b[2]) * (a[2] - b[2]));
  }

  static double wrap_unit(double t) {
    double r = t - std::floor(t);
    if (r >= 1.0) r = 0.0;
    return r;
  }

  static double wrap_half(double t) { return t - std::round(t); }

 private:
  explicit Surface(SurfaceKind k) : kind_(k) {}

  void check_chart(int c) const {
    if (c < 0 || c >= chart_count()) throw Error("geometry: invalid chart id " + std::to_string(c));
  }

  SurfaceKind kind_;
};

}  // namespace msop
