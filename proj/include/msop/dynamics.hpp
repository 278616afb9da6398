#pragma once

// Diffeomorphisms of the built-in surfaces: evaluation, Jacobians, fixed
// points and their classification, periodic-point scan, orbit limits and
// matrix cocycles along orbits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msop/error.hpp"
#include "msop/expr.hpp"
#include "msop/geometry.hpp"
#include "msop/linalg2.hpp"

namespace msop {

/// Image of a point under g (or g^{-1}) together with the Jacobian of that
/// step, mapping tangent components in the chart of the source point to
/// tangent components in the chart of the (canonicalized) image.
struct MapStep {
  SurfacePoint image;
  Mat2 jacobian = Mat2::identity();
};

struct NewtonOptions {
  int max_iterations = 50;
  double tolerance = 1e-12;
  int max_halvings = 30;
};

namespace detail {

/// Central-difference step used for every numeric Jacobian.
inline double fd_step(double coord) { return std::max(1e-6, 1e-6 * std::abs(coord)); }

}  // namespace detail

class DiffeoModel {
 public:
  explicit DiffeoModel(Surface surface) : surface_(surface) {}
  virtual ~DiffeoModel() = default;

  const Surface& surface() const { return surface_; }
  virtual std::string name() const = 0;

  /// direction +1 applies g, -1 applies g^{-1}.
  virtual MapStep step(const SurfacePoint& x, int direction, bool with_jacobian) const = 0;

  SurfacePoint apply(const SurfacePoint& x, int direction = 1) const {
    return step(surface_.canonicalize(x), direction, false).image;
  }

  Mat2 jacobian(const SurfacePoint& x) const {
    return step(surface_.canonicalize(x), 1, true).jacobian;
  }

  /// Transpose-inverse of the Jacobian.
  Mat2 codifferential(const SurfacePoint& x) const {
    const Mat2 j = jacobian(x);
    if (condition_number(j) > 1e12) {
      throw NumericalError("dynamics", "near-singular Jacobian in codifferential");
    }
    return j.inverse().transpose();
  }

  /// Central-difference Jacobian of a full step, independent of how step()
  /// computes its own Jacobian.
  Mat2 finite_difference_jacobian(const SurfacePoint& x0, int direction = 1) const {
    const SurfacePoint x = surface_.canonicalize(x0);
    const SurfacePoint centre = step(x, direction, false).image;
    Mat2 j;
    for (int i = 0; i < 2; ++i) {
      const double h = detail::fd_step(x.coords[i]);
      SurfacePoint plus = x, minus = x;
      plus.coords[i] += h;
      minus.coords[i] -= h;
      const Vec2 dp = surface_.chart_difference(centre, step(plus, direction, false).image);
      const Vec2 dm = surface_.chart_difference(centre, step(minus, direction, false).image);
      const Vec2 col = (dp - dm) * (1.0 / (2.0 * h));
      if (i == 0) {
        j.a = col.x;
        j.c = col.y;
      } else {
        j.b = col.x;
        j.d = col.y;
      }
    }
    return j;
  }

 protected:
  Surface surface_;
};

// ---------------------------------------------------------------------------
// Closed-form maps

/// Chart formulas over variables (x1, x2); the map's output is read in the
/// same chart and canonicalized afterwards.
struct ChartFormulas {
  std::array<Expr, 2> map;
  std::optional<std::array<Expr, 2>> inverse;
  std::optional<std::array<Expr, 4>> jacobian;  // row-major dg
};

class ClosedFormDiffeo : public DiffeoModel {
 public:
  ClosedFormDiffeo(Surface surface, std::vector<ChartFormulas> charts, std::string name = "closed_form",
                   NewtonOptions newton = {})
      : DiffeoModel(surface), charts_(std::move(charts)), name_(std::move(name)), newton_(newton) {
    if (static_cast<int>(charts_.size()) != surface.chart_count()) {
      throw Error("dynamics: closed-form map needs one formula set per chart");
    }
  }

  std::string name() const override { return name_; }

  MapStep step(const SurfacePoint& x, int direction, bool with_jacobian) const override {
    if (direction == 1) return forward(x, with_jacobian);
    if (direction == -1) return backward(x, with_jacobian);
    throw Error("dynamics: direction must be +1 or -1");
  }

 private:
  Vec2 raw_map(int chart, const Vec2& v) const {
    const auto& f = charts_[chart].map;
    const std::array<double, 2> vals{v.x, v.y};
    return {f[0].eval(vals), f[1].eval(vals)};
  }

  Mat2 raw_jacobian(int chart, const Vec2& v) const {
    if (const auto& jf = charts_[chart].jacobian) {
      const std::array<double, 2> vals{v.x, v.y};
      return {(*jf)[0].eval(vals), (*jf)[1].eval(vals), (*jf)[2].eval(vals), (*jf)[3].eval(vals)};
    }
    Mat2 j;
    for (int i = 0; i < 2; ++i) {
      const double h = detail::fd_step(v[i]);
      Vec2 p = v, m = v;
      p[i] += h;
      m[i] -= h;
      const Vec2 col = (raw_map(chart, p) - raw_map(chart, m)) * (1.0 / (2.0 * h));
      if (i == 0) {
        j.a = col.x;
        j.c = col.y;
      } else {
        j.b = col.x;
        j.d = col.y;
      }
    }
    return j;
  }

  MapStep finish(int chart, const Vec2& raw, const Mat2& jac, bool with_jacobian) const {
    const SurfacePoint unwrapped{chart, raw};
    MapStep out;
    out.image = surface_.canonicalize(unwrapped);
    if (with_jacobian) {
      out.jacobian = surface_.transition_jacobian(unwrapped, out.image.chart) * jac;
    }
    return out;
  }

  MapStep forward(const SurfacePoint& x, bool with_jacobian) const {
    const Vec2 raw = raw_map(x.chart, x.coords);
    const Mat2 j = with_jacobian ? raw_jacobian(x.chart, x.coords) : Mat2::identity();
    return finish(x.chart, raw, j, with_jacobian);
  }

  Vec2 residual(int chart, const Vec2& guess, const Vec2& target) const {
    const Vec2 d = raw_map(chart, guess) - target;
    if (surface_.kind() == SurfaceKind::torus) {
      return {Surface::wrap_half(d.x), Surface::wrap_half(d.y)};
    }
    return d;
  }

  MapStep backward(const SurfacePoint& y, bool with_jacobian) const {
    const int chart = y.chart;
    Vec2 pre;
    if (const auto& inv = charts_[chart].inverse) {
      const std::array<double, 2> vals{y.coords.x, y.coords.y};
      pre = {(*inv)[0].eval(vals), (*inv)[1].eval(vals)};
    } else {
      pre = newton_inverse(chart, y.coords);
    }
    Mat2 j = Mat2::identity();
    if (with_jacobian) j = raw_jacobian(chart, pre).inverse();
    return finish(chart, pre, j, with_jacobian);
  }

  Vec2 newton_inverse(int chart, const Vec2& target) const {
    Vec2 x = target;
    Vec2 f = residual(chart, x, target);
    double fn = norm(f);
    for (int it = 0; it < newton_.max_iterations; ++it) {
      if (fn < newton_.tolerance) return x;
      const Mat2 j = raw_jacobian(chart, x);
      if (j.det() == 0.0) break;
      const Vec2 dx = -(j.inverse() * f);
      double t = 1.0;
      bool accepted = false;
      for (int h = 0; h <= newton_.max_halvings; ++h, t *= 0.5) {
        const Vec2 cand = x + dx * t;
        const Vec2 fc = residual(chart, cand, target);
        if (norm(fc) < fn) {
          x = cand;
          f = fc;
          fn = norm(fc);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (fn < newton_.tolerance) return x;
    // Rounding can stall just above the tolerance; accept a stalled solve
    // whose residual is at the rounding level of the coordinates.
    if (fn < 1e-13 * std::max(1.0, norm(target)) * 100.0) return x;
    throw NumericalError("dynamics", "Newton inversion did not converge (residual " +
                                         std::to_string(fn) + ")");
  }

  std::vector<ChartFormulas> charts_;
  std::string name_;
  NewtonOptions newton_;
};

namespace detail {

inline std::string literal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// G(x, y) = (x + a sin(2 pi x)/(2 pi), y + b sin(2 pi y)/(2 pi)) mod 1.
inline std::shared_ptr<ClosedFormDiffeo> make_torus_sine(double a, double b) {
  if (!(std::abs(a) < 1.0 && std::abs(b) < 1.0)) {
    throw Error("dynamics: torus_sine needs |a| < 1 and |b| < 1 to be a diffeomorphism");
  }
  const std::vector<std::string> vars{"x1", "x2"};
  const std::string sa = detail::literal(a), sb = detail::literal(b);
  ChartFormulas f;
  f.map = {Expr::parse("x1 + " + sa + " * sin(2*pi*x1) / (2*pi)", vars),
           Expr::parse("x2 + " + sb + " * sin(2*pi*x2) / (2*pi)", vars)};
  f.jacobian = std::array<Expr, 4>{Expr::parse("1 + " + sa + " * cos(2*pi*x1)", vars),
                                   Expr::parse("0", vars), Expr::parse("0", vars),
                                   Expr::parse("1 + " + sb + " * cos(2*pi*x2)", vars)};
  return std::make_shared<ClosedFormDiffeo>(Surface::torus(), std::vector<ChartFormulas>{f},
                                            "torus_sine");
}

/// Closed-form map on the torus from component strings; optional inverse and Jacobian.
inline std::shared_ptr<ClosedFormDiffeo> make_torus_closed_form(
    const std::array<std::string, 2>& map, const std::optional<std::array<std::string, 2>>& inverse = {},
    const std::optional<std::array<std::string, 4>>& jacobian = {}, std::string name = "closed_form") {
  const std::vector<std::string> vars{"x1", "x2"};
  ChartFormulas f;
  f.map = {Expr::parse(map[0], vars), Expr::parse(map[1], vars)};
  if (inverse) f.inverse = std::array<Expr, 2>{Expr::parse((*inverse)[0], vars), Expr::parse((*inverse)[1], vars)};
  if (jacobian) {
    f.jacobian = std::array<Expr, 4>{Expr::parse((*jacobian)[0], vars), Expr::parse((*jacobian)[1], vars),
                                     Expr::parse((*jacobian)[2], vars), Expr::parse((*jacobian)[3], vars)};
  }
  return std::make_shared<ClosedFormDiffeo>(Surface::torus(), std::vector<ChartFormulas>{f},
                                            std::move(name));
}

// ---------------------------------------------------------------------------
// Time-one maps of gradient flows on the sphere

/// Time-T map of the flow of grad_g f for f given over ambient (x1, x2, x3).
/// Integration is RK4 in stereographic charts with re-charting after every
/// step; the Jacobian comes from the variational equation integrated by the
/// same stepper.
class GradientFlowDiffeo : public DiffeoModel {
 public:
  GradientFlowDiffeo(Surface surface, Expr morse_function, double step = 1e-3, double time = 1.0)
      : DiffeoModel(surface), f_(std::move(morse_function)), h_(step), time_(time) {
    if (surface.kind() != SurfaceKind::sphere) throw Error("dynamics: gradient flow needs the sphere");
    steps_ = static_cast<int>(std::lround(time_ / h_));
    if (steps_ <= 0) throw Error("dynamics: flow time must exceed the step");
  }

  std::string name() const override { return "sphere_gradient_flow"; }
  const Expr& morse_function() const { return f_; }

  MapStep step(const SurfacePoint& x, int direction, bool with_jacobian) const override {
    if (direction != 1 && direction != -1) throw Error("dynamics: direction must be +1 or -1");
    const double sign = static_cast<double>(direction);
    SurfacePoint p = x;
    Mat2 y = Mat2::identity();
    for (int i = 0; i < steps_; ++i) {
      rk4(p, y, sign, with_jacobian);
      if (norm(p.coords) > Surface::kRechartRadius) {
        if (with_jacobian) y = surface_.transition_jacobian(p, 1 - p.chart) * y;
        p = surface_.transition(p, 1 - p.chart);
      }
    }
    return {p, y};
  }

 private:
  struct Field {
    Vec2 value;
    Mat2 derivative;
  };

  double chart_function(int chart, const Vec2& v) const {
    const Ambient a = surface_.to_ambient({chart, v});
    return f_.eval(std::span<const double>(a.data(), 3));
  }

  // X = c(v) grad F with c = (1+|v|^2)^2/4; derivatives of F from a 9-point stencil.
  Field field(int chart, const Vec2& v, bool with_derivative) const {
    constexpr double hs = 1e-4;
    const double fpx = chart_function(chart, {v.x + hs, v.y});
    const double fmx = chart_function(chart, {v.x - hs, v.y});
    const double fpy = chart_function(chart, {v.x, v.y + hs});
    const double fmy = chart_function(chart, {v.x, v.y - hs});
    const Vec2 grad{(fpx - fmx) / (2.0 * hs), (fpy - fmy) / (2.0 * hs)};
    const double q = 1.0 + norm2(v);
    const double c = 0.25 * q * q;
    Field out{grad * c, Mat2{}};
    if (with_derivative) {
      const double f0 = chart_function(chart, v);
      const double fpp = chart_function(chart, {v.x + hs, v.y + hs});
      const double fpm = chart_function(chart, {v.x + hs, v.y - hs});
      const double fmp = chart_function(chart, {v.x - hs, v.y + hs});
      const double fmm = chart_function(chart, {v.x - hs, v.y - hs});
      const double hxx = (fpx - 2.0 * f0 + fmx) / (hs * hs);
      const double hyy = (fpy - 2.0 * f0 + fmy) / (hs * hs);
      const double hxy = (fpp - fpm - fmp + fmm) / (4.0 * hs * hs);
      const Vec2 dc = v * q;  // gradient of c
      out.derivative = {dc.x * grad.x + c * hxx, dc.y * grad.x + c * hxy,
                        dc.x * grad.y + c * hxy, dc.y * grad.y + c * hyy};
    }
    return out;
  }

  void rk4(SurfacePoint& p, Mat2& y, double sign, bool with_jacobian) const {
    const double h = sign * h_;
    const int c = p.chart;
    const Vec2 v = p.coords;
    const Field k1 = field(c, v, with_jacobian);
    const Field k2 = field(c, v + k1.value * (0.5 * h), with_jacobian);
    const Field k3 = field(c, v + k2.value * (0.5 * h), with_jacobian);
    const Field k4 = field(c, v + k3.value * h, with_jacobian);
    p.coords = v + (k1.value + 2.0 * k2.value + 2.0 * k3.value + k4.value) * (h / 6.0);
    if (with_jacobian) {
      const Mat2 y1 = k1.derivative * y;
      const Mat2 y2 = k2.derivative * (y + (0.5 * h) * y1);
      const Mat2 y3 = k3.derivative * (y + (0.5 * h) * y2);
      const Mat2 y4 = k4.derivative * (y + h * y3);
      y = y + (h / 6.0) * (y1 + 2.0 * y2 + 2.0 * y3 + y4);
    }
  }

  Expr f_;
  double h_;
  double time_;
  int steps_ = 0;
};

inline std::shared_ptr<GradientFlowDiffeo> make_sphere_gradient_flow(const std::string& f, double step = 1e-3,
                                                                     double time = 1.0) {
  return std::make_shared<GradientFlowDiffeo>(Surface::sphere(), Expr::parse(f, {"x1", "x2", "x3"}), step,
                                              time);
}

// ---------------------------------------------------------------------------
// Cocycles

enum class CocycleKind { differential, codifferential };

/// Ordered product of step Jacobians (or codifferentials) along n steps of
/// the orbit of x; negative n walks backwards with g^{-1}.
inline Mat2 cocycle(const DiffeoModel& g, const SurfacePoint& x0, int n, CocycleKind kind) {
  if (std::abs(n) > 10000) throw Error("dynamics: cocycle length limited to |n| <= 10^4");
  SurfacePoint x = g.surface().canonicalize(x0);
  Mat2 m = Mat2::identity();
  const int dir = n >= 0 ? 1 : -1;
  for (int i = 0; i < std::abs(n); ++i) {
    const MapStep s = g.step(x, dir, true);
    const Mat2 j = kind == CocycleKind::differential ? s.jacobian : s.jacobian.inverse().transpose();
    m = j * m;
    x = s.image;
  }
  return m;
}

/// Orbit points for n in [n_min, n_max] with forward step Jacobians dg(x_n)
/// and their inverses (the Jacobians of g^{-1} at x_{n+1}).
class Orbit {
 public:
  Orbit() = default;
  Orbit(const DiffeoModel& g, const SurfacePoint& x0, int n_min, int n_max) : n_min_(n_min), n_max_(n_max) {
    if (n_min > 0 || n_max < 0) throw Error("dynamics: orbit range must contain 0");
    const std::size_t count = static_cast<std::size_t>(n_max - n_min + 1);
    points_.resize(count);
    forward_.resize(count - 1);
    inverse_.resize(count - 1);
    SurfacePoint x = g.surface().canonicalize(x0);
    points_[index(0)] = x;
    for (int n = 0; n < n_max; ++n) {
      const MapStep s = g.step(x, 1, true);
      forward_[index(n)] = s.jacobian;
      inverse_[index(n)] = s.jacobian.inverse();
      x = s.image;
      points_[index(n + 1)] = x;
    }
    x = points_[index(0)];
    for (int n = -1; n >= n_min; --n) {
      const MapStep s = g.step(x, -1, true);
      inverse_[index(n)] = s.jacobian;
      forward_[index(n)] = s.jacobian.inverse();
      x = s.image;
      points_[index(n)] = x;
    }
  }

  int n_min() const { return n_min_; }
  int n_max() const { return n_max_; }
  const SurfacePoint& point(int n) const { return points_.at(index(n)); }
  /// dg at x_n, mapping T_{x_n} to T_{x_{n+1}}; n in [n_min, n_max).
  const Mat2& dg(int n) const { return forward_.at(index(n)); }
  /// Inverse of dg(n).
  const Mat2& dg_inverse(int n) const { return inverse_.at(index(n)); }

 private:
  std::size_t index(int n) const { return static_cast<std::size_t>(n - n_min_); }

  int n_min_ = 0;
  int n_max_ = 0;
  std::vector<SurfacePoint> points_;
  std::vector<Mat2> forward_;
  std::vector<Mat2> inverse_;
};

// ---------------------------------------------------------------------------
// Fixed points

enum class FixedPointType { source, sink, saddle };

inline const char* to_string(FixedPointType t) {
  switch (t) {
    case FixedPointType::source: return "source";
    case FixedPointType::sink: return "sink";
    case FixedPointType::saddle: return "saddle";
  }
  return "?";
}

struct FixedPointRecord {
  SurfacePoint point;
  Mat2 dg;
  bool real_eigenvalues = true;
  double alpha1 = 0.0;  // dg eigenvalues, alpha1 <= alpha2 (real parts if complex)
  double alpha2 = 0.0;
  double lambda_min = 0.0;  // codifferential eigenvalues
  double lambda_max = 0.0;
  double det_codifferential = 0.0;
  FixedPointType type = FixedPointType::saddle;
  Vec2 direction1;  // unit dg eigendirection for alpha1
  Vec2 direction2;  // unit dg eigendirection for alpha2
  std::vector<std::string> violations;

  bool satisfies_definition() const { return violations.empty(); }
};

/// Classify a fixed point from its differential and record every violation
/// of "real, positive, distinct and not equal to 1".
inline FixedPointRecord classify_fixed_point(const SurfacePoint& p, const Mat2& dg, double tol = 1e-8) {
  FixedPointRecord r;
  r.point = p;
  r.dg = dg;
  const EigenPair2 ev = eigenvalues(dg);
  r.real_eigenvalues = ev.real;
  const double d = dg.det();
  if (!ev.real) {
    r.violations.push_back("complex eigenvalues");
    r.alpha1 = r.alpha2 = ev.first.real();
    const double modulus = std::abs(ev.first);
    r.type = modulus < 1.0 ? FixedPointType::sink : FixedPointType::source;
    r.lambda_min = r.lambda_max = 1.0 / modulus;
    r.det_codifferential = 1.0 / d;
    r.direction1 = {1.0, 0.0};
    r.direction2 = {0.0, 1.0};
    return r;
  }
  r.alpha1 = ev.first.real();
  r.alpha2 = ev.second.real();
  if (r.alpha1 <= tol) r.violations.push_back("nonpositive eigenvalue");
  if (std::abs(r.alpha2 - r.alpha1) <= tol * std::max(1.0, std::abs(r.alpha2))) {
    r.violations.push_back("repeated eigenvalues");
  }
  if (std::abs(r.alpha1 - 1.0) <= tol || std::abs(r.alpha2 - 1.0) <= tol) {
    r.violations.push_back("eigenvalue equal to 1");
  }
  const double m1 = std::abs(r.alpha1), m2 = std::abs(r.alpha2);
  if (m1 < 1.0 && m2 < 1.0) {
    r.type = FixedPointType::sink;
  } else if (m1 > 1.0 && m2 > 1.0) {
    r.type = FixedPointType::source;
  } else {
    r.type = FixedPointType::saddle;
  }
  const double l1 = 1.0 / r.alpha1, l2 = 1.0 / r.alpha2;
  r.lambda_min = std::min(l1, l2);
  r.lambda_max = std::max(l1, l2);
  r.det_codifferential = 1.0 / d;
  r.direction1 = eigenvector(dg, r.alpha1);
  r.direction2 = eigenvector(dg, r.alpha2);
  return r;
}

struct FixedPointSet {
  std::vector<FixedPointRecord> points;
  std::size_t seeds = 0;
  std::size_t converged_seeds = 0;
  /// False when the roots look like a continuum (isolatedness fails).
  bool appears_finite = true;

  bool satisfies_definition() const {
    if (!appears_finite || points.empty()) return false;
    return std::all_of(points.begin(), points.end(), [](const auto& r) { return r.satisfies_definition(); });
  }
};

namespace detail {

struct PeriodicRoot {
  SurfacePoint point;
  Mat2 jacobian;  // D(g^p) at the root, in the root's chart
};

/// Residual g^p(x) - x in x's chart, with the Jacobian of g^p re-expressed in that chart.
inline std::pair<Vec2, Mat2> periodic_residual(const DiffeoModel& g, const SurfacePoint& x, int period,
                                               bool with_jacobian) {
  SurfacePoint y = x;
  Mat2 m = Mat2::identity();
  for (int i = 0; i < period; ++i) {
    const MapStep s = g.step(y, 1, with_jacobian);
    if (with_jacobian) m = s.jacobian * m;
    y = s.image;
  }
  const Surface& surf = g.surface();
  if (with_jacobian) m = surf.transition_jacobian(y, x.chart) * m;
  return {surf.chart_difference(x, y), m};
}

inline std::optional<PeriodicRoot> newton_periodic(const DiffeoModel& g, SurfacePoint x, int period,
                                                   const NewtonOptions& opt) {
  const Surface& surf = g.surface();
  try {
    auto [f, m] = periodic_residual(g, x, period, true);
    double fn = norm(f);
    for (int it = 0; it <= opt.max_iterations; ++it) {
      if (fn < opt.tolerance) return PeriodicRoot{x, m};
      if (it == opt.max_iterations) break;
      const Mat2 j = m - Mat2::identity();
      if (j.det() == 0.0 || !std::isfinite(j.det())) return std::nullopt;
      const Vec2 dx = -(j.inverse() * f);
      double t = 1.0;
      bool accepted = false;
      for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
        SurfacePoint cand = surf.canonicalize({x.chart, x.coords + dx * t});
        auto [fc, mc] = periodic_residual(g, cand, period, true);
        if (norm(fc) < fn) {
          x = cand;
          f = fc;
          m = mc;
          fn = norm(fc);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    // Residuals of long integrations stall at rounding level; accept those.
    if (fn < 1e-11) return PeriodicRoot{x, m};
  } catch (const Error&) {
    return std::nullopt;
  }
  return std::nullopt;
}

inline std::vector<SurfacePoint> seed_grid(const Surface& surf, int grid_n) {
  std::vector<SurfacePoint> seeds;
  for (int c = 0; c < surf.chart_count(); ++c) {
    for (int i = 0; i < grid_n; ++i) {
      for (int j = 0; j < grid_n; ++j) {
        if (surf.kind() == SurfaceKind::torus) {
          seeds.push_back({c, {static_cast<double>(i) / grid_n, static_cast<double>(j) / grid_n}});
        } else {
          // Cell centres of [-1,1]^2; each chart covers its closed hemisphere.
          const Vec2 v{-1.0 + (2.0 * i + 1.0) / grid_n, -1.0 + (2.0 * j + 1.0) / grid_n};
          if (norm(v) <= 1.0 + 1e-12) seeds.push_back({c, v});
        }
      }
    }
  }
  return seeds;
}

}  // namespace detail

/// Newton's method on g(x) - x from a grid_n x grid_n grid of seeds per chart.
inline FixedPointSet find_fixed_points(const DiffeoModel& g, int grid_n = 16, double tol = 1e-8,
                                       const NewtonOptions& opt = {}) {
  if (grid_n < 8) throw Error("dynamics: fixed-point search needs grid_n >= 8");
  const Surface& surf = g.surface();
  FixedPointSet out;
  const auto seeds = detail::seed_grid(surf, grid_n);
  out.seeds = seeds.size();
  bool degenerate = false;
  for (const auto& seed : seeds) {
    const auto root = detail::newton_periodic(g, seed, 1, opt);
    if (!root) continue;
    ++out.converged_seeds;
    const bool known = std::any_of(out.points.begin(), out.points.end(), [&](const auto& r) {
      return surf.distance(r.point, root->point) < 1e-6;
    });
    if (known) continue;
    if (std::abs((root->jacobian - Mat2::identity()).det()) < tol) degenerate = true;
    out.points.push_back(classify_fixed_point(root->point, root->jacobian, tol));
  }
  if (degenerate || out.points.size() > out.seeds / 2) out.appears_finite = false;
  return out;
}

struct PeriodicViolation {
  int period = 0;
  SurfacePoint point;
};

struct PeriodicScanReport {
  int max_period = 0;
  std::vector<PeriodicViolation> violations;
  bool fixed_set_finite = true;
  std::vector<std::string> notes;

  bool clean() const { return violations.empty() && fixed_set_finite; }
};

/// Roots of g^p - id for p = 2..max_period that are not fixed points.
inline PeriodicScanReport scan_periodic(const DiffeoModel& g, const FixedPointSet& fixed, int max_period,
                                        int grid_n = 16, const NewtonOptions& opt = {}) {
  if (max_period < 2) throw Error("dynamics: periodic scan needs max_period >= 2");
  const Surface& surf = g.surface();
  PeriodicScanReport rep;
  rep.max_period = max_period;
  rep.fixed_set_finite = fixed.appears_finite;
  if (!fixed.appears_finite) {
    rep.notes.push_back("fixed-point set does not appear finite; the Morse-Smale conditions fail upstream");
  }
  const auto seeds = detail::seed_grid(surf, grid_n);
  for (int p = 2; p <= max_period; ++p) {
    for (const auto& seed : seeds) {
      const auto root = detail::newton_periodic(g, seed, p, opt);
      if (!root) continue;
      const auto near = [&](const SurfacePoint& q) { return surf.distance(q, root->point) < 1e-6; };
      if (std::any_of(fixed.points.begin(), fixed.points.end(), [&](const auto& r) { return near(r.point); })) {
        continue;
      }
      if (std::any_of(rep.violations.begin(), rep.violations.end(),
                      [&](const auto& v) { return v.period == p && near(v.point); })) {
        continue;
      }
      rep.violations.push_back({p, root->point});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Orbit limits

struct OrbitLimit {
  std::size_t plus = 0;   // index into the fixed-point list
  std::size_t minus = 0;
  int plus_iterations = 0;
  int minus_iterations = 0;
};

namespace detail {

inline std::optional<std::size_t> nearest_fixed_point(const Surface& surf, const FixedPointSet& fixed,
                                                      const SurfacePoint& x, double tol) {
  for (std::size_t i = 0; i < fixed.points.size(); ++i) {
    if (surf.distance(fixed.points[i].point, x) < tol) return i;
  }
  return std::nullopt;
}

inline std::pair<std::size_t, int> follow_orbit(const DiffeoModel& g, const FixedPointSet& fixed,
                                                SurfacePoint x, int direction, double tol, int max_iter) {
  const Surface& surf = g.surface();
  std::optional<std::size_t> current;
  int streak = 0;
  for (int it = 1; it <= max_iter; ++it) {
    x = g.step(x, direction, false).image;
    const auto near = nearest_fixed_point(surf, fixed, x, tol);
    if (near && near == current) {
      ++streak;
    } else {
      current = near;
      streak = near ? 1 : 0;
    }
    if (streak >= 10) return {*current, it};
  }
  throw NumericalError("dynamics", "orbit did not converge to a fixed point within " +
                                       std::to_string(max_iter) +
                                       " iterations (map not Morse-Smale or tolerance too small)");
}

}  // namespace detail

/// Fixed points x_+ and x_- that the forward and backward orbits of x approach.
inline OrbitLimit limit_points(const DiffeoModel& g, const FixedPointSet& fixed, const SurfacePoint& x0,
                               double tol = 1e-9, int max_iter = 100000) {
  const SurfacePoint x = g.surface().canonicalize(x0);
  if (auto self = detail::nearest_fixed_point(g.surface(), fixed, x, tol)) {
    return {*self, *self, 0, 0};
  }
  OrbitLimit lim;
  std::tie(lim.plus, lim.plus_iterations) = detail::follow_orbit(g, fixed, x, 1, tol, max_iter);
  std::tie(lim.minus, lim.minus_iterations) = detail::follow_orbit(g, fixed, x, -1, tol, max_iter);
  return lim;
}

}  // namespace msop
