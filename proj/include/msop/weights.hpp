#pragma once

// Weight sequences n -> mu_{x,xi,s}(n) on the orbit of a cotangent point,
// their exponential rates, and the exceptional direction fields.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "msop/dynamics.hpp"
#include "msop/error.hpp"
#include "msop/geometry.hpp"

namespace msop {

/// Realizations of the pulled-back weight. T1_PINNED is the one whose rates
/// reproduce the fixed-point asymptotics; the others are kept for comparison.
enum class WeightConvention { t1_pinned, func_pullback, density_forward };

inline const char* to_string(WeightConvention c) {
  switch (c) {
    case WeightConvention::t1_pinned: return "T1_PINNED";
    case WeightConvention::func_pullback: return "FUNC_PULLBACK";
    case WeightConvention::density_forward: return "DENSITY_FORWARD";
  }
  return "?";
}

inline WeightConvention parse_convention(const std::string& name) {
  if (name == "T1_PINNED") return WeightConvention::t1_pinned;
  if (name == "FUNC_PULLBACK") return WeightConvention::func_pullback;
  if (name == "DENSITY_FORWARD") return WeightConvention::density_forward;
  throw ConfigError("unknown weight convention '" + name + "'");
}

/// log W(n) = offset(n) + s * slope(n) over an orbit window. The profile is
/// built from per-step increments so that consumers needing only ratios
/// W(m)/W(n) never touch the absolute level.
class WeightProfile {
 public:
  WeightProfile() = default;

  WeightProfile(const Surface& surf, const Orbit& orbit, const ChartVector& xi, WeightConvention conv)
      : n_min_(orbit.n_min()), n_max_(orbit.n_max()) {
    if (xi.variance != Variance::covector) throw Error("weights: xi must be a covector");
    const std::size_t steps = static_cast<std::size_t>(n_max_ - n_min_);
    d_offset_.assign(steps, 0.0);
    d_slope_.assign(steps, 0.0);
    base_slope_ = std::log(surf.cometric_norm2(xi));

    const bool tangent_law = conv == WeightConvention::t1_pinned;
    // Unit direction in the chart of the current point; length kept in the log.
    const Vec2 start = tangent_law ? surf.raise(xi).components : xi.components;

    auto log_norm2 = [&](const SurfacePoint& p, const Vec2& unit_dir) {
      ChartVector w{p, unit_dir, tangent_law ? Variance::tangent : Variance::covector};
      return std::log(tangent_law ? surf.metric_norm2(w) : surf.cometric_norm2(w));
    };
    auto det_term = [&](const Mat2& dg) {
      switch (conv) {
        case WeightConvention::t1_pinned: return -std::log(std::abs(dg.det()));
        case WeightConvention::func_pullback: return 0.0;
        case WeightConvention::density_forward: return std::log(std::abs(dg.det()));
      }
      return 0.0;
    };
    auto push = [&](const Mat2& dg, const Mat2& dg_inv, const Vec2& u, bool forward) {
      // Forward transport of the vector/covector by dg (or its inverse-transpose).
      if (forward) return tangent_law ? dg * u : dg_inv.transpose() * u;
      return tangent_law ? dg_inv * u : dg.transpose() * u;
    };

    Vec2 u = normalized(start);
    double len = 0.0;  // log Euclidean length of the propagated vector
    for (int n = 0; n < n_max_; ++n) {
      const SurfacePoint& p0 = orbit.point(n);
      const SurfacePoint& p1 = orbit.point(n + 1);
      const double before = log_norm2(p0, u) + 2.0 * len;
      const Vec2 w = push(orbit.dg(n), orbit.dg_inverse(n), u, true);
      len += std::log(norm(w));
      u = normalized(w);
      const double after = log_norm2(p1, u) + 2.0 * len;
      d_slope_[idx(n)] = after - before;
      d_offset_[idx(n)] = det_term(orbit.dg(n)) + std::log(surf.area_density(p1)) -
                          std::log(surf.area_density(p0));
    }
    u = normalized(start);
    len = 0.0;
    for (int n = -1; n >= n_min_; --n) {
      const SurfacePoint& p1 = orbit.point(n + 1);
      const SurfacePoint& p0 = orbit.point(n);
      const double after = log_norm2(p1, u) + 2.0 * len;
      const Vec2 w = push(orbit.dg(n), orbit.dg_inverse(n), u, false);
      len += std::log(norm(w));
      u = normalized(w);
      const double before = log_norm2(p0, u) + 2.0 * len;
      d_slope_[idx(n)] = after - before;
      d_offset_[idx(n)] = det_term(orbit.dg(n)) + std::log(surf.area_density(p1)) -
                          std::log(surf.area_density(p0));
    }
    cumulate();
  }

  int n_min() const { return n_min_; }
  int n_max() const { return n_max_; }

  /// log W(n+1) - log W(n).
  double log_increment(int n, double s) const { return d_offset_.at(idx(n)) + s * d_slope_.at(idx(n)); }

  double log_weight(int n, double s) const {
    const std::size_t i = static_cast<std::size_t>(n - n_min_);
    return offset_.at(i) + s * slope_.at(i);
  }

  /// Shifts the absolute level (multiplies every weight by exp(delta)).
  void rescale(double log_delta) {
    base_offset_ += log_delta;
    cumulate();
  }

 private:
  std::size_t idx(int n) const {
    if (n < n_min_ || n >= n_max_) throw Error("weights: step index outside profile");
    return static_cast<std::size_t>(n - n_min_);
  }

  void cumulate() {
    const std::size_t count = static_cast<std::size_t>(n_max_ - n_min_ + 1);
    offset_.assign(count, 0.0);
    slope_.assign(count, 0.0);
    const std::size_t zero = static_cast<std::size_t>(-n_min_);
    offset_[zero] = base_offset_;
    slope_[zero] = base_slope_;
    for (std::size_t i = zero; i + 1 < count; ++i) {
      offset_[i + 1] = offset_[i] + d_offset_[i];
      slope_[i + 1] = slope_[i] + d_slope_[i];
    }
    for (std::size_t i = zero; i > 0; --i) {
      offset_[i - 1] = offset_[i] - d_offset_[i - 1];
      slope_[i - 1] = slope_[i] - d_slope_[i - 1];
    }
  }

  int n_min_ = 0;
  int n_max_ = 0;
  double base_offset_ = 0.0;
  double base_slope_ = 0.0;
  std::vector<double> d_offset_, d_slope_;
  std::vector<double> offset_, slope_;
};

/// log mu_{x,xi,s}(n) for a single n.
inline double log_weight(const DiffeoModel& g, const SurfacePoint& x, const Vec2& xi, double s, int n,
                         WeightConvention conv = WeightConvention::t1_pinned) {
  if (std::abs(n) > 10000) throw Error("weights: |n| limited to 10^4");
  const SurfacePoint base = g.surface().canonicalize(x);
  const Orbit orbit(g, base, std::min(n, 0), std::max(n, 0));
  const WeightProfile prof(g.surface(), orbit, make_covector(base, xi), conv);
  return prof.log_weight(n, s);
}

inline double weight(const DiffeoModel& g, const SurfacePoint& x, const Vec2& xi, double s, int n,
                     WeightConvention conv = WeightConvention::t1_pinned) {
  const double lw = log_weight(g, x, xi, s, n, conv);
  const double w = std::exp(lw);
  if (!std::isfinite(w) || w == 0.0) {
    throw NumericalError("weights", "weight not representable in double precision; use log_weight");
  }
  return w;
}

struct RateFit {
  double log_rate = 0.0;  // least-squares slope of log W(n) in n
  double residual_rms = 0.0;
  bool reliable = true;
};

/// Least-squares slope of y over consecutive integer abscissae [n0, n0+len).
inline RateFit fit_log_rate(const std::vector<double>& y, int n0) {
  const std::size_t m = y.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += n0 + static_cast<double>(i);
    sy += y[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = n0 + static_cast<double>(i) - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
  }
  RateFit f;
  f.log_rate = sxy / sxx;
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - (my + f.log_rate * (n0 + static_cast<double>(i) - mx));
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / m);
  f.reliable = f.residual_rms <= 0.1;
  return f;
}

struct WeightSeries {
  SurfacePoint x;
  Vec2 xi;
  double s = 0.0;
  WeightConvention convention = WeightConvention::t1_pinned;
  int n_min = 0;
  int n_max = 0;
  std::vector<double> log_w;  // index n - n_min
  RateFit plus;               // window [n_max - 30, n_max]
  RateFit minus;              // window [n_min, n_min + 30]

  double log_weight(int n) const { return log_w.at(static_cast<std::size_t>(n - n_min)); }
};

inline constexpr int kRateWindow = 30;

inline WeightSeries series_from_profile(const WeightProfile& prof, const SurfacePoint& x, const Vec2& xi,
                                        double s, WeightConvention conv) {
  WeightSeries ws;
  ws.x = x;
  ws.xi = xi;
  ws.s = s;
  ws.convention = conv;
  ws.n_min = prof.n_min();
  ws.n_max = prof.n_max();
  for (int n = ws.n_min; n <= ws.n_max; ++n) ws.log_w.push_back(prof.log_weight(n, s));
  if (ws.n_max >= kRateWindow) {
    std::vector<double> tail(ws.log_w.end() - (kRateWindow + 1), ws.log_w.end());
    ws.plus = fit_log_rate(tail, ws.n_max - kRateWindow);
  }
  if (ws.n_min <= -kRateWindow) {
    std::vector<double> head(ws.log_w.begin(), ws.log_w.begin() + (kRateWindow + 1));
    ws.minus = fit_log_rate(head, ws.n_min);
  }
  return ws;
}

/// Sampled weights for n in [n_min, n_max] with fitted forward and backward log-rates.
inline WeightSeries weight_series(const DiffeoModel& g, const SurfacePoint& x, const Vec2& xi, double s,
                                  int n_min, int n_max, WeightConvention conv = WeightConvention::t1_pinned) {
  if (n_min < -10000 || n_max > 10000 || n_min > 0 || n_max < 0) {
    throw Error("weights: n range must lie within [-10^4, 10^4] and contain 0");
  }
  const SurfacePoint base = g.surface().canonicalize(x);
  const Orbit orbit(g, base, n_min, n_max);
  const WeightProfile prof(g.surface(), orbit, make_covector(base, xi), conv);
  return series_from_profile(prof, base, xi, s, conv);
}

/// Rates det(dg*)/lambda^{2s} at the two ends, generic and exceptional branches.
struct PredictedRates {
  double plus_generic = 0.0;      // lambda_min at x_+
  double plus_exceptional = 0.0;  // lambda_max at x_+
  double minus_generic = 0.0;     // lambda_max at x_-
  double minus_exceptional = 0.0; // lambda_min at x_-
};

inline double rate_value(double det, double lambda, double s) {
  return std::abs(det / std::pow(lambda, 2.0 * s));
}

inline PredictedRates predicted_rates(const FixedPointRecord& plus, const FixedPointRecord& minus, double s) {
  return {rate_value(plus.det_codifferential, plus.lambda_min, s),
          rate_value(plus.det_codifferential, plus.lambda_max, s),
          rate_value(minus.det_codifferential, minus.lambda_max, s),
          rate_value(minus.det_codifferential, minus.lambda_min, s)};
}

enum class OrbitEnd { plus, minus };

struct InvariantDirection {
  SurfacePoint base;
  OrbitEnd end = OrbitEnd::plus;
  Vec2 direction;  // unit tangent vector in the chart of base
  int iterations = 0;
  double last_angle_change = 0.0;
};

/// E_{+,max}(x) (end plus) or E_{-,min}(x) (end minus): the tangent line whose
/// image under dg^n follows the exceptional rate. Computed by pulling back the
/// fixed point's strong eigendirection along longer and longer orbit pieces.
inline InvariantDirection invariant_direction(const DiffeoModel& g, const FixedPointSet& fixed,
                                              const SurfacePoint& x0, OrbitEnd end, int max_n = 500,
                                              double angle_tol = 1e-8) {
  const Surface& surf = g.surface();
  const SurfacePoint x = surf.canonicalize(x0);
  const OrbitLimit lim = limit_points(g, fixed, x);
  const FixedPointRecord& fp = fixed.points.at(end == OrbitEnd::plus ? lim.plus : lim.minus);
  // Strongest contraction of dg (forward end) or of dg^{-1} (backward end).
  const Vec2 e = end == OrbitEnd::plus ? fp.direction1 : fp.direction2;
  const int dir = end == OrbitEnd::plus ? 1 : -1;

  InvariantDirection out;
  out.base = x;
  out.end = end;
  Mat2 pull = Mat2::identity();  // (dg^{dir*N}(x))^{-1}, rescaled
  SurfacePoint p = x;
  std::optional<Vec2> prev;
  int small_changes = 0;
  for (int n = 1; n <= max_n; ++n) {
    const MapStep st = g.step(p, dir, true);
    pull = pull * st.jacobian.inverse();
    pull = (1.0 / pull.max_abs()) * pull;
    p = st.image;
    Vec2 e_here = e;
    if (p.chart != fp.point.chart) e_here = surf.transition_jacobian(fp.point, p.chart) * e;
    const Vec2 v = normalized(pull * e_here);
    if (prev) {
      out.last_angle_change = line_angle(v, *prev);
      small_changes = out.last_angle_change < angle_tol ? small_changes + 1 : 0;
    }
    prev = v;
    out.direction = v;
    out.iterations = n;
    if (small_changes >= 3) {
      if (out.direction.x < 0.0 || (out.direction.x == 0.0 && out.direction.y < 0.0)) {
        out.direction = -out.direction;
      }
      return out;
    }
  }
  throw NumericalError("weights", "invariant direction did not converge within " + std::to_string(max_n) +
                                      " steps");
}

}  // namespace msop
