#pragma once

// Constant-coefficient operators sum_k a_k T^k: Laurent polynomials, their
// roots, the annulus K_s = {r_s <= |z| <= R_s} built from fixed-point data,
// and the exact set of exponents s for which no root lies in K_s.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "msop/dynamics.hpp"
#include "msop/envelope.hpp"
#include "msop/error.hpp"
#include "msop/interval_set.hpp"

namespace msop {

using Complex = std::complex<double>;

class LaurentPolynomial {
 public:
  LaurentPolynomial() = default;

  /// Coefficients a_k for k = k_min, k_min+1, ...; trimmed on construction.
  LaurentPolynomial(int k_min, std::vector<Complex> coeffs) : k_min_(k_min), coeffs_(std::move(coeffs)) {
    trim();
  }

  static LaurentPolynomial from_map(const std::map<int, Complex>& terms) {
    if (terms.empty()) return {};
    const int lo = terms.begin()->first;
    const int hi = terms.rbegin()->first;
    std::vector<Complex> c(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (const auto& [k, a] : terms) c[static_cast<std::size_t>(k - lo)] += a;
    return LaurentPolynomial(lo, std::move(c));
  }

  bool is_zero() const { return coeffs_.empty(); }
  int k_min() const { return k_min_; }
  int k_max() const { return k_min_ + static_cast<int>(coeffs_.size()) - 1; }
  int degree_span() const { return is_zero() ? 0 : k_max() - k_min(); }
  const std::vector<Complex>& coefficients() const { return coeffs_; }

  Complex coefficient(int k) const {
    if (is_zero() || k < k_min() || k > k_max()) return 0.0;
    return coeffs_[static_cast<std::size_t>(k - k_min_)];
  }

  double max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  Complex operator()(Complex z) const {
    return std::pow(z, k_min_) * shifted(z);
  }

  /// q(z) = z^{-k_min} p(z), an ordinary polynomial with q(0) != 0.
  Complex shifted(Complex z) const {
    Complex acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  Complex shifted_derivative(Complex z) const {
    Complex acc = 0.0;
    const std::size_t n = coeffs_.size();
    for (std::size_t j = n; j-- > 1;) acc = acc * z + static_cast<double>(j) * coeffs_[j];
    return acc;
  }

  LaurentPolynomial scaled(Complex c) const {
    auto cc = coeffs_;
    for (auto& a : cc) a *= c;
    return LaurentPolynomial(k_min_, std::move(cc));
  }

 private:
  void trim() {
    constexpr double eps = 1e-300;
    std::size_t lo = 0, hi = coeffs_.size();
    while (lo < hi && std::abs(coeffs_[lo]) < eps) ++lo;
    while (hi > lo && std::abs(coeffs_[hi - 1]) < eps) --hi;
    coeffs_ = std::vector<Complex>(coeffs_.begin() + static_cast<std::ptrdiff_t>(lo),
                                   coeffs_.begin() + static_cast<std::ptrdiff_t>(hi));
    k_min_ = coeffs_.empty() ? 0 : k_min_ + static_cast<int>(lo);
  }

  int k_min_ = 0;
  std::vector<Complex> coeffs_;
};

/// Parses "k:re[,im]" pairs separated by commas, e.g. "0:1,1:-0.25" or "-1:1,0.5,1:2".
inline LaurentPolynomial parse_coefficients(const std::string& text) {
  std::map<int, Complex> terms;
  std::size_t pos = 0;
  int last_k = 0;
  bool have_last = false;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (tok.empty()) throw ConfigError("coefficients: empty token in '" + text + "'");
    try {
      const std::size_t colon = tok.find(':');
      if (colon != std::string::npos) {
        std::size_t used = 0;
        last_k = std::stoi(tok.substr(0, colon), &used);
        if (used != colon) throw ConfigError("bad index");
        const std::string re = tok.substr(colon + 1);
        const double v = std::stod(re, &used);
        if (used != re.size()) throw ConfigError("bad value");
        if (terms.count(last_k)) throw ConfigError("duplicate index " + std::to_string(last_k));
        terms[last_k] = Complex(v, 0.0);
        have_last = true;
      } else {
        if (!have_last) throw ConfigError("imaginary part without index");
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw ConfigError("bad value");
        terms[last_k].imag(v);
        have_last = false;
      }
    } catch (const ConfigError& e) {
      throw ConfigError("coefficients: " + std::string(e.what()) + " in token '" + tok + "'");
    } catch (const std::exception&) {
      throw ConfigError("coefficients: cannot parse token '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return LaurentPolynomial::from_map(terms);
}

struct RootOptions {
  int max_iterations = 500;
  double tolerance = 1e-13;
};

/// All zeroes of p in C \ {0}, with multiplicity (Durand-Kerner plus one
/// Newton polish per root).
inline std::vector<Complex> roots(const LaurentPolynomial& p, const RootOptions& opt = {}) {
  if (p.is_zero() || p.degree_span() == 0) return {};
  const auto& a = p.coefficients();
  const std::size_t deg = a.size() - 1;
  std::vector<Complex> c(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) c[j] = a[j] / a[deg];
  auto monic = [&](Complex z) {
    Complex acc = 0.0;
    for (std::size_t j = c.size(); j-- > 0;) acc = acc * z + c[j];
    return acc;
  };

  const double radius = std::pow(std::abs(c[0]), 1.0 / static_cast<double>(deg));
  std::vector<Complex> z(deg);
  for (std::size_t j = 0; j < deg; ++j) {
    z[j] = std::polar(radius, 2.0 * std::numbers::pi * static_cast<double>(j) / deg + 0.4);
  }
  bool converged = false;
  for (int it = 0; it < opt.max_iterations && !converged; ++it) {
    converged = true;
    for (std::size_t j = 0; j < deg; ++j) {
      Complex denom = 1.0;
      for (std::size_t k = 0; k < deg; ++k) {
        if (k != j) denom *= z[j] - z[k];
      }
      if (denom == Complex(0.0)) denom = 1e-300;
      const Complex delta = monic(z[j]) / denom;
      z[j] -= delta;
      if (std::abs(delta) >= opt.tolerance * std::max(1.0, std::abs(z[j]))) converged = false;
    }
  }
  for (auto& r : z) {
    const Complex d = p.shifted_derivative(r);
    if (d == Complex(0.0)) continue;
    const Complex cand = r - p.shifted(r) / d;
    if (std::abs(p.shifted(cand)) < std::abs(p.shifted(r))) r = cand;
  }
  if (!converged) {
    // Multiple roots converge only linearly; accept when residuals are small.
    const double scale = p.max_abs_coefficient();
    std::string residuals;
    bool ok = true;
    for (const auto& r : z) {
      const double bound = 1e-9 * scale * std::pow(std::max(1.0, std::abs(r)), static_cast<double>(deg));
      const double res = std::abs(p.shifted(r));
      residuals += " " + std::to_string(res);
      if (!(res < bound)) ok = false;
    }
    if (!ok) throw NumericalError("laurent", "root finding did not converge; residuals:" + residuals);
  }
  std::sort(z.begin(), z.end(), [](Complex u, Complex v) {
    return std::abs(u) < std::abs(v) || (std::abs(u) == std::abs(v) && std::arg(u) < std::arg(v));
  });
  return z;
}

/// log of (det dg*|_x)^{1/2} lambda_j(x)^{-s} as a line in s.
struct LogRadiusLine {
  double intercept = 0.0;  // (1/2) log det
  double slope = 0.0;      // -log lambda_j
  std::size_t fixed_point = 0;
  int eigen_index = 1;  // 1: lambda_min, 2: lambda_max

  double operator()(double s) const { return intercept + slope * s; }
};

inline std::vector<LogRadiusLine> log_radius_lines(const std::vector<FixedPointRecord>& fps) {
  if (fps.empty()) throw Error("laurent: fixed-point list is empty");
  std::vector<LogRadiusLine> out;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    const double b = 0.5 * std::log(fps[i].det_codifferential);
    out.push_back({b, -std::log(fps[i].lambda_min), i, 1});
    out.push_back({b, -std::log(fps[i].lambda_max), i, 2});
  }
  return out;
}

inline std::vector<Line> as_lines(const std::vector<LogRadiusLine>& lines) {
  std::vector<Line> out;
  for (std::size_t i = 0; i < lines.size(); ++i) out.push_back({lines[i].intercept, lines[i].slope, i});
  return out;
}

struct AnnulusCriterion {
  double s = 0.0;
  double r = 0.0;
  double R = 0.0;
  LogRadiusLine inner;  // attains r_s
  LogRadiusLine outer;  // attains R_s
};

inline AnnulusCriterion annulus(const std::vector<FixedPointRecord>& fps, double s) {
  const auto lines = log_radius_lines(fps);
  AnnulusCriterion a;
  a.s = s;
  const auto lo = std::min_element(lines.begin(), lines.end(), [s](const auto& p, const auto& q) { return p(s) < q(s); });
  const auto hi = std::max_element(lines.begin(), lines.end(), [s](const auto& p, const auto& q) { return p(s) < q(s); });
  a.inner = *lo;
  a.outer = *hi;
  a.r = std::exp((*lo)(s));
  a.R = std::exp((*hi)(s));
  return a;
}

struct InvertibilityDecision {
  bool invertible = false;
  std::optional<Complex> witness;  // a root inside K_s
};

inline constexpr double kRingBoundaryTolerance = 1e-12;

/// Invertible iff no root modulus lies in the closed ring [r_s, R_s].
inline InvertibilityDecision is_invertible_constcoef(const LaurentPolynomial& p, const std::vector<Complex>& rts,
                                                     const std::vector<FixedPointRecord>& fps, double s) {
  if (p.is_zero()) return {false, std::nullopt};
  const AnnulusCriterion a = annulus(fps, s);
  for (const auto& z : rts) {
    const double rho = std::abs(z);
    if (rho >= a.r - kRingBoundaryTolerance && rho <= a.R + kRingBoundaryTolerance) return {false, z};
  }
  return {true, std::nullopt};
}

inline InvertibilityDecision is_invertible_constcoef(const LaurentPolynomial& p,
                                                     const std::vector<FixedPointRecord>& fps, double s) {
  return is_invertible_constcoef(p, roots(p), fps, s);
}

/// Exact {s : no root modulus in [r_s, R_s]} via the envelopes of the log-radius lines.
inline SIntervalSet invertible_s_set(const LaurentPolynomial& p, const std::vector<Complex>& rts,
                                     const std::vector<FixedPointRecord>& fps) {
  if (p.is_zero()) return SIntervalSet::nothing();
  const auto lines = as_lines(log_radius_lines(fps));
  const PiecewiseLinear lower = lower_envelope(lines);
  const PiecewiseLinear upper = upper_envelope(lines);
  SIntervalSet result = SIntervalSet::everything();
  for (const auto& z : rts) {
    const double c = std::log(std::abs(z));
    const SIntervalSet escape = lower.superlevel(c).unite(upper.sublevel(c));
    result = result.intersect(escape);
  }
  return result;
}

inline SIntervalSet invertible_s_set(const LaurentPolynomial& p, const std::vector<FixedPointRecord>& fps) {
  return invertible_s_set(p, roots(p), fps);
}

}  // namespace msop
