#pragma once

// Fixed-size 2-vectors and 2x2 matrices for chart-level computations.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>

namespace msop {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr double operator[](int i) const { return i == 0 ? x : y; }
  constexpr double& operator[](int i) { return i == 0 ? x : y; }

  constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
constexpr double norm2(const Vec2& a) { return dot(a, a); }

inline Vec2 normalized(const Vec2& a) {
  const double n = norm(a);
  return {a.x / n, a.y / n};
}

/// Angle in [0, pi/2] between the lines spanned by a and b.
inline double line_angle(const Vec2& a, const Vec2& b) {
  const double c = std::abs(dot(a, b)) / (norm(a) * norm(b));
  const double s = std::abs(a.x * b.y - a.y * b.x) / (norm(a) * norm(b));
  return std::atan2(s, c);
}

/// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 diag(double p, double q) { return {p, 0.0, 0.0, q}; }

  constexpr double operator()(int i, int j) const {
    return i == 0 ? (j == 0 ? a : b) : (j == 0 ? c : d);
  }
  constexpr double det() const { return a * d - b * c; }
  constexpr double trace() const { return a + d; }
  constexpr Mat2 transpose() const { return {a, c, b, d}; }
  Mat2 inverse() const {
    const double k = 1.0 / det();
    return {d * k, -b * k, -c * k, a * k};
  }
  double frobenius() const { return std::sqrt(a * a + b * b + c * c + d * d); }
  double max_abs() const {
    return std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
  }
};

constexpr Mat2 operator*(const Mat2& m, const Mat2& n) {
  return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
          m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
}
constexpr Vec2 operator*(const Mat2& m, const Vec2& v) {
  return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
}
constexpr Mat2 operator*(double s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }
constexpr Mat2 operator+(const Mat2& m, const Mat2& n) {
  return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d};
}
constexpr Mat2 operator-(const Mat2& m, const Mat2& n) {
  return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d};
}

/// 2-norm condition number via the singular values of a 2x2 matrix.
inline double condition_number(const Mat2& m) {
  const double f2 = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  const double dt = std::abs(m.det());
  const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * dt * dt));
  const double smax = std::sqrt(0.5 * (f2 + disc));
  if (dt == 0.0) return std::numeric_limits<double>::infinity();
  const double smin = dt / smax;
  return smax / smin;
}

struct EigenPair2 {
  std::complex<double> first;
  std::complex<double> second;
  bool real = true;
};

/// Eigenvalues of a 2x2 matrix; for real pairs first <= second.
inline EigenPair2 eigenvalues(const Mat2& m) {
  const double half_tr = 0.5 * m.trace();
  const double disc = half_tr * half_tr - m.det();
  if (disc >= 0.0) {
    const double r = std::sqrt(disc);
    // Avoid cancellation: compute the larger-magnitude root directly.
    const double big = half_tr >= 0.0 ? half_tr + r : half_tr - r;
    const double small = big != 0.0 ? m.det() / big : 0.0;
    return {std::min(big, small), std::max(big, small), true};
  }
  const double im = std::sqrt(-disc);
  return {{half_tr, -im}, {half_tr, im}, false};
}

/// Unit eigenvector for a real eigenvalue.
inline Vec2 eigenvector(const Mat2& m, double lambda) {
  // Rows of (m - lambda I) are orthogonal to the eigenvector; use the larger row.
  const Vec2 r0{m.a - lambda, m.b};
  const Vec2 r1{m.c, m.d - lambda};
  const Vec2 r = norm2(r0) >= norm2(r1) ? r0 : r1;
  if (norm2(r) == 0.0) return {1.0, 0.0};
  Vec2 v{-r.y, r.x};
  v = normalized(v);
  if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) v = -v;
  return v;
}

}  // namespace msop
