#pragma once

// Square band matrices and the smallest singular value of a band matrix.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "msop/error.hpp"

namespace msop {

/// n x n matrix with kl sub-diagonals and ku super-diagonals, stored by rows.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(std::size_t n, int kl, int ku)
      : n_(n), kl_(kl), ku_(ku), data_(n * static_cast<std::size_t>(kl + ku + 1), 0.0) {
    if (kl < 0 || ku < 0) throw Error("banded: bandwidths must be nonnegative");
  }

  std::size_t size() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }

  bool in_band(std::size_t i, std::size_t j) const {
    const auto d = static_cast<long>(j) - static_cast<long>(i);
    return d >= -kl_ && d <= ku_;
  }

  double operator()(std::size_t i, std::size_t j) const {
    return in_band(i, j) ? data_[slot(i, j)] : 0.0;
  }

  double& at(std::size_t i, std::size_t j) {
    if (i >= n_ || j >= n_ || !in_band(i, j)) throw Error("banded: index outside band");
    return data_[slot(i, j)];
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j0 = i >= static_cast<std::size_t>(kl_) ? i - kl_ : 0;
      const std::size_t j1 = std::min(n_ - 1, i + ku_);
      for (std::size_t j = j0; j <= j1; ++j) y[i] += (*this)(i, j) * x[j];
    }
    return y;
  }

  friend bool operator==(const BandMatrix&, const BandMatrix&) = default;

 private:
  std::size_t slot(std::size_t i, std::size_t j) const {
    return i * static_cast<std::size_t>(kl_ + ku_ + 1) +
           static_cast<std::size_t>(static_cast<long>(j) - static_cast<long>(i) + kl_);
  }

  std::size_t n_ = 0;
  int kl_ = 0;
  int ku_ = 0;
  std::vector<double> data_;
};

/// LU factorization with partial pivoting of a band matrix. Row windows
/// cover columns [i - kl, i + kl + ku] to absorb pivoting fill-in.
class BandLU {
 public:
  explicit BandLU(const BandMatrix& a) : n_(a.size()), kl_(a.lower()), ku_(a.upper()) {
    width_ = static_cast<std::size_t>(2 * kl_ + ku_ + 1);
    w_.assign(n_ * width_, 0.0);
    piv_.assign(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      const long j0 = std::max(0L, static_cast<long>(i) - kl_);
      const long j1 = std::min(static_cast<long>(n_) - 1, static_cast<long>(i) + ku_);
      for (long j = j0; j <= j1; ++j) ref(i, static_cast<std::size_t>(j)) = a(i, static_cast<std::size_t>(j));
    }
    for (std::size_t j = 0; j < n_; ++j) {
      const std::size_t last = std::min(n_ - 1, j + kl_);
      std::size_t p = j;
      double best = std::abs(get(j, j));
      for (std::size_t i = j + 1; i <= last; ++i) {
        if (std::abs(get(i, j)) > best) {
          best = std::abs(get(i, j));
          p = i;
        }
      }
      piv_[j] = p;
      const std::size_t cend = std::min(n_ - 1, j + kl_ + ku_);
      if (p != j) {
        for (std::size_t c = j; c <= cend; ++c) std::swap(ref(j, c), ref(p, c));
      }
      const double pivot = get(j, j);
      if (pivot == 0.0) {
        singular_ = true;
        continue;
      }
      for (std::size_t i = j + 1; i <= last; ++i) {
        const double m = get(i, j) / pivot;
        ref(i, j) = m;
        if (m == 0.0) continue;
        for (std::size_t c = j + 1; c <= cend; ++c) ref(i, c) -= m * get(j, c);
      }
    }
  }

  bool singular() const { return singular_; }

  /// Solves A x = b in place.
  void solve(std::vector<double>& b) const {
    for (std::size_t j = 0; j < n_; ++j) {
      std::swap(b[j], b[piv_[j]]);
      const std::size_t last = std::min(n_ - 1, j + kl_);
      for (std::size_t i = j + 1; i <= last; ++i) b[i] -= get(i, j) * b[j];
    }
    for (std::size_t j = n_; j-- > 0;) {
      const std::size_t cend = std::min(n_ - 1, j + kl_ + ku_);
      double acc = b[j];
      for (std::size_t c = j + 1; c <= cend; ++c) acc -= get(j, c) * b[c];
      b[j] = acc / get(j, j);
    }
  }

  /// Solves A^T x = b in place.
  void solve_transpose(std::vector<double>& b) const {
    const std::size_t span = static_cast<std::size_t>(kl_ + ku_);
    for (std::size_t j = 0; j < n_; ++j) {
      double acc = b[j];
      const std::size_t c0 = j > span ? j - span : 0;
      for (std::size_t c = c0; c < j; ++c) acc -= get(c, j) * b[c];
      b[j] = acc / get(j, j);
    }
    for (std::size_t j = n_; j-- > 0;) {
      const std::size_t last = std::min(n_ - 1, j + kl_);
      for (std::size_t i = j + 1; i <= last; ++i) b[j] -= get(i, j) * b[i];
      std::swap(b[j], b[piv_[j]]);
    }
  }

 private:
  double& ref(std::size_t i, std::size_t j) {
    return w_[i * width_ + static_cast<std::size_t>(static_cast<long>(j) - static_cast<long>(i) + kl_)];
  }
  double get(std::size_t i, std::size_t j) const {
    return w_[i * width_ + static_cast<std::size_t>(static_cast<long>(j) - static_cast<long>(i) + kl_)];
  }

  std::size_t n_;
  int kl_;
  int ku_;
  std::size_t width_ = 0;
  std::vector<double> w_;
  std::vector<std::size_t> piv_;
  bool singular_ = false;
};

/// Symmetric positive semidefinite band matrix A^T A, stored as the lower
/// band of half-bandwidth kl + ku.
class GramBand {
 public:
  explicit GramBand(const BandMatrix& a) : n_(a.size()), hb_(a.lower() + a.upper()) {
    lower_.assign(n_ * static_cast<std::size_t>(hb_ + 1), 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j0 = i >= static_cast<std::size_t>(hb_) ? i - hb_ : 0;
      for (std::size_t j = j0; j <= i; ++j) {
        // (A^T A)_{ij} = sum_r a_{ri} a_{rj}, rows r where both are in band.
        const long r0 = std::max(static_cast<long>(i) - a.upper(), 0L);
        const long r1 = std::min(static_cast<long>(j) + a.lower(), static_cast<long>(n_) - 1);
        double acc = 0.0;
        for (long r = r0; r <= r1; ++r) acc += a(static_cast<std::size_t>(r), i) * a(static_cast<std::size_t>(r), j);
        lower_[i * (hb_ + 1) + (j + hb_ - i)] = acc;
      }
    }
  }

  /// Cholesky of (A^T A - shift I); false when it is not numerically positive definite.
  bool positive_definite_with_shift(double shift) const {
    std::vector<double> l = lower_;
    const std::size_t w = static_cast<std::size_t>(hb_ + 1);
    auto el = [&](std::size_t i, std::size_t j) -> double& { return l[i * w + (j + hb_ - i)]; };
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j0 = i >= static_cast<std::size_t>(hb_) ? i - hb_ : 0;
      for (std::size_t j = j0; j <= i; ++j) {
        double acc = el(i, j);
        if (i == j) acc -= shift;
        const std::size_t k0 = std::max(j0, j >= static_cast<std::size_t>(hb_) ? j - hb_ : 0);
        for (std::size_t k = k0; k < j; ++k) acc -= el(i, k) * el(j, k);
        if (i == j) {
          if (!(acc > 0.0)) return false;
          el(i, i) = std::sqrt(acc);
        } else {
          el(i, j) = acc / el(j, j);
        }
      }
    }
    return true;
  }

 private:
  std::size_t n_;
  int hb_;
  std::vector<double> lower_;
};

struct SingularValueEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string method;  // "inverse_iteration", "shifted_cholesky", "singular"
};

struct SingularValueOptions {
  int max_iterations = 200;
  double tolerance = 1e-10;
};

/// Smallest singular value: inverse power iteration on (A^T A)^{-1} through
/// a pivoted band LU of A, falling back to bisection on the shift for which
/// the banded Cholesky of A^T A - shift I stops existing.
inline SingularValueEstimate min_singular_value(const BandMatrix& a, const SingularValueOptions& opt = {}) {
  const std::size_t n = a.size();
  if (n == 0) throw Error("banded: empty matrix");
  SingularValueEstimate est;
  const BandLU lu(a);
  if (lu.singular()) return {0.0, true, 0, "singular"};

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  auto normalize = [](std::vector<double>& v) {
    double s = 0.0;
    for (double t : v) s += t * t;
    const double nrm = std::sqrt(s);
    for (double& t : v) t /= nrm;
    return nrm;
  };
  normalize(x);
  double sigma = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    lu.solve_transpose(x);  // z = A^{-T} x, |z|^2 = x^T (A^T A)^{-1} x
    const double zn = normalize(x);
    if (!std::isfinite(zn)) return {0.0, true, it, "singular"};
    lu.solve(x);
    const double yn = normalize(x);
    if (!std::isfinite(yn)) return {0.0, true, it, "singular"};
    const double next = 1.0 / zn;
    est.iterations = it;
    if (std::abs(next - sigma) <= opt.tolerance * next) {
      return {next, true, it, "inverse_iteration"};
    }
    sigma = next;
  }

  // Clustered spectra stall the power iteration; sigma is an upper bound.
  const GramBand gram(a);
  double lo = 0.0;
  double hi = sigma * sigma;
  if (!gram.positive_definite_with_shift(0.0)) return {0.0, true, est.iterations, "shifted_cholesky"};
  int bis = 0;
  while (hi - lo > opt.tolerance * hi && bis < 200) {
    const double mid = 0.5 * (lo + hi);
    if (gram.positive_definite_with_shift(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++bis;
  }
  return {std::sqrt(0.5 * (lo + hi)), true, est.iterations + bis, "shifted_cholesky"};
}

}  // namespace msop
