#pragma once

// Trajectory symbols of operators sum_k D_k T^k of order zero: the family of
// difference operators w(n) -> sum_k sigma(D_k)(dg^n(x,xi)) w(n+k) on the
// weighted sequence space of the orbit, its finite sections, limit
// operators at the two ends of the orbit, and the s-dependence probe.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msop/banded.hpp"
#include "msop/dynamics.hpp"
#include "msop/error.hpp"
#include "msop/expr.hpp"
#include "msop/interval_set.hpp"
#include "msop/laurent.hpp"
#include "msop/weights.hpp"

namespace msop {

/// Operator given by the symbols of its coefficients, one expression per
/// shift power k over (x1, x2, xi1, xi2) in chart coordinates.
class OperatorSpec {
 public:
  static const std::vector<std::string>& variables() {
    static const std::vector<std::string> vars{"x1", "x2", "xi1", "xi2"};
    return vars;
  }

  OperatorSpec() = default;

  explicit OperatorSpec(const std::map<int, std::string>& terms, int order = 0) {
    if (order != 0) {
      throw ConfigError("operator order must be 0; compose with an order reduction first");
    }
    if (terms.empty()) throw ConfigError("operator needs at least one term");
    for (const auto& [k, text] : terms) {
      shifts_.push_back(k);
      symbols_.push_back(Expr::parse(text, variables()));
      sources_.push_back(text);
    }
  }

  const std::vector<int>& shifts() const { return shifts_; }
  const std::vector<Expr>& symbols() const { return symbols_; }
  const std::vector<std::string>& sources() const { return sources_; }
  std::size_t term_count() const { return shifts_.size(); }
  int k_min() const { return *std::min_element(shifts_.begin(), shifts_.end()); }
  int k_max() const { return *std::max_element(shifts_.begin(), shifts_.end()); }

  double evaluate(std::size_t term, const Vec2& x, const Vec2& xi) const {
    const std::array<double, 4> vals{x.x, x.y, xi.x, xi.y};
    return symbols_[term].eval(vals);
  }

  std::vector<double> evaluate_all(const Vec2& x, const Vec2& xi) const {
    std::vector<double> out(term_count());
    for (std::size_t t = 0; t < term_count(); ++t) out[t] = evaluate(t, x, xi);
    return out;
  }

  /// Laurent polynomial of the coefficients when every symbol is a constant.
  std::optional<LaurentPolynomial> constant_polynomial() const {
    std::map<int, Complex> terms;
    for (std::size_t t = 0; t < term_count(); ++t) {
      if (!symbols_[t].is_constant()) return std::nullopt;
      terms[shifts_[t]] += symbols_[t].eval(std::array<double, 4>{0, 0, 1, 0});
    }
    return LaurentPolynomial::from_map(terms);
  }

  /// Checks degree-0 homogeneity in xi on deterministic samples; throws on failure.
  void check_homogeneity(int samples = 64) const {
    std::mt19937_64 rng(12345);
    auto uni = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < samples; ++i) {
      const Vec2 x{uni(), uni()};
      const double phi = 2.0 * std::numbers::pi * uni();
      const Vec2 xi{std::cos(phi), std::sin(phi)};
      for (std::size_t t = 0; t < term_count(); ++t) {
        const double v = evaluate(t, x, xi);
        for (double scale : {2.0, 10.0}) {
          const double w = evaluate(t, x, xi * scale);
          if (std::abs(w - v) >= 1e-8) {
            throw ConfigError("operator term k=" + std::to_string(shifts_[t]) +
                              " is not homogeneous of degree 0 in (xi1, xi2)");
          }
        }
      }
    }
  }

 private:
  std::vector<int> shifts_;
  std::vector<Expr> symbols_;
  std::vector<std::string> sources_;
};

/// Orbit data of one cotangent point: weights, transported unit covectors
/// and the coefficient values sigma(D_k)(dg^n(x, xi)).
struct SymbolTrajectory {
  SurfacePoint x;
  Vec2 xi;
  Orbit orbit;
  WeightProfile weights;
  std::vector<int> shifts;
  std::vector<Vec2> unit_covectors;          // index n - n_min
  std::vector<std::vector<double>> coeffs;   // index n - n_min, then term

  int n_min() const { return orbit.n_min(); }
  int n_max() const { return orbit.n_max(); }
  const std::vector<double>& coefficients(int n) const { return coeffs.at(static_cast<std::size_t>(n - n_min())); }
  const Vec2& covector(int n) const { return unit_covectors.at(static_cast<std::size_t>(n - n_min())); }
};

inline SymbolTrajectory trace_symbol(const OperatorSpec& op, const DiffeoModel& g, const SurfacePoint& x0,
                                     const Vec2& xi, int n_min, int n_max,
                                     WeightConvention conv = WeightConvention::t1_pinned) {
  const Surface& surf = g.surface();
  SymbolTrajectory tr;
  tr.x = surf.canonicalize(x0);
  tr.xi = xi;
  tr.shifts = op.shifts();
  tr.orbit = Orbit(g, tr.x, n_min, n_max);
  const ChartVector cov = make_covector(tr.x, xi);
  tr.weights = WeightProfile(surf, tr.orbit, cov, conv);

  const std::size_t count = static_cast<std::size_t>(n_max - n_min + 1);
  tr.unit_covectors.resize(count);
  tr.coeffs.resize(count);
  auto unit = [&](const SurfacePoint& p, const Vec2& c) {
    return c * (1.0 / std::sqrt(surf.cometric_norm2({p, c, Variance::covector})));
  };
  const std::size_t zero = static_cast<std::size_t>(-n_min);
  tr.unit_covectors[zero] = unit(tr.x, xi);
  for (int n = 0; n < n_max; ++n) {
    const Vec2 next = tr.orbit.dg_inverse(n).transpose() * tr.unit_covectors[zero + n];
    tr.unit_covectors[zero + n + 1] = unit(tr.orbit.point(n + 1), next);
  }
  for (int n = -1; n >= n_min; --n) {
    const auto i = static_cast<std::size_t>(n - n_min);
    const Vec2 prev = tr.orbit.dg(n).transpose() * tr.unit_covectors[i + 1];
    tr.unit_covectors[i] = unit(tr.orbit.point(n), prev);
  }
  for (int n = n_min; n <= n_max; ++n) {
    const auto i = static_cast<std::size_t>(n - n_min);
    try {
      tr.coeffs[i] = op.evaluate_all(tr.orbit.point(n).coords, tr.unit_covectors[i]);
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " (symbol evaluation at n=" + std::to_string(n) + ")");
    }
  }
  return tr;
}

/// sigma(D_k)(dg^n(x, xi)) for n in [n_min, n_max].
inline std::vector<std::vector<double>> symbol_coefficients(const OperatorSpec& op, const DiffeoModel& g,
                                                            const SurfacePoint& x, const Vec2& xi, int n_min,
                                                            int n_max) {
  return trace_symbol(op, g, x, xi, n_min, n_max).coeffs;
}

struct FiniteSection {
  double s = 0.0;
  int N = 0;
  BandMatrix matrix;  // rows/cols n = -N..N at index n + N
};

/// Truncation to [-N, N] of the symbol acting on l^2(Z, mu), conjugated to the
/// flat sequence space: entry (m, m+k) = sigma_k(m) * sqrt(W(m+k) / W(m)).
inline FiniteSection build_finite_section(const SymbolTrajectory& tr, double s, int N) {
  if (N < 0 || N > 4096) throw Error("symbol: section half-size must lie in [0, 4096]");
  if (tr.n_min() > -N || tr.n_max() < N) throw Error("symbol: trajectory shorter than the section");
  const int kl = std::max(0, -*std::min_element(tr.shifts.begin(), tr.shifts.end()));
  const int ku = std::max(0, *std::max_element(tr.shifts.begin(), tr.shifts.end()));
  const std::size_t size = static_cast<std::size_t>(2 * N + 1);
  FiniteSection fs{s, N, BandMatrix(size, kl, ku)};
  for (int m = -N; m <= N; ++m) {
    const auto& c = tr.coefficients(m);
    for (std::size_t t = 0; t < tr.shifts.size(); ++t) {
      const int k = tr.shifts[t];
      const int col = m + k;
      if (col < -N || col > N) continue;
      double log_ratio = 0.0;
      if (k > 0) {
        for (int i = m; i < col; ++i) log_ratio += tr.weights.log_increment(i, s);
      } else {
        for (int i = col; i < m; ++i) log_ratio -= tr.weights.log_increment(i, s);
      }
      fs.matrix.at(static_cast<std::size_t>(m + N), static_cast<std::size_t>(col + N)) +=
          c[t] * std::exp(0.5 * log_ratio);
    }
  }
  return fs;
}

inline FiniteSection build_finite_section(const OperatorSpec& op, const DiffeoModel& g, const SurfacePoint& x,
                                          const Vec2& xi, double s, int N,
                                          WeightConvention conv = WeightConvention::t1_pinned) {
  return build_finite_section(trace_symbol(op, g, x, xi, -N, N, conv), s, N);
}

// ---------------------------------------------------------------------------
// Limit operators

struct LimitBranchCheck {
  std::string branch;  // "generic" or "exceptional"
  double rate = 0.0;   // theta
  double radius = 0.0; // sqrt(theta)
  double min_modulus = 0.0;
  bool pass = false;
};

struct LimitCheck {
  OrbitEnd end = OrbitEnd::plus;
  std::size_t fixed_point = 0;
  std::vector<double> coefficients;
  std::vector<LimitBranchCheck> branches;

  bool pass() const {
    return std::all_of(branches.begin(), branches.end(), [](const auto& b) { return b.pass; });
  }
};

inline constexpr int kCircleSamples = 4096;
inline constexpr double kLimitTolerance = 1e-8;

/// min over |z| = radius of |sum_k c_k z^k|, sampled at 4096 points.
inline double circle_minimum(const std::vector<int>& shifts, const std::vector<double>& c, double radius) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCircleSamples; ++i) {
    const Complex z = std::polar(radius, 2.0 * std::numbers::pi * i / kCircleSamples);
    Complex acc = 0.0;
    for (std::size_t t = 0; t < shifts.size(); ++t) acc += c[t] * std::pow(z, shifts[t]);
    best = std::min(best, std::abs(acc));
  }
  return best;
}

/// The constant-coefficient operator at one end of the orbit is invertible on
/// the exponentially weighted space of rate theta iff its polynomial has no
/// zero on |z| = sqrt(theta); both branches of the rate are checked.
inline LimitCheck limit_operator_check(const OperatorSpec& op, const DiffeoModel& g, const FixedPointSet& fixed,
                                       const SymbolTrajectory& tr, std::size_t fixed_index, OrbitEnd end,
                                       double s) {
  const Surface& surf = g.surface();
  const FixedPointRecord& fp = fixed.points.at(fixed_index);
  const int far = end == OrbitEnd::plus ? tr.n_max() : tr.n_min();
  const SurfacePoint& p_far = tr.orbit.point(far);
  Vec2 base = p_far.coords;
  try {
    base = surf.transition(fp.point, p_far.chart).coords;
  } catch (const PoleSingularityError&) {
  }
  LimitCheck out;
  out.end = end;
  out.fixed_point = fixed_index;
  out.coefficients = op.evaluate_all(base, tr.covector(far));
  const double det = fp.det_codifferential;
  const std::array<std::pair<const char*, double>, 2> lambdas =
      end == OrbitEnd::plus ? std::array<std::pair<const char*, double>, 2>{{{"generic", fp.lambda_min},
                                                                             {"exceptional", fp.lambda_max}}}
                            : std::array<std::pair<const char*, double>, 2>{{{"generic", fp.lambda_max},
                                                                             {"exceptional", fp.lambda_min}}};
  for (const auto& [name, lambda] : lambdas) {
    LimitBranchCheck b;
    b.branch = name;
    b.rate = rate_value(det, lambda, s);
    b.radius = std::sqrt(b.rate);
    b.min_modulus = circle_minimum(tr.shifts, out.coefficients, b.radius);
    b.pass = b.min_modulus > kLimitTolerance;
    out.branches.push_back(b);
  }
  return out;
}

/// Convenience form tracing the orbit of (x, xi) over +-n_far steps.
inline LimitCheck limit_operator_check(const OperatorSpec& op, const DiffeoModel& g, const FixedPointSet& fixed,
                                       const SurfacePoint& x, const Vec2& xi, double s, OrbitEnd end,
                                       int n_far = 200) {
  const OrbitLimit lim = limit_points(g, fixed, x);
  const SymbolTrajectory tr = trace_symbol(op, g, x, xi, -n_far, n_far);
  return limit_operator_check(op, g, fixed, tr, end == OrbitEnd::plus ? lim.plus : lim.minus, end, s);
}

// ---------------------------------------------------------------------------
// Ellipticity probe

enum class Verdict { likely_invertible, likely_not_invertible, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::likely_invertible: return "likely_invertible";
    case Verdict::likely_not_invertible: return "likely_not_invertible";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct VerdictThresholds {
  double invertible = 1e-4;
  double singular = 1e-6;
};

struct InvertibilityVerdict {
  Verdict verdict = Verdict::inconclusive;
  std::vector<int> sizes;
  std::vector<SingularValueEstimate> sigma_min;
  LimitCheck limit_plus;
  LimitCheck limit_minus;
};

/// Three-way verdict from sigma_min over growing sections plus limit checks.
inline Verdict classify(const std::vector<SingularValueEstimate>& sigma, bool limits_pass,
                        const VerdictThresholds& th = {}) {
  const bool all_large = std::all_of(sigma.begin(), sigma.end(), [&](const auto& e) {
    return e.converged && e.value >= th.invertible;
  });
  if (all_large && limits_pass) return Verdict::likely_invertible;
  const auto& last = sigma.back();
  if (last.converged && last.value < th.singular && last.value <= sigma.front().value) {
    return Verdict::likely_not_invertible;
  }
  return Verdict::inconclusive;
}

struct ProbeSample {
  std::size_t id = 0;
  std::string kind;  // random, E_plus, E_minus, fixed, fixed_dir1, fixed_dir2
  SurfacePoint x;
  Vec2 xi;  // unit cometric norm
};

struct ProbeCell {
  double s = 0.0;
  std::size_t sample = 0;
  InvertibilityVerdict result;
};

struct ProbeOptions {
  std::vector<double> s_grid;
  int sample_count = 8;
  std::vector<int> sizes{256, 512, 1024};
  std::uint64_t seed = 0;
  WeightConvention convention = WeightConvention::t1_pinned;
  bool include_fixed_points = true;
  VerdictThresholds thresholds;
};

struct ProbeFinding {
  std::string kind;  // "interval_violation"
  double s_left = 0.0, s_middle = 0.0, s_right = 0.0;
  std::vector<std::size_t> cells;  // indices into ProbeResult::cells supporting the finding
};

struct ProbeResult {
  std::vector<ProbeSample> samples;
  std::vector<std::string> skipped;  // samples that could not be built, with reason
  std::vector<ProbeCell> cells;      // ordered by s, then sample
  std::vector<Verdict> per_s;        // aggregate verdict per grid value
  SIntervalSet estimate;
  bool single_interval = true;
  std::vector<ProbeFinding> findings;
};

namespace detail {

class UnitRng {
 public:
  explicit UnitRng(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 rng_;
};

inline Vec2 unit_covector(const Surface& surf, const SurfacePoint& p, double angle) {
  return Vec2{std::cos(angle), std::sin(angle)} * std::sqrt(surf.conformal_factor(p));
}

inline Vec2 lowered_unit(const Surface& surf, const SurfacePoint& p, const Vec2& tangent) {
  const Vec2 c = surf.lower({p, tangent, Variance::tangent}).components;
  return c * (1.0 / std::sqrt(surf.cometric_norm2({p, c, Variance::covector})));
}

inline SurfacePoint random_point(const Surface& surf, UnitRng& uni) {
  if (surf.kind() == SurfaceKind::torus) return {0, {uni(), uni()}};
  const int chart = uni() < 0.5 ? 0 : 1;
  const double r = std::sqrt(uni());
  const double phi = 2.0 * std::numbers::pi * uni();
  return {chart, {r * std::cos(phi), r * std::sin(phi)}};
}

inline std::vector<ProbeSample> probe_samples(const DiffeoModel& g, const FixedPointSet& fixed,
                                              const ProbeOptions& opt, std::vector<std::string>& skipped) {
  const Surface& surf = g.surface();
  UnitRng uni(opt.seed);
  std::vector<ProbeSample> out;
  auto add = [&](std::string kind, const SurfacePoint& x, const Vec2& xi) {
    out.push_back({out.size(), std::move(kind), x, xi});
  };
  for (int i = 0; i < opt.sample_count; ++i) {
    SurfacePoint x;
    for (;;) {
      x = surf.canonicalize(random_point(surf, uni));
      const bool near = std::any_of(fixed.points.begin(), fixed.points.end(),
                                    [&](const auto& r) { return surf.distance(r.point, x) < 1e-3; });
      if (!near) break;
    }
    add("random", x, unit_covector(surf, x, 2.0 * std::numbers::pi * uni()));
    for (OrbitEnd end : {OrbitEnd::plus, OrbitEnd::minus}) {
      const char* kind = end == OrbitEnd::plus ? "E_plus" : "E_minus";
      try {
        const InvariantDirection e = invariant_direction(g, fixed, x, end);
        add(kind, x, lowered_unit(surf, x, e.direction));
      } catch (const Error& err) {
        skipped.push_back(std::string(kind) + " at random point " + std::to_string(i) + ": " + err.what());
      }
    }
  }
  if (opt.include_fixed_points) {
    for (const auto& fp : fixed.points) {
      add("fixed", fp.point, unit_covector(surf, fp.point, 2.0 * std::numbers::pi * uni()));
      add("fixed_dir1", fp.point, lowered_unit(surf, fp.point, fp.direction1));
      add("fixed_dir2", fp.point, lowered_unit(surf, fp.point, fp.direction2));
    }
  }
  return out;
}

}  // namespace detail

/// Runs of likely-invertible grid values, each widened halfway to its neighbours.
inline SIntervalSet estimate_elliptic_set(const std::vector<double>& grid, const std::vector<Verdict>& per_s) {
  const std::size_t m = grid.size();
  auto half_left = [&](std::size_t i) {
    if (i > 0) return 0.5 * (grid[i] - grid[i - 1]);
    return m > 1 ? 0.5 * (grid[1] - grid[0]) : 0.0;
  };
  auto half_right = [&](std::size_t i) {
    if (i + 1 < m) return 0.5 * (grid[i + 1] - grid[i]);
    return m > 1 ? 0.5 * (grid[m - 1] - grid[m - 2]) : 0.0;
  };
  std::vector<OpenInterval> runs;
  for (std::size_t i = 0; i < m; ++i) {
    if (per_s[i] != Verdict::likely_invertible) continue;
    std::size_t j = i;
    while (j + 1 < m && per_s[j + 1] == Verdict::likely_invertible) ++j;
    runs.push_back({grid[i] - half_left(i), grid[j] + half_right(j)});
    i = j;
  }
  return SIntervalSet(runs);
}

/// Elliptic - not elliptic - elliptic along s, which contradicts interval structure.
inline std::vector<ProbeFinding> interval_violations(const std::vector<double>& grid,
                                                     const std::vector<Verdict>& per_s) {
  std::vector<ProbeFinding> out;
  const std::size_t m = grid.size();
  for (std::size_t j = 0; j < m; ++j) {
    if (per_s[j] != Verdict::likely_not_invertible) continue;
    std::optional<std::size_t> left, right;
    for (std::size_t i = j; i-- > 0;) {
      if (per_s[i] == Verdict::likely_invertible) {
        left = i;
        break;
      }
    }
    for (std::size_t k = j + 1; k < m; ++k) {
      if (per_s[k] == Verdict::likely_invertible) {
        right = k;
        break;
      }
    }
    if (left && right) out.push_back({"interval_violation", grid[*left], grid[j], grid[*right], {}});
  }
  return out;
}

/// Estimates, for each s on the grid, whether the symbol is invertible at
/// every sampled cotangent point, and reports the estimated elliptic set with
/// an interval-structure diagnostic. Deterministic for a given seed.
inline ProbeResult ellipticity_probe(const OperatorSpec& op, const DiffeoModel& g, const FixedPointSet& fixed,
                                     const ProbeOptions& opt) {
  if (opt.s_grid.empty()) throw Error("symbol: probe needs a non-empty s grid");
  if (opt.sample_count < 1) throw Error("symbol: probe needs sample_count >= 1");
  if (opt.sizes.empty()) throw Error("symbol: probe needs section sizes");
  if (fixed.points.empty()) throw Error("symbol: probe needs the fixed points of the map");
  if (!std::is_sorted(opt.s_grid.begin(), opt.s_grid.end()) ||
      std::adjacent_find(opt.s_grid.begin(), opt.s_grid.end()) != opt.s_grid.end()) {
    throw Error("symbol: probe s grid must be strictly increasing");
  }
  ProbeResult res;
  res.samples = detail::probe_samples(g, fixed, opt, res.skipped);
  const int n_max = *std::max_element(opt.sizes.begin(), opt.sizes.end());

  struct Prepared {
    SymbolTrajectory traj;
    OrbitLimit limits;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(res.samples.size());
  for (const auto& smp : res.samples) {
    prepared.push_back({trace_symbol(op, g, smp.x, smp.xi, -n_max, n_max, opt.convention),
                        limit_points(g, fixed, smp.x)});
  }

  const std::vector<double>& grid = opt.s_grid;
  for (double s : grid) {
    Verdict agg = Verdict::likely_invertible;
    for (std::size_t i = 0; i < res.samples.size(); ++i) {
      ProbeCell cell;
      cell.s = s;
      cell.sample = i;
      auto& r = cell.result;
      r.sizes = opt.sizes;
      for (int N : opt.sizes) {
        r.sigma_min.push_back(min_singular_value(build_finite_section(prepared[i].traj, s, N).matrix));
      }
      r.limit_plus = limit_operator_check(op, g, fixed, prepared[i].traj, prepared[i].limits.plus, OrbitEnd::plus, s);
      r.limit_minus =
          limit_operator_check(op, g, fixed, prepared[i].traj, prepared[i].limits.minus, OrbitEnd::minus, s);
      r.verdict = classify(r.sigma_min, r.limit_plus.pass() && r.limit_minus.pass(), opt.thresholds);
      if (r.verdict == Verdict::likely_not_invertible) {
        agg = Verdict::likely_not_invertible;
      } else if (r.verdict == Verdict::inconclusive && agg == Verdict::likely_invertible) {
        agg = Verdict::inconclusive;
      }
      res.cells.push_back(std::move(cell));
    }
    res.per_s.push_back(agg);
  }

  res.estimate = estimate_elliptic_set(grid, res.per_s);
  res.single_interval = res.estimate.size() <= 1;
  res.findings = interval_violations(grid, res.per_s);
  for (auto& f : res.findings) {
    for (std::size_t c = 0; c < res.cells.size(); ++c) {
      const double s = res.cells[c].s;
      if (s == f.s_left || s == f.s_middle || s == f.s_right) f.cells.push_back(c);
    }
  }
  return res;
}

}  // namespace msop
