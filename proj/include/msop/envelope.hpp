#pragma once

// Lower (pointwise min) and upper (pointwise max) envelopes of lines in the
// plane, with exact level-set extraction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "msop/error.hpp"
#include "msop/interval_set.hpp"

namespace msop {

struct Line {
  double intercept = 0.0;
  double slope = 0.0;
  std::size_t tag = 0;  // caller-defined provenance

  double operator()(double s) const { return intercept + slope * s; }
};

/// Continuous piecewise-linear function given by consecutive lines and the
/// breakpoints between them (breakpoints.size() == pieces.size() - 1).
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<Line> pieces, std::vector<double> breakpoints)
      : pieces_(std::move(pieces)), breaks_(std::move(breakpoints)) {}

  const std::vector<Line>& pieces() const { return pieces_; }
  const std::vector<double>& breakpoints() const { return breaks_; }

  std::size_t piece_index(double s) const {
    return static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), s) - breaks_.begin());
  }

  double operator()(double s) const { return pieces_[piece_index(s)](s); }
  const Line& active(double s) const { return pieces_[piece_index(s)]; }

  /// {s : f(s) > c}.
  SIntervalSet superlevel(double c) const { return level(c, true); }
  /// {s : f(s) < c}.
  SIntervalSet sublevel(double c) const { return level(c, false); }

 private:
  SIntervalSet level(double c, bool above) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<OpenInterval> runs;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const double lo = i == 0 ? -inf : breaks_[i - 1];
      const double hi = i + 1 == pieces_.size() ? inf : breaks_[i];
      const Line& l = pieces_[i];
      const double a = above ? l.slope : -l.slope;
      const double b = above ? l.intercept - c : c - l.intercept;
      // Solve a*s + b > 0 on (lo, hi).
      OpenInterval part{lo, hi};
      if (a > 0.0) {
        part.lo = std::max(lo, -b / a);
      } else if (a < 0.0) {
        part.hi = std::min(hi, -b / a);
      } else if (!(b > 0.0)) {
        continue;
      }
      if (part.empty()) continue;
      // Pieces meeting at a breakpoint inside the set are glued together.
      if (!runs.empty() && runs.back().hi == part.lo) {
        runs.back().hi = part.hi;
      } else {
        runs.push_back(part);
      }
    }
    return SIntervalSet(std::move(runs));
  }

  std::vector<Line> pieces_;
  std::vector<double> breaks_;
};

/// Pointwise maximum of the lines (convex), left to right.
inline PiecewiseLinear upper_envelope(std::vector<Line> lines) {
  if (lines.empty()) throw Error("envelope: need at least one line");
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    return a.slope < b.slope || (a.slope == b.slope && a.intercept > b.intercept);
  });
  // Equal slopes: keep the largest intercept (first after sorting).
  std::vector<Line> uniq;
  for (const auto& l : lines) {
    if (uniq.empty() || uniq.back().slope != l.slope) uniq.push_back(l);
  }
  auto cross = [](const Line& p, const Line& q) { return (p.intercept - q.intercept) / (q.slope - p.slope); };
  std::vector<Line> hull;
  for (const auto& l : uniq) {
    while (hull.size() >= 2 &&
           cross(hull[hull.size() - 2], l) <= cross(hull[hull.size() - 2], hull.back())) {
      hull.pop_back();
    }
    hull.push_back(l);
  }
  std::vector<double> breaks;
  for (std::size_t i = 0; i + 1 < hull.size(); ++i) breaks.push_back(cross(hull[i], hull[i + 1]));
  return PiecewiseLinear(std::move(hull), std::move(breaks));
}

/// Pointwise minimum of the lines (concave), left to right.
inline PiecewiseLinear lower_envelope(std::vector<Line> lines) {
  for (auto& l : lines) {
    l.intercept = -l.intercept;
    l.slope = -l.slope;
  }
  const PiecewiseLinear neg = upper_envelope(std::move(lines));
  std::vector<Line> pieces = neg.pieces();
  for (auto& l : pieces) {
    l.intercept = -l.intercept;
    l.slope = -l.slope;
  }
  return PiecewiseLinear(std::move(pieces), neg.breakpoints());
}

}  // namespace msop
