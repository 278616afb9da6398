#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace msop {

/// Open interval (lo, hi); endpoints may be infinite.
struct OpenInterval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double s) const { return lo < s && s < hi; }
  bool empty() const { return !(lo < hi); }
  friend bool operator==(const OpenInterval&, const OpenInterval&) = default;
};

/// Finite union of disjoint open intervals, kept sorted.
class SIntervalSet {
 public:
  SIntervalSet() = default;
  explicit SIntervalSet(std::vector<OpenInterval> parts) : parts_(std::move(parts)) { normalize(); }

  static SIntervalSet everything() { return SIntervalSet({OpenInterval{}}); }
  static SIntervalSet nothing() { return {}; }

  const std::vector<OpenInterval>& intervals() const { return parts_; }
  bool empty() const { return parts_.empty(); }
  bool single_interval() const { return parts_.size() == 1; }
  std::size_t size() const { return parts_.size(); }

  bool contains(double s) const {
    return std::any_of(parts_.begin(), parts_.end(), [s](const auto& p) { return p.contains(s); });
  }

  SIntervalSet intersect(const SIntervalSet& other) const {
    std::vector<OpenInterval> out;
    for (const auto& a : parts_) {
      for (const auto& b : other.parts_) {
        OpenInterval c{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
        if (!c.empty()) out.push_back(c);
      }
    }
    return SIntervalSet(std::move(out));
  }

  /// Union; open intervals sharing only an endpoint stay separate.
  SIntervalSet unite(const SIntervalSet& other) const {
    std::vector<OpenInterval> all = parts_;
    all.insert(all.end(), other.parts_.begin(), other.parts_.end());
    return SIntervalSet(std::move(all));
  }

  friend bool operator==(const SIntervalSet&, const SIntervalSet&) = default;

 private:
  void normalize() {
    std::erase_if(parts_, [](const auto& p) { return p.empty(); });
    std::sort(parts_.begin(), parts_.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    std::vector<OpenInterval> merged;
    for (const auto& p : parts_) {
      if (!merged.empty() && p.lo < merged.back().hi) {
        merged.back().hi = std::max(merged.back().hi, p.hi);
      } else {
        merged.push_back(p);
      }
    }
    parts_ = std::move(merged);
  }

  std::vector<OpenInterval> parts_;
};

}  // namespace msop
