#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace biharm {

/// Axis-aligned box [lo_0, hi_0] x ... x [lo_{N-1}, hi_{N-1}].
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  Box() = default;
  Box(std::vector<double> lower, std::vector<double> upper) : lo(std::move(lower)), hi(std::move(upper)) {}

  /// The cube [a, b]^dim.
  static Box cube(std::size_t dim, double a, double b) {
    return Box(std::vector<double>(dim, a), std::vector<double>(dim, b));
  }

  std::size_t dim() const { return lo.size(); }
  double length(std::size_t axis) const { return hi[axis] - lo[axis]; }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= length(i);
    return v;
  }

  bool well_formed() const {
    if (lo.size() != hi.size() || lo.empty()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
      if (!(hi[i] > lo[i])) return false;
    return true;
  }

  /// Closed-box membership.
  bool contains(std::span<const double> x) const {
    if (x.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  /// True when `inner` lies in the open interior of this box.
  bool strictly_contains(const Box& inner) const {
    if (inner.dim() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
      if (!(inner.lo[i] > lo[i] && inner.hi[i] < hi[i])) return false;
    return true;
  }

  std::vector<double> center() const {
    std::vector<double> c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

}  // namespace biharm
