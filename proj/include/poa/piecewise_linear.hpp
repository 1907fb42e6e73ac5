#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace poa {

/// A continuous convex piecewise-linear function on the real line.
///
/// Stored as sorted breakpoints b_0 < ... < b_{m-1}, slopes s_0 <= ... <= s_m
/// (s_j is the slope on (b_{j-1}, b_j)), and one anchor point (x_a, f(x_a)).
/// Values at the breakpoints are integrated from the anchor once, at
/// construction, so evaluation is a segment lookup plus one multiply-add.
class PiecewiseLinear {
 public:
  PiecewiseLinear() : PiecewiseLinear({}, {0.0}, 0.0, 0.0) {}

  PiecewiseLinear(std::vector<double> breakpoints, std::vector<double> slopes,
                  double anchor_x, double anchor_value)
      : breakpoints_(std::move(breakpoints)),
        slopes_(std::move(slopes)),
        anchor_x_(anchor_x),
        anchor_value_(anchor_value) {
    if (slopes_.size() != breakpoints_.size() + 1) {
      throw std::invalid_argument("PiecewiseLinear: need one more slope than breakpoints");
    }
    for (std::size_t j = 1; j < breakpoints_.size(); ++j) {
      if (!(breakpoints_[j - 1] < breakpoints_[j])) {
        throw std::invalid_argument("PiecewiseLinear: breakpoints must be strictly increasing");
      }
    }
    for (std::size_t j = 1; j < slopes_.size(); ++j) {
      if (slopes_[j] < slopes_[j - 1]) {
        throw std::invalid_argument("PiecewiseLinear: slopes must be non-decreasing (convexity)");
      }
    }
    for (double v : breakpoints_) {
      if (!std::isfinite(v)) throw std::invalid_argument("PiecewiseLinear: non-finite breakpoint");
    }
    for (double v : slopes_) {
      if (!std::isfinite(v)) throw std::invalid_argument("PiecewiseLinear: non-finite slope");
    }
    knot_values_.resize(breakpoints_.size());
    if (!breakpoints_.empty()) {
      // Integrate from the anchor to the knot on its right (or the first knot).
      const std::size_t j = segment_right(anchor_x_);
      const std::size_t k = j == 0 ? 0 : j - 1;
      knot_values_[k] = anchor_value_ + slopes_[j] * (breakpoints_[k] - anchor_x_);
      for (std::size_t i = k + 1; i < breakpoints_.size(); ++i) {
        knot_values_[i] = knot_values_[i - 1] + slopes_[i] * (breakpoints_[i] - breakpoints_[i - 1]);
      }
      for (std::size_t i = k; i-- > 0;) {
        knot_values_[i] = knot_values_[i + 1] - slopes_[i + 1] * (breakpoints_[i + 1] - breakpoints_[i]);
      }
    }
  }

  /// w * |x - c|
  static PiecewiseLinear absolute(double weight, double center) {
    if (weight < 0) throw std::invalid_argument("PiecewiseLinear::absolute: negative weight");
    return PiecewiseLinear({center}, {-weight, weight}, center, 0.0);
  }

  /// s * x
  static PiecewiseLinear linear(double slope) { return PiecewiseLinear({}, {slope}, 0.0, 0.0); }

  double operator()(double x) const noexcept {
    if (breakpoints_.empty()) return anchor_value_ + slopes_[0] * (x - anchor_x_);
    const std::size_t j = segment_right(x);
    if (j == 0) return knot_values_[0] + slopes_[0] * (x - breakpoints_[0]);
    return knot_values_[j - 1] + slopes_[j] * (x - breakpoints_[j - 1]);
  }

  /// Slope of the piece active just right of x (the right derivative).
  double right_slope(double x) const noexcept { return slopes_[segment_right(x)]; }

  /// Slope of the piece active just left of x (the left derivative).
  double left_slope(double x) const noexcept {
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x);
    return slopes_[static_cast<std::size_t>(it - breakpoints_.begin())];
  }

  /// Lipschitz constant: max |slope|. Slopes are sorted so only the ends matter.
  double max_abs_slope() const noexcept {
    return std::max(std::abs(slopes_.front()), std::abs(slopes_.back()));
  }

  /// Returns l1 * r1 * f(x / r1).
  PiecewiseLinear scaled(double l1, double r1) const {
    std::vector<double> bp(breakpoints_.size());
    std::vector<double> sl(slopes_.size());
    for (std::size_t i = 0; i < bp.size(); ++i) bp[i] = breakpoints_[i] * r1;
    for (std::size_t i = 0; i < sl.size(); ++i) sl[i] = slopes_[i] * l1;
    return PiecewiseLinear(std::move(bp), std::move(sl), anchor_x_ * r1, anchor_value_ * l1 * r1);
  }

  /// Returns c * f(a * x) for a > 0, c >= 0.
  PiecewiseLinear composed(double c, double a) const {
    if (!(a > 0) || c < 0) throw std::invalid_argument("PiecewiseLinear::composed: need a > 0, c >= 0");
    std::vector<double> bp(breakpoints_.size());
    std::vector<double> sl(slopes_.size());
    for (std::size_t i = 0; i < bp.size(); ++i) bp[i] = breakpoints_[i] / a;
    for (std::size_t i = 0; i < sl.size(); ++i) sl[i] = slopes_[i] * (c * a);
    return PiecewiseLinear(std::move(bp), std::move(sl), anchor_x_ / a, anchor_value_ * c);
  }

  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& slopes() const noexcept { return slopes_; }

 private:
  // Index of the slope active on the right of x: number of breakpoints <= x.
  std::size_t segment_right(double x) const noexcept {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    return static_cast<std::size_t>(it - breakpoints_.begin());
  }

  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
  double anchor_x_;
  double anchor_value_;
  std::vector<double> knot_values_;
};

}  // namespace poa
