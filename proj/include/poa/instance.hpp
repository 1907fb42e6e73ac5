#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poa/distribution.hpp"
#include "poa/format.hpp"
#include "poa/piecewise_linear.hpp"

namespace poa {

enum class ClassKind { Lip, SMLip };

inline std::string_view to_string(ClassKind k) noexcept { return k == ClassKind::Lip ? "Lip" : "SM-Lip"; }

inline ClassKind parse_class_kind(std::string_view s) {
  if (s == "Lip" || s == "lip") return ClassKind::Lip;
  if (s == "SM-Lip" || s == "SMLip" || s == "smlip" || s == "sm-lip") return ClassKind::SMLip;
  throw std::invalid_argument("unknown class kind '" + std::string(s) + "'");
}

/// Tags which instance class (Lip or SM-Lip, L, R) an instance belongs to.
struct ClassDescriptor {
  ClassKind kind = ClassKind::Lip;
  double L = 1.0;
  double R = 1.0;

  ClassDescriptor() = default;
  ClassDescriptor(ClassKind k, double l, double r) : kind(k), L(l), R(r) {
    if (!(l >= 0) || !(r >= 0)) throw std::invalid_argument("ClassDescriptor: L and R must be non-negative");
  }

  friend bool operator==(const ClassDescriptor&, const ClassDescriptor&) = default;
};

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
  /// Distance from the origin to the interval.
  double distance_to_origin() const noexcept {
    if (lo > 0) return lo;
    if (hi < 0) return -hi;
    return 0.0;
  }
  friend bool operator==(const Interval&, const Interval&) = default;
};

using Point = std::vector<double>;

/// One independent coordinate of a (product) instance: its own sample
/// distribution and one objective per outcome, aligned with the outcomes.
struct Coordinate {
  FiniteDistribution distribution;
  std::vector<PiecewiseLinear> objectives;

  const PiecewiseLinear& objective_for(int label) const {
    const std::size_t i = distribution.index_of(label);
    if (i >= objectives.size()) throw std::out_of_range("Coordinate: unknown outcome label");
    return objectives[i];
  }

  /// Population objective of this coordinate, in closed form.
  double expected_value(double x) const noexcept {
    double total = 0.0;
    for (std::size_t s = 0; s < objectives.size(); ++s) {
      total += distribution.probability(s) * objectives[s](x);
    }
    return total;
  }
};

/// A stochastic optimization instance (f, P). For k > 1 coordinates the sample
/// objective is separable, f(x; s) = sum_i f_i(x_i; s_i), with s_i drawn
/// independently per coordinate. Immutable after construction.
class Instance {
 public:
  Instance(std::string id, ClassDescriptor tag, std::vector<Coordinate> coords, std::vector<Interval> minimizer)
      : id_(std::move(id)), tag_(tag), coords_(std::move(coords)), minimizer_(std::move(minimizer)) {
    if (coords_.empty()) throw std::invalid_argument("Instance: need at least one coordinate");
    if (minimizer_.size() != coords_.size()) throw std::invalid_argument("Instance: minimizer dimension mismatch");
    for (const auto& c : coords_) {
      if (c.objectives.size() != c.distribution.size()) {
        throw std::invalid_argument("Instance: one objective per outcome required");
      }
    }
    for (const auto& m : minimizer_) {
      if (!(m.lo <= m.hi)) throw std::invalid_argument("Instance: empty minimizer interval");
    }
    optimal_value_ = 0.0;
    const Point xs = minimizer_point();
    for (std::size_t i = 0; i < coords_.size(); ++i) optimal_value_ += coords_[i].expected_value(xs[i]);
  }

  const std::string& id() const noexcept { return id_; }
  const ClassDescriptor& class_tag() const noexcept { return tag_; }
  std::size_t dimension() const noexcept { return coords_.size(); }
  const std::vector<Coordinate>& coordinates() const noexcept { return coords_; }
  const Coordinate& coordinate(std::size_t i) const { return coords_.at(i); }
  const std::vector<Interval>& minimizer() const noexcept { return minimizer_; }
  double optimal_value() const noexcept { return optimal_value_; }

  /// A canonical point of the minimizer set: the point nearest the origin.
  Point minimizer_point() const {
    Point p(minimizer_.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(0.0, minimizer_[i].lo, minimizer_[i].hi);
    return p;
  }

 private:
  std::string id_;
  ClassDescriptor tag_;
  std::vector<Coordinate> coords_;
  std::vector<Interval> minimizer_;
  double optimal_value_ = 0.0;
};

/// F(x) = E_S f(x; S), evaluated in closed form.
inline double population_objective(const Instance& inst, std::span<const double> x) {
  if (x.size() != inst.dimension()) throw std::invalid_argument("population_objective: dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += inst.coordinate(i).expected_value(x[i]);
  return total;
}

inline double population_objective(const Instance& inst, double x) {
  return population_objective(inst, std::span<const double>(&x, 1));
}

/// F(x) - inf F. Clamped at zero: negative values are rounding noise.
inline double gap(const Instance& inst, std::span<const double> x) {
  return std::max(0.0, population_objective(inst, x) - inst.optimal_value());
}

inline double gap(const Instance& inst, double x) { return gap(inst, std::span<const double>(&x, 1)); }

/// Minimizer of one coordinate's population objective, computed from the
/// merged breakpoints and slopes. Independent of the factories' declarations.
/// Throws when the objective is unbounded below.
inline Interval exact_minimizer(const Coordinate& c) {
  std::vector<double> knots;
  for (const auto& f : c.objectives) knots.insert(knots.end(), f.breakpoints().begin(), f.breakpoints().end());
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  auto slope_right_of = [&](double x) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.objectives.size(); ++i) s += c.distribution.probability(i) * c.objectives[i].right_slope(x);
    return s;
  };
  auto slope_left_of = [&](double x) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.objectives.size(); ++i) s += c.distribution.probability(i) * c.objectives[i].left_slope(x);
    return s;
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (knots.empty()) {
    if (slope_right_of(0.0) == 0.0) return {-inf, inf};
    throw std::domain_error("exact_minimizer: objective is unbounded below");
  }
  if (slope_left_of(knots.front()) > 0.0 || slope_right_of(knots.back()) < 0.0) {
    throw std::domain_error("exact_minimizer: objective is unbounded below");
  }
  Interval out{-inf, inf};
  if (slope_left_of(knots.front()) < 0.0) {
    for (double k : knots) {
      if (slope_right_of(k) >= 0.0) {
        out.lo = k;
        break;
      }
    }
  }
  if (slope_right_of(knots.back()) > 0.0) {
    for (auto it = knots.rbegin(); it != knots.rend(); ++it) {
      if (slope_left_of(*it) <= 0.0) {
        out.hi = *it;
        break;
      }
    }
  }
  return out;
}

/// Result of a class-membership check, with the witnessing quantities.
struct MembershipCertificate {
  bool member = false;
  double lipschitz = 0.0;      ///< sup_s Lipschitz constant of f(.; s) over the support
  double second_moment = 0.0;  ///< sum_s P(s) * (max slope of f(.; s))^2
  double minimizer_norm = 0.0; ///< distance from 0 to the minimizer set
  bool minimizer_certified = false;  ///< declared minimizer equals the computed one
  std::string violation;       ///< empty when member
};

/// Checks (f, P) against I_Lip^{L,R} or I_SM-Lip^{L,R}. Only outcomes with
/// positive probability count toward the Lipschitz bound.
inline MembershipCertificate check_membership(const Instance& inst, const ClassDescriptor& tag) {
  constexpr double kRel = 1e-12;
  MembershipCertificate cert;
  double lip_sq = 0.0;
  for (const auto& c : inst.coordinates()) {
    double worst = 0.0;
    for (std::size_t s = 0; s < c.objectives.size(); ++s) {
      const double p = c.distribution.probability(s);
      const double m = c.objectives[s].max_abs_slope();
      if (p > 0.0) worst = std::max(worst, m);
      cert.second_moment += p * m * m;
    }
    lip_sq += worst * worst;
  }
  cert.lipschitz = std::sqrt(lip_sq);

  double norm_sq = 0.0;
  for (const auto& m : inst.minimizer()) norm_sq += m.distance_to_origin() * m.distance_to_origin();
  cert.minimizer_norm = std::sqrt(norm_sq);

  cert.minimizer_certified = true;
  for (std::size_t i = 0; i < inst.dimension(); ++i) {
    Interval exact;
    try {
      exact = exact_minimizer(inst.coordinate(i));
    } catch (const std::domain_error&) {
      cert.minimizer_certified = false;
      break;
    }
    const Interval& declared = inst.minimizer()[i];
    auto close = [](double a, double b) { return a == b || std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
    if (!close(declared.lo, exact.lo) || !close(declared.hi, exact.hi)) cert.minimizer_certified = false;
  }

  std::ostringstream why;
  if (tag.kind == ClassKind::Lip && cert.lipschitz > tag.L * (1 + kRel)) {
    why << "Lipschitz constant " << format_double(cert.lipschitz) << " exceeds L = " << format_double(tag.L);
  } else if (tag.kind == ClassKind::SMLip && cert.second_moment > tag.L * tag.L * (1 + kRel)) {
    why << "gradient second moment " << format_double(cert.second_moment) << " exceeds L^2 = "
        << format_double(tag.L * tag.L);
  } else if (cert.minimizer_norm > tag.R * (1 + kRel)) {
    why << "minimizer norm " << format_double(cert.minimizer_norm) << " exceeds R = " << format_double(tag.R);
  } else if (!cert.minimizer_certified) {
    why << "declared minimizer does not match the population objective";
  }
  cert.violation = why.str();
  cert.member = cert.violation.empty();
  return cert;
}

/// The instance with sample objectives l1 * r1 * f(x / r1; s). Gaps scale by
/// l1 * r1, minimizers by r1, and the class tag (L, R) by (l1, r1).
inline Instance scale_instance(const Instance& inst, double l1, double r1) {
  if (!(l1 > 0) || !(r1 > 0)) throw std::invalid_argument("scale_instance: l1 and r1 must be positive");
  std::vector<Coordinate> coords;
  coords.reserve(inst.dimension());
  for (const auto& c : inst.coordinates()) {
    Coordinate out{c.distribution, {}};
    out.objectives.reserve(c.objectives.size());
    for (const auto& f : c.objectives) out.objectives.push_back(f.scaled(l1, r1));
    coords.push_back(std::move(out));
  }
  std::vector<Interval> mins;
  for (const auto& m : inst.minimizer()) mins.push_back({m.lo * r1, m.hi * r1});
  const auto& t = inst.class_tag();
  std::string id = "scaled(l1=" + format_double(l1) + ",r1=" + format_double(r1) + "," + inst.id() + ")";
  return Instance(std::move(id), ClassDescriptor(t.kind, t.L * l1, t.R * r1), std::move(coords), std::move(mins));
}

}  // namespace poa
