#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "poa/algorithms.hpp"
#include "poa/instance.hpp"
#include "poa/parallel.hpp"
#include "poa/rng.hpp"

namespace poa {

enum class Metric { Expected, Quantile };

/// Expected error, or the (1 - delta)-quantile error.
struct ErrorKind {
  Metric metric = Metric::Expected;
  double delta = 0.0;

  static ErrorKind expected() { return {Metric::Expected, 0.0}; }
  static ErrorKind quantile(double delta) {
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("quantile metric: delta must lie in (0, 1/2)");
    return {Metric::Quantile, delta};
  }
  friend bool operator==(const ErrorKind&, const ErrorKind&) = default;
};

inline std::string_view to_string(Metric m) noexcept { return m == Metric::Expected ? "expected" : "quantile"; }

struct ErrorEstimate {
  ErrorKind kind;
  double point = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  long long trials = 0;
  std::uint64_t seed_base = 0;
  double trimmed_mean = 0.0;  ///< diagnostic only: mean after dropping 1% from each tail
};

struct ReferenceRate {
  ErrorKind kind;
  double L = 0.0;
  double R = 0.0;
  long long T = 0;
  double value = 0.0;
};

/// Minimax reference with unit constant: LR / sqrt(T), or LR / sqrt(1 + T / log(1/delta)).
inline ReferenceRate reference_rate(const ClassDescriptor& tag, long long T, ErrorKind kind) {
  if (T < 1) throw std::invalid_argument("reference_rate: T must be >= 1");
  const double t = static_cast<double>(T);
  ReferenceRate r{kind, tag.L, tag.R, T, 0.0};
  if (kind.metric == Metric::Expected) {
    r.value = tag.L * tag.R / std::sqrt(t);
  } else {
    if (!(kind.delta > 0.0 && kind.delta < 0.5)) throw std::invalid_argument("reference_rate: delta must lie in (0, 1/2)");
    r.value = tag.L * tag.R / std::sqrt(1.0 + t / std::log(1.0 / kind.delta));
  }
  return r;
}

/// 1-based rank of the empirical p-quantile, ceil(pN). The 1e-9 guard keeps
/// pN that is an integer up to rounding on that integer.
inline std::size_t quantile_rank(std::size_t n, double p) {
  const double r = std::ceil(p * static_cast<double>(n) - 1e-9);
  return static_cast<std::size_t>(std::clamp(r, 1.0, static_cast<double>(n)));
}

/// min{y : F_N(y) >= p} of the empirical distribution.
inline double empirical_quantile(std::vector<double> sample, double p) {
  if (sample.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  const std::size_t k = quantile_rank(sample.size(), p) - 1;
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(k), sample.end());
  return sample[k];
}

/// Ranks (1-based) of the order statistics bracketing the p-quantile with
/// exact binomial coverage >= 1 - alpha when both ranks lie inside [1, n].
inline std::pair<long long, long long> quantile_ci_ranks(std::size_t n, double p, double alpha = 0.05) {
  // pmf of B ~ Binomial(n, p), the count of observations below the true quantile.
  std::vector<double> cdf(n + 1);
  const double ln = std::lgamma(static_cast<double>(n) + 1.0);
  double c = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    const double jj = static_cast<double>(j);
    const double lp = ln - std::lgamma(jj + 1.0) - std::lgamma(static_cast<double>(n) - jj + 1.0) +
                      (j ? jj * std::log(p) : 0.0) + (j < n ? (static_cast<double>(n) - jj) * std::log1p(-p) : 0.0);
    c += std::exp(lp);
    cdf[j] = c;
  }
  // lower: largest l with P(B <= l - 1) <= alpha/2; upper: smallest u with P(B >= u) <= alpha/2.
  long long lo = 0;
  for (std::size_t l = 1; l <= n; ++l) {
    if (cdf[l - 1] <= alpha / 2) lo = static_cast<long long>(l);
    else break;
  }
  long long hi = static_cast<long long>(n) + 1;
  for (std::size_t u = n; u >= 1; --u) {
    if (1.0 - cdf[u - 1] <= alpha / 2) hi = static_cast<long long>(u);
    else break;
  }
  return {lo, hi};
}

/// Summarizes per-trial gaps into the requested estimate.
inline ErrorEstimate summarize_gaps(const std::vector<double>& gaps, ErrorKind kind, std::uint64_t seed_base = 0) {
  if (gaps.empty()) throw std::invalid_argument("summarize_gaps: no trials");
  const std::size_t n = gaps.size();
  std::vector<double> sorted = gaps;
  std::sort(sorted.begin(), sorted.end());
  ErrorEstimate e{kind, 0.0, 0.0, 0.0, static_cast<long long>(n), seed_base, 0.0};

  const std::size_t trim = n / 100;
  e.trimmed_mean = std::accumulate(sorted.begin() + static_cast<std::ptrdiff_t>(trim),
                                   sorted.end() - static_cast<std::ptrdiff_t>(trim), 0.0) /
                   static_cast<double>(n - 2 * trim);

  if (kind.metric == Metric::Expected) {
    // Summation in trial order so the result does not depend on sorting.
    const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double g : gaps) ss += (g - mean) * (g - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(static_cast<double>(n));
    e.point = mean;
    e.ci_lo = mean - half;
    e.ci_hi = mean + half;
  } else {
    const double p = 1.0 - kind.delta;
    e.point = sorted[quantile_rank(n, p) - 1];
    const auto [lo, hi] = quantile_ci_ranks(n, p);
    e.ci_lo = std::min(e.point, sorted[static_cast<std::size_t>(std::clamp<long long>(lo, 1, n)) - 1]);
    e.ci_hi = std::max(e.point, sorted[static_cast<std::size_t>(std::clamp<long long>(hi, 1, n)) - 1]);
  }
  return e;
}

/// Minimum trial counts accepted by estimate_error.
inline void check_trial_count(long long trials, ErrorKind kind) {
  if (trials < 30) throw std::invalid_argument("estimate_error: need at least 30 trials");
  if (kind.metric == Metric::Quantile && static_cast<double>(trials) < 20.0 / kind.delta - 1e-9) {
    throw std::invalid_argument("estimate_error: the quantile at delta=" + format_double(kind.delta) + " needs at least " +
                                format_double(std::ceil(20.0 / kind.delta - 1e-9)) + " trials");
  }
}

/// Gap of each of `trials` runs; trial i uses seed derive_seed(seed, i).
inline std::vector<double> run_trials(const Instance& inst, const AlgorithmSpec& alg, long long T, long long trials,
                                      std::uint64_t seed, unsigned workers = 1) {
  if (trials < 1) throw std::invalid_argument("run_trials: need at least one trial");
  std::vector<double> gaps(static_cast<std::size_t>(trials));
  parallel_for(gaps.size(), workers, [&](std::size_t i) {
    const RunResult r = run_algorithm(inst, alg, T, derive_seed(seed, i));
    gaps[i] = gap(inst, r.x);
  });
  return gaps;
}

inline ErrorEstimate estimate_error(const Instance& inst, const AlgorithmSpec& alg, long long T, ErrorKind kind,
                                    long long trials, std::uint64_t seed, unsigned workers = 1,
                                    std::vector<double>* gaps_out = nullptr) {
  check_trial_count(trials, kind);
  std::vector<double> gaps = run_trials(inst, alg, T, trials, seed, workers);
  ErrorEstimate e = summarize_gaps(gaps, kind, seed);
  if (gaps_out) *gaps_out = std::move(gaps);
  return e;
}

// ---------------------------------------------------------------------------

/// The meta-class box {I^{L,R} : L in [l_lo, ell], R in [r_lo, rho]}.
struct MetaClass {
  ClassKind kind = ClassKind::Lip;
  double l_lo = 1.0;
  double ell = 1.0;
  double r_lo = 1.0;
  double rho = 1.0;

  /// Lip instances also belong to the SM-Lip classes.
  bool contains(const ClassDescriptor& t) const noexcept {
    constexpr double kRel = 1e-12;
    if (kind == ClassKind::Lip && t.kind != ClassKind::Lip) return false;
    return t.L >= l_lo * (1 - kRel) && t.L <= ell * (1 + kRel) && t.R >= r_lo * (1 - kRel) && t.R <= rho * (1 + kRel);
  }
};

struct PoARow {
  std::string instance_id;
  ClassDescriptor tag;
  ErrorEstimate estimate;
  ReferenceRate reference;
  double ratio = 0.0;
  double ratio_lo = 0.0;
  double ratio_hi = 0.0;
  bool straddles_one = false;  ///< the ratio's CI contains 1
  std::uint64_t seed = 0;
};

struct PoAReport {
  std::string algorithm;
  MetaClass meta;
  long long T = 0;
  ErrorKind kind;
  long long trials = 0;
  std::uint64_t seed = 0;
  std::vector<PoARow> rows;
  double poa_estimate = 0.0;
  std::size_t argmax = 0;
};

/// Row seed for the i-th instance of a sweep; shared by all algorithms.
inline std::uint64_t row_seed(std::uint64_t seed, std::size_t row) { return derive_seed(seed, row); }

/// Fills poa_estimate/argmax from the rows. First index wins ties.
inline void finalize_report(PoAReport& rep) {
  rep.poa_estimate = 0.0;
  rep.argmax = 0;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    if (i == 0 || rep.rows[i].ratio > rep.poa_estimate) {
      rep.poa_estimate = rep.rows[i].ratio;
      rep.argmax = i;
    }
  }
}

inline PoARow make_row(const Instance& inst, ErrorEstimate est, long long T, std::uint64_t seed) {
  PoARow row{inst.id(), inst.class_tag(), est, reference_rate(inst.class_tag(), T, est.kind), 0.0, 0.0, 0.0, false, seed};
  row.ratio = est.point / row.reference.value;
  row.ratio_lo = est.ci_lo / row.reference.value;
  row.ratio_hi = est.ci_hi / row.reference.value;
  row.straddles_one = row.ratio_lo <= 1.0 && 1.0 <= row.ratio_hi;
  return row;
}

/// Error-to-reference ratios over a set of hard instances and their max.
/// gaps_out, when given, receives each row's per-trial gaps.
inline PoAReport poa_sweep(const MetaClass& meta, const AlgorithmSpec& alg, long long T, ErrorKind kind,
                           const std::vector<Instance>& instances, long long trials, std::uint64_t seed,
                           unsigned workers = 1, std::vector<std::vector<double>>* gaps_out = nullptr) {
  if (instances.empty()) throw std::invalid_argument("poa_sweep: empty instance set");
  for (const auto& inst : instances) {
    if (!meta.contains(inst.class_tag())) {
      throw std::invalid_argument("poa_sweep: instance " + inst.id() + " lies outside the meta-class");
    }
  }
  check_trial_count(trials, kind);
  PoAReport rep{alg.name, meta, T, kind, trials, seed, {}, 0.0, 0};
  if (gaps_out) gaps_out->clear();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::uint64_t s = row_seed(seed, i);
    std::vector<double> gaps;
    const ErrorEstimate est = estimate_error(instances[i], alg, T, kind, trials, s, workers, &gaps);
    rep.rows.push_back(make_row(instances[i], est, T, s));
    if (gaps_out) gaps_out->push_back(std::move(gaps));
  }
  finalize_report(rep);
  return rep;
}

struct ScalingCheck {
  bool equal = false;
  double max_abs_diff = 0.0;
  PoAReport shifted;  ///< alg on the scaled instances, box [l1,l2] x [r1,r2]
  PoAReport wrapped;  ///< scale_wrap(alg) on the base instances, box [1,l2/l1] x [1,r2/r1]
};

/// Tolerance on |a - b| / max(1, |a|, |b|) for two ratios to count as equal.
inline constexpr double kScalingTolerance = 1e-9;

/// Paired-seed comparison of the two sweeps related by rescaling. `base` lives
/// in the normalized box; its images under scale_instance(., l1, r1) live in the shifted one.
inline ScalingCheck scaling_equivalence_test(const AlgorithmSpec& alg, ClassKind kind, double l1, double l2, double r1,
                                             double r2, const std::vector<Instance>& base, long long T,
                                             ErrorKind metric, long long trials, std::uint64_t seed,
                                             unsigned workers = 1) {
  std::vector<Instance> scaled;
  for (const auto& b : base) scaled.push_back(scale_instance(b, l1, r1));
  ScalingCheck out;
  out.shifted = poa_sweep({kind, l1, l2, r1, r2}, alg, T, metric, scaled, trials, seed, workers);
  out.wrapped = poa_sweep({kind, 1.0, l2 / l1, 1.0, r2 / r1}, scale_wrap(alg, l1, r1), T, metric, base, trials, seed, workers);
  out.equal = true;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double a = out.shifted.rows[i].ratio;
    const double b = out.wrapped.rows[i].ratio;
    const double d = std::abs(a - b);
    out.max_abs_diff = std::max(out.max_abs_diff, d);
    if (d > kScalingTolerance * std::max({1.0, std::abs(a), std::abs(b)})) out.equal = false;
  }
  const double pa = out.shifted.poa_estimate, pb = out.wrapped.poa_estimate;
  if (std::abs(pa - pb) > kScalingTolerance * std::max({1.0, std::abs(pa), std::abs(pb)})) out.equal = false;
  return out;
}

}  // namespace poa
