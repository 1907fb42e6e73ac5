#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "poa/parallel.hpp"
#include "poa/rng.hpp"

namespace poa {

/// A request that cannot be served within the enumeration or memory budget.
class InfeasibleRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary entropy in nats.
inline double h2(double q) noexcept {
  if (q <= 0.0 || q >= 1.0) return 0.0;
  return -q * std::log(q) - (1.0 - q) * std::log1p(-q);
}

inline double entropy(std::span<const double> p) noexcept {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

/// Hidden V with a prior, observed through binary S_1..S_T. At each step the
/// policy picks a query from the current (unnormalized) posterior weights,
/// and S_t ~ Bernoulli(prob_one(v, query)).
struct BinaryChannelSpec {
  std::vector<double> prior;
  long long T = 0;
  std::function<double(std::size_t v, int query)> prob_one;
  /// Empty means the same query (0) at every step, i.e. i.i.d. observations given V.
  std::function<int(std::span<const double> weights, long long t)> policy;
};

/// Skewed binary test: V ~ Bernoulli(p), S_t i.i.d. Bernoulli((1 + (2V-1) eps)/2).
inline BinaryChannelSpec skewed_binary_channel(double p, double eps, long long T) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("skewed_binary_channel: p must lie in [0, 1]");
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("skewed_binary_channel: eps must lie in [0, 1]");
  if (T < 0) throw std::invalid_argument("skewed_binary_channel: T must be >= 0");
  return {{1.0 - p, p}, T, [eps](std::size_t v, int) { return (1.0 + (2.0 * static_cast<double>(v) - 1.0) * eps) / 2.0; }, {}};
}

/// eps = min{ sqrt(log((1-p)/p) / 8T), 1/2 }; zero when T = 0 is irrelevant since nothing is observed.
inline double skewed_test_epsilon(double p, long long T) {
  if (!(p > 0.0 && p <= 0.5)) throw std::invalid_argument("skewed_test_epsilon: p must lie in (0, 1/2]");
  if (T < 1) return 0.5;
  return std::clamp(std::sqrt(std::log((1.0 - p) / p) / (8.0 * static_cast<double>(T))), 0.0, 0.5);
}

// ---------------------------------------------------------------------------
// Noisy binary search. V is uniform on {1..n} (stored 0-based). Querying coin
// i in {1..n-1} yields S = 1 with probability (1+eps)/2 when i >= V and
// (1-eps)/2 otherwise, so each coin reports (noisily) whether V <= i.

enum class SearchPolicy { Bisection, FixedGrid, Random };

inline std::string_view to_string(SearchPolicy p) noexcept {
  switch (p) {
    case SearchPolicy::Bisection: return "bisection";
    case SearchPolicy::FixedGrid: return "fixed-grid";
    case SearchPolicy::Random: return "random";
  }
  return "?";
}

inline SearchPolicy parse_search_policy(std::string_view s) {
  if (s == "bisection" || s == "bisection-MAP") return SearchPolicy::Bisection;
  if (s == "fixed-grid" || s == "fixed_grid") return SearchPolicy::FixedGrid;
  if (s == "random") return SearchPolicy::Random;
  throw std::invalid_argument("unknown search policy '" + std::string(s) + "'");
}

/// eps = min{ sqrt(log n / 4T), 1 }.
inline double search_epsilon(long long n, long long T) {
  if (n < 2 || T < 1) throw std::invalid_argument("search_epsilon: need n >= 2, T >= 1");
  return std::min(std::sqrt(std::log(static_cast<double>(n)) / (4.0 * static_cast<double>(T))), 1.0);
}

inline double coin_prob_one(std::size_t v0, int coin, double eps) noexcept {
  return static_cast<std::size_t>(coin) > v0 ? (1.0 + eps) / 2.0 : (1.0 - eps) / 2.0;
}

/// Coin whose posterior CDF P(V <= i) is closest to 1/2; the first one on ties.
inline int bisection_query(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cdf = 0.0, best = std::numeric_limits<double>::infinity();
  int arg = 1;
  for (std::size_t i = 1; i < weights.size(); ++i) {
    cdf += weights[i - 1];
    const double d = std::abs(cdf / total - 0.5);
    if (d < best) {
      best = d;
      arg = static_cast<int>(i);
    }
  }
  return arg;
}

inline int fixed_grid_query(std::size_t n, long long t) {
  return 1 + static_cast<int>(static_cast<std::size_t>(t) % (n - 1));
}

/// Channel for exact enumeration. Only deterministic policies are enumerable.
inline BinaryChannelSpec noisy_binary_search_channel(std::size_t n, double eps, long long T, SearchPolicy policy) {
  if (n < 2) throw std::invalid_argument("noisy_binary_search_channel: n must be >= 2");
  BinaryChannelSpec spec{std::vector<double>(n, 1.0 / static_cast<double>(n)), T,
                         [eps](std::size_t v, int coin) { return coin_prob_one(v, coin, eps); }, {}};
  switch (policy) {
    case SearchPolicy::Bisection:
      spec.policy = [](std::span<const double> w, long long) { return bisection_query(w); };
      break;
    case SearchPolicy::FixedGrid:
      spec.policy = [n](std::span<const double>, long long t) { return fixed_grid_query(n, t); };
      break;
    case SearchPolicy::Random:
      throw std::invalid_argument("noisy_binary_search_channel: the random policy cannot be enumerated");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Exact enumeration.

namespace detail {
// Neumaier compensated summation.
struct CompensatedSum {
  double sum = 0.0, c = 0.0;
  void add(double x) noexcept {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const noexcept { return sum + c; }
};
}  // namespace detail

struct EnumerationResult {
  double H_V = 0.0;
  double mutual_information = 0.0;  ///< I(V; S_1..S_T), nats
  double map_error = 0.0;           ///< error of the Bayes-optimal estimator
};

inline void check_enumerable(const BinaryChannelSpec& spec) {
  const std::size_t m = spec.prior.size();
  if (m < 1) throw std::invalid_argument("enumerate_channel: empty prior");
  if (spec.T < 0) throw std::invalid_argument("enumerate_channel: T must be >= 0");
  const long long cap = m <= 2 ? 24 : (m <= 64 ? 16 : -1);
  if (spec.T > cap) {
    throw InfeasibleRequest("enumerate_channel: 2^" + std::to_string(spec.T) + " sequences x " + std::to_string(m) +
                            " hypotheses exceeds the enumeration budget");
  }
}

/// Enumerates every observation sequence. Joint weights prior(v) P(s_1..s_t | v)
/// are carried in log space when T > 16.
inline EnumerationResult enumerate_channel(const BinaryChannelSpec& spec) {
  check_enumerable(spec);
  const std::size_t m = spec.prior.size();
  const bool log_space = spec.T > 16;
  const double ninf = -std::numeric_limits<double>::infinity();

  EnumerationResult out;
  out.H_V = entropy(spec.prior);
  std::vector<double> log_prior(m);
  for (std::size_t v = 0; v < m; ++v) log_prior[v] = spec.prior[v] > 0 ? std::log(spec.prior[v]) : ninf;

  detail::CompensatedSum info, correct;
  // One weight vector per depth; level t holds the weights after t observations.
  std::vector<std::vector<double>> level(static_cast<std::size_t>(spec.T) + 1, std::vector<double>(m));
  level[0] = log_space ? log_prior : spec.prior;
  std::vector<double> linear(m);

  auto leaf = [&](const std::vector<double>& w) {
    if (log_space) {
      const double mx = *std::max_element(w.begin(), w.end());
      if (mx == ninf) return;
      double s = 0.0;
      for (double x : w) s += std::exp(x - mx);
      const double lp = mx + std::log(s);
      for (std::size_t v = 0; v < m; ++v) {
        if (w[v] != ninf) info.add(std::exp(w[v]) * (w[v] - lp - log_prior[v]));
      }
      correct.add(std::exp(mx));
    } else {
      const double p = std::accumulate(w.begin(), w.end(), 0.0);
      if (p <= 0.0) return;
      for (std::size_t v = 0; v < m; ++v) {
        if (w[v] > 0.0) info.add(w[v] * std::log(w[v] / (p * spec.prior[v])));
      }
      correct.add(*std::max_element(w.begin(), w.end()));
    }
  };

  std::function<void(long long)> dfs = [&](long long t) {
    const auto& w = level[static_cast<std::size_t>(t)];
    if (t == spec.T) {
      leaf(w);
      return;
    }
    int query = 0;
    if (spec.policy) {
      if (log_space) {
        const double mx = *std::max_element(w.begin(), w.end());
        for (std::size_t v = 0; v < m; ++v) linear[v] = std::exp(w[v] - mx);
        query = spec.policy(linear, t);
      } else {
        query = spec.policy(w, t);
      }
    }
    auto& next = level[static_cast<std::size_t>(t) + 1];
    for (int s = 0; s <= 1; ++s) {
      bool alive = false;
      for (std::size_t v = 0; v < m; ++v) {
        const double q1 = spec.prob_one(v, query);
        const double ps = s == 1 ? q1 : 1.0 - q1;
        if (log_space) {
          next[v] = ps > 0.0 ? w[v] + std::log(ps) : ninf;
          alive = alive || next[v] != ninf;
        } else {
          next[v] = w[v] * ps;
          alive = alive || next[v] > 0.0;
        }
      }
      if (alive) dfs(t + 1);
    }
  };
  dfs(0);
  out.mutual_information = std::max(0.0, info.value());
  out.map_error = std::clamp(1.0 - correct.value(), 0.0, 1.0);
  return out;
}

inline double exact_mutual_information(const BinaryChannelSpec& spec) { return enumerate_channel(spec).mutual_information; }

inline double map_error(const BinaryChannelSpec& spec) { return enumerate_channel(spec).map_error; }

/// Error of "guess V = 1 iff at least tau ones were seen" on the skewed test.
inline double threshold_estimator_error(double p, double eps, long long T, long long tau) {
  const double q0 = (1.0 - eps) / 2.0, q1 = (1.0 + eps) / 2.0;
  double err = 0.0;
  for (long long k = 0; k <= T; ++k) {
    const double lc = std::lgamma(static_cast<double>(T) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                      std::lgamma(static_cast<double>(T - k) + 1);
    auto binom = [&](double q) {
      if (q <= 0.0) return k == 0 ? 1.0 : 0.0;
      if (q >= 1.0) return k == T ? 1.0 : 0.0;
      return std::exp(lc + static_cast<double>(k) * std::log(q) + static_cast<double>(T - k) * std::log1p(-q));
    };
    err += k >= tau ? (1.0 - p) * binom(q0) : p * binom(q1);
  }
  return err;
}

// ---------------------------------------------------------------------------
// Bounds.

/// T (log 2 - h2((1-eps)/2)): the most information T binary observations with
/// |P(S_t=0 | past, V) - 1/2| <= eps/2 can carry, over all query policies.
inline double channel_capacity_bound(double eps, long long T) {
  return static_cast<double>(T) * std::max(0.0, std::log(2.0) - h2((1.0 - eps) / 2.0));
}

inline double general_information_bound(double eps, long long T) { return eps * eps * static_cast<double>(T); }

inline double skewed_information_bound(double p, double eps, long long T) {
  return 4.0 * p * eps * eps * static_cast<double>(T);
}

/// Smallest q in [0, 1 - 1/n] with h2(q) + q log(n - 1) >= H_V - I.
inline double fano_floor_exact(double H_V, double I, long long n) {
  if (n < 2) throw std::invalid_argument("fano_floor: n must be >= 2");
  const double target = H_V - I;
  if (target <= 0.0) return 0.0;
  const double lm = std::log(static_cast<double>(n - 1));
  auto phi = [&](double q) { return h2(q) + q * lm; };
  double lo = 0.0, hi = 1.0 - 1.0 / static_cast<double>(n);
  if (phi(hi) <= target) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) >= target ? hi : lo) = mid;
  }
  return hi;
}

/// Lower bound on any estimator's error. For n = 2 this is the exact Fano
/// form; otherwise max{0, 1 - (I + log 2) / log n}.
inline double fano_floor(double H_V, double I, long long n) {
  if (n < 2) throw std::invalid_argument("fano_floor: n must be >= 2");
  if (n == 2) return fano_floor_exact(H_V, I, 2);
  return std::max(0.0, 1.0 - (I + std::log(2.0)) / std::log(static_cast<double>(n)));
}

struct EntropyReport {
  double p = 0.0;
  long long T = 0;
  double eps = 0.0;
  double H_V = 0.0;
  double I_exact = 0.0;
  double bound_general = 0.0;  ///< eps^2 T
  double bound_skewed = 0.0;   ///< 4 p eps^2 T
  double bound = 0.0;          ///< the smaller of the two
  double map_error = 0.0;
  double fano_floor = 0.0;
  double threshold_error = 0.0;  ///< best threshold-count estimator, for comparison with MAP
};

/// Full report for the skewed test at (p, T) with its prescribed eps.
inline EntropyReport skewed_test_report(double p, long long T) {
  EntropyReport r;
  r.p = p;
  r.T = T;
  r.eps = skewed_test_epsilon(p, T);
  const auto e = enumerate_channel(skewed_binary_channel(p, r.eps, T));
  r.H_V = e.H_V;
  r.I_exact = e.mutual_information;
  r.bound_general = general_information_bound(r.eps, T);
  r.bound_skewed = skewed_information_bound(p, r.eps, T);
  r.bound = std::min(r.bound_general, r.bound_skewed);
  r.map_error = e.map_error;
  r.fano_floor = fano_floor(r.H_V, r.I_exact, 2);
  r.threshold_error = 1.0;
  for (long long tau = 0; tau <= T + 1; ++tau) r.threshold_error = std::min(r.threshold_error, threshold_estimator_error(p, r.eps, T, tau));
  return r;
}

// ---------------------------------------------------------------------------
// Monte-Carlo noisy binary search with exact posterior updates.

struct SearchResult {
  long long n = 0;
  long long T = 0;
  double eps = 0.0;
  SearchPolicy policy = SearchPolicy::Bisection;
  long long trials = 0;
  double error = 0.0;          ///< MAP error frequency
  double error_ci_half = 0.0;  ///< 1.96 standard errors
  /// Rao-Blackwellized estimate of I(V; S_1..S_T):
  /// E[sum_t h2(P(S_t = 1 | past))] - T h2((1-eps)/2).
  double information = 0.0;
  double information_ci_half = 0.0;
};

inline SearchResult noisy_binary_search_error(long long n, long long T, SearchPolicy policy, long long trials,
                                              std::uint64_t seed, unsigned workers = 1, double eps = -1.0) {
  if (n < 2) throw std::invalid_argument("noisy_binary_search_error: n must be >= 2");
  if (T < 1) throw std::invalid_argument("noisy_binary_search_error: T must be >= 1");
  if (trials < 1) throw std::invalid_argument("noisy_binary_search_error: trials must be >= 1");
  if (eps < 0.0) eps = search_epsilon(n, T);
  if (eps > 1.0) throw std::invalid_argument("noisy_binary_search_error: eps must lie in [0, 1]");
  const std::size_t nn = static_cast<std::size_t>(n);
  const double base = h2((1.0 - eps) / 2.0);

  std::vector<unsigned char> wrong(static_cast<std::size_t>(trials));
  std::vector<double> info(static_cast<std::size_t>(trials));
  parallel_for(wrong.size(), workers, [&](std::size_t trial) {
    const std::uint64_t ts = derive_seed(seed, trial);
    CounterRng samples(stream_seed(ts, Stream::Samples));
    CounterRng xi(stream_seed(ts, Stream::Xi));
    const std::size_t v = std::min(nn - 1, static_cast<std::size_t>(samples.uniform() * static_cast<double>(n)));
    std::vector<double> post(nn, 1.0 / static_cast<double>(n));
    double acc = 0.0;
    for (long long t = 0; t < T; ++t) {
      int coin = 1;
      switch (policy) {
        case SearchPolicy::Bisection: coin = bisection_query(post); break;
        case SearchPolicy::FixedGrid: coin = fixed_grid_query(nn, t); break;
        case SearchPolicy::Random:
          coin = 1 + static_cast<int>(std::min<double>(static_cast<double>(n - 2), std::floor(xi.uniform() * static_cast<double>(n - 1))));
          break;
      }
      double below = 0.0;  // P(V <= coin | past)
      for (std::size_t j = 0; j < static_cast<std::size_t>(coin); ++j) below += post[j];
      acc += h2((1.0 - eps) / 2.0 + eps * below);
      const int s = samples.uniform() < coin_prob_one(v, coin, eps) ? 1 : 0;
      double z = 0.0;
      for (std::size_t j = 0; j < nn; ++j) {
        const double q1 = coin_prob_one(j, coin, eps);
        post[j] *= s == 1 ? q1 : 1.0 - q1;
        z += post[j];
      }
      for (double& x : post) x /= z;
    }
    const auto best = static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin());
    wrong[trial] = best != v;
    info[trial] = acc - static_cast<double>(T) * base;
  });

  SearchResult r{n, T, eps, policy, trials, 0.0, 0.0, 0.0, 0.0};
  const double N = static_cast<double>(trials);
  double errs = 0.0;
  for (unsigned char w : wrong) errs += w;
  r.error = errs / N;
  r.error_ci_half = 1.96 * std::sqrt(r.error * (1.0 - r.error) / N);
  r.information = std::accumulate(info.begin(), info.end(), 0.0) / N;
  double ss = 0.0;
  for (double x : info) ss += (x - r.information) * (x - r.information);
  r.information_ci_half = trials > 1 ? 1.96 * std::sqrt(ss / (N - 1.0) / N) : 0.0;
  return r;
}

}  // namespace poa
