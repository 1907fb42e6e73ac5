#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poa/format.hpp"
#include "poa/instance.hpp"
#include "poa/spec_string.hpp"

namespace poa {

// ---------------------------------------------------------------------------
// Coin-bias pair: f(x;0) = |x|, f(x;1) = |x - rho|, P_v = Bernoulli((1+(2v-1)eps)/2).
// v = 0 lives in I_Lip^{1,1}, v = 1 in I_Lip^{1,rho}.

struct CoinBiasParams {
  double rho = 1.0;
  long long T = 1;
  int v = 0;
  /// Overrides the derived bias; used to pin examples independent of T.
  std::optional<double> epsilon_override;

  void validate() const {
    if (!(rho >= 1.0) || !std::isfinite(rho)) throw std::invalid_argument("coin_bias: rho must be >= 1");
    if (T < 1) throw std::invalid_argument("coin_bias: T must be >= 1");
    if (v != 0 && v != 1) throw std::invalid_argument("coin_bias: v must be 0 or 1");
    if (epsilon_override && !(*epsilon_override >= 0.0 && *epsilon_override <= 0.5)) {
      throw std::invalid_argument("coin_bias: eps must lie in [0, 1/2]");
    }
  }

  /// min{ sqrt(log(rho) / 8T), 1/2 }
  double epsilon() const {
    if (epsilon_override) return *epsilon_override;
    return std::clamp(std::sqrt(std::log(rho) / (8.0 * static_cast<double>(T))), 0.0, 0.5);
  }
};

inline Instance make_coin_bias(const CoinBiasParams& p) {
  p.validate();
  const double eps = p.epsilon();
  const double p1 = (1.0 + (2 * p.v - 1) * eps) / 2.0;
  Coordinate c{FiniteDistribution::bernoulli(p1),
               {PiecewiseLinear::absolute(1.0, 0.0), PiecewiseLinear::absolute(1.0, p.rho)}};
  Interval m;
  if (eps == 0.0) {
    m = {0.0, p.rho};
  } else {
    m = p.v == 0 ? Interval{0.0, 0.0} : Interval{p.rho, p.rho};
  }
  std::string id = "coin_bias(rho=" + format_double(p.rho) + ",T=" + std::to_string(p.T) + ",v=" + std::to_string(p.v);
  if (p.epsilon_override) id += ",eps=" + format_double(*p.epsilon_override);
  id += ")";
  const ClassDescriptor tag(ClassKind::Lip, 1.0, p.v == 0 ? 1.0 : p.rho);
  return Instance(std::move(id), tag, {std::move(c)}, {m});
}

// ---------------------------------------------------------------------------
// Noisy-binary-search family: f_k(x;-1) = -x, f_k(x;0) = |x - r_k|, f_k(x;1) = x,
// P(+-1) = (1-eps)/2, P(0) = eps, r_k = e^{k-1}; gap(x) = eps |x - r_k|.

struct NoisyBinarySearchParams {
  double rho = 1.0;
  long long T = 1;
  long long k = 1;
  std::optional<double> epsilon_override;

  /// ceil(log rho). The tiny offset absorbs log(exp(m)) rounding above m.
  long long n() const { return static_cast<long long>(std::ceil(std::log(rho) - 1e-12)); }

  double r_k() const { return std::exp(static_cast<double>(k - 1)); }

  /// min{ sqrt(log(n) / 4T), 1 }
  double epsilon() const {
    if (epsilon_override) return *epsilon_override;
    const double nn = static_cast<double>(n());
    if (nn <= 1.0) return 0.0;
    return std::clamp(std::sqrt(std::log(nn) / (4.0 * static_cast<double>(T))), 0.0, 1.0);
  }

  void validate() const {
    if (!(rho > 1.0) || !std::isfinite(rho)) throw std::invalid_argument("noisy_binary_search: rho must be > 1");
    if (T < 1) throw std::invalid_argument("noisy_binary_search: T must be >= 1");
    if (k < 1 || k > n()) {
      throw std::invalid_argument("noisy_binary_search: k=" + std::to_string(k) + " outside [1, n=" +
                                  std::to_string(n()) + "]");
    }
    if (epsilon_override && !(*epsilon_override >= 0.0 && *epsilon_override <= 1.0)) {
      throw std::invalid_argument("noisy_binary_search: eps must lie in [0, 1]");
    }
  }
};

inline Instance make_noisy_binary_search(const NoisyBinarySearchParams& p) {
  p.validate();
  const double eps = p.epsilon();
  const double side = (1.0 - eps) / 2.0;
  const double rk = p.r_k();
  Coordinate c{FiniteDistribution({-1, 0, 1}, {side, eps, side}),
               {PiecewiseLinear::linear(-1.0), PiecewiseLinear::absolute(1.0, rk), PiecewiseLinear::linear(1.0)}};
  std::string id = "noisy_binary_search(rho=" + format_double(p.rho) + ",T=" + std::to_string(p.T) +
                   ",k=" + std::to_string(p.k);
  if (p.epsilon_override) id += ",eps=" + format_double(*p.epsilon_override);
  id += ")";
  // With eps = 0 the objective is identically zero and every point is optimal;
  // the class tag still certifies via the point r_k.
  const Interval m = eps == 0.0 ? Interval{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()}
                                : Interval{rk, rk};
  return Instance(std::move(id), ClassDescriptor(ClassKind::Lip, 1.0, rk), {std::move(c)}, {m});
}

// ---------------------------------------------------------------------------
// Rare-event pair: f(x;0) = alpha |x - rho|, f(x;1) = (2 alpha T / lambda) |x|,
// P_v = Bernoulli(v lambda / T).

struct RareEventParams {
  double ell = 1.0;
  double rho = 1.0;
  long long T = 1;
  double delta = 0.05;
  int v = 0;
  ClassKind kind = ClassKind::Lip;

  /// min{ log_4(1/(2 delta)), T/2 }
  double lambda() const {
    return std::min(std::log(1.0 / (2.0 * delta)) / std::log(4.0), static_cast<double>(T) / 2.0);
  }

  /// Lip: min{1, (lambda/2T) min(ell, rho)};  SM-Lip: min{1, sqrt(lambda/5T) min(ell, rho)}.
  double alpha() const {
    const double m = std::min(ell, rho);
    const double t = static_cast<double>(T);
    if (kind == ClassKind::Lip) return std::min(1.0, lambda() / (2.0 * t) * m);
    return std::min(1.0, std::sqrt(lambda() / (5.0 * t)) * m);
  }

  /// Slope of the rare heavy outcome, 2 alpha T / lambda.
  double heavy_slope() const { return 2.0 * alpha() * static_cast<double>(T) / lambda(); }

  void validate() const {
    if (!(ell >= 1.0) || !std::isfinite(ell)) throw std::invalid_argument("rare_event: ell must be >= 1");
    if (!(rho >= 1.0) || !std::isfinite(rho)) throw std::invalid_argument("rare_event: rho must be >= 1");
    if (T < 1) throw std::invalid_argument("rare_event: T must be >= 1");
    if (!(delta > 0.0 && delta < 1.0 / 3.0)) throw std::invalid_argument("rare_event: delta must lie in (0, 1/3)");
    if (v != 0 && v != 1) throw std::invalid_argument("rare_event: v must be 0 or 1");
  }
};

inline Instance make_rare_event(const RareEventParams& p) {
  p.validate();
  const double lam = p.lambda();
  const double a = p.alpha();
  const double p1 = p.v == 1 ? lam / static_cast<double>(p.T) : 0.0;
  Coordinate c{FiniteDistribution::bernoulli(p1),
               {PiecewiseLinear::absolute(a, p.rho), PiecewiseLinear::absolute(p.heavy_slope(), 0.0)}};
  const Interval m = p.v == 0 ? Interval{p.rho, p.rho} : Interval{0.0, 0.0};
  const ClassDescriptor tag = p.v == 0 ? ClassDescriptor(p.kind, 1.0, p.rho)
                                       : ClassDescriptor(p.kind, std::min(p.ell, p.rho), 1.0);
  std::string id = "rare_event(ell=" + format_double(p.ell) + ",rho=" + format_double(p.rho) +
                   ",T=" + std::to_string(p.T) + ",delta=" + format_double(p.delta) + ",v=" + std::to_string(p.v) +
                   ",kind=" + std::string(to_string(p.kind)) + ")";
  return Instance(std::move(id), tag, {std::move(c)}, {m});
}

// ---------------------------------------------------------------------------
// Anti-boosting product: k independent copies of f(x;0) = L|x|, f(x;1) = L|x - R|
// with P_{v_i} = Bernoulli((1+(2v_i-1)eps)/2), combined as
// f~(x, s) = k^{-3/2} sum_i f(x_i sqrt(k); s_i).

struct ProductParams {
  double L = 1.0;
  double R = 1.0;
  double delta = 0.2;
  long long T = 1;
  long long k = 4;
  std::vector<int> v;  ///< one bit per copy; empty means all zeros

  /// min{ sqrt(log((1-p)/p) / 8T), 1/2 } with p = 2 delta.
  double epsilon() const {
    const double pp = 2.0 * delta;
    return std::clamp(std::sqrt(std::log((1.0 - pp) / pp) / (8.0 * static_cast<double>(T))), 0.0, 0.5);
  }

  void validate() const {
    if (!(L > 0) || !(R > 0)) throw std::invalid_argument("product_b2: L and R must be positive");
    if (!(delta > 0.0 && delta <= 0.25)) throw std::invalid_argument("product_b2: delta must lie in (0, 1/4]");
    if (T < 1) throw std::invalid_argument("product_b2: T must be >= 1");
    if (k < 1) throw std::invalid_argument("product_b2: k must be >= 1");
    if (!v.empty() && static_cast<long long>(v.size()) != k) {
      throw std::invalid_argument("product_b2: need exactly k bits in v");
    }
    for (int b : v) {
      if (b != 0 && b != 1) throw std::invalid_argument("product_b2: v bits must be 0 or 1");
    }
  }
};

inline Instance make_product_instance(const ProductParams& p) {
  p.validate();
  const double eps = p.epsilon();
  const double kk = static_cast<double>(p.k);
  const double outer = 1.0 / (kk * std::sqrt(kk));  // k^{-3/2}
  const double inner = std::sqrt(kk);
  const PiecewiseLinear at_zero = PiecewiseLinear::absolute(p.L, 0.0).composed(outer, inner);
  const PiecewiseLinear at_r = PiecewiseLinear::absolute(p.L, p.R).composed(outer, inner);
  const double target = at_r.breakpoints().front();  // R / sqrt(k)

  std::vector<Coordinate> coords;
  std::vector<Interval> mins;
  std::string bits;
  for (long long i = 0; i < p.k; ++i) {
    const int vi = p.v.empty() ? 0 : p.v[static_cast<std::size_t>(i)];
    bits += static_cast<char>('0' + vi);
    coords.push_back(Coordinate{FiniteDistribution::bernoulli((1.0 + (2 * vi - 1) * eps) / 2.0), {at_zero, at_r}});
    if (eps == 0.0) {
      mins.push_back({0.0, target});
    } else {
      mins.push_back(vi == 0 ? Interval{0.0, 0.0} : Interval{target, target});
    }
  }
  std::string id = "product_b2(L=" + format_double(p.L) + ",R=" + format_double(p.R) + ",delta=" +
                   format_double(p.delta) + ",T=" + std::to_string(p.T) + ",k=" + std::to_string(p.k) + ",v=" + bits + ")";
  return Instance(std::move(id), ClassDescriptor(ClassKind::Lip, p.L, p.R), std::move(coords), std::move(mins));
}

// ---------------------------------------------------------------------------
// Lookup by spec string, e.g. "coin_bias(rho=e^2, T=800, v=1)". A missing T
// is filled from `default_T` when given.

struct FactorySchema {
  std::string name;
  std::string parameters;
};

inline std::vector<FactorySchema> instance_factories() {
  return {{"coin_bias", "rho>=1, T>=1, v in {0,1} [, eps in [0,1/2]]"},
          {"noisy_binary_search", "rho>1, T>=1, k in [1, ceil(log rho)] [, eps in [0,1]]"},
          {"rare_event", "ell>=1, rho>=1, T>=1, delta in (0,1/3), v in {0,1}, kind in {Lip, SM-Lip}"},
          {"product_b2", "L>0, R>0, T>=1 [, delta in (0,1/4] = 0.2] [, k>=1 = 4] [, v=<k bits> = 0...0]"}};
}

inline Instance make_instance(const std::string& text, std::optional<long long> default_T = std::nullopt) {
  const SpecString s = parse_spec_string(text);
  auto horizon = [&] {
    if (s.has("T")) return s.integer("T");
    if (default_T) return *default_T;
    throw std::invalid_argument(s.name + ": missing parameter 'T'");
  };
  auto bit = [&](const std::string& key) {
    const long long b = s.integer(key);
    if (b != 0 && b != 1) throw std::invalid_argument(s.name + "." + key + ": expected 0 or 1");
    return static_cast<int>(b);
  };
  if (s.name == "coin_bias") {
    s.require_only({"rho", "T", "v", "eps"});
    CoinBiasParams p{s.number("rho"), horizon(), bit("v"), std::nullopt};
    if (s.has("eps")) p.epsilon_override = s.number("eps");
    return make_coin_bias(p);
  }
  if (s.name == "noisy_binary_search") {
    s.require_only({"rho", "T", "k", "eps"});
    NoisyBinarySearchParams p{s.number("rho"), horizon(), s.integer("k"), std::nullopt};
    if (s.has("eps")) p.epsilon_override = s.number("eps");
    return make_noisy_binary_search(p);
  }
  if (s.name == "rare_event") {
    s.require_only({"ell", "rho", "T", "delta", "v", "kind"});
    RareEventParams p{s.number("ell"), s.number("rho"), horizon(), s.number("delta"), bit("v"),
                      s.has("kind") ? parse_class_kind(s.text("kind")) : ClassKind::Lip};
    return make_rare_event(p);
  }
  if (s.name == "product_b2") {
    s.require_only({"L", "R", "delta", "T", "k", "v"});
    ProductParams p{s.number("L"), s.number("R"), s.number_or("delta", 0.2), horizon(), s.integer_or("k", 4), {}};
    if (s.has("v")) {
      for (char c : s.text("v")) {
        if (c != '0' && c != '1') throw std::invalid_argument("product_b2.v: expected a string of bits");
        p.v.push_back(c - '0');
      }
    }
    return make_product_instance(p);
  }
  throw std::invalid_argument("unknown instance factory '" + s.name + "'");
}

}  // namespace poa
