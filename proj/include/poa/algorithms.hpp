#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "poa/format.hpp"
#include "poa/instance.hpp"
#include "poa/oracle.hpp"
#include "poa/spec_string.hpp"

namespace poa {

/// Runs one trial: consumes the oracle and writes the output point.
using AlgorithmImpl = std::function<void(Oracle&, std::span<double>)>;

struct AlgorithmSpec {
  std::string name;
  Access access = Access::SFO;
  std::map<std::string, double> hyperparameters;
  AlgorithmImpl impl;
};

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Euclidean projection onto {|x| <= radius}.
inline void project_ball(std::span<double> x, double radius) {
  const double n = norm2(x);
  if (n > radius) {
    const double c = radius / n;
    for (double& xi : x) xi *= c;
  }
}

inline void require_positive(const std::map<std::string, double>& h, const std::string& who) {
  for (const auto& [k, v] : h) {
    if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument(who + ": " + k + " must be positive");
  }
}

// Shared loop for the averaged first-order methods. `step` maps (x, g, t) to
// the next iterate in place.
template <class Step>
void first_order_loop(Oracle& o, std::span<double> out, bool last_iterate, Step&& step) {
  const std::size_t d = o.dimension();
  const long long T = o.horizon();
  std::vector<double> x(d, 0.0), g(d, 0.0), sum(d, 0.0);
  for (long long t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < d; ++i) sum[i] += x[i];
    o.next_gradient(x, g);
    step(std::span<double>(x), std::span<const double>(g), t);
  }
  for (std::size_t i = 0; i < d; ++i) out[i] = last_iterate ? x[i] : sum[i] / static_cast<double>(T);
}

}  // namespace detail

/// Fixed-step SGD x_{t+1} = x_t - eta g_t, output the average of x_0..x_{T-1}.
inline AlgorithmSpec sgd_fixed(double eta, bool last_iterate = false) {
  AlgorithmSpec a{"sgd_fixed(eta=" + format_double(eta) + (last_iterate ? ",last=1" : "") + ")", Access::SFO, {{"eta", eta}}, {}};
  detail::require_positive(a.hyperparameters, "sgd_fixed");
  a.impl = [eta, last_iterate](Oracle& o, std::span<double> out) {
    detail::first_order_loop(o, out, last_iterate, [eta](std::span<double> x, std::span<const double> g, long long) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * g[i];
    });
  };
  return a;
}

/// Fixed-step SGD tuned for (L, R): eta = R / (L sqrt(T)), T taken from the oracle.
inline AlgorithmSpec sgd_fixed_tuned(double L, double R, bool last_iterate = false) {
  AlgorithmSpec a{"sgd_fixed(L=" + format_double(L) + ",R=" + format_double(R) + (last_iterate ? ",last=1" : "") + ")",
                  Access::SFO, {{"L", L}, {"R", R}}, {}};
  detail::require_positive(a.hyperparameters, "sgd_fixed");
  a.impl = [L, R, last_iterate](Oracle& o, std::span<double> out) {
    const double eta = R / (L * std::sqrt(static_cast<double>(o.horizon())));
    detail::first_order_loop(o, out, last_iterate, [eta](std::span<double> x, std::span<const double> g, long long) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * g[i];
    });
  };
  return a;
}

/// AdaGrad-norm SGD projected onto the ball of radius D:
/// eta_t = D sqrt(2) / sqrt(sum_{s<=t} |g_s|^2); no move while the sum is zero.
inline AlgorithmSpec adagrad_norm_sgd(double D, bool last_iterate = false) {
  AlgorithmSpec a{"adagrad_norm_sgd(D=" + format_double(D) + (last_iterate ? ",last=1" : "") + ")", Access::SFO, {{"D", D}}, {}};
  detail::require_positive(a.hyperparameters, "adagrad_norm_sgd");
  a.impl = [D, last_iterate](Oracle& o, std::span<double> out) {
    double acc = 0.0;
    detail::first_order_loop(o, out, last_iterate, [&acc, D](std::span<double> x, std::span<const double> g, long long) {
      for (double gi : g) acc += gi * gi;
      if (acc == 0.0) return;
      const double eta = D * std::sqrt(2.0) / std::sqrt(acc);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * g[i];
      detail::project_ball(x, D);
      if (detail::norm2(x) > D * (1 + 1e-12)) throw std::logic_error("adagrad_norm_sgd: iterate left the ball");
    });
  };
  return a;
}

struct ClippedSgdParameters {
  double eta;
  double G_clip;
};

/// eta = R / (L sqrt(T)), G_clip = L sqrt(T) / sqrt(log(1/delta)).
inline ClippedSgdParameters clipped_sgd_parameters(double L, double R, double delta, long long T) {
  const double rt = std::sqrt(static_cast<double>(T));
  return {R / (L * rt), L * rt / std::sqrt(std::log(1.0 / delta))};
}

/// g / max{1, |g| / G}.
inline void clip_gradient(std::span<double> g, double G) {
  const double n = detail::norm2(g);
  const double c = std::max(1.0, n / G);
  for (double& gi : g) gi /= c;
}

/// Projected SGD on clipped gradients, projection onto {|x - x_0| <= R} with x_0 = 0.
inline AlgorithmSpec clipped_sgd(double L, double R, double delta, bool last_iterate = false) {
  if (!(delta > 0 && delta < 0.5)) throw std::invalid_argument("clipped_sgd: delta must lie in (0, 1/2)");
  AlgorithmSpec a{"clipped_sgd(L=" + format_double(L) + ",R=" + format_double(R) + ",delta=" + format_double(delta) +
                      (last_iterate ? ",last=1" : "") + ")",
                  Access::SFO, {{"L", L}, {"R", R}, {"delta", delta}}, {}};
  detail::require_positive(a.hyperparameters, "clipped_sgd");
  a.impl = [L, R, delta, last_iterate](Oracle& o, std::span<double> out) {
    const auto p = clipped_sgd_parameters(L, R, delta, o.horizon());
    std::vector<double> gc(o.dimension());
    detail::first_order_loop(o, out, last_iterate, [&](std::span<double> x, std::span<const double> g, long long) {
      std::copy(g.begin(), g.end(), gc.begin());
      clip_gradient(gc, p.G_clip);
      if (detail::norm2(gc) > p.G_clip * (1 + 1e-12)) throw std::logic_error("clipped_sgd: clipped gradient exceeds G_clip");
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= p.eta * gc[i];
      detail::project_ball(x, R);
    });
  };
  return a;
}

/// Returns x_0 = 0 without querying the oracle.
inline AlgorithmSpec trivial_alg() {
  return {"trivial_alg", Access::SFO, {}, [](Oracle&, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }};
}

/// Runs `alg` on scale_instance(inst, l1, r1) under the same seeds and returns
/// its output divided by r1.
inline AlgorithmSpec scale_wrap(const AlgorithmSpec& alg, double l1, double r1) {
  if (!(l1 > 0) || !(r1 > 0)) throw std::invalid_argument("scale_wrap: l1 and r1 must be positive");
  AlgorithmSpec a{"scale_wrap(l1=" + format_double(l1) + ",r1=" + format_double(r1) + "," + alg.name + ")", alg.access,
                  alg.hyperparameters, {}};
  a.impl = [inner = alg.impl, l1, r1](Oracle& o, std::span<double> out) {
    const Instance scaled = scale_instance(o.instance(), l1, r1);
    Oracle child(scaled, o.horizon(), o.seed(), o.access());
    inner(child, out);
    for (double& x : out) x /= r1;
  };
  return a;
}

// ---------------------------------------------------------------------------
// Plug-ins and lookup by spec string.

namespace detail {
inline std::map<std::string, AlgorithmSpec>& plugin_table() {
  static std::map<std::string, AlgorithmSpec> table;
  return table;
}
inline std::mutex& plugin_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Registers an external optimizer. The callback runs under the same oracle
/// enforcement as the built-ins.
inline AlgorithmSpec register_plugin(const std::string& name, Access access, AlgorithmImpl stepper,
                                     std::map<std::string, double> hyperparameters = {}) {
  if (name.empty()) throw std::invalid_argument("register_plugin: empty name");
  if (!stepper) throw std::invalid_argument("register_plugin: empty callback");
  static const char* reserved[] = {"sgd_fixed", "adagrad_norm_sgd", "clipped_sgd", "trivial_alg", "scale_wrap"};
  for (const char* r : reserved) {
    if (name == r) throw std::invalid_argument("register_plugin: '" + name + "' is a built-in");
  }
  AlgorithmSpec a{name, access, std::move(hyperparameters), std::move(stepper)};
  std::lock_guard lock(detail::plugin_mutex());
  detail::plugin_table()[name] = a;
  return a;
}

inline std::vector<std::string> registered_plugins() {
  std::lock_guard lock(detail::plugin_mutex());
  std::vector<std::string> out;
  for (const auto& [k, v] : detail::plugin_table()) out.push_back(k);
  return out;
}

struct AlgorithmSchema {
  std::string name;
  std::string parameters;
};

inline std::vector<AlgorithmSchema> builtin_algorithms() {
  return {{"sgd_fixed", "eta=<real> | L=<real>,R=<real> [,last=1]"},
          {"adagrad_norm_sgd", "D=<real> [,last=1]"},
          {"clipped_sgd", "L=<real>,R=<real>,delta=<real in (0,1/2)> [,last=1]"},
          {"trivial_alg", "(none)"}};
}

/// Builds an algorithm from e.g. "clipped_sgd(L=10,R=1,delta=0.05)".
inline AlgorithmSpec make_algorithm(const std::string& text) {
  const SpecString s = parse_spec_string(text);
  const bool last = s.integer_or("last", 0) != 0;
  if (s.name == "sgd_fixed") {
    s.require_only({"eta", "L", "R", "last"});
    if (s.has("eta")) {
      if (s.has("L") || s.has("R")) throw std::invalid_argument("sgd_fixed: give eta or (L, R), not both");
      return sgd_fixed(s.number("eta"), last);
    }
    return sgd_fixed_tuned(s.number("L"), s.number("R"), last);
  }
  if (s.name == "adagrad_norm_sgd") {
    s.require_only({"D", "last"});
    return adagrad_norm_sgd(s.number("D"), last);
  }
  if (s.name == "clipped_sgd") {
    s.require_only({"L", "R", "delta", "last"});
    return clipped_sgd(s.number("L"), s.number("R"), s.number("delta"), last);
  }
  if (s.name == "trivial_alg") {
    s.require_only({});
    return trivial_alg();
  }
  {
    std::lock_guard lock(detail::plugin_mutex());
    const auto it = detail::plugin_table().find(s.name);
    if (it != detail::plugin_table().end()) {
      s.require_only({});
      return it->second;
    }
  }
  throw std::invalid_argument("unknown algorithm '" + s.name + "'");
}

// ---------------------------------------------------------------------------

struct RunResult {
  Point x;
  OracleTranscript transcript;
  long long queries = 0;
};

/// Runs one trial of `alg` on `inst` with T samples drawn from `seed`.
inline RunResult run_algorithm(const Instance& inst, const AlgorithmSpec& alg, long long T, std::uint64_t seed,
                               Access access = Access::SFO, bool record = false) {
  if (alg.access == Access::SO && access == Access::SFO) {
    throw AccessViolation("run_algorithm: '" + alg.name + "' needs SO access");
  }
  if (!alg.impl) throw std::invalid_argument("run_algorithm: '" + alg.name + "' has no implementation");
  Oracle o(inst, T, seed, access, record);
  RunResult r;
  r.x.assign(inst.dimension(), 0.0);
  alg.impl(o, r.x);
  r.queries = o.next_index();
  r.transcript = o.take_transcript();
  return r;
}

}  // namespace poa
