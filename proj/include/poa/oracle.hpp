#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "poa/instance.hpp"
#include "poa/rng.hpp"

namespace poa {

/// S_1..S_T for one trial. For a k-coordinate instance the labels are stored
/// row-major: labels[t * k + i] is coordinate i of sample t (0-based t).
struct SamplePath {
  std::uint64_t seed = 0;
  long long T = 0;
  std::size_t k = 1;
  std::vector<int> labels;

  std::span<const int> at(long long t) const {
    return std::span<const int>(labels).subspan(static_cast<std::size_t>(t) * k, k);
  }
};

/// Draws T i.i.d. samples from the Samples stream of `seed`.
inline SamplePath draw_path(const Instance& inst, long long T, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("draw_path: T must be >= 1");
  SamplePath path{seed, T, inst.dimension(), {}};
  path.labels.resize(static_cast<std::size_t>(T) * path.k);
  CounterRng rng(stream_seed(seed, Stream::Samples));
  std::size_t j = 0;
  for (long long t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < path.k; ++i) path.labels[j++] = inst.coordinate(i).distribution.sample(rng);
  }
  return path;
}

/// Right-slope subgradient of the scalar sample objective f(.; s) at x.
inline double subgradient(const Instance& inst, int s, double x) {
  return inst.coordinate(0).objective_for(s).right_slope(x);
}

/// Coordinate-wise right-slope subgradient for product instances.
inline void subgradient(const Instance& inst, std::span<const int> s, std::span<const double> x, std::span<double> g) {
  if (s.size() != inst.dimension() || x.size() != inst.dimension() || g.size() != inst.dimension()) {
    throw std::invalid_argument("subgradient: dimension mismatch");
  }
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = inst.coordinate(i).objective_for(s[i]).right_slope(x[i]);
}

enum class Access { SFO, SO };

inline std::string_view to_string(Access a) noexcept { return a == Access::SFO ? "SFO" : "SO"; }

/// An algorithm asked the oracle for more than its access level allows.
class AccessViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct OracleTranscript {
  struct Query {
    long long t;  ///< 0-based sample index
    Point x;
    friend bool operator==(const Query&, const Query&) = default;
  };
  std::vector<Query> queries;
  std::vector<Point> responses;
  std::uint64_t rng_tag = 0;  ///< key of the xi stream

  friend bool operator==(const OracleTranscript&, const OracleTranscript&) = default;
};

/// One trial's view of an instance. SFO access hands out exactly one
/// subgradient per sample, in order, at the caller's query point. SO access
/// additionally exposes every sample function S_1..S_T.
class Oracle {
 public:
  Oracle(const Instance& inst, long long T, std::uint64_t trial_seed, Access access, bool record = false)
      : inst_(&inst),
        path_(draw_path(inst, T, trial_seed)),
        access_(access),
        xi_(stream_seed(trial_seed, Stream::Xi)),
        record_(record) {
    transcript_.rng_tag = xi_.key();
  }

  const Instance& instance() const noexcept { return *inst_; }
  long long horizon() const noexcept { return path_.T; }
  std::size_t dimension() const noexcept { return inst_->dimension(); }
  Access access() const noexcept { return access_; }
  std::uint64_t seed() const noexcept { return path_.seed; }
  /// Index of the next sample an SFO caller may query.
  long long next_index() const noexcept { return next_; }

  /// Subgradient of f(.; S_{t+1}) at x. Under SFO, t must be the next unused sample.
  void gradient(long long t, std::span<const double> x, std::span<double> g) {
    if (t < 0 || t >= path_.T) throw std::out_of_range("Oracle: sample index " + std::to_string(t) + " outside horizon");
    if (access_ == Access::SFO && t != next_) {
      throw AccessViolation(t < next_ ? "Oracle: SFO access allows one gradient per sample (sample " + std::to_string(t) +
                                            " already used)"
                                      : "Oracle: SFO samples must be consumed in order");
    }
    subgradient(*inst_, path_.at(t), x, g);
    if (t == next_) ++next_;
    if (record_) {
      transcript_.queries.push_back({t, Point(x.begin(), x.end())});
      transcript_.responses.emplace_back(g.begin(), g.end());
    }
  }

  /// Consumes the next sample. Returns its index.
  long long next_gradient(std::span<const double> x, std::span<double> g) {
    if (next_ >= path_.T) throw AccessViolation("Oracle: horizon exhausted");
    const long long t = next_;
    gradient(t, x, g);
    return t;
  }

  double next_gradient(double x) {
    double g = 0.0;
    next_gradient(std::span<const double>(&x, 1), std::span<double>(&g, 1));
    return g;
  }

  /// Full sample function of S_{t+1}, one piecewise-linear map per coordinate. SO only.
  std::vector<PiecewiseLinear> sample_function(long long t) const {
    if (access_ != Access::SO) throw AccessViolation("Oracle: sample functions require SO access");
    if (t < 0 || t >= path_.T) throw std::out_of_range("Oracle: sample index outside horizon");
    std::vector<PiecewiseLinear> out;
    const auto s = path_.at(t);
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back(inst_->coordinate(i).objective_for(s[i]));
    return out;
  }

  /// Algorithm randomization xi, independent of the samples.
  CounterRng& xi() noexcept { return xi_; }

  const SamplePath& path() const noexcept { return path_; }
  const OracleTranscript& transcript() const noexcept { return transcript_; }
  OracleTranscript take_transcript() { return std::move(transcript_); }

 private:
  const Instance* inst_;
  SamplePath path_;
  Access access_;
  CounterRng xi_;
  bool record_;
  long long next_ = 0;
  OracleTranscript transcript_;
};

}  // namespace poa
