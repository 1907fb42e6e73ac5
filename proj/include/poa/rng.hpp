#pragma once

#include <cstdint>

namespace poa {

/// SplitMix64 finalizer; a bijective avalanche mix of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent child key from (key, index). Used to split a base
/// seed into per-trial and per-stream keys without generating earlier ones.
constexpr std::uint64_t derive_seed(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64(mix64(key) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Stream tags for the two independent per-trial streams.
enum class Stream : std::uint64_t { Samples = 0, Xi = 1 };

constexpr std::uint64_t stream_seed(std::uint64_t trial_seed, Stream s) noexcept {
  return derive_seed(trial_seed, static_cast<std::uint64_t>(s));
}

/// Counter-based generator: the n-th draw is a pure function of (key, n).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    return mix64(key_ + (++counter_) * 0xd1342543de82ef95ULL);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  /// Jump to an absolute position in the stream.
  constexpr void seek(std::uint64_t counter) noexcept { counter_ = counter; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace poa
