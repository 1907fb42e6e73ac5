#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "poa/rng.hpp"

namespace poa {

/// Categorical distribution over small integer sample labels.
class FiniteDistribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  FiniteDistribution() = default;

  FiniteDistribution(std::vector<int> outcomes, std::vector<double> probabilities)
      : outcomes_(std::move(outcomes)), probabilities_(std::move(probabilities)) {
    if (outcomes_.empty() || outcomes_.size() != probabilities_.size()) {
      throw std::invalid_argument("FiniteDistribution: outcomes and probabilities must match and be non-empty");
    }
    double total = 0.0;
    for (double p : probabilities_) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("FiniteDistribution: probabilities must be finite and non-negative");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
      throw std::invalid_argument("FiniteDistribution: probabilities must sum to 1");
    }
    for (std::size_t i = 0; i < outcomes_.size(); ++i) {
      for (std::size_t j = i + 1; j < outcomes_.size(); ++j) {
        if (outcomes_[i] == outcomes_[j]) throw std::invalid_argument("FiniteDistribution: duplicate outcome");
      }
    }
    cumulative_.resize(probabilities_.size());
    double c = 0.0;
    for (std::size_t i = 0; i < probabilities_.size(); ++i) {
      c += probabilities_[i];
      cumulative_[i] = c;
    }
  }

  /// Bernoulli(p) on labels {0, 1}.
  static FiniteDistribution bernoulli(double p) { return FiniteDistribution({0, 1}, {1.0 - p, p}); }

  std::size_t size() const noexcept { return outcomes_.size(); }
  int outcome(std::size_t i) const { return outcomes_.at(i); }
  double probability(std::size_t i) const { return probabilities_.at(i); }
  const std::vector<int>& outcomes() const noexcept { return outcomes_; }
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }

  /// Position of a label, or size() if absent.
  std::size_t index_of(int label) const noexcept {
    for (std::size_t i = 0; i < outcomes_.size(); ++i) {
      if (outcomes_[i] == label) return i;
    }
    return outcomes_.size();
  }

  /// Inverse-CDF draw from a uniform u in [0, 1). Zero-mass outcomes are never returned.
  std::size_t index_for(double u) const noexcept {
    for (std::size_t i = 0; i < cumulative_.size(); ++i) {
      if (u < cumulative_[i] && probabilities_[i] > 0.0) return i;
    }
    // u landed in the rounding gap above the last cumulative value.
    for (std::size_t i = cumulative_.size(); i-- > 0;) {
      if (probabilities_[i] > 0.0) return i;
    }
    return 0;
  }

  int sample(CounterRng& rng) const noexcept { return outcomes_[index_for(rng.uniform())]; }

 private:
  std::vector<int> outcomes_;
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
};

}  // namespace poa
