#include <cmath>

#include <gtest/gtest.h>

#include "poa/algorithms.hpp"
#include "poa/factories.hpp"
#include "poa/oracle.hpp"

using namespace poa;

namespace {

Instance deterministic_abs_minus_one() {
  Coordinate c{FiniteDistribution::bernoulli(1.0), {PiecewiseLinear::absolute(1.0, 0.0), PiecewiseLinear::absolute(1.0, 1.0)}};
  return Instance("abs_minus_one", ClassDescriptor(ClassKind::Lip, 1, 1), {c}, {{1.0, 1.0}});
}

}  // namespace

TEST(Rng, CounterStreamIsAddressable) {
  CounterRng a(5), b(5);
  for (int i = 0; i < 10; ++i) (void)a();
  b.seek(10);
  EXPECT_EQ(a(), b());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(stream_seed(9, Stream::Samples), stream_seed(9, Stream::Xi));
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(DrawPath, DegenerateDistribution) {
  const Instance det = deterministic_abs_minus_one();
  const SamplePath p = draw_path(det, 100, 3);
  for (int s : p.labels) EXPECT_EQ(s, 1);
}

TEST(DrawPath, EmpiricalFrequency) {
  const Instance inst = make_coin_bias({std::exp(8.0), 100, 1, std::nullopt});
  const SamplePath p = draw_path(inst, 1000000, 11);
  double ones = 0;
  for (int s : p.labels) ones += s;
  EXPECT_NEAR(ones / 1e6, 0.55, 0.002);
}

TEST(DrawPath, SameSeedSamePath) {
  const Instance inst = make_noisy_binary_search({std::exp(4.0), 10, 3, std::nullopt});
  EXPECT_EQ(draw_path(inst, 500, 42).labels, draw_path(inst, 500, 42).labels);
  EXPECT_NE(draw_path(inst, 500, 42).labels, draw_path(inst, 500, 43).labels);
  EXPECT_THROW(draw_path(inst, 0, 1), std::invalid_argument);
}

TEST(Subgradient, RightSlopeConvention) {
  const Instance det = deterministic_abs_minus_one();
  EXPECT_EQ(subgradient(det, 1, 0.0), -1.0);
  EXPECT_EQ(subgradient(det, 1, 1.0), 1.0);
  EXPECT_EQ(subgradient(det, 0, 0.0), 1.0);
}

TEST(Subgradient, NoisyBinarySearchReduction) {
  const NoisyBinarySearchParams p{std::exp(4.0), 10, 3, std::nullopt};
  const Instance inst = make_noisy_binary_search(p);
  const auto& d = inst.coordinate(0).distribution;
  for (double x : {0.0, 3.0, p.r_k() - 1e-9}) {
    double p_plus = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double g = subgradient(inst, d.outcome(i), x);
      EXPECT_TRUE(g == 1.0 || g == -1.0);
      if (g == 1.0) p_plus += d.probability(i);
    }
    EXPECT_NEAR(p_plus, (1 - p.epsilon()) / 2, 1e-15);
  }
  double p_plus = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (subgradient(inst, d.outcome(i), p.r_k()) == 1.0) p_plus += d.probability(i);
  }
  EXPECT_NEAR(p_plus, (1 + p.epsilon()) / 2, 1e-15);
}

TEST(Oracle, SfoRejectsSecondGradientOfSameSample) {
  const Instance inst = make_coin_bias({4.0, 10, 1, std::nullopt});
  Oracle o(inst, 5, 1, Access::SFO);
  double x = 0.0, g = 0.0;
  o.gradient(0, {&x, 1}, {&g, 1});
  EXPECT_THROW(o.gradient(0, {&x, 1}, {&g, 1}), AccessViolation);
  EXPECT_THROW(o.gradient(3, {&x, 1}, {&g, 1}), AccessViolation);
  EXPECT_THROW(o.sample_function(1), AccessViolation);
  for (int i = 1; i < 5; ++i) (void)o.next_gradient(x);
  EXPECT_THROW((void)o.next_gradient(x), AccessViolation);
}

TEST(Oracle, SoExposesSampleFunctions) {
  const Instance inst = make_coin_bias({4.0, 10, 1, std::nullopt});
  Oracle o(inst, 5, 1, Access::SO);
  const auto f = o.sample_function(2);
  ASSERT_EQ(f.size(), 1u);
  const int s = o.path().at(2)[0];
  EXPECT_EQ(f[0](1.5), inst.coordinate(0).objective_for(s)(1.5));
  double x = 0.0, g = 0.0;
  o.gradient(2, {&x, 1}, {&g, 1});
  o.gradient(2, {&x, 1}, {&g, 1});  // re-query allowed under SO
}

TEST(RunAlgorithm, TrivialOutputsZero) {
  const Instance inst = make_coin_bias({4.0, 10, 1, std::nullopt});
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto r = run_algorithm(inst, trivial_alg(), 10, seed);
    EXPECT_EQ(r.x[0], 0.0);
    EXPECT_EQ(r.queries, 0);
  }
}

TEST(RunAlgorithm, SgdHandSimulation) {
  const auto r = run_algorithm(deterministic_abs_minus_one(), sgd_fixed(0.5), 2, 9);
  EXPECT_DOUBLE_EQ(r.x[0], 0.25);
}

TEST(RunAlgorithm, ReplayGivesIdenticalTranscripts) {
  const Instance inst = make_rare_event({10, 10, 100, 0.05, 1, ClassKind::SMLip});
  const auto a = run_algorithm(inst, clipped_sgd(10, 1, 0.05), 100, 5, Access::SFO, true);
  const auto b = run_algorithm(inst, clipped_sgd(10, 1, 0.05), 100, 5, Access::SFO, true);
  EXPECT_EQ(a.transcript, b.transcript);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.queries, 100);
  EXPECT_EQ(a.transcript.queries.size(), 100u);
}

TEST(RunAlgorithm, ResponsesAreSubgradients) {
  const Instance inst = make_product_instance({1, 2, 0.2, 64, 4, {1, 0, 1, 0}});
  const auto r = run_algorithm(inst, sgd_fixed(0.3), 64, 8, Access::SFO, true);
  const SamplePath path = draw_path(inst, 64, 8);
  for (std::size_t q = 0; q < r.transcript.queries.size(); ++q) {
    const auto& query = r.transcript.queries[q];
    EXPECT_EQ(query.t, static_cast<long long>(q));
    for (std::size_t i = 0; i < inst.dimension(); ++i) {
      const auto& f = inst.coordinate(i).objective_for(path.at(query.t)[i]);
      const double g = r.transcript.responses[q][i];
      EXPECT_LE(f.left_slope(query.x[i]), g);
      EXPECT_LE(g, f.right_slope(query.x[i]));
    }
  }
}

TEST(RunAlgorithm, SoAlgorithmNeedsSoAccess) {
  const AlgorithmSpec so = register_plugin("so_probe", Access::SO, [](Oracle& o, std::span<double> out) {
    out[0] = o.sample_function(0)[0].right_slope(0.0);
  });
  const Instance inst = make_coin_bias({4.0, 10, 1, std::nullopt});
  EXPECT_THROW(run_algorithm(inst, so, 3, 1, Access::SFO), AccessViolation);
  EXPECT_NO_THROW(run_algorithm(inst, so, 3, 1, Access::SO));
}
