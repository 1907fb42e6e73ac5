#include <cmath>

#include <gtest/gtest.h>

#include "poa/algorithms.hpp"
#include "poa/factories.hpp"
#include "poa/metrics.hpp"

using namespace poa;

namespace {

Instance deterministic_abs_minus_one() {
  Coordinate c{FiniteDistribution::bernoulli(1.0), {PiecewiseLinear::absolute(1.0, 0.0), PiecewiseLinear::absolute(1.0, 1.0)}};
  return Instance("abs_minus_one", ClassDescriptor(ClassKind::Lip, 1, 1), {c}, {{1.0, 1.0}});
}

// Straight-line reimplementation of averaged fixed-step SGD on a scalar instance.
double reference_sgd(const Instance& inst, double eta, long long T, std::uint64_t seed) {
  const SamplePath path = draw_path(inst, T, seed);
  double x = 0.0, sum = 0.0;
  for (long long t = 0; t < T; ++t) {
    sum += x;
    x -= eta * inst.coordinate(0).objective_for(path.at(t)[0]).right_slope(x);
  }
  return sum / static_cast<double>(T);
}

}  // namespace

TEST(SgdFixed, TwoStepHandExample) {
  EXPECT_DOUBLE_EQ(run_algorithm(deterministic_abs_minus_one(), sgd_fixed(0.5), 2, 1).x[0], 0.25);
  EXPECT_DOUBLE_EQ(run_algorithm(deterministic_abs_minus_one(), sgd_fixed(0.5, true), 2, 1).x[0], 1.0);
}

TEST(SgdFixed, MatchesReferenceLoop) {
  const Instance inst = make_coin_bias({std::exp(4.0), 200, 1, std::nullopt});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_DOUBLE_EQ(run_algorithm(inst, sgd_fixed(0.07), 200, seed).x[0], reference_sgd(inst, 0.07, 200, seed));
  }
}

TEST(SgdFixed, TunedStepUsesHorizon) {
  const Instance inst = make_coin_bias({std::exp(2.0), 400, 0, std::nullopt});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_DOUBLE_EQ(run_algorithm(inst, sgd_fixed_tuned(2.0, 3.0), 400, seed).x[0],
                     run_algorithm(inst, sgd_fixed(3.0 / (2.0 * 20.0)), 400, seed).x[0]);
  }
  EXPECT_THROW(sgd_fixed(0.0), std::invalid_argument);
  EXPECT_THROW(sgd_fixed_tuned(-1.0, 1.0), std::invalid_argument);
}

TEST(SgdFixed, ErrorShrinksWithHorizon) {
  const Instance inst = make_coin_bias({1.0, 1, 0, 0.2});
  const auto alg = sgd_fixed_tuned(1, 1);
  double prev = 1e9;
  for (long long T : {16LL, 256LL, 4096LL}) {
    double mean = 0.0;
    for (int s = 0; s < 200; ++s) mean += gap(inst, run_algorithm(inst, alg, T, derive_seed(3, s)).x[0]);
    mean /= 200;
    EXPECT_LT(mean, prev);
    EXPECT_LE(mean, 2.0 / std::sqrt(static_cast<double>(T)));
    prev = mean;
  }
}

TEST(AdagradNorm, StaysInBallAndIsDeterministic) {
  const Instance inst = make_rare_event({16, 16, 256, 0.05, 0, ClassKind::SMLip});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = run_algorithm(inst, adagrad_norm_sgd(16), 256, seed);
    const auto b = run_algorithm(inst, adagrad_norm_sgd(16), 256, seed);
    EXPECT_EQ(a.x, b.x);
    EXPECT_LE(std::abs(a.x[0]), 16.0 * (1 + 1e-12));
    EXPECT_EQ(a.queries, 256);
  }
}

TEST(AdagradNorm, StepSizeAndProjection) {
  // Step 1: x = D sqrt(2), projected to D. Step 2: eta = D sqrt(2) / sqrt(2) = D, so x = D - D = 0.
  for (double D : {1.0, 100.0}) {
    EXPECT_DOUBLE_EQ(run_algorithm(deterministic_abs_minus_one(), adagrad_norm_sgd(D, true), 1, 0).x[0], D);
    EXPECT_DOUBLE_EQ(run_algorithm(deterministic_abs_minus_one(), adagrad_norm_sgd(D, true), 2, 0).x[0], 0.0);
    EXPECT_DOUBLE_EQ(run_algorithm(deterministic_abs_minus_one(), adagrad_norm_sgd(D), 2, 0).x[0], D / 2);
  }
}

TEST(ClippedSgd, ParametersAndClipping) {
  const auto p = clipped_sgd_parameters(10, 1, 0.05, 10000);
  EXPECT_NEAR(p.eta, 1e-3, 1e-18);
  EXPECT_NEAR(p.G_clip, 1000 / std::sqrt(std::log(20.0)), 1e-9);
  std::vector<double> g{3.0, 4.0};
  clip_gradient(g, 1.0);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  EXPECT_NEAR(g[1], 0.8, 1e-15);
  std::vector<double> small{0.3, 0.4};
  clip_gradient(small, 1.0);
  EXPECT_EQ(small, (std::vector<double>{0.3, 0.4}));
  EXPECT_THROW(clipped_sgd(1, 1, 0.6), std::invalid_argument);
}

TEST(ClippedSgd, HeavyGradientIsClipped) {
  // One heavy sample of slope 2 alpha T / lambda at x = 0; after clipping the
  // step is eta * G_clip, not eta * slope.
  const RareEventParams rp{10, 10, 100, 0.05, 1, ClassKind::SMLip};
  const Instance inst = make_rare_event(rp);
  const auto alg = clipped_sgd(10, 100, 0.05, true);
  const auto p = clipped_sgd_parameters(10, 100, 0.05, 1);
  Coordinate heavy{FiniteDistribution::bernoulli(1.0), inst.coordinate(0).objectives};
  const Instance always_heavy("heavy", inst.class_tag(), {heavy}, {{0.0, 0.0}});
  ASSERT_GT(rp.heavy_slope(), p.G_clip);
  // At x = 0 the right slope of the heavy branch is +heavy_slope.
  EXPECT_NEAR(run_algorithm(always_heavy, alg, 1, 0).x[0], -p.eta * p.G_clip, 1e-12);
}

TEST(ClippedSgd, ProjectsOntoRadiusR) {
  const Instance inst = make_coin_bias({1e6, 50, 1, 0.5});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = run_algorithm(inst, clipped_sgd(1, 2, 0.05, true), 50, seed);
    EXPECT_LE(std::abs(r.x[0]), 2.0 + 1e-12);
  }
}

TEST(Trivial, MakesNoQueries) {
  const auto r = run_algorithm(make_noisy_binary_search({std::exp(5.0), 10, 3, std::nullopt}), trivial_alg(), 10, 1, Access::SFO, true);
  EXPECT_EQ(r.x, (Point{0.0}));
  EXPECT_EQ(r.queries, 0);
  EXPECT_TRUE(r.transcript.queries.empty());
}

TEST(ScaleWrap, MatchesHandScaledRun) {
  const Instance inst = make_coin_bias({std::exp(2.0), 100, 1, std::nullopt});
  const Instance scaled = scale_instance(inst, 2, 3);
  const auto base = sgd_fixed(0.05);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double wrapped = run_algorithm(inst, scale_wrap(base, 2, 3), 100, seed).x[0];
    const double direct = run_algorithm(scaled, base, 100, seed).x[0] / 3;
    EXPECT_EQ(wrapped, direct);
  }
  EXPECT_THROW(scale_wrap(base, 0, 1), std::invalid_argument);
}

TEST(ScaleWrap, TrivialIsScaleInvariant) {
  const Instance inst = make_coin_bias({4.0, 10, 1, std::nullopt});
  EXPECT_EQ(run_algorithm(inst, scale_wrap(trivial_alg(), 5, 7), 10, 1).x[0], 0.0);
}

TEST(Plugins, RegisterAndLookUp) {
  const auto spec = register_plugin("half_of_first_gradient", Access::SFO, [](Oracle& o, std::span<double> out) {
    out[0] = 0.5 * o.next_gradient(0.0);
  });
  EXPECT_EQ(make_algorithm("half_of_first_gradient").name, "half_of_first_gradient");
  const auto names = registered_plugins();
  EXPECT_NE(std::find(names.begin(), names.end(), "half_of_first_gradient"), names.end());
  const Instance inst = make_coin_bias({4.0, 10, 1, 0.5});
  const auto r = run_algorithm(inst, spec, 10, 4);
  EXPECT_TRUE(r.x[0] == 0.5 || r.x[0] == -0.5);
  EXPECT_EQ(r.queries, 1);
  EXPECT_THROW(register_plugin("clipped_sgd", Access::SFO, [](Oracle&, std::span<double>) {}), std::invalid_argument);
  EXPECT_THROW(register_plugin("x", Access::SFO, {}), std::invalid_argument);
}

TEST(Plugins, OracleEnforcementStillApplies) {
  const auto cheat = register_plugin("double_dip", Access::SFO, [](Oracle& o, std::span<double> out) {
    double x = 0.0, g = 0.0;
    o.gradient(0, {&x, 1}, {&g, 1});
    o.gradient(0, {&x, 1}, {&g, 1});
    out[0] = g;
  });
  EXPECT_THROW(run_algorithm(make_coin_bias({4.0, 10, 1, std::nullopt}), cheat, 10, 1), AccessViolation);
}

TEST(MakeAlgorithm, ParsesBuiltins) {
  EXPECT_EQ(make_algorithm("sgd_fixed(eta=0.1)").name, "sgd_fixed(eta=0.1)");
  EXPECT_EQ(make_algorithm("sgd_fixed(L=1,R=1)").name, "sgd_fixed(L=1,R=1)");
  EXPECT_EQ(make_algorithm("adagrad_norm_sgd(D=16,last=1)").name, "adagrad_norm_sgd(D=16,last=1)");
  EXPECT_EQ(make_algorithm("clipped_sgd(L=10,R=1,delta=0.05)").hyperparameters.at("delta"), 0.05);
  EXPECT_EQ(make_algorithm("trivial_alg").name, "trivial_alg");
  EXPECT_THROW(make_algorithm("sgd_fixed(eta=0.1,L=1)"), std::invalid_argument);
  EXPECT_THROW(make_algorithm("adagrad_norm_sgd(D=1,eta=2)"), std::invalid_argument);
  EXPECT_THROW(make_algorithm("mystery"), std::invalid_argument);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  const Instance inst = make_rare_event({10, 10, 100, 0.05, 1, ClassKind::SMLip});
  const auto alg = clipped_sgd(10, 1, 0.05);
  const ErrorKind kind = ErrorKind::quantile(0.05);
  std::vector<double> g1, g8;
  const auto a = estimate_error(inst, alg, 100, kind, 1000, 99, 1, &g1);
  const auto b = estimate_error(inst, alg, 100, kind, 1000, 99, 8, &g8);
  EXPECT_EQ(g1, g8);
  EXPECT_EQ(a.point, b.point);
}
