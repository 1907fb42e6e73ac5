#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "poa/factories.hpp"
#include "poa/instance.hpp"
#include "poa/oracle.hpp"
#include "poa/spec_string.hpp"

using namespace poa;

namespace {

// Minimizer by dense scan of the population objective; independent of the
// merged-slope computation in exact_minimizer.
double grid_argmin(const Instance& inst, double lo, double hi, int n) {
  double best = population_objective(inst, lo), arg = lo;
  for (int i = 1; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    const double f = population_objective(inst, x);
    if (f < best) {
      best = f;
      arg = x;
    }
  }
  return arg;
}

}  // namespace

TEST(PiecewiseLinear, EvaluatesAbsoluteValue) {
  const auto f = PiecewiseLinear::absolute(2.0, 1.0);
  EXPECT_DOUBLE_EQ(f(1.0), 0.0);
  EXPECT_DOUBLE_EQ(f(3.0), 4.0);
  EXPECT_DOUBLE_EQ(f(-1.0), 4.0);
  EXPECT_DOUBLE_EQ(f.right_slope(1.0), 2.0);
  EXPECT_DOUBLE_EQ(f.left_slope(1.0), -2.0);
  EXPECT_DOUBLE_EQ(f.max_abs_slope(), 2.0);
}

TEST(PiecewiseLinear, IsContinuousAcrossBreakpoints) {
  const PiecewiseLinear f({-1.0, 0.5, 2.0}, {-3.0, -1.0, 0.5, 4.0}, 0.0, 1.25);
  for (double b : f.breakpoints()) {
    EXPECT_NEAR(f(b - 1e-9), f(b), 1e-8);
    EXPECT_NEAR(f(b + 1e-9), f(b), 1e-8);
  }
  EXPECT_DOUBLE_EQ(f(0.0), 1.25);
}

TEST(PiecewiseLinear, RejectsNonConvexSlopes) {
  EXPECT_THROW(PiecewiseLinear({0.0}, {1.0, -1.0}, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(PiecewiseLinear({1.0, 0.0}, {-1.0, 0.0, 1.0}, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(PiecewiseLinear({0.0}, {1.0}, 0.0, 0.0), std::invalid_argument);
}

TEST(PiecewiseLinear, ScaledAndComposedMatchDefinitions) {
  const auto f = PiecewiseLinear::absolute(1.5, 2.0);
  const auto s = f.scaled(2.0, 3.0);
  const auto c = f.composed(0.125, 2.0);
  for (double x = -5; x <= 5; x += 0.37) {
    EXPECT_NEAR(s(x), 6.0 * f(x / 3.0), 1e-12);
    EXPECT_NEAR(c(x), 0.125 * f(2.0 * x), 1e-12);
  }
}

TEST(FiniteDistribution, ValidatesProbabilities) {
  EXPECT_THROW(FiniteDistribution({0, 1}, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(FiniteDistribution({0, 1}, {-0.1, 1.1}), std::invalid_argument);
  EXPECT_THROW(FiniteDistribution({0, 0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_NO_THROW(FiniteDistribution({0, 1}, {0.3, 0.7 + 5e-13}));
}

TEST(FiniteDistribution, InverseCdfSkipsZeroMass) {
  const FiniteDistribution d({-1, 0, 1}, {0.5, 0.0, 0.5});
  EXPECT_EQ(d.index_for(0.0), 0u);
  EXPECT_EQ(d.index_for(0.5), 2u);
  EXPECT_EQ(d.index_for(0.9999999), 2u);
  const auto b = FiniteDistribution::bernoulli(1.0);
  EXPECT_EQ(b.index_for(0.0), 1u);
}

TEST(SpecString, ParsesNamesParametersAndExpForm) {
  const auto s = parse_spec_string(" coin_bias(rho=e^2, T=100 ,v=1) ");
  EXPECT_EQ(s.name, "coin_bias");
  EXPECT_DOUBLE_EQ(s.number("rho"), std::exp(2.0));
  EXPECT_EQ(s.integer("T"), 100);
  EXPECT_EQ(parse_spec_string("trivial_alg").name, "trivial_alg");
  EXPECT_THROW(parse_spec_string("x(a=1"), std::invalid_argument);
  EXPECT_THROW(parse_spec_string("x(a=1,a=2)"), std::invalid_argument);
  EXPECT_THROW(parse_spec_string("x(a)"), std::invalid_argument);
  EXPECT_THROW(parse_spec_string("x y(a=1)"), std::invalid_argument);
  EXPECT_THROW(s.integer("rho"), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(CoinBias, EpsilonAndProbabilityExample) {
  const CoinBiasParams p{std::exp(8.0), 100, 1, std::nullopt};
  EXPECT_NEAR(p.epsilon(), 0.1, 1e-15);
  const Instance inst = make_coin_bias(p);
  EXPECT_NEAR(inst.coordinate(0).distribution.probability(1), 0.55, 1e-15);
  EXPECT_EQ(inst.class_tag(), ClassDescriptor(ClassKind::Lip, 1.0, std::exp(8.0)));
}

TEST(CoinBias, GapExampleAtTwo) {
  const Instance inst = make_coin_bias({4.0, 100, 0, 0.1});
  EXPECT_NEAR(gap(inst, 2.0), 0.2, 1e-15);
  EXPECT_NEAR(population_objective(inst, 0.0), 1.8, 1e-15);
  EXPECT_EQ(inst.class_tag(), ClassDescriptor(ClassKind::Lip, 1.0, 1.0));
}

TEST(CoinBias, FlatWhenEpsilonIsZero) {
  const CoinBiasParams p{1.0, 10, 0, std::nullopt};
  EXPECT_EQ(p.epsilon(), 0.0);
  const Instance inst = make_coin_bias(p);
  for (double x = 0.0; x <= 1.0; x += 0.125) EXPECT_EQ(gap(inst, x), 0.0);
  EXPECT_EQ(inst.minimizer()[0], (Interval{0.0, 1.0}));
}

TEST(CoinBias, EpsilonIsCapped) {
  EXPECT_EQ((CoinBiasParams{std::exp(100.0), 1, 0, std::nullopt}.epsilon()), 0.5);
}

TEST(CoinBias, RejectsInvalidParameters) {
  EXPECT_THROW(make_coin_bias({0.5, 10, 0, std::nullopt}), std::invalid_argument);
  EXPECT_THROW(make_coin_bias({2.0, 0, 0, std::nullopt}), std::invalid_argument);
  EXPECT_THROW(make_coin_bias({2.0, 1, 2, std::nullopt}), std::invalid_argument);
}

TEST(NoisyBinarySearch, DerivedQuantities) {
  const NoisyBinarySearchParams p{std::exp(4.0), 10, 3, std::nullopt};
  EXPECT_EQ(p.n(), 4);
  EXPECT_NEAR(p.r_k(), 7.38905609893065, 1e-12);
  EXPECT_NEAR(p.epsilon(), std::sqrt(std::log(4.0) / 40.0), 1e-15);
  EXPECT_NEAR(p.epsilon(), 0.1862, 5e-5);
  const Instance inst = make_noisy_binary_search(p);
  EXPECT_NEAR(gap(inst, p.r_k()), 0.0, 1e-15);
  EXPECT_NEAR(population_objective(inst, p.r_k()), 0.0, 1e-15);
  EXPECT_EQ(inst.class_tag(), ClassDescriptor(ClassKind::Lip, 1.0, p.r_k()));
}

TEST(NoisyBinarySearch, GapExampleAtZero) {
  const Instance inst = make_noisy_binary_search({std::exp(4.0), 10, 2, 0.2});
  EXPECT_NEAR(gap(inst, 0.0), 0.2 * std::exp(1.0), 1e-15);
  EXPECT_NEAR(gap(inst, 0.0), 0.5437, 5e-5);
}

TEST(NoisyBinarySearch, RejectsIndexOutsideRange) {
  EXPECT_THROW(make_noisy_binary_search({std::exp(4.0), 10, 5, std::nullopt}), std::invalid_argument);
  EXPECT_THROW(make_noisy_binary_search({std::exp(4.0), 10, 0, std::nullopt}), std::invalid_argument);
}

TEST(NoisyBinarySearch, CeilingGuardAtExactPowers) {
  for (int m = 1; m <= 30; ++m) {
    EXPECT_EQ((NoisyBinarySearchParams{std::exp(static_cast<double>(m)), 1, 1, std::nullopt}.n()), m);
  }
  EXPECT_EQ((NoisyBinarySearchParams{54.0, 1, 1, std::nullopt}.n()), 4);
}

TEST(RareEvent, LambdaAlphaAndSlope) {
  const RareEventParams p{10, 10, 100, 1.0 / 32, 1, ClassKind::Lip};
  EXPECT_NEAR(p.lambda(), 2.0, 1e-15);
  EXPECT_NEAR(p.alpha(), 0.1, 1e-15);
  EXPECT_NEAR(p.heavy_slope(), 10.0, 1e-12);
  EXPECT_NEAR((RareEventParams{10, 10, 3, 1.0 / 32, 1, ClassKind::Lip}.lambda()), 1.5, 1e-15);
}

TEST(RareEvent, SecondMomentExample) {
  const RareEventParams p{10, 10, 100, 1.0 / 32, 1, ClassKind::Lip};
  const Instance inst = make_rare_event(p);
  const auto cert = check_membership(inst, ClassDescriptor(ClassKind::SMLip, 10, 1));
  EXPECT_TRUE(cert.member);
  EXPECT_NEAR(cert.second_moment, 2.0098, 1e-12);
}

TEST(RareEvent, LipschitzViolationIsReported) {
  const Instance inst = make_rare_event({10, 10, 100, 1.0 / 32, 1, ClassKind::Lip});
  const auto cert = check_membership(inst, ClassDescriptor(ClassKind::Lip, 1, 1));
  EXPECT_FALSE(cert.member);
  EXPECT_NEAR(cert.lipschitz, 10.0, 1e-12);
  EXPECT_NE(cert.violation.find("Lipschitz"), std::string::npos);
}

TEST(RareEvent, GapIdentityForVOne) {
  const RareEventParams p{16, 16, 256, 0.05, 1, ClassKind::SMLip};
  const Instance inst = make_rare_event(p);
  const double a = p.alpha(), l = p.lambda();
  for (double x = -20; x <= 40; x += 0.3) {
    const double expected = (1 - l / 256) * a * (std::abs(x - 16) - 16) + 2 * a * std::abs(x);
    EXPECT_NEAR(gap(inst, x), expected, 1e-12);
    EXPECT_GE(gap(inst, x), a * std::abs(x) - 1e-12);
  }
}

TEST(RareEvent, RejectsDeltaOutsideRange) {
  EXPECT_THROW(make_rare_event({1, 1, 10, 0.4, 0, ClassKind::Lip}), std::invalid_argument);
  EXPECT_THROW(make_rare_event({1, 1, 10, 0.0, 0, ClassKind::Lip}), std::invalid_argument);
}

TEST(Product, SingleCopyIsTheScalarConstruction) {
  const ProductParams p{2.0, 3.0, 0.2, 50, 1, {1}};
  const Instance prod = make_product_instance(p);
  ASSERT_EQ(prod.dimension(), 1u);
  const double eps = p.epsilon();
  for (double x = -4; x <= 7; x += 0.25) {
    const double f = (1 - eps) / 2 * 2 * std::abs(x) + (1 + eps) / 2 * 2 * std::abs(x - 3);
    EXPECT_NEAR(population_objective(prod, x), f, 1e-12);
  }
  EXPECT_EQ(prod.minimizer()[0], (Interval{3.0, 3.0}));
}

TEST(Product, AxisSlopesAndNorm) {
  const ProductParams p{2.0, 3.0, 0.2, 50, 4, {0, 1, 1, 0}};
  const Instance prod = make_product_instance(p);
  for (const auto& c : prod.coordinates()) {
    for (const auto& f : c.objectives) EXPECT_NEAR(f.max_abs_slope(), 2.0 / 4, 1e-15);
  }
  const auto cert = check_membership(prod, prod.class_tag());
  EXPECT_TRUE(cert.member) << cert.violation;
  EXPECT_LE(cert.lipschitz, 2.0 + 1e-12);
  EXPECT_NEAR(gap(prod, prod.minimizer_point()), 0.0, 1e-15);
  EXPECT_NEAR(prod.minimizer_point()[1], 1.5, 1e-15);
}

TEST(Product, EpsilonFormula) {
  EXPECT_NEAR((ProductParams{1, 1, 0.2, 50, 4, {}}.epsilon()), 0.03183807108275265716, 1e-15);
  EXPECT_THROW(make_product_instance({1, 1, 0.3, 50, 4, {}}), std::invalid_argument);
  EXPECT_THROW(make_product_instance({1, 1, 0.2, 50, 4, {1, 0}}), std::invalid_argument);
}

TEST(Membership, EveryFactoryInstancePassesItsOwnTag) {
  std::vector<Instance> all;
  for (double rho : {1.0, 2.0, std::exp(3.0), 1e6}) {
    for (long long T : {1LL, 10LL, 1000LL}) {
      for (int v : {0, 1}) {
        all.push_back(make_coin_bias({rho, T, v, std::nullopt}));
        for (ClassKind k : {ClassKind::Lip, ClassKind::SMLip}) all.push_back(make_rare_event({3.0, rho, T, 0.05, v, k}));
      }
      if (rho > 1) {
        const NoisyBinarySearchParams q{rho, T, 1, std::nullopt};
        for (long long k = 1; k <= q.n(); ++k) all.push_back(make_noisy_binary_search({rho, T, k, std::nullopt}));
      }
    }
  }
  for (const auto& inst : all) {
    const auto cert = check_membership(inst, inst.class_tag());
    EXPECT_TRUE(cert.member) << inst.id() << ": " << cert.violation;
    EXPECT_TRUE(cert.minimizer_certified) << inst.id();
  }
}

TEST(Membership, MinimizerNormViolation) {
  const Instance inst = make_coin_bias({4.0, 10, 1, std::nullopt});
  const auto cert = check_membership(inst, ClassDescriptor(ClassKind::Lip, 1, 1));
  EXPECT_FALSE(cert.member);
  EXPECT_NEAR(cert.minimizer_norm, 4.0, 0.0);
}

TEST(Minimizer, AgreesWithGridScan) {
  const std::vector<Instance> insts = {make_coin_bias({4.0, 10, 1, std::nullopt}), make_coin_bias({4.0, 10, 0, std::nullopt}),
                                       make_noisy_binary_search({std::exp(5.0), 50, 4, std::nullopt}),
                                       make_rare_event({8, 8, 64, 0.05, 0, ClassKind::SMLip}),
                                       make_rare_event({8, 8, 64, 0.05, 1, ClassKind::SMLip})};
  for (const auto& inst : insts) {
    const double x = grid_argmin(inst, -30.0, 70.0, 100000);
    EXPECT_NEAR(x, inst.minimizer()[0].lo, 1e-3 + 1e-9) << inst.id();
  }
}

TEST(Minimizer, UnboundedBelowThrows) {
  const Coordinate c{FiniteDistribution::bernoulli(0.5), {PiecewiseLinear::linear(-1.0), PiecewiseLinear::linear(-2.0)}};
  EXPECT_THROW(exact_minimizer(c), std::domain_error);
}

TEST(PopulationObjective, MatchesMonteCarloMean) {
  const std::vector<Instance> insts = {make_coin_bias({std::exp(2.0), 100, 1, std::nullopt}),
                                       make_noisy_binary_search({std::exp(4.0), 10, 3, std::nullopt}),
                                       make_rare_event({10, 10, 100, 1.0 / 32, 1, ClassKind::SMLip})};
  constexpr long long N = 1000000;
  for (const auto& inst : insts) {
    const SamplePath path = draw_path(inst, N, 2024);
    for (int g = 0; g < 20; ++g) {
      const double x = -3.0 + 0.6 * g;
      double sum = 0.0, sq = 0.0;
      for (long long t = 0; t < N; ++t) {
        const double f = inst.coordinate(0).objective_for(path.at(t)[0])(x);
        sum += f;
        sq += f * f;
      }
      const double mean = sum / N;
      const double sd = std::sqrt(std::max(0.0, sq / N - mean * mean));
      EXPECT_NEAR(mean, population_objective(inst, x), 4 * sd / std::sqrt(static_cast<double>(N)) + 1e-12)
          << inst.id() << " at x=" << x;
    }
  }
}

TEST(ScaleInstance, IdentityAndExample) {
  const Instance inst = make_coin_bias({4.0, 10, 0, 0.1});
  const Instance same = scale_instance(inst, 1, 1);
  for (double x = -2; x <= 6; x += 0.5) EXPECT_EQ(gap(same, x), gap(inst, x));
  const Instance sc = scale_instance(inst, 2, 3);
  EXPECT_NEAR(gap(sc, 6.0), 1.2, 1e-12);
  const Instance v1 = scale_instance(make_coin_bias({4.0, 10, 1, std::nullopt}), 2, 3);
  EXPECT_EQ(v1.class_tag(), ClassDescriptor(ClassKind::Lip, 2, 12));
  EXPECT_TRUE(check_membership(v1, ClassDescriptor(ClassKind::Lip, 2, 12)).member);
}

TEST(ScaleInstance, GapScalesForRandomFactors) {
  CounterRng rng(77);
  const std::vector<Instance> insts = {make_coin_bias({std::exp(2.0), 100, 1, std::nullopt}),
                                       make_noisy_binary_search({std::exp(4.0), 10, 2, std::nullopt}),
                                       make_rare_event({5, 5, 50, 0.05, 1, ClassKind::SMLip}),
                                       make_product_instance({1, 2, 0.2, 20, 4, {1, 0, 0, 1}})};
  for (const auto& inst : insts) {
    for (int rep = 0; rep < 200; ++rep) {
      const double l1 = 0.1 + 10 * rng.uniform(), r1 = 0.1 + 10 * rng.uniform();
      const Instance sc = scale_instance(inst, l1, r1);
      Point x(inst.dimension()), y(inst.dimension());
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = -10 + 20 * rng.uniform();
        y[i] = r1 * x[i];
      }
      const double scale = std::max(1.0, std::abs(population_objective(sc, y)));
      EXPECT_NEAR(gap(sc, y), l1 * r1 * gap(inst, x), 1e-12 * scale) << inst.id();
    }
  }
}

TEST(MakeInstance, BuildsFromSpecStrings) {
  const Instance c = make_instance("coin_bias(rho=54.6, T=1000, v=1)");
  EXPECT_EQ(c.id(), "coin_bias(rho=54.6,T=1000,v=1)");
  const Instance d = make_instance("coin_bias(rho=4,v=0)", 77);
  EXPECT_EQ(d.id(), "coin_bias(rho=4,T=77,v=0)");
  const Instance r = make_instance("rare_event(ell=16,rho=16,delta=0.05,v=1,kind=SM-Lip)", 256);
  EXPECT_EQ(r.class_tag().kind, ClassKind::SMLip);
  const Instance p = make_instance("product_b2(L=1,R=2,T=10,v=0110)");
  EXPECT_EQ(p.dimension(), 4u);
  EXPECT_THROW(make_instance("coin_bias(rho=4,v=0)"), std::invalid_argument);
  EXPECT_THROW(make_instance("coin_bias(rho=4,T=1,v=0,zzz=1)"), std::invalid_argument);
  EXPECT_THROW(make_instance("nope(T=1)"), std::invalid_argument);
}
