#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wanes/attack.hpp"

using namespace wanes;

TEST(Unif, Examples) {
  auto net = oracle::parallel_network({3}, {6.0});
  EXPECT_EQ(unif_attack(net), PathFlow(Vector{2, 2, 2}));
  auto single = oracle::parallel_network({1}, {4.0});
  EXPECT_EQ(unif_attack(single), PathFlow(Vector{4.0}));
  auto two = oracle::parallel_network({2, 4}, {2.0, 4.0});
  EXPECT_EQ(unif_attack(two), PathFlow(Vector(6, 1.0)));
}

TEST(Supp, FloorMassAndLargeConcentrationLimit) {
  auto net = oracle::parallel_network({3, 5}, {6.0, 2.0});
  const PathFlow mu = uniform_flow(net);
  Rng rng(2);
  AttackSpec spec{AttackKind::supp, 30, 0.7, 0.1};
  for (int i = 0; i < 1000; ++i) {
    const auto d = supp_attack(net, mu, spec, rng);
    for (std::size_t w = 0; w < net.num_ods(); ++w) {
      double s = 0.0;
      const double floor = 0.1 * net.od(w).demand / static_cast<double>(net.od_size(w));
      for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
        EXPECT_GE(d[p], floor * (1 - 1e-12));
        s += d[p];
      }
      EXPECT_NEAR(s, net.od(w).demand, 1e-10 * net.od(w).demand);
    }
  }
  // c -> infinity: mean within 3 standard errors of uniform, spread collapsing.
  spec.concentration = 1e4;
  Vector mean(net.num_paths(), 0.0), sq(net.num_paths(), 0.0);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto d = supp_attack(net, mu, spec, rng);
    for (std::size_t p = 0; p < d.size(); ++p) {
      mean[p] += d[p] / n;
      sq[p] += d[p] * d[p] / n;
    }
  }
  for (std::size_t p = 0; p < mean.size(); ++p) {
    const double se = std::sqrt(std::max(0.0, sq[p] - mean[p] * mean[p]) / n);
    EXPECT_LE(std::abs(mean[p] - mu[p]), 3 * se + 1e-12);
    EXPECT_LT(std::sqrt(sq[p] - mean[p] * mean[p]), 0.02 * mu[p]);
  }
}

TEST(ParseAttack, RoundTripAndErrors) {
  const auto a = parse_attack("unif@30");
  EXPECT_EQ(a.kind, AttackKind::unif);
  EXPECT_EQ(a.t0, 30);
  const auto b = parse_attack("supp@12:c=0.5");
  EXPECT_EQ(b.kind, AttackKind::supp);
  EXPECT_EQ(b.concentration, 0.5);
  EXPECT_EQ(describe(b), "supp@12:c=0.5");
  EXPECT_EQ(parse_attack("supp@5:c=2,floor=0.3").floor, 0.3);
  for (const char* bad : {"unif", "foo@3", "unif@x", "unif@0", "unif@3:c=1", "supp@3:c=-1", "supp@3:z=1", "supp@3:floor=0"})
    EXPECT_THROW(parse_attack(bad), Error) << bad;
}

TEST(AttackMagnitude, Examples) {
  auto net = oracle::parallel_network({3}, {6.0});
  const auto map = MirrorMap::negentropy(net);
  const PathFlow t0(Vector{3, 2, 1});
  EXPECT_EQ(attack_magnitude(net, map, t0, t0).a_dagger, 0.0);
  const auto r = attack_magnitude(net, map, t0, unif_attack(net));
  EXPECT_NEAR(r.a_dagger, 3 * std::log(1.5) + std::log(0.5), 1e-12);
  EXPECT_NEAR(r.a_dagger, 0.52325, 1e-5);
  EXPECT_EQ(r.gamma, 2.0);
  EXPECT_NEAR(r.upper_bound, 4.0 / (2.0 * std::log(2.0)), 1e-12);
  EXPECT_NEAR(r.upper_bound, 2.885, 1e-3);
  EXPECT_LE(r.lower_bound, r.a_dagger + 1e-12);
  EXPECT_LE(r.a_dagger, r.upper_bound);
}

TEST(AttackMagnitude, SupportViolationIsInfinite) {
  auto net = oracle::parallel_network({2}, {2.0});
  const auto r = attack_magnitude(net, MirrorMap::negentropy(net), PathFlow(Vector{1, 1}), PathFlow(Vector{2, 0}));
  EXPECT_FALSE(r.finite);
  EXPECT_EQ(r.a_dagger, kInf);
}

TEST(AttackMagnitude, EuclideanIsHalfSquaredDistance) {
  auto net = oracle::parallel_network({3, 2}, {6.0, 1.0});
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const PathFlow a = random_flow(net, rng), b = random_flow(net, rng);
    const auto r = attack_magnitude(net, MirrorMap::euclidean(), a, b);
    EXPECT_EQ(r.a_dagger, 0.5 * squared_distance(a.span(), b.span()));
  }
}

TEST(PoisonedStep, Examples) {
  auto net = oracle::parallel_network({3}, {6.0});
  const auto map = MirrorMap::negentropy(net);
  const PathFlow dag(Vector{1, 2, 3});
  EXPECT_EQ(poisoned_step(net, map, dag, Vector{0, 0, 0}, 0.3), dag);
  const Vector l{1, 0.5, 2};
  EXPECT_EQ(poisoned_step(net, map, dag, l, 0.3), md_step(net, map, dag, l, 0.3));
}

// ---------------------------------------------------------------- properties

TEST(AttackProperty, UnifMagnitudeEqualsLowerBoundExpression) {
  const auto& net = fixture::sioux_falls(8, 0.0).network;
  const auto map = MirrorMap::negentropy(net);
  Rng rng(40);
  std::size_t max_paths = net.max_paths_per_od();
  for (int i = 0; i < 20; ++i) {
    const PathFlow mu = random_flow(net, rng, 0.5);
    const auto r = attack_magnitude(net, map, mu, unif_attack(net));
    EXPECT_NEAR(r.a_dagger, r.lower_bound, 1e-9 * std::abs(r.a_dagger));
    EXPECT_LE(r.a_dagger, net.total_demand() * std::log(static_cast<double>(max_paths)));
  }
}

TEST(AttackProperty, SuppNeverInfinite) {
  const auto& net = fixture::sioux_falls(8, 0.0).network;
  const auto map = MirrorMap::negentropy(net);
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    const PathFlow mu = random_flow(net, rng, 0.05);
    AttackSpec spec{AttackKind::supp, 1, 0.05 + uniform01(rng), 0.1};
    EXPECT_TRUE(std::isfinite(attack_magnitude(net, map, mu, supp_attack(net, mu, spec, rng)).a_dagger));
  }
}
