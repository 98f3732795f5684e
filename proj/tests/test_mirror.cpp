#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wanes/mirror.hpp"

using namespace wanes;

namespace {

MirrorMap neg(double sigma = 1.0) { return {MirrorKind::negentropy, sigma}; }

}  // namespace

TEST(Bregman, Examples) {
  const Vector a{1, 1}, b{2, 2};
  EXPECT_EQ(bregman(neg(), a, a), 0.0);
  EXPECT_NEAR(bregman(neg(), a, b), 2 * (1 - std::log(2.0)), 1e-15);
  EXPECT_NEAR(bregman(neg(), Vector{3, 2, 1}, Vector{2, 2, 2}), 3 * std::log(1.5) + std::log(0.5), 1e-15);
  EXPECT_NEAR(bregman(neg(), Vector{3, 2, 1}, Vector{2, 2, 2}), 0.52325, 1e-5);
  EXPECT_EQ(bregman(MirrorMap::euclidean(), Vector{3, 1}, Vector{1, 2}), 2.5);
}

TEST(Bregman, SupportViolationIsInfinite) {
  EXPECT_EQ(bregman(neg(), Vector{1, 1}, Vector{2, 0}), kInf);
  // The reverse direction is finite: 0 log 0 = 0.
  EXPECT_NEAR(bregman(neg(), Vector{2, 0}, Vector{1, 1}), 2 * std::log(2.0) - 2 + 2, 1e-15);
}

TEST(MdStep, Examples) {
  auto net = oracle::parallel_network({2}, {4.0});
  const PathFlow mu(Vector{2, 2});
  const auto out = md_step(net, neg(0.25), mu, Vector{0.0, std::log(3.0)}, 1.0);
  EXPECT_NEAR(out[0], 3.0, 1e-14);
  EXPECT_NEAR(out[1], 1.0, 1e-14);

  EXPECT_EQ(md_step(net, neg(0.25), mu, Vector{0, 0}, 0.7), mu);

  auto net2 = oracle::parallel_network({2}, {2.0});
  // mu - eta l = (3, -1) projects to (2, 0).
  const auto e = md_step(net2, MirrorMap::euclidean(), PathFlow(Vector{1, 1}), Vector{-2, 2}, 1.0);
  EXPECT_NEAR(e[0], 2.0, 1e-15);
  EXPECT_NEAR(e[1], 0.0, 1e-15);
}

TEST(MdStep, HugeLossesDoNotUnderflowTheWholeOd) {
  auto net = oracle::parallel_network({3}, {6.0});
  const auto out = md_step(net, neg(), PathFlow(Vector{2, 2, 2}), Vector{1e6, 1e6 + 1, 1e6 + 2}, 10.0);
  double s = 0.0;
  for (double x : out.values) s += x;
  EXPECT_NEAR(s, 6.0, 1e-12);
  EXPECT_GT(out[0], 5.9);
}

TEST(MdStep, Errors) {
  auto net = oracle::parallel_network({2}, {1.0});
  EXPECT_THROW(md_step(net, neg(), PathFlow(Vector{0.5, 0.5}), Vector{1, 1}, 0.0), Error);
  EXPECT_THROW(md_step(net, neg(), PathFlow(Vector{0.5}), Vector{1, 1}, 1.0), Error);
  EXPECT_THROW(md_step(net, neg(), PathFlow(Vector{0.0, 0.0}), Vector{1, 1}, 1.0), Error);
}

TEST(MdStep, MatchesArgminOracleOnFivePathInstances) {
  Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    auto net = oracle::parallel_network({5}, {1 + 9 * uniform01(rng)});
    const PathFlow mu = random_flow(net, rng, 1.0);
    Vector l(5);
    for (double& x : l) x = 10 * uniform01(rng);
    const double eta = 0.05 + uniform01(rng);
    const auto got = md_step(net, MirrorMap::negentropy(net), mu, l, eta);
    const auto want = oracle::negentropy_argmin(mu.values, l, eta, net.od(0).demand);
    for (std::size_t p = 0; p < 5; ++p) EXPECT_NEAR(got[p], want[p], 1e-8);
  }
}

TEST(Cesaro, Examples) {
  const PathFlow a(Vector{2, 0}), b(Vector{0, 2});
  EXPECT_EQ(cesaro_average({a}, Vector{0.3}), a);
  EXPECT_EQ(cesaro_average({a, b}, Vector{1, 1}), PathFlow(Vector{1, 1}));
  const auto c = cesaro_average({PathFlow(Vector{4, 0}), PathFlow(Vector{0, 4})}, Vector{1, 3});
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], 3.0);
  EXPECT_THROW(cesaro_average({}, Vector{}), Error);
}

TEST(Cesaro, AccumulatorAgreesWithBatch) {
  Rng rng(3);
  auto net = oracle::parallel_network({3, 2}, {2.0, 5.0});
  std::vector<PathFlow> flows;
  Vector w;
  CesaroAccumulator acc;
  for (int i = 0; i < 20; ++i) {
    flows.push_back(random_flow(net, rng));
    w.push_back(uniform01(rng) + 0.1);
    acc.add(flows.back(), w.back());
  }
  const auto batch = cesaro_average(flows, w);
  const auto stream = acc.average();
  for (std::size_t p = 0; p < batch.size(); ++p) EXPECT_NEAR(batch[p], stream[p], 1e-13);
  acc.reset();
  EXPECT_THROW(acc.average(), Error);
}

TEST(StepSchedule, Examples) {
  StepSchedule s;
  s.eta1 = 0.1;
  s.exponent = StepSchedule::exponent_from_beta(-0.25);
  EXPECT_DOUBLE_EQ(step_rate(s, 1), 0.1);
  EXPECT_NEAR(step_rate(s, 16), 0.0125, 1e-16);
  s.cap = 0.05;
  EXPECT_DOUBLE_EQ(step_rate(s, 1), 0.05);
  EXPECT_THROW(step_rate(s, 0), Error);
  EXPECT_DOUBLE_EQ(StepSchedule::exponent_from_beta_half(-0.25), -0.75);
  EXPECT_TRUE(s.convergent());
  s.exponent = -0.5;
  EXPECT_FALSE(s.convergent());
}

TEST(StepSchedule, NonIncreasing) {
  StepSchedule s;
  for (long t = 1; t < 1000; ++t) EXPECT_LE(step_rate(s, t + 1), step_rate(s, t));
}

// ---------------------------------------------------------------- properties

TEST(MirrorProperty, MassConservedAndNonnegative) {
  const auto& net = fixture::sioux_falls(8, 0.0).network;
  Rng rng(8);
  for (auto map : {MirrorMap::negentropy(net), MirrorMap::euclidean()}) {
    for (int i = 0; i < 20; ++i) {
      const PathFlow mu = random_flow(net, rng);
      Vector l(net.num_paths());
      for (double& x : l) x = 500 * uniform01(rng);
      const auto out = md_step(net, map, mu, l, 0.5 * uniform01(rng) + 1e-3);
      for (std::size_t w = 0; w < net.num_ods(); ++w) {
        double s = 0.0;
        for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
          EXPECT_GE(out[p], 0.0);
          s += out[p];
        }
        EXPECT_NEAR(s, net.od(w).demand, 1e-10 * net.od(w).demand);
      }
    }
  }
}

TEST(MirrorProperty, StrongConvexityOnRandomPairs) {
  const auto& net = fixture::sioux_falls(8, 0.0).network;
  const auto map = MirrorMap::negentropy(net);
  Rng rng(10);
  for (int i = 0; i < 10000; ++i) {
    const double c = i % 2 ? 0.2 : 2.0;
    const PathFlow a = random_flow(net, rng, c), b = random_flow(net, rng, c);
    const double d = bregman(map, a, b);
    if (!std::isfinite(d)) continue;  // a sparse draw can leave b without support
    ASSERT_GE(d, 0.5 * map.sigma * squared_distance(a.span(), b.span()) * (1 - 1e-12));
  }
}

TEST(MirrorProperty, EuclideanStepMatchesKktEnumeration) {
  Rng rng(19);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(uniform01(rng) * 6);
    auto net = oracle::parallel_network({n}, {0.5 + 5 * uniform01(rng)});
    const PathFlow mu = random_flow(net, rng, 0.5);
    Vector l(n);
    for (double& x : l) x = 20 * uniform01(rng) - 5;
    const double eta = uniform01(rng);
    const auto got = md_step(net, MirrorMap::euclidean(), mu, l, eta);
    Vector y(n);
    for (std::size_t p = 0; p < n; ++p) y[p] = mu[p] - eta * l[p];
    const auto want = oracle::simplex_projection_kkt(y, net.od(0).demand);
    for (std::size_t p = 0; p < n; ++p) EXPECT_NEAR(got[p], want[p], 1e-12);
  }
}
