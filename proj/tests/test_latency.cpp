#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wanes/latency.hpp"

using namespace wanes;

namespace {
const BprEdge kUnit{1.0, 1.0, 0.15, 4.0};
}

TEST(EdgeLatency, Examples) {
  EXPECT_NEAR(edge_latency(kUnit, 1.0, 0.0), 3.4, 1e-14);
  EXPECT_NEAR(edge_latency(kUnit, 0.0, 0.0), 1.15, 1e-14);
  EXPECT_NEAR(edge_latency(kUnit, 1.0, 0.5), 3.9, 1e-14);
  EXPECT_THROW(edge_latency(kUnit, -1.0, 0.0), Error);
}

TEST(EdgePotential, Examples) {
  EXPECT_NEAR(edge_potential(kUnit, 1.0, 0.0), 1.93, 1e-14);
  EXPECT_EQ(edge_potential(kUnit, 0.0, 0.0), 0.0);
}

TEST(PathLatency, TwoIdenticalEdgesInSeries) {
  RoadGraph g(3, {{0, 1}, {1, 2}});
  TrafficNetwork net(g, {{0, 2, 1.0}}, {{{0, 1}}});
  LatencyModel m({kUnit, kUnit}, PerturbationSpec::none());
  const Vector l = path_latency(net, m, PathFlow(Vector{1.0}), Vector{0.0, 0.0});
  EXPECT_NEAR(l[0], 6.8, 1e-13);
}

TEST(PathLatency, DisjointPathsAreIndependent) {
  auto net = oracle::parallel_network({2}, {3.0});
  LatencyModel m({kUnit, kUnit}, PerturbationSpec::none());
  const Vector a = path_latency(net, m, PathFlow(Vector{1.0, 2.0}), Vector{0, 0});
  const Vector b = path_latency(net, m, PathFlow(Vector{1.0, 0.5}), Vector{0, 0});
  EXPECT_EQ(a[0], b[0]);
  EXPECT_NE(a[1], b[1]);
}

TEST(PathLatency, SharedEdgesMatchEdgeSumOracle) {
  const auto& inst = fixture::sioux_falls(4, 0.5);
  Rng rng(3);
  const PathFlow mu = random_flow(inst.network, rng);
  const Vector omega = inst.latency.sample_omega(rng);
  const Vector l = path_latency(inst.network, inst.latency, mu, omega);
  // Independent recomputation: edge flows by brute force over the incidence matrix.
  const auto lam = incidence_matrix(inst.network);
  for (std::size_t p = 0; p < mu.size(); p += 97) {
    double want = 0.0;
    for (std::size_t e = 0; e < lam.size(); ++e) {
      if (!lam[e][p]) continue;
      double q = 0.0;
      for (std::size_t r = 0; r < mu.size(); ++r) q += lam[e][r] * mu[r];
      want += edge_latency(inst.latency.edges[e], q, omega[e]);
    }
    EXPECT_NEAR(l[p], want, 1e-10 * want);
  }
}

TEST(Sbp, MatchesQuadrature) {
  const auto& inst = fixture::sioux_falls(4, 0.5);
  Rng rng(9);
  for (int i = 0; i < 5; ++i) {
    const PathFlow mu = random_flow(inst.network, rng, 0.3);
    const Vector omega = inst.latency.sample_omega(rng);
    const Vector q = edge_flow(inst.network, mu);
    double want = 0.0;
    for (std::size_t e = 0; e < q.size(); ++e)
      want += oracle::edge_potential_quadrature(inst.latency.edges[e], q[e], omega[e]);
    EXPECT_NEAR(sbp(inst.network, inst.latency, mu, omega), want, 1e-8 * want);
  }
  // Small flows, where the closed form is most prone to cancellation.
  for (double q : {1e-9, 1e-5, 0.3, 7.0, 1e4}) {
    const BprEdge e{2.0, 30.0, 0.15, 4.0};
    const double want = oracle::edge_potential_quadrature(e, q, 0.2);
    EXPECT_NEAR(edge_potential(e, q, 0.2), want, 1e-10 * want);
  }
}

TEST(Sbp, EmptyNetworkFlowIsZero) {
  auto net = oracle::parallel_network({2}, {1.0});
  LatencyModel m({kUnit, kUnit}, PerturbationSpec::uniform(0.3));
  EXPECT_EQ(m.potential(Vector{0, 0}, Vector{0.1, 0.2}), 0.0);
}

TEST(Mbp, Examples) {
  const auto& inst0 = fixture::sioux_falls(4, 0.0);
  const PathFlow mu = uniform_flow(inst0.network);
  EXPECT_EQ(mbp(inst0.network, inst0.latency, mu),
            sbp(inst0.network, inst0.latency, mu, Vector(inst0.network.num_edges(), 0.0)));

  LatencyModel m02(inst0.latency.edges, PerturbationSpec::uniform(0.2));
  const Vector q = edge_flow(inst0.network, mu);
  double qsum = 0.0;
  for (double x : q) qsum += x;
  EXPECT_NEAR(mbp(inst0.network, m02, mu), mbp(inst0.network, inst0.latency, mu) + 0.1 * qsum, 1e-9 * qsum);

  Rng rng(21);
  const auto est = mbp_monte_carlo(inst0.network, m02, mu, 10000, rng);
  EXPECT_LE(std::abs(est.value - mbp(inst0.network, m02, mu)), 3 * est.std_error);
  EXPECT_THROW(mbp_monte_carlo(inst0.network, m02, mu, 1, rng), Error);
}

TEST(Growth, ConstantLatencyModel) {
  // alpha1 = 0 and no noise: ||l||^2 = (1.0)^2 + (2.0)^2 whatever the flow.
  auto net = oracle::parallel_network({2}, {1.0});
  LatencyModel m({{1.0, 1.0, 0.0, 1.0}, {2.0, 1.0, 0.0, 1.0}}, PerturbationSpec::none());
  Rng rng(1);
  const auto g = estimate_growth_constants(net, m, 400, rng);
  Rng h(2);
  EXPECT_TRUE(certify_growth_constants(net, m, g, 2000, h).passed());
  // phi ranges over [1, 2] (all flow on the cheap or the dear edge).
  EXPECT_GE(g.B, 5.0 - g.A * 2.0 - 1e-12);
}

TEST(Growth, SingleEdgeHoldoutOf100k) {
  auto net = oracle::parallel_network({1}, {5.0});
  LatencyModel m({{2.0, 3.0, 0.15, 4.0}}, PerturbationSpec::uniform(0.5));
  Rng rng(4);
  const auto g = estimate_growth_constants(net, m, 1000, rng);
  Rng h(5);
  const auto c = certify_growth_constants(net, m, g, 100000, h);
  EXPECT_EQ(c.violations, 0);
}

TEST(Growth, SiouxFallsHoldoutOf10k) {
  const auto& inst = fixture::sioux_falls(8, 0.5);
  Rng rng = make_rng(1, streams::kGrowth);
  const auto g = estimate_growth_constants(inst.network, inst.latency, 1000, rng);
  Rng h = make_rng(1, streams::kAudit, 7);
  const auto c = certify_growth_constants(inst.network, inst.latency, g, 10000, h);
  EXPECT_EQ(c.violations, 0) << "worst ratio " << c.worst_ratio;
}

TEST(Growth, AllZeroPotentialWarns) {
  auto net = oracle::parallel_network({2}, {0.0});
  LatencyModel m({kUnit, kUnit}, PerturbationSpec::none());
  std::string seen;
  auto old = warning_sink();
  warning_sink() = [&](std::string_view s) { seen = s; };
  Rng rng(1);
  const auto g = estimate_growth_constants(net, m, 200, rng);
  warning_sink() = old;
  EXPECT_EQ(g.A, 1.0);
  EXPECT_NEAR(g.B, 2 * 1.15 * 1.15, 1e-12);
  EXPECT_NE(seen.find("zero"), std::string::npos);
}

// ---------------------------------------------------------------- properties

TEST(LatencyProperty, MonotoneInEdgeFlow) {
  const auto& inst = fixture::sioux_falls(4, 0.5);
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    Vector q(inst.latency.size()), q2(inst.latency.size());
    for (std::size_t e = 0; e < q.size(); ++e) {
      q[e] = 5000 * uniform01(rng);
      q2[e] = q[e] + 1000 * uniform01(rng);
    }
    const Vector w = inst.latency.sample_omega(rng);
    const Vector a = inst.latency.edge_latencies(q, w), b = inst.latency.edge_latencies(q2, w);
    for (std::size_t e = 0; e < q.size(); ++e) EXPECT_LE(a[e], b[e]);
  }
}

TEST(LatencyProperty, GradientOfPotentialIsPathLatency) {
  const auto& inst = fixture::sioux_falls(4, 0.5);
  const auto& net = inst.network;
  Rng rng(13);
  for (int i = 0; i < 5; ++i) {
    PathFlow mu = random_flow(net, rng);
    const Vector w = inst.latency.sample_omega(rng);
    const Vector l = path_latency(net, inst.latency, mu, w);
    for (std::size_t p = 0; p < mu.size(); p += 53) {
      const double h = 1e-3 * std::max(1.0, mu[p]);
      PathFlow up = mu, dn = mu;
      up[p] += h;
      dn[p] = std::max(0.0, dn[p] - h);
      const double fd = (sbp(net, inst.latency, up, w) - sbp(net, inst.latency, dn, w)) / (up[p] - dn[p]);
      EXPECT_NEAR(fd, l[p], 1e-5 * l[p]);
    }
  }
}

TEST(LatencyProperty, PotentialIsConvexAlongChords) {
  const auto& inst = fixture::sioux_falls(4, 0.5);
  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const PathFlow a = random_flow(inst.network, rng, 0.3), b = random_flow(inst.network, rng, 0.3);
    const Vector w = inst.latency.sample_omega(rng);
    const double lam = uniform01(rng);
    PathFlow m(a.size());
    for (std::size_t p = 0; p < a.size(); ++p) m[p] = lam * a[p] + (1 - lam) * b[p];
    const double rhs = lam * sbp(inst.network, inst.latency, a, w) + (1 - lam) * sbp(inst.network, inst.latency, b, w);
    EXPECT_LE(sbp(inst.network, inst.latency, m, w), rhs + 1e-9 * std::max(1.0, rhs));
  }
}
