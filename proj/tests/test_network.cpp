#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wanes/network.hpp"

using namespace wanes;

namespace {

RoadGraph diamond() {
  // A=0, B=1, C=2, D=3: A->B, B->D, A->C, C->D
  return RoadGraph(4, {{0, 1}, {1, 3}, {0, 2}, {2, 3}});
}

}  // namespace

TEST(EnumeratePaths, SingleEdgeHasOnePath) {
  RoadGraph g(2, {{0, 1}});
  const Vector c{1.0};
  const auto paths = enumerate_paths(g, {{0, 1, 1.0}}, c, 4);
  ASSERT_EQ(paths.size(), 1u);
  ASSERT_EQ(paths[0].size(), 1u);
  EXPECT_EQ(paths[0][0], (Path{0}));
}

TEST(EnumeratePaths, DiamondGivesBothBranches) {
  const Vector c{1, 1, 1, 1};
  const auto paths = enumerate_paths(diamond(), {{0, 3, 1.0}}, c, 2);
  ASSERT_EQ(paths[0].size(), 2u);
  EXPECT_EQ(paths[0][0], (Path{0, 1}));
  EXPECT_EQ(paths[0][1], (Path{2, 3}));
}

TEST(EnumeratePaths, UnreachableOdIsNamed) {
  RoadGraph g(3, {{0, 1}});
  const Vector c{1.0};
  try {
    enumerate_paths(g, {{0, 2, 1.0}}, c, 2);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("(1,3)"), std::string::npos);
  }
}

TEST(EnumeratePaths, SiouxFallsMatchesPrunedExhaustiveSearch) {
  const auto& nf = fixture::sioux_falls_net();
  const auto& inst = fixture::sioux_falls(8, 0.0);
  const auto& net = inst.network;
  Vector fftt;
  for (const auto& l : nf.links) fftt.push_back(l.free_flow_time);
  EXPECT_EQ(net.graph().num_nodes(), 24);
  EXPECT_EQ(net.num_edges(), 76u);
  for (std::size_t w = 0; w < net.num_ods(); w += 37) {
    const auto& od = net.od(w);
    ASSERT_EQ(net.od_size(w), 8u);
    double kth = 0.0;
    std::set<Path> distinct;
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      auto s = net.path(p);
      distinct.insert(Path(s.begin(), s.end()));
      double c = 0.0;
      for (int e : s) c += fftt[e];
      kth = std::max(kth, c);
    }
    EXPECT_EQ(distinct.size(), 8u);
    // Every simple path cheaper than the 8th must have been enumerated, and the
    // costs must be the 8 smallest.
    const auto all = oracle::simple_paths(net.graph(), fftt, od.origin, od.destination, kth);
    std::size_t strictly_cheaper = 0;
    for (const auto& [c, p] : all) {
      if (c < kth * (1 - 1e-12)) {
        ++strictly_cheaper;
        EXPECT_TRUE(distinct.count(p)) << "OD " << net.od_label(w) << " misses a path of cost " << c;
      }
    }
    EXPECT_LE(strictly_cheaper, 8u);
    std::vector<double> want;
    for (std::size_t i = 0; i < 8; ++i) want.push_back(all[i].first);
    std::vector<double> got;
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      double c = 0.0;
      for (int e : net.path(p)) c += fftt[e];
      got.push_back(c);
    }
    std::sort(got.begin(), got.end());
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
  }
}

TEST(EdgeFlow, Examples) {
  {
    RoadGraph g(3, {{0, 1}, {1, 2}});
    TrafficNetwork net(g, {{0, 2, 3.0}}, {{{0, 1}}});
    EXPECT_EQ(edge_flow(net, PathFlow(Vector{3.0})), (Vector{3.0, 3.0}));
  }
  {
    auto net = oracle::parallel_network({2}, {7.0});
    // Two disjoint single-edge paths.
    EXPECT_EQ(edge_flow(net, PathFlow(Vector{2.0, 5.0})), (Vector{2.0, 5.0}));
  }
  {
    // Two two-edge paths sharing edge 0.
    RoadGraph g(3, {{0, 1}, {1, 2}, {1, 2}});
    TrafficNetwork net(g, {{0, 2, 3.0}}, {{{0, 1}, {0, 2}}});
    const Vector q = edge_flow(net, PathFlow(Vector{1.0, 2.0}));
    EXPECT_EQ(q[0], 3.0);
    EXPECT_EQ(q[1], 1.0);
    EXPECT_EQ(q[2], 2.0);
  }
}

TEST(EdgeFlow, DimensionMismatchThrows) {
  auto net = oracle::parallel_network({2}, {1.0});
  EXPECT_THROW(edge_flow(net, PathFlow(Vector{1.0})), Error);
}

TEST(ShortestPath, DiamondPicksCheaperBranch) {
  const Vector c{1, 1, 2, 2};
  const auto sp = shortest_path(diamond(), c, 0, 3);
  EXPECT_EQ(sp.edges, (Path{0, 1}));
  EXPECT_DOUBLE_EQ(sp.cost, 2.0);
}

TEST(ShortestPath, TiesGoToLexicographicallyFirst) {
  const Vector c{1, 1, 1, 1};
  EXPECT_EQ(shortest_path(diamond(), c, 0, 3).edges, (Path{0, 1}));
  // Same graph with the C branch inserted first: still the node order A,B,D.
  RoadGraph g(4, {{0, 2}, {2, 3}, {0, 1}, {1, 3}});
  EXPECT_EQ(shortest_path(g, c, 0, 3).edges, (Path{2, 3}));
}

TEST(ShortestPath, UnreachableThrows) {
  RoadGraph g(3, {{0, 1}});
  const Vector c{1.0};
  EXPECT_THROW(shortest_path(g, c, 0, 2), Error);
}

TEST(ShortestPath, SiouxFallsMatchesBellmanFord) {
  const auto& nf = fixture::sioux_falls_net();
  const auto& net = fixture::sioux_falls(8, 0.0).network;
  Vector fftt;
  for (const auto& l : nf.links) fftt.push_back(l.free_flow_time);
  for (int s = 0; s < 24; ++s) {
    const Vector d = oracle::bellman_ford(net.graph(), fftt, s);
    for (int t = 0; t < 24; ++t) {
      if (s == t) continue;
      EXPECT_NEAR(shortest_path(net.graph(), fftt, s, t).cost, d[t], 1e-9);
    }
  }
}

TEST(TrafficNetwork, RejectsMalformedInput) {
  EXPECT_THROW(RoadGraph(2, {{0, 0}}), Error);
  RoadGraph g(3, {{0, 1}, {1, 2}});
  EXPECT_THROW(TrafficNetwork(g, {{0, 2, 1.0}}, {{{1}}}), Error);     // not from the origin
  EXPECT_THROW(TrafficNetwork(g, {{0, 2, 1.0}}, {{{0}}}), Error);     // stops short
  EXPECT_THROW(TrafficNetwork(g, {{0, 2, 1.0}}, {{{0, 1}, {0, 1}}}), Error);  // duplicate
  EXPECT_THROW(TrafficNetwork(g, {{0, 2, 1.0}}, {{}}), Error);
}

// ---------------------------------------------------------------- properties

TEST(NetworkProperty, EdgeMassEqualsPathLengthWeightedFlow) {
  const auto& net = fixture::sioux_falls(8, 0.0).network;
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const PathFlow mu = random_flow(net, rng, 0.5);
    const Vector q = edge_flow(net, mu);
    double lhs = 0.0, rhs = 0.0;
    for (double x : q) lhs += x;
    for (std::size_t p = 0; p < mu.size(); ++p) rhs += mu[p] * static_cast<double>(net.path(p).size());
    EXPECT_NEAR(lhs, rhs, 1e-9 * rhs);
    EXPECT_TRUE(is_feasible(net, mu));
  }
}

TEST(NetworkProperty, EnumerationIsPrefixStable) {
  const auto& nf = fixture::sioux_falls_net();
  RoadGraph g(nf.nodes, [&] {
    std::vector<Edge> e;
    for (const auto& l : nf.links) e.push_back({l.init_node - 1, l.term_node - 1});
    return e;
  }());
  Vector fftt;
  for (const auto& l : nf.links) fftt.push_back(l.free_flow_time);
  for (auto [s, t] : {std::pair{0, 19}, {12, 5}, {23, 9}}) {
    const auto k8 = k_shortest_paths(g, fftt, s, t, 8);
    const auto k9 = k_shortest_paths(g, fftt, s, t, 9);
    ASSERT_EQ(k9.size(), 9u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(k8[i].edges, k9[i].edges);
  }
}

TEST(NetworkProperty, ShortestCostIsMinimumOverAllPaths) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    // Small random DAG-ish graphs: few enough simple paths to enumerate fully.
    std::vector<Edge> edges;
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b)
        if (a != b && uniform01(rng) < 0.35) edges.push_back({a, b});
    RoadGraph g(5, edges);
    Vector c(edges.size());
    for (double& x : c) x = u(rng);
    const auto all = oracle::simple_paths(g, c, 0, 4);
    if (all.empty() || all.size() > 10) continue;
    EXPECT_NEAR(shortest_path(g, c, 0, 4).cost, all.front().first, 1e-12);
    const auto ks = k_shortest_paths(g, c, 0, 4, static_cast<int>(all.size()) + 2);
    ASSERT_EQ(ks.size(), all.size());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_NEAR(ks[i].cost, all[i].first, 1e-12);
  }
}
