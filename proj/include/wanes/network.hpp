#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wanes/common.hpp"
#include "wanes/random.hpp"

namespace wanes {

struct Edge {
  int tail = 0;
  int head = 0;
};

/// Origin-destination pair with its demand in flow units.
struct OdPair {
  int origin = 0;
  int destination = 0;
  double demand = 0.0;
};

/// A path is the ordered list of edge ids it traverses.
using Path = std::vector<int>;

/// Directed road graph with nodes 0..n-1 and edge ids in insertion order.
class RoadGraph {
 public:
  RoadGraph() = default;

  RoadGraph(int num_nodes, std::vector<Edge> edges)
      : num_nodes_(num_nodes), edges_(std::move(edges)), out_(num_nodes), in_(num_nodes) {
    if (num_nodes <= 0) throw Error("RoadGraph: need at least one node");
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Edge& ed = edges_[e];
      if (ed.tail < 0 || ed.tail >= num_nodes || ed.head < 0 || ed.head >= num_nodes)
        throw Error("RoadGraph: edge " + std::to_string(e) + " references a node out of range");
      if (ed.tail == ed.head)
        throw Error("RoadGraph: edge " + std::to_string(e) + " is a self-loop at node " +
                    std::to_string(ed.tail));
      out_[ed.tail].push_back(static_cast<int>(e));
      in_[ed.head].push_back(static_cast<int>(e));
    }
    // Out-lists ordered by (head, edge id): the walk in shortest_path relies on it.
    for (auto& lst : out_) {
      std::sort(lst.begin(), lst.end(), [this](int a, int b) {
        return std::pair(edges_[a].head, a) < std::pair(edges_[b].head, b);
      });
    }
  }

  int num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  const Edge& edge(int e) const { return edges_.at(e); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const int> out_edges(int node) const { return out_[node]; }
  std::span<const int> in_edges(int node) const { return in_[node]; }

  /// Node sequence visited by an edge path starting at `origin`.
  std::vector<int> nodes_of(std::span<const int> path, int origin) const {
    std::vector<int> nodes{origin};
    for (int e : path) nodes.push_back(edges_.at(e).head);
    return nodes;
  }

 private:
  int num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
};

struct ShortestPath {
  Path edges;
  double cost = 0.0;
};

namespace detail {

inline bool nearly_equal(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Shortest path avoiding the blocked nodes/edges. Among equal-cost paths it
/// returns the fewest-hop ones, and among those the lexicographically smallest
/// node sequence (parallel edges: smallest edge id).
inline std::optional<ShortestPath> constrained_shortest_path(const RoadGraph& g,
                                                             std::span<const double> costs,
                                                             int origin, int destination,
                                                             const std::vector<char>& blocked_nodes,
                                                             const std::vector<char>& blocked_edges) {
  const int n = g.num_nodes();
  if (origin == destination) return ShortestPath{};
  if (blocked_nodes[origin] || blocked_nodes[destination]) return std::nullopt;

  // Backward Dijkstra from the destination: dist[v] = cost of best v -> destination.
  std::vector<double> dist(n, kInf);
  std::vector<int> hops(n, std::numeric_limits<int>::max());
  std::vector<char> done(n, 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[destination] = 0.0;
  hops[destination] = 0;
  heap.emplace(0.0, destination);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (done[v]) continue;
    done[v] = 1;
    for (int e : g.in_edges(v)) {
      if (blocked_edges[e]) continue;
      const int u = g.edge(e).tail;
      if (blocked_nodes[u] || done[u]) continue;
      const double nd = d + costs[e];
      if (nd < dist[u] && !nearly_equal(nd, dist[u])) {
        dist[u] = nd;
        hops[u] = hops[v] + 1;
        heap.emplace(nd, u);
      } else if (nearly_equal(nd, dist[u]) && hops[v] + 1 < hops[u]) {
        hops[u] = hops[v] + 1;
      }
    }
  }
  if (dist[origin] == kInf) return std::nullopt;

  ShortestPath sp;
  int u = origin;
  while (u != destination) {
    int chosen = -1;
    for (int e : g.out_edges(u)) {  // sorted by (head, id)
      if (blocked_edges[e]) continue;
      const int v = g.edge(e).head;
      if (blocked_nodes[v] || dist[v] == kInf) continue;
      if (hops[v] + 1 != hops[u]) continue;
      if (!nearly_equal(costs[e] + dist[v], dist[u])) continue;
      chosen = e;
      break;
    }
    if (chosen < 0) throw Error("shortest_path: inconsistent tie walk");
    sp.edges.push_back(chosen);
    sp.cost += costs[chosen];
    u = g.edge(chosen).head;
  }
  return sp;
}

}  // namespace detail

/// Minimal-cost directed path from `origin` to `destination`. Ties between
/// equal-cost routes go to the lexicographically smallest node sequence (among
/// the fewest-hop ones when zero-cost edges create alternatives).
inline ShortestPath shortest_path(const RoadGraph& g, std::span<const double> costs, int origin,
                                  int destination) {
  if (costs.size() != g.num_edges()) throw Error("shortest_path: cost vector has wrong size");
  for (double c : costs)
    if (!(c >= 0.0)) throw Error("shortest_path: edge costs must be nonnegative");
  std::vector<char> bn(g.num_nodes(), 0), be(g.num_edges(), 0);
  auto sp = detail::constrained_shortest_path(g, costs, origin, destination, bn, be);
  if (!sp)
    throw Error("shortest_path: node " + std::to_string(destination) + " unreachable from " +
                std::to_string(origin));
  return *sp;
}

/// Yen's K loopless shortest paths, sorted by cost. Candidates with equal cost
/// are ordered by their edge-id sequence, so the output for K is a prefix of
/// the output for K+1.
inline std::vector<ShortestPath> k_shortest_paths(const RoadGraph& g, std::span<const double> costs,
                                                  int origin, int destination, int k) {
  if (k < 1) throw Error("k_shortest_paths: K must be positive");
  if (origin == destination) throw Error("k_shortest_paths: origin equals destination");
  std::vector<ShortestPath> accepted{shortest_path(g, costs, origin, destination)};

  auto path_cost = [&](const Path& p) {
    double c = 0.0;
    for (int e : p) c += costs[e];
    return c;
  };
  auto key_less = [](const ShortestPath& a, const ShortestPath& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.edges < b.edges;
  };
  std::set<ShortestPath, decltype(key_less)> candidates(key_less);
  std::set<Path> seen{accepted.front().edges};

  std::vector<char> blocked_nodes(g.num_nodes(), 0), blocked_edges(g.num_edges(), 0);
  while (static_cast<int>(accepted.size()) < k) {
    const Path& prev = accepted.back().edges;
    const std::vector<int> prev_nodes = g.nodes_of(prev, origin);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      const int spur = prev_nodes[i];
      std::fill(blocked_nodes.begin(), blocked_nodes.end(), 0);
      std::fill(blocked_edges.begin(), blocked_edges.end(), 0);
      for (const auto& a : accepted) {
        if (a.edges.size() > i && std::equal(prev.begin(), prev.begin() + i, a.edges.begin()))
          blocked_edges[a.edges[i]] = 1;
      }
      for (std::size_t j = 0; j < i; ++j) blocked_nodes[prev_nodes[j]] = 1;
      auto spur_path =
          detail::constrained_shortest_path(g, costs, spur, destination, blocked_nodes, blocked_edges);
      if (!spur_path) continue;
      Path total(prev.begin(), prev.begin() + i);
      total.insert(total.end(), spur_path->edges.begin(), spur_path->edges.end());
      if (seen.count(total)) continue;
      seen.insert(total);
      const double c = path_cost(total);
      candidates.insert(ShortestPath{std::move(total), c});
    }
    if (candidates.empty()) break;
    accepted.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }
  return accepted;
}

/// Path flow vector: one nonnegative entry per enumerated path, in the
/// network's global path order.
struct PathFlow {
  Vector values;

  PathFlow() = default;
  explicit PathFlow(Vector v) : values(std::move(v)) {}
  explicit PathFlow(std::size_t n, double fill = 0.0) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const { return values; }
  std::span<double> span() { return values; }
  bool operator==(const PathFlow&) const = default;
};

/// Road graph plus OD demands and the per-OD path sets. Path indices of OD w
/// occupy the contiguous range [od_begin(w), od_end(w)). Immutable once built.
class TrafficNetwork {
 public:
  TrafficNetwork() = default;

  TrafficNetwork(RoadGraph graph, std::vector<OdPair> ods, const std::vector<std::vector<Path>>& paths)
      : graph_(std::move(graph)), ods_(std::move(ods)) {
    if (paths.size() != ods_.size()) throw Error("TrafficNetwork: one path list per OD pair required");
    offsets_.push_back(0);
    for (std::size_t w = 0; w < ods_.size(); ++w) {
      const OdPair& od = ods_[w];
      if (od.origin < 0 || od.origin >= graph_.num_nodes() || od.destination < 0 ||
          od.destination >= graph_.num_nodes())
        throw Error("TrafficNetwork: OD " + std::to_string(w) + " references an unknown node");
      if (!(od.demand >= 0.0) || !std::isfinite(od.demand))
        throw Error("TrafficNetwork: OD " + std::to_string(w) + " has invalid demand");
      if (paths[w].empty()) throw Error("TrafficNetwork: OD " + od_label(w) + " has no paths");
      std::set<Path> distinct;
      for (const Path& p : paths[w]) {
        check_path(p, od, w);
        if (!distinct.insert(p).second)
          throw Error("TrafficNetwork: duplicate path for OD " + od_label(w));
        path_od_.push_back(static_cast<int>(w));
        path_offsets_.push_back(path_edges_.size());
        path_edges_.insert(path_edges_.end(), p.begin(), p.end());
      }
      offsets_.push_back(path_od_.size());
      total_demand_ += od.demand;
      max_demand_ = std::max(max_demand_, od.demand);
      max_paths_ = std::max(max_paths_, paths[w].size());
    }
    path_offsets_.push_back(path_edges_.size());
  }

  const RoadGraph& graph() const { return graph_; }
  std::size_t num_edges() const { return graph_.num_edges(); }
  std::size_t num_ods() const { return ods_.size(); }
  std::size_t num_paths() const { return path_od_.size(); }
  const OdPair& od(std::size_t w) const { return ods_.at(w); }
  const std::vector<OdPair>& ods() const { return ods_; }
  std::size_t od_begin(std::size_t w) const { return offsets_.at(w); }
  std::size_t od_end(std::size_t w) const { return offsets_.at(w + 1); }
  std::size_t od_size(std::size_t w) const { return od_end(w) - od_begin(w); }
  int od_of_path(std::size_t p) const { return path_od_.at(p); }
  std::span<const int> path(std::size_t p) const {
    return std::span<const int>(path_edges_).subspan(path_offsets_[p],
                                                     path_offsets_[p + 1] - path_offsets_[p]);
  }
  /// Total demand, written M-bar in the analysis.
  double total_demand() const { return total_demand_; }
  double max_demand() const { return max_demand_; }
  std::size_t max_paths_per_od() const { return max_paths_; }

  std::string od_label(std::size_t w) const {
    return "(" + std::to_string(ods_[w].origin + 1) + "," + std::to_string(ods_[w].destination + 1) + ")";
  }

  std::vector<std::vector<Path>> path_sets() const {
    std::vector<std::vector<Path>> out(num_ods());
    for (std::size_t w = 0; w < num_ods(); ++w)
      for (std::size_t p = od_begin(w); p < od_end(w); ++p) {
        auto s = path(p);
        out[w].emplace_back(s.begin(), s.end());
      }
    return out;
  }

 private:
  void check_path(const Path& p, const OdPair& od, std::size_t w) const {
    if (p.empty()) throw Error("TrafficNetwork: empty path for OD " + od_label(w));
    std::vector<char> visited(graph_.num_nodes(), 0);
    int at = od.origin;
    visited[at] = 1;
    for (int e : p) {
      if (e < 0 || static_cast<std::size_t>(e) >= graph_.num_edges())
        throw Error("TrafficNetwork: path for OD " + od_label(w) + " uses unknown edge");
      const Edge& ed = graph_.edge(e);
      if (ed.tail != at) throw Error("TrafficNetwork: path for OD " + od_label(w) + " is not contiguous");
      at = ed.head;
      if (visited[at]) throw Error("TrafficNetwork: path for OD " + od_label(w) + " is not simple");
      visited[at] = 1;
    }
    if (at != od.destination)
      throw Error("TrafficNetwork: path for OD " + od_label(w) + " does not end at its destination");
  }

  RoadGraph graph_;
  std::vector<OdPair> ods_;
  std::vector<std::size_t> offsets_;
  std::vector<int> path_od_;
  std::vector<std::size_t> path_offsets_;
  std::vector<int> path_edges_;
  double total_demand_ = 0.0;
  double max_demand_ = 0.0;
  std::size_t max_paths_ = 0;
};

/// Up to K loopless shortest paths per OD pair under the given edge costs
/// (normally free-flow times).
inline std::vector<std::vector<Path>> enumerate_paths(const RoadGraph& g, const std::vector<OdPair>& ods,
                                                      std::span<const double> costs, int k) {
  if (k < 1) throw Error("enumerate_paths: K must be at least 1");
  std::vector<std::vector<Path>> out;
  out.reserve(ods.size());
  for (const OdPair& od : ods) {
    const std::vector<char> bn(g.num_nodes(), 0), be(g.num_edges(), 0);
    if (od.origin == od.destination ||
        !detail::constrained_shortest_path(g, costs, od.origin, od.destination, bn, be))
      throw Error("enumerate_paths: OD pair (" + std::to_string(od.origin + 1) + "," +
                  std::to_string(od.destination + 1) + ") has no path");
    std::vector<ShortestPath> found = k_shortest_paths(g, costs, od.origin, od.destination, k);
    std::vector<Path> paths;
    for (auto& sp : found) paths.push_back(std::move(sp.edges));
    out.push_back(std::move(paths));
  }
  return out;
}

/// Builds a network whose path sets are the K shortest loopless paths under
/// `costs`. Zero-demand OD pairs are dropped with a warning.
inline TrafficNetwork build_network(RoadGraph graph, const std::vector<OdPair>& ods,
                                    std::span<const double> costs, int k) {
  std::vector<OdPair> kept;
  for (const OdPair& od : ods) {
    if (od.demand == 0.0) {
      warn("dropping zero-demand OD pair (" + std::to_string(od.origin + 1) + "," +
           std::to_string(od.destination + 1) + ")");
      continue;
    }
    if (!(od.demand > 0.0)) throw Error("build_network: negative demand");
    kept.push_back(od);
  }
  auto paths = enumerate_paths(graph, kept, costs, k);
  return TrafficNetwork(std::move(graph), std::move(kept), paths);
}

/// q = Lambda * mu.
inline Vector edge_flow(const TrafficNetwork& net, const PathFlow& mu) {
  if (mu.size() != net.num_paths()) throw Error("edge_flow: path flow has wrong dimension");
  Vector q(net.num_edges(), 0.0);
  for (std::size_t p = 0; p < net.num_paths(); ++p) {
    const double f = mu[p];
    if (f == 0.0) continue;
    for (int e : net.path(p)) q[e] += f;
  }
  return q;
}

/// Lambda^T * v: sums an edge vector along every path.
inline Vector path_sums(const TrafficNetwork& net, std::span<const double> edge_values) {
  if (edge_values.size() != net.num_edges()) throw Error("path_sums: edge vector has wrong dimension");
  Vector out(net.num_paths(), 0.0);
  for (std::size_t p = 0; p < net.num_paths(); ++p) {
    double s = 0.0;
    for (int e : net.path(p)) s += edge_values[e];
    out[p] = s;
  }
  return out;
}

/// Dense 0/1 incidence matrix (row-major |E| x |P|); intended for tests and
/// diagnostics on small networks.
inline std::vector<std::vector<int>> incidence_matrix(const TrafficNetwork& net) {
  std::vector<std::vector<int>> m(net.num_edges(), std::vector<int>(net.num_paths(), 0));
  for (std::size_t p = 0; p < net.num_paths(); ++p)
    for (int e : net.path(p)) m[e][p] = 1;
  return m;
}

/// Largest violation of nonnegativity or per-OD mass, relative to demand.
inline double feasibility_error(const TrafficNetwork& net, const PathFlow& mu) {
  if (mu.size() != net.num_paths()) return kInf;
  double worst = 0.0;
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    double s = 0.0;
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      if (mu[p] < 0.0) worst = std::max(worst, -mu[p] / std::max(1.0, net.od(w).demand));
      s += mu[p];
    }
    worst = std::max(worst, std::abs(s - net.od(w).demand) / std::max(1.0, net.od(w).demand));
  }
  return worst;
}

inline bool is_feasible(const TrafficNetwork& net, const PathFlow& mu, double tol = 1e-9) {
  return feasibility_error(net, mu) <= tol;
}

/// Per-OD uniform split m_w / |P_w|.
inline PathFlow uniform_flow(const TrafficNetwork& net) {
  PathFlow mu(net.num_paths());
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    const double share = net.od(w).demand / static_cast<double>(net.od_size(w));
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) mu[p] = share;
  }
  return mu;
}

/// Random point of the flow polytope: per-OD Dirichlet(c) scaled by m_w.
inline PathFlow random_flow(const TrafficNetwork& net, Rng& rng, double concentration = 1.0) {
  PathFlow mu(net.num_paths());
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    auto block = mu.span().subspan(net.od_begin(w), net.od_size(w));
    sample_dirichlet(rng, concentration, block);
    for (double& x : block) x *= net.od(w).demand;
  }
  return mu;
}

}  // namespace wanes
