#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "wanes/common.hpp"
#include "wanes/latency.hpp"
#include "wanes/network.hpp"

namespace wanes {

enum class FwVariant {
  classic,   // mu + gamma (s - mu) with one global step
  pairwise,  // per OD in turn: shift flow from the costliest used path to the cheapest one
};

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 50000;
  FwVariant variant = FwVariant::pairwise;
  std::optional<PathFlow> start{};  // default: uniform flow
  bool keep_history = false;
};

struct EquilibriumResult {
  PathFlow mu_star;
  double phi_star = 0.0;     // Phi(mu_star), an upper estimate of the optimum
  double lower_bound = 0.0;  // best Frank-Wolfe dual bound seen
  double relative_gap = kInf;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // Phi(mu^k), filled when keep_history is set
  std::vector<double> bounds;
};

/// All-or-nothing assignment on the enumerated paths: each OD's demand goes
/// to its cheapest path, lowest index on ties.
inline PathFlow all_or_nothing(const TrafficNetwork& net, std::span<const double> path_cost) {
  PathFlow s(net.num_paths());
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    std::size_t best = net.od_begin(w);
    for (std::size_t p = best + 1; p < net.od_end(w); ++p)
      if (path_cost[p] < path_cost[best]) best = p;
    s[best] = net.od(w).demand;
  }
  return s;
}

/// <mu - s, c> with s the all-or-nothing flow for costs c.
inline double aon_gap(const TrafficNetwork& net, const PathFlow& mu, std::span<const double> cost) {
  double g = 0.0;
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    double lo = kInf, used = 0.0;
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      lo = std::min(lo, cost[p]);
      used += mu[p] * cost[p];
    }
    g += used - net.od(w).demand * lo;
  }
  return std::max(g, 0.0);
}

/// max over mu' of <mu - mu', E[l(mu)]>, divided by Phi(mu).
inline double mwe_gap(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu) {
  const double phi = mbp(net, model, mu);
  const Vector l = mean_path_latency(net, model, mu);
  return aon_gap(net, mu, l) / phi;
}

namespace detail {

/// Minimiser over gamma in [0, gamma_max] of Phi(q + gamma d), by bisection on
/// the monotone derivative sum_e l_e(q_e + gamma d_e) d_e.
inline double beckmann_line_search(const LatencyModel& model, const Vector& q, const Vector& d,
                                   std::span<const double> omega, double gamma_max) {
  auto slope = [&](double g) {
    double s = 0.0;
    for (std::size_t e = 0; e < q.size(); ++e) {
      if (d[e] == 0.0) continue;
      s += edge_latency(model.edges[e], std::max(0.0, q[e] + g * d[e]), omega[e]) * d[e];
    }
    return s;
  };
  if (slope(0.0) >= 0.0) return 0.0;
  if (slope(gamma_max) <= 0.0) return gamma_max;
  double lo = 0.0, hi = gamma_max;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// One pass over the OD pairs. For each, the flow on the costliest used path
/// moves toward the cheapest path by the exact minimiser of Phi along that
/// two-path direction; q is updated in place.
inline void pairwise_sweep(const TrafficNetwork& net, const LatencyModel& model, std::span<const double> omega,
                           PathFlow& mu, Vector& q) {
  std::vector<std::pair<int, int>> diff;  // (edge, +1 | -1)
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    const std::size_t begin = net.od_begin(w), end = net.od_end(w);
    if (end - begin < 2) continue;
    std::size_t to = begin, from = end;
    double c_to = kInf, c_from = -kInf;
    for (std::size_t p = begin; p < end; ++p) {
      double c = 0.0;
      for (int e : net.path(p)) c += edge_latency(model.edges[e], q[e], omega[e]);
      if (c < c_to) {
        c_to = c;
        to = p;
      }
      if (mu[p] > 0.0 && c > c_from) {
        c_from = c;
        from = p;
      }
    }
    if (from == end || from == to || !(c_from - c_to > 1e-15 * c_to)) continue;

    diff.clear();
    for (int e : net.path(to)) diff.emplace_back(e, +1);
    for (int e : net.path(from)) {
      auto it = std::find(diff.begin(), diff.end(), std::pair(e, +1));
      if (it != diff.end()) diff.erase(it);
      else diff.emplace_back(e, -1);
    }
    auto slope = [&](double x) {
      double g = 0.0;
      for (auto [e, sgn] : diff) g += sgn * edge_latency(model.edges[e], std::max(0.0, q[e] + sgn * x), omega[e]);
      return g;
    };
    const double cap = mu[from];
    double step = cap;
    if (slope(cap) > 0.0) {
      double lo = 0.0, hi = cap;
      while (hi - lo > 1e-12 * std::max(1.0, cap)) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) < 0.0 ? lo : hi) = mid;
      }
      step = 0.5 * (lo + hi);
    }
    mu[from] = step == cap ? 0.0 : mu[from] - step;
    mu[to] += step;
    for (auto [e, sgn] : diff) q[e] = std::max(0.0, q[e] + sgn * step);
  }
}

}  // namespace detail

/// Frank-Wolfe on the mean Beckmann potential over the enumerated path polytope.
inline EquilibriumResult solve_mwe(const TrafficNetwork& net, const LatencyModel& model,
                                   const SolverOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw Error("solve_mwe: tolerance must be positive");
  if (opt.max_iter < 1) throw Error("solve_mwe: max_iter must be at least 1");
  check_model(net, model);
  const Vector omega = model.mean_omega();

  EquilibriumResult res;
  PathFlow mu = opt.start ? *opt.start : uniform_flow(net);
  if (!is_feasible(net, mu, 1e-8)) throw Error("solve_mwe: start flow is not feasible");
  Vector q = edge_flow(net, mu);
  double lower = -kInf;
  PathFlow best = mu;
  double best_gap = kInf, best_phi = kInf;

  for (int k = 0;; ++k) {
    const double phi = model.potential(q, omega);
    const Vector cost = path_sums(net, model.edge_latencies(q, omega));
    const double gap = aon_gap(net, mu, cost);
    lower = std::max(lower, phi - gap);
    const double rel = gap / phi;
    if (opt.keep_history) {
      res.objective.push_back(phi);
      res.bounds.push_back(lower);
    }
    if (rel < best_gap) {
      best_gap = rel;
      best_phi = phi;
      best = mu;
    }
    res.iterations = k;
    if (rel <= opt.tol) {
      res.converged = true;
      break;
    }
    if (k == opt.max_iter) break;

    if (opt.variant == FwVariant::pairwise) {
      detail::pairwise_sweep(net, model, omega, mu, q);
      q = edge_flow(net, mu);
      continue;
    }
    const PathFlow s = all_or_nothing(net, cost);
    PathFlow dir(net.num_paths());
    for (std::size_t p = 0; p < mu.size(); ++p) dir[p] = s[p] - mu[p];
    const Vector d = edge_flow(net, dir);
    const double gamma = detail::beckmann_line_search(model, q, d, omega, 1.0);
    if (gamma == 0.0) break;
    for (std::size_t p = 0; p < mu.size(); ++p) mu[p] = std::max(0.0, mu[p] + gamma * dir[p]);
    q = edge_flow(net, mu);
  }
  res.mu_star = std::move(best);
  res.phi_star = best_phi;
  res.lower_bound = lower;
  res.relative_gap = best_gap;
  return res;
}

inline double distance_to_reference(const PathFlow& mu, const EquilibriumResult& eq) {
  return squared_distance(mu.span(), eq.mu_star.span());
}

struct WardropAudit {
  double max_violation = 0.0;  // (E[l_p] - min_w) / min_w over used paths
  std::size_t violations = 0;
  std::size_t used_paths = 0;
  bool passed = true;
};

/// A path counts as used when it carries more than used_fraction of its
/// OD's demand.
inline WardropAudit wardrop_audit(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu,
                                  double tol, double used_fraction = 1e-6) {
  const Vector l = mean_path_latency(net, model, mu);
  WardropAudit a;
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    double lo = kInf;
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) lo = std::min(lo, l[p]);
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      if (mu[p] <= used_fraction * net.od(w).demand) continue;
      ++a.used_paths;
      const double v = (l[p] - lo) / lo;
      a.max_violation = std::max(a.max_violation, v);
      if (v > tol) ++a.violations;
    }
  }
  a.passed = a.violations == 0;
  return a;
}

}  // namespace wanes
