#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wanes/common.hpp"
#include "wanes/network.hpp"
#include "wanes/random.hpp"
#include "wanes/simplex.hpp"

namespace wanes {

/// Perturbed BPR edge: l(q, w) = t * (1 + alpha1 * (1 + q / C)^alpha2) + w.
///
/// Note the inner term is (1 + q/C), not the textbook q/C: an empty edge
/// already costs t * (1 + alpha1).
struct BprEdge {
  double free_time = 1.0;  // t_e
  double capacity = 1.0;   // C_e
  double alpha1 = 0.15;
  double alpha2 = 4.0;

  void validate() const {
    if (!(free_time > 0.0)) throw Error("BprEdge: free travel time must be positive");
    if (!(capacity > 0.0)) throw Error("BprEdge: capacity must be positive");
    if (!(alpha1 >= 0.0)) throw Error("BprEdge: alpha1 must be nonnegative");
    if (!(alpha2 >= 1.0)) throw Error("BprEdge: alpha2 must be at least 1");
  }
};

inline double edge_latency(const BprEdge& edge, double q, double omega) {
  if (q < 0.0) throw Error("edge_latency: negative edge flow");
  return edge.free_time * (1.0 + edge.alpha1 * std::pow(1.0 + q / edge.capacity, edge.alpha2)) + omega;
}

/// d l / d q.
inline double edge_latency_slope(const BprEdge& edge, double q) {
  return edge.free_time * edge.alpha1 * edge.alpha2 / edge.capacity *
         std::pow(1.0 + q / edge.capacity, edge.alpha2 - 1.0);
}

/// Closed-form integral of edge_latency over [0, q].
inline double edge_potential(const BprEdge& edge, double q, double omega) {
  if (q < 0.0) throw Error("edge_potential: negative edge flow");
  const double a = edge.alpha2 + 1.0;
  // expm1/log1p keep the bracket accurate when q << C.
  const double bracket = std::expm1(a * std::log1p(q / edge.capacity));
  return edge.free_time * (q + edge.alpha1 * edge.capacity * bracket / a) + omega * q;
}

enum class PerturbationKind { none, uniform, truncated_gaussian };

/// Distribution of the edge-wise perturbation vector. All samples are
/// nonnegative; every edge draws independently from the same law.
struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::none;
  double w_max = 0.0;   // uniform: support [0, w_max]
  double mean = 0.0;    // truncated gaussian: location before truncation
  double stddev = 0.0;  // truncated gaussian: scale before truncation
  std::uint64_t stream = streams::kPerturbation;

  static PerturbationSpec none() { return {}; }
  static PerturbationSpec uniform(double w_max) {
    PerturbationSpec s;
    s.kind = PerturbationKind::uniform;
    s.w_max = w_max;
    return s;
  }
  static PerturbationSpec truncated_gaussian(double mean, double stddev) {
    PerturbationSpec s;
    s.kind = PerturbationKind::truncated_gaussian;
    s.mean = mean;
    s.stddev = stddev;
    return s;
  }

  void validate() const {
    switch (kind) {
      case PerturbationKind::none:
        break;
      case PerturbationKind::uniform:
        if (!(w_max >= 0.0)) throw Error("PerturbationSpec: w_max must be nonnegative");
        break;
      case PerturbationKind::truncated_gaussian:
        if (!(stddev > 0.0)) throw Error("PerturbationSpec: stddev must be positive");
        if (mean / stddev < -8.0) throw Error("PerturbationSpec: truncation mass too small");
        break;
    }
  }

  /// True when the distribution is a point mass (Omega is a singleton).
  bool deterministic() const {
    return kind == PerturbationKind::none || (kind == PerturbationKind::uniform && w_max == 0.0);
  }

  bool bounded() const { return kind != PerturbationKind::truncated_gaussian; }

  /// Largest value a single draw can take (infinite for the gaussian).
  double upper() const {
    switch (kind) {
      case PerturbationKind::none: return 0.0;
      case PerturbationKind::uniform: return w_max;
      case PerturbationKind::truncated_gaussian: return kInf;
    }
    return 0.0;
  }

  double expected() const {
    switch (kind) {
      case PerturbationKind::none:
        return 0.0;
      case PerturbationKind::uniform:
        return 0.5 * w_max;
      case PerturbationKind::truncated_gaussian: {
        // Gaussian conditioned on being >= 0.
        const double a = -mean / stddev;
        const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
        const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
        return mean + stddev * pdf / tail;
      }
    }
    return 0.0;
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case PerturbationKind::none:
        return 0.0;
      case PerturbationKind::uniform:
        return w_max * uniform01(rng);
      case PerturbationKind::truncated_gaussian: {
        std::normal_distribution<double> normal(mean, stddev);
        for (;;) {
          const double x = normal(rng);
          if (x >= 0.0) return x;
        }
      }
    }
    return 0.0;
  }

  std::string describe() const {
    switch (kind) {
      case PerturbationKind::none: return "none";
      case PerturbationKind::uniform: return "uniform(0," + std::to_string(w_max) + ")";
      case PerturbationKind::truncated_gaussian:
        return "truncated-gaussian(" + std::to_string(mean) + "," + std::to_string(stddev) + ")";
    }
    return "?";
  }
};

/// Per-edge BPR parameters plus the perturbation law.
struct LatencyModel {
  std::vector<BprEdge> edges;
  PerturbationSpec perturbation;

  LatencyModel() = default;
  LatencyModel(std::vector<BprEdge> e, PerturbationSpec p) : edges(std::move(e)), perturbation(p) {
    for (const auto& ed : edges) ed.validate();
    perturbation.validate();
  }

  std::size_t size() const { return edges.size(); }

  Vector sample_omega(Rng& rng) const {
    Vector w(edges.size());
    for (double& x : w) x = perturbation.sample(rng);
    return w;
  }

  Vector mean_omega() const { return Vector(edges.size(), perturbation.expected()); }

  Vector worst_omega() const { return Vector(edges.size(), perturbation.upper()); }

  Vector edge_latencies(std::span<const double> q, std::span<const double> omega) const {
    check(q, omega);
    Vector l(q.size());
    for (std::size_t e = 0; e < q.size(); ++e) l[e] = edge_latency(edges[e], q[e], omega[e]);
    return l;
  }

  double potential(std::span<const double> q, std::span<const double> omega) const {
    check(q, omega);
    double s = 0.0;
    for (std::size_t e = 0; e < q.size(); ++e) s += edge_potential(edges[e], q[e], omega[e]);
    return s;
  }

 private:
  void check(std::span<const double> q, std::span<const double> omega) const {
    if (q.size() != edges.size() || omega.size() != edges.size())
      throw Error("LatencyModel: edge vector dimension mismatch");
  }
};

inline void check_model(const TrafficNetwork& net, const LatencyModel& model) {
  if (model.size() != net.num_edges()) throw Error("latency model does not match the network's edges");
}

/// l(mu, omega) per path: Lambda^T l(Lambda mu, omega).
inline Vector path_latency(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu,
                           std::span<const double> omega) {
  check_model(net, model);
  const Vector q = edge_flow(net, mu);
  return path_sums(net, model.edge_latencies(q, omega));
}

/// Expected path latency E[l(mu, omega)]; exact for additive perturbations.
inline Vector mean_path_latency(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu) {
  return path_latency(net, model, mu, model.mean_omega());
}

/// Stochastic Beckmann potential phi(mu, omega).
inline double sbp(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu,
                  std::span<const double> omega) {
  check_model(net, model);
  return model.potential(edge_flow(net, mu), omega);
}

/// Mean Beckmann potential. Perturbations enter additively, so plugging in
/// E[omega] is exact.
inline double mbp(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu) {
  return sbp(net, model, mu, model.mean_omega());
}

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Sample average of sbp over `samples` fresh draws.
inline MonteCarloEstimate mbp_monte_carlo(const TrafficNetwork& net, const LatencyModel& model,
                                          const PathFlow& mu, int samples, Rng& rng) {
  if (samples < 2) throw Error("mbp_monte_carlo: need at least two samples");
  check_model(net, model);
  const Vector q = edge_flow(net, mu);
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = model.potential(q, model.sample_omega(rng));
    const double d = x - mean;
    mean += d / (i + 1);
    m2 += d * (x - mean);
  }
  const double var = m2 / (samples - 1);
  return {mean, std::sqrt(var / samples)};
}

/// Constants (A, B) with ||l(mu, omega)||^2 <= A phi(mu, omega) + B.
struct GrowthConstants {
  double A = 1.0;
  double B = 0.0;
  int samples = 0;

  bool holds(double latency_sq_norm, double potential, double rel_tol = 1e-12) const {
    return latency_sq_norm <= A * potential + B + rel_tol * std::max(1.0, latency_sq_norm);
  }
};

namespace detail {

struct GrowthSample {
  PathFlow mu;
  Vector omega;
  double potential = 0.0;
  double latency_sq = 0.0;
};

inline GrowthSample evaluate_growth(const TrafficNetwork& net, const LatencyModel& model, PathFlow mu,
                                    Vector omega) {
  GrowthSample s{std::move(mu), std::move(omega)};
  const Vector q = edge_flow(net, s.mu);
  s.potential = model.potential(q, s.omega);
  s.latency_sq = squared_norm(path_sums(net, model.edge_latencies(q, s.omega)));
  return s;
}

// Local ascent of g = ||l||^2 - A phi from a sample: coordinate flips of each
// omega_e to the ends of its support, then projected gradient steps on mu.
// Returns the best g found.
inline double refine_growth_excess(const TrafficNetwork& net, const LatencyModel& model, double A,
                                   GrowthSample s, int iterations);

}  // namespace detail

/// Sample-based estimate of (A, B). Flows are drawn per OD from Dirichlet
/// laws of several concentrations (so near-vertex flows are covered) and
/// omega from the model. A minimises A * mean(phi) + B(A) over a log grid,
/// with B(A) = max_i (||l_i||^2 - A phi_i)_+, then B is raised to the best
/// value found by local ascent from the worst samples.
inline GrowthConstants estimate_growth_constants(const TrafficNetwork& net, const LatencyModel& model,
                                                 int samples, Rng& rng) {
  if (samples < 100) throw Error("estimate_growth_constants: need at least 100 samples");
  check_model(net, model);
  static constexpr double kConcentrations[] = {0.05, 0.3, 1.0, 5.0};
  std::vector<detail::GrowthSample> pts;
  pts.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    const double c = kConcentrations[i % 4];
    pts.push_back(detail::evaluate_growth(net, model, random_flow(net, rng, c), model.sample_omega(rng)));
  }

  double mean_phi = 0.0, mean_l = 0.0, max_l = 0.0;
  bool degenerate = true;
  for (const auto& s : pts) {
    mean_phi += s.potential / samples;
    mean_l += s.latency_sq / samples;
    max_l = std::max(max_l, s.latency_sq);
    if (s.potential > 0.0) degenerate = false;
  }
  if (degenerate) {
    warn("estimate_growth_constants: all sampled potentials are zero; using A = 1");
    return {1.0, max_l, samples};
  }

  auto b_of = [&](double A) {
    double b = 0.0;
    for (const auto& s : pts) b = std::max(b, s.latency_sq - A * s.potential);
    return b;
  };
  const double scale = mean_l / mean_phi;
  double best_a = scale, best_obj = kInf;
  constexpr int kGrid = 481;  // 10^-6 .. 10^6 around the natural scale, 40 points per decade
  for (int i = 0; i < kGrid; ++i) {
    const double A = scale * std::pow(10.0, -6.0 + 12.0 * i / (kGrid - 1));
    const double obj = A * mean_phi + b_of(A);
    if (obj < best_obj) {
      best_obj = obj;
      best_a = A;
    }
  }

  double B = b_of(best_a);
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min<std::size_t>(8, pts.size());
  std::partial_sort(order.begin(), order.begin() + top, order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].latency_sq - best_a * pts[a].potential > pts[b].latency_sq - best_a * pts[b].potential;
  });
  for (std::size_t i = 0; i < top; ++i)
    B = std::max(B, detail::refine_growth_excess(net, model, best_a, pts[order[i]], 60));
  return {best_a, B, samples};
}

/// Fresh draws, independent of the estimation sample, checked against (A, B).
struct GrowthCertificate {
  int samples = 0;
  int violations = 0;
  double worst_ratio = 0.0;  // max ||l||^2 / (A phi + B)
  bool passed() const { return violations == 0; }
};

inline GrowthCertificate certify_growth_constants(const TrafficNetwork& net, const LatencyModel& model,
                                                  const GrowthConstants& g, int samples, Rng& rng) {
  GrowthCertificate c;
  c.samples = samples;
  static constexpr double kConcentrations[] = {0.05, 0.3, 1.0, 5.0};
  for (int i = 0; i < samples; ++i) {
    const auto s = detail::evaluate_growth(net, model, random_flow(net, rng, kConcentrations[i % 4]),
                                           model.sample_omega(rng));
    const double rhs = g.A * s.potential + g.B;
    if (rhs > 0.0) c.worst_ratio = std::max(c.worst_ratio, s.latency_sq / rhs);
    if (!g.holds(s.latency_sq, s.potential)) ++c.violations;
  }
  return c;
}

namespace detail {

inline double refine_growth_excess(const TrafficNetwork& net, const LatencyModel& model, double A,
                                   GrowthSample s, int iterations) {
  auto excess = [&](const PathFlow& mu, const Vector& omega) {
    const Vector q = edge_flow(net, mu);
    return squared_norm(path_sums(net, model.edge_latencies(q, omega))) - A * model.potential(q, omega);
  };
  double best = excess(s.mu, s.omega);
  if (model.perturbation.bounded() && !model.perturbation.deterministic()) {
    const double hi = model.perturbation.upper();
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (std::size_t e = 0; e < s.omega.size(); ++e) {
        double chosen = s.omega[e];
        for (double cand : {0.0, hi}) {
          s.omega[e] = cand;
          const double g = excess(s.mu, s.omega);
          if (g > best) {
            best = g;
            chosen = cand;
          }
        }
        s.omega[e] = chosen;
      }
    }
  }
  // Projected gradient ascent in mu: grad g = 2 Lambda^T (l' .* Lambda l) - A l.
  double step = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Vector q = edge_flow(net, s.mu);
    const Vector le = model.edge_latencies(q, s.omega);
    const Vector lp = path_sums(net, le);
    Vector edge_acc(net.num_edges(), 0.0);
    for (std::size_t p = 0; p < net.num_paths(); ++p)
      for (int e : net.path(p)) edge_acc[e] += lp[p];
    for (std::size_t e = 0; e < edge_acc.size(); ++e) edge_acc[e] *= edge_latency_slope(model.edges[e], q[e]);
    const Vector back = path_sums(net, edge_acc);
    Vector grad(net.num_paths());
    double gnorm = 0.0;
    for (std::size_t p = 0; p < grad.size(); ++p) {
      grad[p] = 2.0 * back[p] - A * lp[p];
      gnorm = std::max(gnorm, std::abs(grad[p]));
    }
    if (gnorm == 0.0) break;
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      PathFlow trial(net.num_paths());
      for (std::size_t w = 0; w < net.num_ods(); ++w) {
        const std::size_t b = net.od_begin(w), n = net.od_size(w);
        Vector y(n);
        for (std::size_t i = 0; i < n; ++i)
          y[i] = s.mu[b + i] + step * net.od(w).demand * grad[b + i] / gnorm;
        const Vector proj = project_simplex(y, net.od(w).demand);
        std::copy(proj.begin(), proj.end(), trial.values.begin() + b);
      }
      const double g = excess(trial, s.omega);
      if (g > best) {
        best = g;
        s.mu = std::move(trial);
        improved = true;
        step = std::min(1.0, step * 2.0);
      } else {
        step *= 0.5;
      }
    }
    if (!improved) break;
  }
  return best;
}

}  // namespace detail

}  // namespace wanes
