#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_zeta.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wanes/attack.hpp"
#include "wanes/common.hpp"
#include "wanes/equilibrium.hpp"
#include "wanes/latency.hpp"
#include "wanes/mirror.hpp"
#include "wanes/network.hpp"
#include "wanes/random.hpp"

namespace wanes {

enum class StartKind { uniform, reference };

enum class Learner { mirror_descent, greedy };

struct RunConfig {
  long horizon = 100;
  int replications = 10;
  StepSchedule schedule;
  MirrorKind map = MirrorKind::negentropy;
  std::vector<AttackSpec> attacks;
  StartKind start = StartKind::uniform;
  double delta = 0.1;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (horizon < 1) throw Error("horizon must be at least 1");
    if (replications < 1) throw Error("replications must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0, 1)");
    if (threads < 1) throw Error("threads must be at least 1");
    schedule.validate();
    for (const auto& a : attacks) {
      a.validate();
      if (a.t0 > horizon) throw Error("attack " + describe(a) + " lies beyond the horizon");
    }
  }
};

/// One replication's trajectory. Index i holds iteration t = i + 1.
struct RunRecord {
  int replication = 0;
  Vector eta, phi, Phi, gap, dist;
  std::vector<char> attacked;
  Vector cesaro_gap;  // Phi(mu_bar^t) - Phi*, averaging from the latest attack on
  Vector xi;          // eta_t <mu* - mu^t, l^t - E[l^t]>
  Vector xi_bound;    // a.s. bound on |xi_t| given the past
  std::vector<AttackReport> attacks;
  PathFlow cesaro;    // mu_bar^T
  double cesaro_Phi = 0.0;
  double max_dist = 0.0;

  std::size_t size() const { return eta.size(); }
};

/// Everything the learner saw at iteration t, for invariant checks.
struct StepView {
  int replication;
  long t;
  const PathFlow& mu;
  std::span<const double> loss;
  std::span<const double> omega;
  double phi;
  double eta;
  const PathFlow& next;
};

using StepObserver = std::function<void(const StepView&)>;

/// mu <- mu/2 + (m_w/2) e_{p*} per OD, p* the cheapest path (lowest index on ties).
inline PathFlow greedy_step(const TrafficNetwork& net, const PathFlow& mu, std::span<const double> loss) {
  PathFlow next(mu.size());
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    std::size_t best = net.od_begin(w);
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      next[p] = 0.5 * mu[p];
      if (loss[p] < loss[best]) best = p;
    }
    next[best] += 0.5 * net.od(w).demand;
  }
  return next;
}

/// Largest deviation |omega_e - E[omega_e]| the perturbation law allows.
inline double omega_deviation(const PerturbationSpec& s) {
  if (!s.bounded()) return kInf;
  return std::max(s.upper() - s.expected(), s.expected());
}

namespace detail {

inline RunRecord run_replication(const TrafficNetwork& net, const LatencyModel& model, const RunConfig& cfg,
                                 const EquilibriumResult& eq, Learner learner, int r,
                                 const StepObserver& observer) {
  const MirrorMap map = MirrorMap::make(cfg.map, net);
  Rng omega_rng = make_rng(cfg.seed, streams::kPerturbation, static_cast<std::uint64_t>(r));
  Rng attack_rng = make_rng(cfg.seed, streams::kAttack, static_cast<std::uint64_t>(r));
  const Vector mean_omega = model.mean_omega();
  const double dev = omega_deviation(model.perturbation);
  // ||l - E l|| <= dev * ||path lengths||, whatever the flow.
  double len_norm = 0.0;
  for (std::size_t p = 0; p < net.num_paths(); ++p) len_norm += static_cast<double>(net.path(p).size() * net.path(p).size());
  len_norm = std::sqrt(len_norm);

  RunRecord rec;
  rec.replication = r;
  const auto T = static_cast<std::size_t>(cfg.horizon);
  for (Vector* v : {&rec.eta, &rec.phi, &rec.Phi, &rec.gap, &rec.dist, &rec.cesaro_gap, &rec.xi, &rec.xi_bound})
    v->reserve(T);
  rec.attacked.reserve(T);

  PathFlow mu = cfg.start == StartKind::reference ? eq.mu_star : uniform_flow(net);
  CesaroAccumulator avg(net.num_paths());
  for (long t = 1; t <= cfg.horizon; ++t) {
    bool hit = false;
    for (const auto& a : cfg.attacks) {
      if (a.t0 != t) continue;
      PathFlow poisoned = make_attack(net, mu, a, attack_rng);
      AttackReport rep = attack_magnitude(net, map, mu, poisoned);
      rep.t0 = t;
      rec.attacks.push_back(rep);
      mu = std::move(poisoned);
      hit = true;
    }
    if (hit) avg.reset();

    const Vector omega = model.sample_omega(omega_rng);
    const Vector q = edge_flow(net, mu);
    const Vector loss = path_sums(net, model.edge_latencies(q, omega));
    const Vector mean_loss = path_sums(net, model.edge_latencies(q, mean_omega));
    const double eta = step_rate(cfg.schedule, t);
    const double phi = model.potential(q, omega);
    const double Phi = model.potential(q, mean_omega);
    const double d = distance_to_reference(mu, eq);

    double xi = 0.0;
    for (std::size_t p = 0; p < mu.size(); ++p) xi += (eq.mu_star[p] - mu[p]) * (loss[p] - mean_loss[p]);
    avg.add(mu, eta);
    const PathFlow bar = avg.average();

    rec.eta.push_back(eta);
    rec.phi.push_back(phi);
    rec.Phi.push_back(Phi);
    rec.gap.push_back(Phi - eq.phi_star);
    rec.dist.push_back(d);
    rec.attacked.push_back(hit ? 1 : 0);
    rec.cesaro_gap.push_back(mbp(net, model, bar) - eq.phi_star);
    rec.xi.push_back(eta * xi);
    rec.xi_bound.push_back(eta * std::sqrt(d) * dev * len_norm);
    rec.max_dist = std::max(rec.max_dist, d);

    PathFlow next = learner == Learner::greedy ? greedy_step(net, mu, loss) : md_step(net, map, mu, loss, eta);
    if (observer) observer(StepView{r, t, mu, loss, omega, phi, eta, next});
    mu = std::move(next);
  }
  rec.cesaro = avg.average();
  rec.cesaro_Phi = mbp(net, model, rec.cesaro);
  return rec;
}

}  // namespace detail

/// Runs the configured learner over all replications. Each replication draws
/// from streams derived from (seed, replication), so results do not depend on
/// thread scheduling or on how many replications run. The observer, if any,
/// may be called concurrently when threads > 1.
inline std::vector<RunRecord> run_learner(const TrafficNetwork& net, const LatencyModel& model, const RunConfig& cfg,
                                          const EquilibriumResult& eq, Learner learner,
                                          const StepObserver& observer = {}) {
  cfg.validate();
  check_model(net, model);
  if (eq.mu_star.size() != net.num_paths()) throw Error("simulate: reference flow does not match the network");
  std::vector<RunRecord> out(static_cast<std::size_t>(cfg.replications));
  const int workers = std::min(cfg.threads, cfg.replications);
  if (workers == 1) {
    for (int r = 0; r < cfg.replications; ++r) out[r] = detail::run_replication(net, model, cfg, eq, learner, r, observer);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int k = 0; k < workers; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (int r; (r = next.fetch_add(1)) < cfg.replications;)
          out[r] = detail::run_replication(net, model, cfg, eq, learner, r, observer);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline std::vector<RunRecord> simulate(const TrafficNetwork& net, const LatencyModel& model, const RunConfig& cfg,
                                       const EquilibriumResult& eq, const StepObserver& observer = {}) {
  return run_learner(net, model, cfg, eq, Learner::mirror_descent, observer);
}

/// Same streams and attacks as simulate, so the two are paired run for run.
inline std::vector<RunRecord> greedy_baseline(const TrafficNetwork& net, const LatencyModel& model,
                                              const RunConfig& cfg, const EquilibriumResult& eq,
                                              const StepObserver& observer = {}) {
  return run_learner(net, model, cfg, eq, Learner::greedy, observer);
}

/// Checks, at every step of every replication, the one-step divergence bound
/// D(u, mu^{t+1}) - D(u, mu^t) <= eta <u - mu^t, l^t> + 2 eta^2 / sigma (A phi^t + B)
/// for a fixed set of comparators u, the distance bound
/// ||mu^{t+1} - mu*||^2 <= (2 / sigma)(C1 sum_{k<=t} eta_k + D(mu*, mu^1)),
/// with the clock and mu^1 restarting at each attack, and the growth condition
/// itself. Counters are per replication, so concurrent replications are safe.
class InvariantMonitor {
 public:
  struct Tally {
    std::size_t steps = 0;
    std::size_t one_step_violations = 0;
    std::size_t distance_violations = 0;
    std::size_t growth_violations = 0;
    std::size_t one_step_skipped = 0;  // D(u, mu^{t+1}) overflowed: mu^{t+1} underflowed to 0 where u > 0
    double worst_one_step = -kInf;  // max of lhs - rhs, scaled by the term magnitudes
    double worst_distance = 0.0;    // max of ||mu^{t+1} - mu*||^2 / bound
  };

  InvariantMonitor(const TrafficNetwork& net, const RunConfig& cfg, const MirrorMap& map, const GrowthConstants& g,
                   const EquilibriumResult& eq, double phi_star_sup, std::vector<PathFlow> comparators)
      : net_(net), cfg_(cfg), map_(map), g_(g), eq_(eq), C1_(phi_star_sup + g.B / g.A),
        comparators_(std::move(comparators)), tallies_(static_cast<std::size_t>(cfg.replications)),
        segments_(static_cast<std::size_t>(cfg.replications)) {
    comparators_.insert(comparators_.begin(), eq.mu_star);
  }

  StepObserver observer() {
    return [this](const StepView& v) { observe(v); };
  }

  const std::vector<Tally>& tallies() const { return tallies_; }

  Tally total() const {
    Tally t;
    for (const auto& x : tallies_) {
      t.steps += x.steps;
      t.one_step_violations += x.one_step_violations;
      t.distance_violations += x.distance_violations;
      t.growth_violations += x.growth_violations;
      t.one_step_skipped += x.one_step_skipped;
      t.worst_one_step = std::max(t.worst_one_step, x.worst_one_step);
      t.worst_distance = std::max(t.worst_distance, x.worst_distance);
    }
    return t;
  }

 private:
  struct Segment {
    double a = 0.0;        // D(mu*, mu^1) for the current segment
    double sum_eta = 0.0;
  };

  void observe(const StepView& v) {
    Tally& tally = tallies_.at(static_cast<std::size_t>(v.replication));
    Segment& seg = segments_.at(static_cast<std::size_t>(v.replication));
    bool restart = v.t == 1;
    for (const auto& a : cfg_.attacks) restart = restart || a.t0 == v.t;
    if (restart) seg = {bregman(map_, eq_.mu_star, v.mu), 0.0};
    seg.sum_eta += v.eta;
    ++tally.steps;

    const double lsq = squared_norm(v.loss);
    if (!g_.holds(lsq, v.phi)) ++tally.growth_violations;

    const double noise = 2.0 * v.eta * v.eta / map_.sigma * (g_.A * v.phi + g_.B);
    for (const auto& u : comparators_) {
      const double lhs = bregman_difference(map_, u.span(), v.next.span(), v.mu.span());
      if (!std::isfinite(lhs)) {
        ++tally.one_step_skipped;
        continue;
      }
      double inner = 0.0, scale = 0.0;
      for (std::size_t p = 0; p < u.size(); ++p) {
        inner += (u[p] - v.mu[p]) * v.loss[p];
        scale += std::abs(u[p] * v.loss[p]) + std::abs(v.mu[p] * v.loss[p]);
      }
      const double rhs = v.eta * inner + noise;
      const double slack = (lhs - rhs) / (v.eta * scale + noise);
      tally.worst_one_step = std::max(tally.worst_one_step, slack);
      if (slack > 1e-9) ++tally.one_step_violations;
    }

    const double bound = 2.0 / map_.sigma * (C1_ * seg.sum_eta + seg.a);
    const double d = squared_distance(v.next.span(), eq_.mu_star.span());
    tally.worst_distance = std::max(tally.worst_distance, d / bound);
    if (d > bound) ++tally.distance_violations;
  }

  const TrafficNetwork& net_;
  const RunConfig& cfg_;
  MirrorMap map_;
  GrowthConstants g_;
  const EquilibriumResult& eq_;
  double C1_;
  std::vector<PathFlow> comparators_;
  std::vector<Tally> tallies_;
  std::vector<Segment> segments_;
};

// ---------------------------------------------------------------- statistics

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};

/// Wilson score interval for a binomial proportion (z = 1.96 gives 95%).
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
  if (trials == 0) throw Error("wilson_interval: no trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Least-squares slope of log y against log x; pairs with y <= 0 are skipped.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("loglog_slope: length mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw Error("loglog_slope: need two positive points");
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw Error("loglog_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) throw Error("mean of an empty range");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Linear-interpolated empirical quantile, q in [0, 1].
inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) throw Error("quantile of an empty range");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

// ---------------------------------------------------------------- verdicts

struct WanesVerdict {
  double epsilon = 0.0;
  double delta = 0.0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  double p_hat = 0.0;
  Interval ci;
  bool holds = false;  // Wilson lower bound >= 1 - delta
};

/// Empirical check of P{Phi(mu_bar^T) - Phi* < eps} >= 1 - delta.
inline WanesVerdict wanes_check(std::span<const double> cesaro_gaps, double epsilon, double delta) {
  if (cesaro_gaps.size() < 20)
    throw Error("wanes_check: need at least 20 replications, got " + std::to_string(cesaro_gaps.size()));
  if (!(delta > 0.0 && delta < 1.0)) throw Error("wanes_check: delta must lie in (0, 1)");
  WanesVerdict v;
  v.epsilon = epsilon;
  v.delta = delta;
  v.trials = cesaro_gaps.size();
  for (double g : cesaro_gaps)
    if (g < epsilon) ++v.successes;
  v.p_hat = static_cast<double>(v.successes) / static_cast<double>(v.trials);
  v.ci = wilson_interval(v.successes, v.trials);
  v.holds = v.ci.lower >= 1.0 - delta;
  return v;
}

inline WanesVerdict wanes_check(const std::vector<RunRecord>& records, double epsilon, double delta) {
  Vector gaps;
  for (const auto& r : records) gaps.push_back(r.cesaro_gap.back());
  return wanes_check(gaps, epsilon, delta);
}

// ---------------------------------------------------------------- theory side

/// sum_{t >= n} t^{-s} for s > 1.
inline double power_tail(double s, double n) {
  gsl_sf_result res;
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  const int status = gsl_sf_hzeta_e(s, n, &res);
  gsl_set_error_handler(old);
  if (status != GSL_SUCCESS) throw Error("Hurwitz zeta evaluation failed");
  return res.val;
}

/// Schedule seen by a run that restarts its clock after `offset` steps:
/// eta'_k = eta_{offset + k}.
struct ShiftedSchedule {
  StepSchedule base;
  long offset = 0;
  double operator()(long k) const { return step_rate(base, offset + k); }
};

/// sum_{k >= 1} eta'_k^2, exact to the accuracy of the Hurwitz zeta.
inline double sum_sq_infinite(const ShiftedSchedule& s) {
  if (!s.base.convergent()) throw Error("theory: schedule exponent must lie in (-1, -1/2)");
  // The cap binds while eta1 t^e > cap, i.e. for t below a finite threshold.
  long t = s.offset + 1;
  double head = 0.0;
  while (s.base.eta1 * std::pow(static_cast<double>(t), s.base.exponent) > s.base.cap) {
    head += s.base.cap * s.base.cap;
    ++t;
  }
  return head + s.base.eta1 * s.base.eta1 * power_tail(-2.0 * s.base.exponent, static_cast<double>(t));
}

struct TheoryInputs {
  double A = 1.0, B = 0.0;
  double sigma = 1.0;
  double phi_star_sup = 0.0;  // sup_omega phi(mu*, omega)
  double Phi_star = 0.0;
  double a_dagger = 0.0;
  double diameter_sq = 0.0;   // sup ||mu - mu'||^2 over the flow polytope
  double delta = 0.1;
  long T = 1;
  std::optional<long> t1;     // overrides the choices below
  std::vector<Vector> distances;  // realized ||mu^k - mu*||^2 per replication, k counted from the restart
};

struct TheoryConstants {
  double C1 = 0, c1 = 0, c2 = 0, rho = 0, C2 = 0, C3 = 0;
  long t1 = 1;
  double sum_eta = 0, sum_eta_sq = 0, sum_eta_sq_inf = 0;
  double distance_bound = 0;  // C2 log(T / delta)
  double r_value = 0;         // C3 log^{3/2}(2T / delta) / sum_{k<=T} eta_k
};

/// c1, C2, C3 and r(delta, T) for the schedule eta'. t1 is the first index
/// with sum_{k>=t1} eta_k^2 ||mu^k - mu*||^2 <= eta1 a/C1 + c2, taken as the
/// largest over the given trajectories (the sum runs to their end). Without
/// trajectories, ||mu^k - mu*||^2 is replaced by the polytope diameter.
inline TheoryConstants theory_constants(const ShiftedSchedule& s, const TheoryInputs& in) {
  if (!s.base.convergent()) throw Error("theory_constants: schedule exponent must lie in (-1, -1/2)");
  if (!(in.A > 0.0) || in.B < 0.0 || !(in.sigma > 0.0)) throw Error("theory_constants: invalid (A, B, sigma)");
  if (!std::isfinite(in.phi_star_sup)) throw Error("theory_constants: phi* must be finite");
  if (!(in.delta > 0.0 && in.delta < 1.0) || in.T < 1) throw Error("theory_constants: invalid (delta, T)");
  if (!(in.a_dagger >= 0.0) || !std::isfinite(in.a_dagger)) throw Error("theory_constants: a_dagger must be finite");

  TheoryConstants k;
  const double A = in.A, B = in.B, sig = in.sigma, a = in.a_dagger;
  const double eta1 = s(1);
  k.C1 = in.phi_star_sup + B / A;

  // c1 = max_k eta_k S_{k-1}; eta_k S_{k-1} ~ k^{2e+1} eventually decreases.
  {
    double S = 0.0, best = 0.0;
    long arg = 1;
    for (long j = 1; j <= 50'000'000; ++j) {
      const double e = s(j);
      const double v = e * S;
      if (v > best) {
        best = v;
        arg = j;
      }
      S += e;
      if (j > 1000 && j > 8 * arg) break;
    }
    k.c1 = best;
  }
  k.c2 = eta1 * (in.phi_star_sup + A * in.Phi_star + B) + (2 * A * A + 1) / sig * (k.C1 * k.c1 + eta1 * a);
  k.rho = std::min(1.0, sig * k.c2 / (2 * A * (eta1 * a + k.C1 * k.c1)));

  for (long j = 1; j <= in.T; ++j) {
    const double e = s(j);
    k.sum_eta += e;
    k.sum_eta_sq += e * e;
  }
  k.sum_eta_sq_inf = sum_sq_infinite(s);

  const double t1_target = eta1 * a / k.C1 + k.c2;
  if (in.t1) {
    k.t1 = *in.t1;
  } else if (!in.distances.empty()) {
    k.t1 = 1;
    for (const auto& d : in.distances) {
      double tail = 0.0;
      long j = static_cast<long>(d.size());
      while (j >= 1 && tail + s(j) * s(j) * d[static_cast<std::size_t>(j - 1)] <= t1_target) {
        tail += s(j) * s(j) * d[static_cast<std::size_t>(j - 1)];
        --j;
      }
      k.t1 = std::max(k.t1, j + 1);
    }
  } else {
    // Smallest t1 with diam^2 * sum_{k >= t1} eta_k^2 <= target.
    double tail = k.sum_eta_sq_inf;
    long j = 1;
    while (in.diameter_sq * tail > t1_target) {
      tail -= s(j) * s(j);
      ++j;
    }
    k.t1 = j;
  }
  double head = 0.0, S = 0.0;
  for (long j = 1; j <= k.t1; ++j) {
    head += 2 * k.C1 * S;
    S += s(j);
  }
  k.C2 = 4 * k.c2 / (sig * k.rho) + (4 / sig + 8 * eta1 * A / (sig * sig)) * a +
         (8 * A * k.C1 + 4 * B) / (sig * sig) * k.sum_eta_sq + (head + a) / (sig * (eta1 * a / k.C1 + k.c2));
  k.C3 = (1 + 2 * A * eta1 / sig * a) + ((4 * A * A + 1) * k.C2 + 4 * A * k.C1) * std::sqrt(2 * k.sum_eta_sq_inf) +
         2 * (A * k.C1 + B) / sig * k.sum_eta_sq_inf;
  k.distance_bound = k.C2 * std::log(static_cast<double>(in.T) / in.delta);
  k.r_value = k.C3 * std::pow(std::log(2.0 * static_cast<double>(in.T) / in.delta), 1.5) / k.sum_eta;
  return k;
}

/// sup ||mu - mu'||^2 over the polytope: each OD contributes 2 m_w^2 when it
/// has at least two paths.
inline double flow_diameter_sq(const TrafficNetwork& net) {
  double d = 0.0;
  for (std::size_t w = 0; w < net.num_ods(); ++w)
    if (net.od_size(w) > 1) d += 2.0 * net.od(w).demand * net.od(w).demand;
  return d;
}

/// sup over omega of phi(mu*, omega): exact for bounded perturbations (phi is
/// increasing in omega), otherwise the maximum over `samples` draws.
inline double phi_star_sup(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu_star,
                           Rng& rng, int samples = 10000) {
  if (model.perturbation.bounded()) return sbp(net, model, mu_star, model.worst_omega());
  const Vector q = edge_flow(net, mu_star);
  double best = 0.0;
  for (int i = 0; i < samples; ++i) best = std::max(best, model.potential(q, model.sample_omega(rng)));
  return best;
}

// ---------------------------------------------------------------- reports

struct AttackOutcome {
  long t0 = 0;
  Vector a_dagger;         // per replication
  Vector plateau;          // mean gap over the 5 steps before t0
  Vector peak;             // max gap from t0 on
  std::vector<long> recovery;  // steps after t0 until gap <= 2 * plateau; -1 if never
  Vector slope;            // log-log slope of the post-attack Cesaro gap
  WanesVerdict wanes;
  bool wanes_evaluated = false;
};

struct ResilienceReport {
  double delta = 0.1;
  double r_value = 0.0;
  std::vector<AttackOutcome> attacks;
};

/// Gap plateau, spike, recovery time and post-attack rate for each attack
/// time present in the records.
inline ResilienceReport resilience_report(const std::vector<RunRecord>& records, const TheoryConstants& theory,
                                          double delta) {
  if (records.empty()) throw Error("resilience_report: no records");
  std::vector<long> times;
  for (const auto& a : records.front().attacks) times.push_back(a.t0);
  if (times.empty()) throw Error("resilience_report: the records contain no attack");

  ResilienceReport rep;
  rep.delta = delta;
  rep.r_value = theory.r_value;
  for (std::size_t ai = 0; ai < times.size(); ++ai) {
    AttackOutcome out;
    out.t0 = times[ai];
    const auto i0 = static_cast<std::size_t>(out.t0 - 1);
    const std::size_t end = ai + 1 < times.size() ? static_cast<std::size_t>(times[ai + 1] - 1) : records.front().size();
    Vector finals;
    for (const auto& rec : records) {
      if (rec.attacks.size() != times.size()) throw Error("resilience_report: replications disagree on attacks");
      out.a_dagger.push_back(rec.attacks[ai].a_dagger);
      const std::size_t lo = i0 >= 5 ? i0 - 5 : 0;
      const double plateau = i0 > lo ? mean_of(std::span(rec.gap).subspan(lo, i0 - lo)) : kInf;
      out.plateau.push_back(plateau);
      out.peak.push_back(*std::max_element(rec.gap.begin() + static_cast<long>(i0), rec.gap.begin() + static_cast<long>(end)));
      long rec_time = -1;
      for (std::size_t i = i0; i < end; ++i) {
        if (rec.gap[i] <= 2.0 * plateau) {
          rec_time = static_cast<long>(i - i0);
          break;
        }
      }
      out.recovery.push_back(rec_time);
      Vector xs, ys;
      const std::size_t len = end - i0;
      for (std::size_t i = i0 + std::max<std::size_t>(1, len / 10); i < end; ++i) {
        xs.push_back(static_cast<double>(i - i0 + 1));
        ys.push_back(rec.cesaro_gap[i]);
      }
      double slope = std::nan("");
      try {
        slope = loglog_slope(xs, ys);
      } catch (const Error&) {
      }
      out.slope.push_back(slope);
      finals.push_back(rec.cesaro_gap[end - 1]);
    }
    if (finals.size() >= 20) {
      out.wanes = wanes_check(finals, theory.r_value, delta);
      out.wanes_evaluated = true;
    }
    rep.attacks.push_back(std::move(out));
  }
  return rep;
}

struct ConcentrationAudit {
  double delta = 0.1;
  std::size_t replications = 0;
  std::size_t violations = 0;  // replications with sum xi above the bound
  double violation_rate = 0.0;
  Interval violation_ci;
  double median_sum = 0.0;
  double median_bound = 0.0;
  double quantile_sum = 0.0;   // (1 - delta) quantile of sum xi
};

/// Compares sum_k xi_k with (2 sum_k b_k^2 log(1/delta))^{1/2} on each replication.
inline ConcentrationAudit concentration_audit(const std::vector<RunRecord>& records, double delta,
                                              const PerturbationSpec& perturbation) {
  if (perturbation.deterministic()) throw Error("concentration_audit: perturbation is deterministic, xi is identically zero");
  if (!perturbation.bounded()) throw Error("concentration_audit: needs bounded perturbations");
  if (records.size() < 50) throw Error("concentration_audit: need at least 50 replications");
  ConcentrationAudit a;
  a.delta = delta;
  a.replications = records.size();
  Vector sums, bounds;
  for (const auto& r : records) {
    double s = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < r.xi.size(); ++i) {
      s += r.xi[i];
      b2 += r.xi_bound[i] * r.xi_bound[i];
    }
    const double bound = std::sqrt(2.0 * b2 * std::log(1.0 / delta));
    if (s > bound) ++a.violations;
    sums.push_back(s);
    bounds.push_back(bound);
  }
  a.violation_rate = static_cast<double>(a.violations) / static_cast<double>(a.replications);
  a.violation_ci = wilson_interval(a.violations, a.replications);
  a.median_sum = quantile_of(sums, 0.5);
  a.median_bound = quantile_of(bounds, 0.5);
  a.quantile_sum = quantile_of(sums, 1.0 - delta);
  return a;
}

}  // namespace wanes
