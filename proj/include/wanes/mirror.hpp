#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wanes/common.hpp"
#include "wanes/network.hpp"
#include "wanes/simplex.hpp"

namespace wanes {

enum class MirrorKind { negentropy, euclidean };

inline std::string to_string(MirrorKind k) { return k == MirrorKind::negentropy ? "negentropy" : "euclidean"; }

inline MirrorKind parse_mirror_kind(const std::string& s) {
  if (s == "negentropy") return MirrorKind::negentropy;
  if (s == "euclidean") return MirrorKind::euclidean;
  throw Error("unknown mirror map '" + s + "' (expected negentropy|euclidean)");
}

/// Mirror map together with its strong-convexity constant on the flow polytope.
struct MirrorMap {
  MirrorKind kind = MirrorKind::negentropy;
  double sigma = 1.0;

  /// Unnormalised negentropy sum mu log mu - mu. On an OD block of mass m_w it
  /// is (1/m_w)-strongly convex, so 1/max_w m_w holds for the whole polytope.
  static MirrorMap negentropy(const TrafficNetwork& net) {
    if (!(net.max_demand() > 0.0)) throw Error("MirrorMap: network has no demand");
    return {MirrorKind::negentropy, 1.0 / net.max_demand()};
  }
  static MirrorMap euclidean() { return {MirrorKind::euclidean, 1.0}; }
  static MirrorMap make(MirrorKind k, const TrafficNetwork& net) {
    return k == MirrorKind::negentropy ? negentropy(net) : euclidean();
  }
};

/// D(mu1, mu2) = Psi(mu1) - Psi(mu2) - <grad Psi(mu2), mu1 - mu2>.
///
/// Negentropy gives the generalised KL divergence with 0 log 0 = 0; the
/// result is +infinity when mu2 vanishes somewhere mu1 is positive.
inline double bregman(const MirrorMap& map, std::span<const double> mu1, std::span<const double> mu2) {
  if (mu1.size() != mu2.size()) throw Error("bregman: dimension mismatch");
  if (map.kind == MirrorKind::euclidean) return 0.5 * squared_distance(mu1, mu2);
  double d = 0.0;
  for (std::size_t p = 0; p < mu1.size(); ++p) {
    const double a = mu1[p], b = mu2[p];
    if (a < 0.0 || b < 0.0) throw Error("bregman: negative flow under negentropy");
    if (a == 0.0) {
      d += b;
    } else if (b == 0.0) {
      return kInf;
    } else {
      d += a * std::log(a / b) - a + b;
    }
  }
  return std::max(d, 0.0);
}

inline double bregman(const MirrorMap& map, const PathFlow& mu1, const PathFlow& mu2) {
  return bregman(map, mu1.span(), mu2.span());
}

/// D(x, a) - D(x, b) evaluated term by term, which avoids cancelling two
/// large divergences against each other.
inline double bregman_difference(const MirrorMap& map, std::span<const double> x, std::span<const double> a,
                                 std::span<const double> b) {
  if (map.kind == MirrorKind::euclidean) {
    double s = 0.0;
    for (std::size_t p = 0; p < x.size(); ++p)
      s += 0.5 * ((x[p] - a[p]) * (x[p] - a[p]) - (x[p] - b[p]) * (x[p] - b[p]));
    return s;
  }
  double s = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p) {
    if (x[p] > 0.0) {
      if (a[p] == 0.0) return kInf;
      if (b[p] == 0.0) return -kInf;
      s += x[p] * std::log(b[p] / a[p]);
    }
    s += a[p] - b[p];
  }
  return s;
}

/// One mirror-descent step: argmin over the flow polytope of
/// eta <mu, loss> + D(mu, mu_t).
///
/// Negentropy: per OD, mu_p <- m_w mu_p e^{-eta l_p} / sum_p' mu_p' e^{-eta l_p'},
/// evaluated in log space with max subtraction. Euclidean: exact projection
/// of mu_t - eta l onto each scaled simplex.
inline PathFlow md_step(const TrafficNetwork& net, const MirrorMap& map, const PathFlow& mu,
                        std::span<const double> loss, double eta) {
  if (mu.size() != net.num_paths() || loss.size() != net.num_paths())
    throw Error("md_step: dimension mismatch");
  if (!(eta > 0.0)) throw Error("md_step: step size must be positive");
  PathFlow next(net.num_paths());
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    const std::size_t begin = net.od_begin(w), end = net.od_end(w);
    const double mass = net.od(w).demand;
    if (map.kind == MirrorKind::euclidean) {
      Vector y(end - begin);
      for (std::size_t p = begin; p < end; ++p) y[p - begin] = mu[p] - eta * loss[p];
      const Vector x = project_simplex(y, mass);
      std::copy(x.begin(), x.end(), next.values.begin() + begin);
      continue;
    }
    double top = -kInf;
    for (std::size_t p = begin; p < end; ++p) {
      const double lw = mu[p] > 0.0 ? std::log(mu[p]) - eta * loss[p] : -kInf;
      next[p] = lw;
      top = std::max(top, lw);
    }
    if (top == -kInf) throw Error("md_step: OD " + net.od_label(w) + " carries no flow");
    double total = 0.0;
    for (std::size_t p = begin; p < end; ++p) {
      next[p] = std::exp(next[p] - top);
      total += next[p];
    }
    for (std::size_t p = begin; p < end; ++p) next[p] = mass * next[p] / total;
  }
  return next;
}

/// Learning-rate schedule eta_t = min(cap, eta1 * t^exponent).
struct StepSchedule {
  double eta1 = 0.1;
  double exponent = -0.75;
  double cap = kInf;

  /// eta_t ~ t^(-beta-1), so beta in (-1/2, 0) keeps the schedule convergent.
  static double exponent_from_beta(double beta) { return -beta - 1.0; }
  /// Alternative convention eta1 * t^(beta - 1/2).
  static double exponent_from_beta_half(double beta) { return beta - 0.5; }

  /// Sum eta_t diverges and sum eta_t^2 converges exactly on (-1, -1/2).
  bool convergent() const { return exponent > -1.0 && exponent < -0.5; }

  void validate() const {
    if (!(eta1 > 0.0)) throw Error("StepSchedule: eta1 must be positive");
    if (!(cap > 0.0)) throw Error("StepSchedule: cap must be positive");
    if (!(exponent <= 0.0)) throw Error("StepSchedule: exponent must be nonpositive");
  }
};

inline double step_rate(const StepSchedule& s, long t) {
  if (t < 1) throw Error("step_rate: iteration index starts at 1");
  return std::min(s.cap, s.eta1 * std::pow(static_cast<double>(t), s.exponent));
}

/// Weighted average sum eta_k mu^k / sum eta_k.
inline PathFlow cesaro_average(const std::vector<PathFlow>& flows, std::span<const double> weights) {
  if (flows.empty()) throw Error("cesaro_average: no flows");
  if (weights.size() != flows.size()) throw Error("cesaro_average: weights and flows differ in length");
  PathFlow avg(flows.front().size());
  double total = 0.0;
  for (std::size_t k = 0; k < flows.size(); ++k) {
    if (!(weights[k] > 0.0)) throw Error("cesaro_average: weights must be positive");
    if (flows[k].size() != avg.size()) throw Error("cesaro_average: flow dimension mismatch");
    total += weights[k];
    for (std::size_t p = 0; p < avg.size(); ++p) avg[p] += weights[k] * flows[k][p];
  }
  for (double& x : avg.values) x /= total;
  return avg;
}

/// Streaming form of cesaro_average, used by the harness so trajectories
/// need not be stored.
class CesaroAccumulator {
 public:
  explicit CesaroAccumulator(std::size_t n = 0) : sum_(n, 0.0) {}

  void reset() {
    std::fill(sum_.begin(), sum_.end(), 0.0);
    weight_ = 0.0;
  }
  void add(const PathFlow& mu, double eta) {
    if (sum_.size() != mu.size()) sum_.assign(mu.size(), 0.0);
    for (std::size_t p = 0; p < mu.size(); ++p) sum_[p] += eta * mu[p];
    weight_ += eta;
  }
  double weight() const { return weight_; }
  PathFlow average() const {
    if (!(weight_ > 0.0)) throw Error("CesaroAccumulator: empty");
    PathFlow out(sum_.size());
    for (std::size_t p = 0; p < sum_.size(); ++p) out[p] = sum_[p] / weight_;
    return out;
  }

 private:
  Vector sum_;
  double weight_ = 0.0;
};

}  // namespace wanes
