#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "wanes/common.hpp"
#include "wanes/mirror.hpp"
#include "wanes/network.hpp"
#include "wanes/random.hpp"

namespace wanes {

enum class AttackKind { unif, supp };

/// A single informational attack: at iteration t0 the learner's state is
/// replaced by a poisoned flow.
struct AttackSpec {
  AttackKind kind = AttackKind::unif;
  long t0 = 30;
  double concentration = 1.0;  // Dirichlet c, Supp only
  double floor = 0.1;          // weight of the uniform component, Supp only

  void validate() const {
    if (t0 < 1) throw Error("attack time must be at least 1");
    if (!(concentration > 0.0)) throw Error("Supp concentration must be positive");
    if (!(floor > 0.0 && floor <= 1.0)) throw Error("Supp floor must lie in (0, 1]");
  }
};

inline std::string describe(const AttackSpec& a) {
  std::string s = (a.kind == AttackKind::unif ? "unif@" : "supp@") + std::to_string(a.t0);
  if (a.kind == AttackKind::supp) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ":c=%g", a.concentration);
    s += buf;
  }
  return s;
}

/// Parses "unif@30" or "supp@30:c=0.5".
inline AttackSpec parse_attack(const std::string& text) {
  const auto at = text.find('@');
  if (at == std::string::npos) throw Error("attack '" + text + "': expected kind@t0");
  AttackSpec a;
  const std::string kind = text.substr(0, at);
  if (kind == "unif") a.kind = AttackKind::unif;
  else if (kind == "supp") a.kind = AttackKind::supp;
  else throw Error("attack '" + text + "': unknown kind '" + kind + "'");
  std::string rest = text.substr(at + 1);
  std::string params;
  if (const auto colon = rest.find(':'); colon != std::string::npos) {
    params = rest.substr(colon + 1);
    rest = rest.substr(0, colon);
  }
  try {
    std::size_t used = 0;
    a.t0 = std::stol(rest, &used);
    if (used != rest.size()) throw Error("");
  } catch (const std::exception&) {
    throw Error("attack '" + text + "': bad attack time '" + rest + "'");
  }
  while (!params.empty()) {
    const auto comma = params.find(',');
    const std::string kv = params.substr(0, comma);
    params = comma == std::string::npos ? "" : params.substr(comma + 1);
    const auto eq = kv.find('=');
    if (eq == std::string::npos || a.kind != AttackKind::supp)
      throw Error("attack '" + text + "': unexpected parameter '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error("attack '" + text + "': bad value in '" + kv + "'");
    }
    if (key == "c") a.concentration = value;
    else if (key == "floor") a.floor = value;
    else throw Error("attack '" + text + "': unknown parameter '" + key + "'");
  }
  a.validate();
  return a;
}

/// Every OD's demand spread evenly over its paths.
inline PathFlow unif_attack(const TrafficNetwork& net) { return uniform_flow(net); }

/// Per OD: (1 - floor) Dirichlet(c) + floor uniform, scaled to m_w. Every
/// coordinate is positive, so supp(mu_t0) is always covered.
inline PathFlow supp_attack(const TrafficNetwork& net, const PathFlow& mu_t0, const AttackSpec& spec, Rng& rng) {
  if (mu_t0.size() != net.num_paths()) throw Error("supp_attack: flow has wrong dimension");
  spec.validate();
  PathFlow out(net.num_paths());
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    const std::size_t b = net.od_begin(w), n = net.od_size(w);
    std::span<double> block(out.values.data() + b, n);
    sample_dirichlet(rng, spec.concentration, block);
    const double m = net.od(w).demand;
    for (double& x : block) x = m * ((1.0 - spec.floor) * x + spec.floor / static_cast<double>(n));
  }
  return out;
}

inline PathFlow make_attack(const TrafficNetwork& net, const PathFlow& mu_t0, const AttackSpec& spec, Rng& rng) {
  return spec.kind == AttackKind::unif ? unif_attack(net) : supp_attack(net, mu_t0, spec, rng);
}

struct AttackReport {
  long t0 = 0;
  double a_dagger = 0.0;
  double lower_bound = 0.0;    // sum_p mu_p log(|P_w| mu_p / m_w); equality for Unif
  double upper_bound = kInf;   // ||mu_t0 - mu_dag||_1^2 / (gamma ln 2)
  double upper_bound_global = kInf;  // 4 Mbar^2 / (gamma ln 2)
  double gamma = 0.0;          // min over ODs of gamma_w
  bool finite = true;
};

/// a_dag = D(mu_t0, mu_dag) with the negentropy bounds; gamma_w is the
/// smallest poisoned flow on a path that carried flow at t0.
inline AttackReport attack_magnitude(const TrafficNetwork& net, const MirrorMap& map, const PathFlow& mu_t0,
                                     const PathFlow& mu_dag) {
  if (mu_t0.size() != net.num_paths() || mu_dag.size() != net.num_paths())
    throw Error("attack_magnitude: dimension mismatch");
  AttackReport r;
  r.a_dagger = bregman(map, mu_t0, mu_dag);
  r.finite = std::isfinite(r.a_dagger);
  if (map.kind == MirrorKind::euclidean) {
    r.lower_bound = r.upper_bound = r.upper_bound_global = r.a_dagger;
    return r;
  }
  double gamma = kInf, lower = 0.0;
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    const double m = net.od(w).demand;
    const double n = static_cast<double>(net.od_size(w));
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      if (mu_t0[p] <= 0.0) continue;
      gamma = std::min(gamma, mu_dag[p]);
      lower += mu_t0[p] * std::log(n * mu_t0[p] / m);
    }
  }
  r.gamma = gamma;
  r.lower_bound = lower;
  if (r.finite && gamma > 0.0) {
    const double l1 = l1_distance(mu_t0.span(), mu_dag.span());
    r.upper_bound = l1 * l1 / (gamma * std::log(2.0));
    r.upper_bound_global = 4.0 * net.total_demand() * net.total_demand() / (gamma * std::log(2.0));
  }
  return r;
}

/// The attacked step: md_step anchored at mu_dag with latency observed at mu_dag.
inline PathFlow poisoned_step(const TrafficNetwork& net, const MirrorMap& map, const PathFlow& mu_dag,
                              std::span<const double> loss_at_dag, double eta) {
  return md_step(net, map, mu_dag, loss_at_dag, eta);
}

}  // namespace wanes
