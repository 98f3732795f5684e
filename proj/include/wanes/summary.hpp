#pragma once

#include <cmath>
#include <nlohmann/json.hpp>

#include "wanes/attack.hpp"
#include "wanes/equilibrium.hpp"
#include "wanes/harness.hpp"
#include "wanes/latency.hpp"

namespace wanes {

using Json = nlohmann::ordered_json;

/// JSON has no infinity or NaN; such values are written as null.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double num_or(const Json& j, const char* key, double fallback = kInf) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

inline Json to_json(const RunConfig& c, const PerturbationSpec& p) {
  Json atk = Json::array();
  for (const auto& a : c.attacks) atk.push_back(describe(a));
  return {{"horizon", c.horizon},
          {"replications", c.replications},
          {"seed", c.seed},
          {"map", to_string(c.map)},
          {"eta1", c.schedule.eta1},
          {"exponent", c.schedule.exponent},
          {"cap", num(c.schedule.cap)},
          {"start", c.start == StartKind::uniform ? "uniform" : "reference"},
          {"delta", c.delta},
          {"perturbation", p.describe()},
          {"attacks", atk}};
}

inline Json to_json(const EquilibriumResult& e) {
  return {{"phi_star", e.phi_star},
          {"lower_bound", num(e.lower_bound)},
          {"relative_gap", num(e.relative_gap)},
          {"iterations", e.iterations},
          {"converged", e.converged}};
}

inline Json to_json(const WardropAudit& a) {
  return {{"max_violation", a.max_violation},
          {"violations", a.violations},
          {"used_paths", a.used_paths},
          {"passed", a.passed}};
}

inline Json to_json(const GrowthConstants& g) { return {{"A", g.A}, {"B", g.B}, {"samples", g.samples}}; }

inline Json to_json(const AttackReport& r) {
  return {{"t0", r.t0},
          {"a_dagger", num(r.a_dagger)},
          {"lower_bound", num(r.lower_bound)},
          {"upper_bound", num(r.upper_bound)},
          {"upper_bound_global", num(r.upper_bound_global)},
          {"gamma", num(r.gamma)},
          {"finite", r.finite}};
}

inline AttackReport attack_report_from_json(const Json& j) {
  AttackReport r;
  r.t0 = j.at("t0").get<long>();
  r.a_dagger = num_or(j, "a_dagger");
  r.lower_bound = num_or(j, "lower_bound");
  r.upper_bound = num_or(j, "upper_bound");
  r.upper_bound_global = num_or(j, "upper_bound_global");
  r.gamma = num_or(j, "gamma");
  r.finite = j.at("finite").get<bool>();
  return r;
}

inline Json to_json(const TheoryConstants& k) {
  return {{"C1", num(k.C1)},         {"c1", num(k.c1)},
          {"c2", num(k.c2)},         {"rho", num(k.rho)},
          {"C2", num(k.C2)},         {"C3", num(k.C3)},
          {"t1", k.t1},              {"sum_eta", num(k.sum_eta)},
          {"sum_eta_sq", num(k.sum_eta_sq)}, {"sum_eta_sq_inf", num(k.sum_eta_sq_inf)},
          {"distance_bound", num(k.distance_bound)}, {"r_value", num(k.r_value)}};
}

inline TheoryConstants theory_from_json(const Json& j) {
  TheoryConstants k;
  k.C1 = num_or(j, "C1");
  k.c1 = num_or(j, "c1");
  k.c2 = num_or(j, "c2");
  k.rho = num_or(j, "rho");
  k.C2 = num_or(j, "C2");
  k.C3 = num_or(j, "C3");
  k.t1 = j.at("t1").get<long>();
  k.sum_eta = num_or(j, "sum_eta");
  k.sum_eta_sq = num_or(j, "sum_eta_sq");
  k.sum_eta_sq_inf = num_or(j, "sum_eta_sq_inf");
  k.distance_bound = num_or(j, "distance_bound");
  k.r_value = num_or(j, "r_value");
  return k;
}

inline Json to_json(const WanesVerdict& v) {
  return {{"epsilon", num(v.epsilon)}, {"delta", v.delta},
          {"successes", v.successes},  {"trials", v.trials},
          {"p_hat", v.p_hat},          {"ci_lower", v.ci.lower},
          {"ci_upper", v.ci.upper},    {"holds", v.holds}};
}

inline Json to_json(const ResilienceReport& rep) {
  Json atk = Json::array();
  for (const auto& o : rep.attacks) {
    Json rec = Json::array(), slope = Json::array(), plateau = Json::array(), peak = Json::array(),
         mag = Json::array();
    for (std::size_t i = 0; i < o.recovery.size(); ++i) {
      rec.push_back(o.recovery[i] < 0 ? Json(nullptr) : Json(o.recovery[i]));
      slope.push_back(num(o.slope[i]));
      plateau.push_back(num(o.plateau[i]));
      peak.push_back(num(o.peak[i]));
      mag.push_back(num(o.a_dagger[i]));
    }
    Json j = {{"t0", o.t0},       {"a_dagger", mag},        {"plateau_gap", plateau},
              {"peak_gap", peak}, {"recovery_steps", rec},  {"cesaro_loglog_slope", slope}};
    j["wanes_at_r_value"] = o.wanes_evaluated ? to_json(o.wanes) : Json(nullptr);
    atk.push_back(j);
  }
  return {{"delta_theory", rep.delta}, {"r_value", num(rep.r_value)}, {"attacks", atk}};
}

inline Json to_json(const ConcentrationAudit& a) {
  return {{"delta", a.delta},
          {"replications", a.replications},
          {"violations", a.violations},
          {"violation_rate", a.violation_rate},
          {"violation_ci_lower", a.violation_ci.lower},
          {"violation_ci_upper", a.violation_ci.upper},
          {"median_sum_xi", a.median_sum},
          {"median_bound", a.median_bound},
          {"quantile_sum_xi", a.quantile_sum}};
}

}  // namespace wanes
