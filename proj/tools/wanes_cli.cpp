// wanes: command-line driver for the simulator.
//
// Exit status: 0 success, 1 run-time failure (including failed validation),
// 2 usage error (bad flag, bad value, missing or unreadable input).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wanes/attack.hpp"
#include "wanes/equilibrium.hpp"
#include "wanes/harness.hpp"
#include "wanes/io.hpp"
#include "wanes/latency.hpp"
#include "wanes/mirror.hpp"
#include "wanes/records.hpp"
#include "wanes/summary.hpp"

namespace fs = std::filesystem;
using namespace wanes;

namespace {

struct UsageError : Error {
  using Error::Error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Every setting, as text, keyed by its long flag name without dashes.
// Resolution order: command line, then config file, then WANES_SEED (seed
// only), then the defaults below.
const std::map<std::string, std::string> kDefaults = {
    {"net", ""},
    {"trips", ""},
    {"out-dir", "out"},
    {"in-dir", ""},
    {"seed", "1"},
    {"replications", "10"},
    {"horizon", "100"},
    {"attack", ""},
    {"map", "negentropy"},
    {"eta1", "0.1"},
    {"beta", "-0.25"},
    {"schedule", "beta"},
    {"cap", "none"},
    {"k-paths", "8"},
    {"noise", "uniform:0.5"},
    {"delta", "0.1"},
    {"start", "uniform"},
    {"tol", "1e-6"},
    {"threads", "1"},
    {"growth-samples", "1000"},
};

class Settings {
 public:
  void set_cli(const std::string& key, const std::string& value) { cli_[key] = value; }
  void add_cli_attack(const std::string& a) { cli_attacks_.push_back(a); }

  void load_config(const std::string& path) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    try {
      for (const auto& [key, v] : parse_config(text, path)) {
        std::string k = key;
        for (char& c : k)
          if (c == '_') c = '-';
        if (!kDefaults.count(k) || k == "in-dir") throw UsageError(path + ": unknown key '" + k + "'");
        file_[k] = v;
      }
    } catch (const ParseError& e) {
      throw UsageError(e.what());
    }
  }

  std::string str(const std::string& key) const {
    if (auto it = cli_.find(key); it != cli_.end()) return it->second;
    if (auto it = file_.find(key); it != file_.end()) return it->second;
    if (key == "seed")
      if (const char* env = std::getenv("WANES_SEED"); env && *env) return env;
    return kDefaults.at(key);
  }

  bool from_cli(const std::string& key) const { return cli_.count(key) > 0; }

  double num(const std::string& key) const {
    const std::string s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + key + ": expected a number, got '" + s + "'");
  }

  long integer(const std::string& key) const {
    const std::string s = str(key);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return static_cast<long>(v);
    } catch (const std::exception&) {
    }
    throw UsageError("--" + key + ": expected an integer, got '" + s + "'");
  }

  std::uint64_t seed() const {
    const std::string s = str("seed");
    try {
      std::size_t used = 0;
      if (!s.empty() && s[0] != '-') {
        const auto v = std::stoull(s, &used);
        if (used == s.size()) return v;
      }
    } catch (const std::exception&) {
    }
    throw UsageError("seed: expected a nonnegative integer, got '" + s + "'");
  }

  // Command-line attacks replace the config list; the config separates
  // attacks with ';'.
  std::vector<AttackSpec> attacks() const {
    std::vector<std::string> texts = cli_attacks_;
    if (texts.empty()) {
      std::string s = str("attack");
      std::size_t start = 0;
      while (start <= s.size()) {
        const auto semi = s.find(';', start);
        const std::string part(detail::trim(std::string_view(s).substr(start, semi - start)));
        if (!part.empty()) texts.push_back(part);
        if (semi == std::string::npos) break;
        start = semi + 1;
      }
    }
    std::vector<AttackSpec> out;
    try {
      for (const auto& t : texts) out.push_back(parse_attack(t));
    } catch (const UsageError&) {
      throw;
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return out;
  }

  MirrorKind map() const {
    try {
      return parse_mirror_kind(str("map"));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }

  // "none", "uniform:W" or "gaussian:MEAN,SD".
  PerturbationSpec noise() const {
    const std::string s = str("noise");
    auto bad = [&] { return UsageError("--noise: expected none, uniform:W or gaussian:MEAN,SD, got '" + s + "'"); };
    PerturbationSpec p;
    try {
      if (s == "none") {
        p = PerturbationSpec::none();
      } else if (s.rfind("uniform:", 0) == 0) {
        p = PerturbationSpec::uniform(std::stod(s.substr(8)));
      } else if (s.rfind("gaussian:", 0) == 0) {
        const std::string rest = s.substr(9);
        const auto comma = rest.find(',');
        if (comma == std::string::npos) throw bad();
        p = PerturbationSpec::truncated_gaussian(std::stod(rest.substr(0, comma)), std::stod(rest.substr(comma + 1)));
      } else {
        throw bad();
      }
      p.validate();
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception&) {
      throw bad();
    }
    return p;
  }

  StepSchedule schedule() const {
    StepSchedule s;
    s.eta1 = num("eta1");
    const double beta = num("beta");
    const std::string conv = str("schedule");
    if (conv == "beta") s.exponent = StepSchedule::exponent_from_beta(beta);
    else if (conv == "beta-half") s.exponent = StepSchedule::exponent_from_beta_half(beta);
    else throw UsageError("--schedule: expected beta or beta-half, got '" + conv + "'");
    const std::string cap = str("cap");
    if (cap != "none" && cap != "theory") s.cap = num("cap");
    try {
      s.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return s;
  }

  bool theory_cap() const { return str("cap") == "theory"; }

  StartKind start() const {
    const std::string s = str("start");
    if (s == "uniform") return StartKind::uniform;
    if (s == "reference") return StartKind::reference;
    throw UsageError("--start: expected uniform or reference, got '" + s + "'");
  }

  RunConfig run_config() const {
    RunConfig c;
    c.horizon = integer("horizon");
    c.replications = static_cast<int>(integer("replications"));
    c.schedule = schedule();
    c.map = map();
    c.attacks = attacks();
    c.start = start();
    c.delta = num("delta");
    c.seed = seed();
    c.threads = static_cast<int>(integer("threads"));
    try {
      c.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  Json echo() const {
    Json j = Json::object();
    for (const auto& [k, _] : kDefaults) {
      if (k == "attack") continue;
      j[k] = str(k);
    }
    Json atk = Json::array();
    for (const auto& a : attacks()) atk.push_back(describe(a));
    j["attack"] = atk;
    return j;
  }

 private:
  std::map<std::string, std::string> cli_, file_;
  std::vector<std::string> cli_attacks_;
};

// ------------------------------------------------------------ shared steps

struct Loaded {
  Instance inst;
  double load_seconds = 0.0;
};

std::string read_input(const std::string& flag, const std::string& path) {
  if (path.empty()) throw UsageError("--" + flag + " is required");
  if (!fs::is_regular_file(path)) throw UsageError("--" + flag + ": no such file '" + path + "'");
  try {
    return read_file(path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

Loaded load_instance(const Settings& s) {
  const auto t0 = Clock::now();
  const std::string net_path = s.str("net"), trips_path = s.str("trips");
  const std::string net_text = read_input("net", net_path);
  const std::string trips_text = read_input("trips", trips_path);
  const long k = s.integer("k-paths");
  if (k < 1) throw UsageError("--k-paths must be at least 1");
  TntpNetworkFile nf;
  TntpTripsFile tf;
  try {
    nf = parse_tntp_network(net_text, net_path);
    tf = parse_tntp_trips(trips_text, trips_path);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
  Loaded l{build_instance(nf, tf, static_cast<int>(k), s.noise())};
  l.load_seconds = seconds_since(t0);
  return l;
}

Json network_json(const TrafficNetwork& net) {
  return {{"nodes", net.graph().num_nodes()},
          {"links", net.num_edges()},
          {"od_pairs", net.num_ods()},
          {"paths", net.num_paths()},
          {"total_demand", net.total_demand()}};
}

EquilibriumResult solve_reference(const Instance& inst, const Settings& s) {
  SolverOptions opt;
  opt.tol = s.num("tol");
  if (!(opt.tol > 0.0)) throw UsageError("--tol must be positive");
  EquilibriumResult eq = solve_mwe(inst.network, inst.latency, opt);
  if (!eq.converged)
    warn("equilibrium solver stopped at relative gap " + fmt12(eq.relative_gap) + " above tol " + fmt12(opt.tol));
  return eq;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory '" + dir.string() + "'");
}

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

// Per-OD equilibrium path flows with their mean latencies.
std::string equilibrium_csv(const TrafficNetwork& net, const LatencyModel& model, const PathFlow& mu) {
  const Vector l = mean_path_latency(net, model, mu);
  std::string out = "origin,destination,path,flow,mean_latency,nodes\n";
  for (std::size_t w = 0; w < net.num_ods(); ++w) {
    const auto& od = net.od(w);
    for (std::size_t p = net.od_begin(w); p < net.od_end(w); ++p) {
      std::string nodes = std::to_string(od.origin + 1);
      for (int e : net.path(p)) nodes += ' ' + std::to_string(net.graph().edge(e).head + 1);
      out += std::to_string(od.origin + 1) + ',' + std::to_string(od.destination + 1) + ',' +
             std::to_string(p - net.od_begin(w)) + ',' + fmt12(mu[p]) + ',' + fmt12(l[p]) + ',' + nodes + '\n';
    }
  }
  return out;
}

struct TheorySide {
  GrowthConstants growth;
  GrowthCertificate certificate;
  MirrorMap map;
  double phi_sup = 0.0;
  double diameter_sq = 0.0;
};

TheorySide theory_side(const Instance& inst, const RunConfig& cfg, const EquilibriumResult& eq, int samples) {
  if (samples < 100) throw UsageError("--growth-samples must be at least 100");
  TheorySide t;
  Rng grng = make_rng(cfg.seed, streams::kGrowth);
  t.growth = estimate_growth_constants(inst.network, inst.latency, samples, grng);
  Rng crng = make_rng(cfg.seed, streams::kAudit);
  t.certificate = certify_growth_constants(inst.network, inst.latency, t.growth, samples, crng);
  if (!t.certificate.passed())
    warn("growth constants failed holdout certification on " + std::to_string(t.certificate.violations) + " of " +
         std::to_string(t.certificate.samples) + " draws");
  t.map = MirrorMap::make(cfg.map, inst.network);
  Rng prng = make_rng(cfg.seed, streams::kGrowth, 1);
  t.phi_sup = phi_star_sup(inst.network, inst.latency, eq.mu_star, prng);
  t.diameter_sq = flow_diameter_sq(inst.network);
  return t;
}

Json growth_json(const TheorySide& t) {
  Json j = to_json(t.growth);
  j["holdout_samples"] = t.certificate.samples;
  j["holdout_violations"] = t.certificate.violations;
  j["holdout_worst_ratio"] = t.certificate.worst_ratio;
  return j;
}

// The run restarts its schedule at the last attack; the theory is evaluated
// on that final segment.
long restart_offset(const RunConfig& cfg) {
  long off = 0;
  for (const auto& a : cfg.attacks) off = std::max(off, a.t0 - 1);
  return off;
}

TheoryInputs theory_inputs(const TheorySide& t, const EquilibriumResult& eq, const RunConfig& cfg, double a_dagger) {
  TheoryInputs in;
  in.A = t.growth.A;
  in.B = t.growth.B;
  in.sigma = t.map.sigma;
  in.phi_star_sup = t.phi_sup;
  in.Phi_star = eq.phi_star;
  in.a_dagger = a_dagger;
  in.diameter_sq = t.diameter_sq;
  in.delta = cfg.delta;
  in.T = cfg.horizon - restart_offset(cfg);
  return in;
}

double final_window_std(const RunRecord& r, std::size_t window = 20) {
  const std::size_t n = std::min(window, r.Phi.size());
  if (n < 2) return 0.0;
  return stddev_of(std::span(r.Phi).subspan(r.Phi.size() - n, n));
}

// ------------------------------------------------------------ subcommands

int cmd_solve(const Settings& s) {
  const auto t0 = Clock::now();
  Loaded l = load_instance(s);
  const fs::path out = s.str("out-dir");
  const auto ts = Clock::now();
  const EquilibriumResult eq = solve_reference(l.inst, s);
  const double solve_s = seconds_since(ts);
  const WardropAudit audit = wardrop_audit(l.inst.network, l.inst.latency, eq.mu_star, 1e-3);

  Json j;
  j["command"] = "solve";
  j["settings"] = s.echo();
  j["network"] = network_json(l.inst.network);
  j["equilibrium"] = to_json(eq);
  j["wardrop_audit"] = to_json(audit);
  j["wardrop_audit"]["relative_tolerance"] = 1e-3;
  j["timings_seconds"] = {{"load", l.load_seconds}, {"solve", solve_s}, {"total", seconds_since(t0)}};

  prepare_out_dir(out);
  write_file(out / "equilibrium.csv", equilibrium_csv(l.inst.network, l.inst.latency, eq.mu_star));
  write_json(out / "equilibrium.json", j);
  std::cout << "Phi* = " << fmt12(eq.phi_star) << "  relative gap " << fmt12(eq.relative_gap) << "  iterations "
            << eq.iterations << "  Wardrop audit " << (audit.passed ? "passed" : "FAILED") << "\n";
  return 0;
}

Json replications_json(const std::vector<RunRecord>& recs) {
  Json arr = Json::array();
  for (const auto& r : recs) {
    Json atk = Json::array();
    for (const auto& a : r.attacks) atk.push_back(to_json(a));
    arr.push_back({{"replication", r.replication},
                   {"attacks", atk},
                   {"cesaro_gap_final", num(r.cesaro_gap.back())},
                   {"cesaro_Phi", num(r.cesaro_Phi)},
                   {"max_dist", num(r.max_dist)},
                   {"final_window_std_Phi", num(final_window_std(r))}});
  }
  return arr;
}

// Fraction of replications where the theory constants dominate what was
// observed after the last restart.
Json dominance_json(const std::vector<RunRecord>& recs, const TheoryConstants& k, long offset) {
  std::size_t dist_ok = 0, gap_ok = 0;
  for (const auto& r : recs) {
    double m = 0.0;
    for (std::size_t i = static_cast<std::size_t>(offset); i < r.dist.size(); ++i) m = std::max(m, r.dist[i]);
    if (m <= k.distance_bound) ++dist_ok;
    if (r.cesaro_gap.back() <= k.r_value) ++gap_ok;
  }
  const double n = static_cast<double>(recs.size());
  return {{"max_distance_within_bound", static_cast<double>(dist_ok) / n},
          {"cesaro_gap_within_r_value", static_cast<double>(gap_ok) / n}};
}

Json invariants_json(const InvariantMonitor& m) {
  const auto t = m.total();
  return {{"steps", t.steps},
          {"one_step_violations", t.one_step_violations},
          {"one_step_skipped_underflow", t.one_step_skipped},
          {"distance_violations", t.distance_violations},
          {"growth_violations", t.growth_violations},
          {"worst_one_step_slack", num(t.worst_one_step)},
          {"worst_distance_ratio", num(t.worst_distance)}};
}

struct RunOutputs {
  Json summary;
  std::vector<RunRecord> records;
};

RunOutputs run_and_summarise(const Settings& s, Learner learner) {
  const auto t0 = Clock::now();
  RunConfig cfg = s.run_config();
  Loaded l = load_instance(s);
  const auto& net = l.inst.network;
  const auto& model = l.inst.latency;

  const auto ts = Clock::now();
  const EquilibriumResult eq = solve_reference(l.inst, s);
  const double solve_s = seconds_since(ts);
  const auto tg = Clock::now();
  const TheorySide th = theory_side(l.inst, cfg, eq, static_cast<int>(s.integer("growth-samples")));
  if (s.theory_cap()) cfg.schedule.cap = th.map.sigma / (2.0 * th.growth.A);
  const double growth_s = seconds_since(tg);

  Rng comp_rng = make_rng(cfg.seed, streams::kAudit, 1);
  InvariantMonitor monitor(net, cfg, th.map, th.growth, eq, th.phi_sup,
                           {uniform_flow(net), random_flow(net, comp_rng, 1.0)});
  const auto tr = Clock::now();
  RunOutputs out;
  out.records = run_learner(net, model, cfg, eq, learner, monitor.observer());
  const double run_s = seconds_since(tr);

  const long offset = restart_offset(cfg);
  double a_dag = 0.0;
  if (!cfg.attacks.empty()) {
    for (const auto& r : out.records) a_dag = std::max(a_dag, r.attacks.back().a_dagger);
  } else {
    const PathFlow start = cfg.start == StartKind::reference ? eq.mu_star : uniform_flow(net);
    a_dag = bregman(th.map, eq.mu_star, start);
  }
  Json j;
  j["command"] = learner == Learner::greedy ? "baseline" : "simulate";
  j["learner"] = learner == Learner::greedy ? "greedy" : "mirror_descent";
  j["settings"] = s.echo();
  j["config"] = to_json(cfg, model.perturbation);
  j["network"] = network_json(net);
  j["equilibrium"] = to_json(eq);
  j["sigma"] = th.map.sigma;
  j["growth"] = growth_json(th);
  j["phi_star_sup"] = th.phi_sup;

  TheoryConstants theory;
  bool have_theory = false;
  if (std::isfinite(a_dag) && cfg.schedule.convergent()) {
    TheoryInputs in = theory_inputs(th, eq, cfg, a_dag);
    for (const auto& r : out.records) in.distances.emplace_back(r.dist.begin() + offset, r.dist.end());
    theory = theory_constants(ShiftedSchedule{cfg.schedule, offset}, in);
    have_theory = true;
    j["theory"] = to_json(theory);
    j["theory"]["a_dagger_used"] = a_dag;
    j["theory"]["restart_offset"] = offset;
    j["theory"]["delta_theory"] = cfg.delta;
    j["theory"]["t1_source"] = "realized trajectories";
    j["dominance"] = dominance_json(out.records, theory, offset);
  } else {
    j["theory"] = nullptr;
    warn("theory constants skipped: attack magnitude is infinite or the schedule is not convergent");
  }
  j["invariants"] = invariants_json(monitor);

  if (!cfg.attacks.empty() && have_theory) {
    j["resilience"] = to_json(resilience_report(out.records, theory, cfg.delta));
  } else if (have_theory && cfg.replications >= 20) {
    j["wanes_at_r_value"] = to_json(wanes_check(out.records, theory.r_value, cfg.delta));
  }
  if (!model.perturbation.deterministic() && model.perturbation.bounded() && cfg.replications >= 50)
    j["concentration"] = to_json(concentration_audit(out.records, cfg.delta, model.perturbation));

  if (learner == Learner::greedy) {
    // Paired mirror-descent run on the same streams, for the oscillation comparison.
    const auto md = simulate(net, model, cfg, eq);
    Json cmp = Json::array();
    std::size_t wins = 0;
    for (std::size_t r = 0; r < md.size(); ++r) {
      const double g = final_window_std(out.records[r]), m = final_window_std(md[r]);
      if (g > m) ++wins;
      cmp.push_back({{"replication", r}, {"greedy_std", num(g)}, {"md_std", num(m)}});
    }
    j["paired_final_window_std"] = {{"window", 20}, {"greedy_larger", wins}, {"replications", md.size()}, {"runs", cmp}};
  }
  j["replications"] = replications_json(out.records);
  j["timings_seconds"] = {{"load", l.load_seconds},
                          {"solve", solve_s},
                          {"growth", growth_s},
                          {"run", run_s},
                          {"total", seconds_since(t0)}};
  out.summary = std::move(j);
  return out;
}

int cmd_run(const Settings& s, Learner learner) {
  const fs::path out = s.str("out-dir");
  RunOutputs r = run_and_summarise(s, learner);
  prepare_out_dir(out);
  write_file(out / "trajectory.csv", trajectory_csv(r.records));
  write_file(out / "diagnostics.csv", diagnostics_csv(r.records));
  write_json(out / "summary.json", r.summary);
  const auto& inv = r.summary["invariants"];
  std::cout << (learner == Learner::greedy ? "baseline" : "simulate") << ": " << r.records.size()
            << " replications x " << r.records.front().size() << " steps; invariant violations "
            << inv["one_step_violations"].get<std::size_t>() + inv["distance_violations"].get<std::size_t>() +
                   inv["growth_violations"].get<std::size_t>()
            << "; wrote " << (out / "summary.json").string() << "\n";
  return 0;
}

int cmd_report(const Settings& s) {
  const fs::path in = s.str("in-dir").empty() ? fs::path(s.str("out-dir")) : fs::path(s.str("in-dir"));
  const std::string traj = read_input("in-dir", (in / "trajectory.csv").string());
  const std::string diag = read_input("in-dir", (in / "diagnostics.csv").string());
  const std::string summ = read_input("in-dir", (in / "summary.json").string());
  std::vector<RunRecord> recs;
  Json summary;
  try {
    recs = parse_trajectory_csv(traj, (in / "trajectory.csv").string());
    parse_diagnostics_csv(diag, recs, (in / "diagnostics.csv").string());
    summary = Json::parse(summ);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError((in / "summary.json").string() + ": " + e.what());
  }
  if (!summary.contains("theory") || summary["theory"].is_null())
    throw Error("report: the summary carries no theory constants");
  const TheoryConstants theory = theory_from_json(summary["theory"]);
  const double delta = summary.at("config").at("delta").get<double>();
  const auto& reps = summary.at("replications");
  if (reps.size() != recs.size()) throw Error("report: summary and trajectory disagree on replications");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (const auto& a : reps[i].at("attacks")) recs[i].attacks.push_back(attack_report_from_json(a));
  }
  Json j;
  j["command"] = "report";
  j["source"] = in.string();
  j["seed"] = summary.at("config").at("seed");
  j["resilience"] = to_json(resilience_report(recs, theory, delta));
  if (recs.size() >= 20) j["wanes_at_r_value"] = to_json(wanes_check(recs, theory.r_value, delta));
  const fs::path out = s.from_cli("out-dir") ? fs::path(s.str("out-dir")) : in;
  prepare_out_dir(out);
  write_json(out / "report.json", j);
  std::cout << "report: " << recs.size() << " replications; wrote " << (out / "report.json").string() << "\n";
  return 0;
}

int cmd_constants(const Settings& s) {
  const auto t0 = Clock::now();
  const RunConfig cfg = s.run_config();
  Loaded l = load_instance(s);
  const fs::path out = s.str("out-dir");
  const EquilibriumResult eq = solve_reference(l.inst, s);
  const TheorySide th = theory_side(l.inst, cfg, eq, static_cast<int>(s.integer("growth-samples")));
  StepSchedule sched = cfg.schedule;
  if (s.theory_cap()) sched.cap = th.map.sigma / (2.0 * th.growth.A);

  // a-dagger for the last configured attack striking at the reference flow.
  double a_dag = 0.0;
  Json attack = nullptr;
  if (!cfg.attacks.empty()) {
    Rng arng = make_rng(cfg.seed, streams::kAttack);
    const PathFlow dag = make_attack(l.inst.network, eq.mu_star, cfg.attacks.back(), arng);
    AttackReport rep = attack_magnitude(l.inst.network, th.map, eq.mu_star, dag);
    rep.t0 = cfg.attacks.back().t0;
    a_dag = rep.a_dagger;
    attack = to_json(rep);
  }
  const long offset = restart_offset(cfg);
  const TheoryConstants k = theory_constants(ShiftedSchedule{sched, offset}, theory_inputs(th, eq, cfg, a_dag));
  Json j;
  j["command"] = "constants";
  j["settings"] = s.echo();
  j["network"] = network_json(l.inst.network);
  j["Phi_star"] = eq.phi_star;
  j["sigma"] = th.map.sigma;
  j["growth"] = growth_json(th);
  j["phi_star_sup"] = th.phi_sup;
  j["flow_diameter_sq"] = th.diameter_sq;
  j["attack_at_reference"] = attack;
  j["theory"] = to_json(k);
  j["theory"]["restart_offset"] = offset;
  j["theory"]["delta_theory"] = cfg.delta;
  j["theory"]["t1_source"] = "polytope diameter";
  j["timings_seconds"] = {{"total", seconds_since(t0)}};
  prepare_out_dir(out);
  write_json(out / "constants.json", j);
  std::cout << "C2 = " << fmt12(k.C2) << "  C3 = " << fmt12(k.C3) << "  r_value = " << fmt12(k.r_value) << "\n";
  return 0;
}

struct Check {
  std::string name;
  bool passed;
  std::string detail;
};

int cmd_validate(const Settings& s) {
  const auto t0 = Clock::now();
  RunConfig cfg = s.run_config();
  Loaded l = load_instance(s);
  const fs::path out = s.str("out-dir");
  const auto& net = l.inst.network;
  const auto& model = l.inst.latency;
  std::vector<Check> checks;

  double worst_feas = 0.0;
  Rng rng = make_rng(cfg.seed, streams::kAudit, 2);
  for (int i = 0; i < 100; ++i) worst_feas = std::max(worst_feas, feasibility_error(net, random_flow(net, rng, 0.5)));
  checks.push_back({"random flows are feasible", worst_feas <= 1e-9, "max error " + fmt12(worst_feas)});

  // Convexity of phi in mu for a fixed omega.
  std::size_t convex_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const PathFlow a = random_flow(net, rng), b = random_flow(net, rng);
    const Vector omega = model.sample_omega(rng);
    const double lam = uniform01(rng);
    PathFlow mix(net.num_paths());
    for (std::size_t p = 0; p < mix.size(); ++p) mix[p] = lam * a[p] + (1 - lam) * b[p];
    const double lhs = sbp(net, model, mix, omega);
    const double rhs = lam * sbp(net, model, a, omega) + (1 - lam) * sbp(net, model, b, omega);
    if (lhs > rhs + 1e-9 * std::max(1.0, std::abs(rhs))) ++convex_bad;
  }
  checks.push_back({"potential is convex along random chords", convex_bad == 0,
                    std::to_string(convex_bad) + " violations in 200"});

  const MirrorMap map = MirrorMap::make(cfg.map, net);
  std::size_t sc_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const PathFlow a = random_flow(net, rng), b = random_flow(net, rng);
    if (bregman(map, a, b) < 0.5 * map.sigma * squared_distance(a.span(), b.span()) * (1 - 1e-9)) ++sc_bad;
  }
  checks.push_back({"Bregman divergence is sigma-strongly convex", sc_bad == 0,
                    std::to_string(sc_bad) + " violations in 1000"});

  const EquilibriumResult eq = solve_reference(l.inst, s);
  checks.push_back({"equilibrium solver converged", eq.converged, "relative gap " + fmt12(eq.relative_gap)});
  const WardropAudit audit = wardrop_audit(net, model, eq.mu_star, 1e-3);
  checks.push_back({"Wardrop audit at 1e-3 relative", audit.passed,
                    std::to_string(audit.violations) + " of " + std::to_string(audit.used_paths) +
                        " used paths, worst " + fmt12(audit.max_violation)});

  const TheorySide th = theory_side(l.inst, cfg, eq, static_cast<int>(s.integer("growth-samples")));
  checks.push_back({"growth constants hold on holdout draws", th.certificate.passed(),
                    std::to_string(th.certificate.violations) + " of " + std::to_string(th.certificate.samples)});
  if (s.theory_cap()) cfg.schedule.cap = th.map.sigma / (2.0 * th.growth.A);

  Rng comp_rng = make_rng(cfg.seed, streams::kAudit, 1);
  InvariantMonitor monitor(net, cfg, th.map, th.growth, eq, th.phi_sup,
                           {uniform_flow(net), random_flow(net, comp_rng, 1.0)});
  const auto recs = simulate(net, model, cfg, eq, monitor.observer());
  const auto tot = monitor.total();
  checks.push_back({"one-step divergence bound along trajectories", tot.one_step_violations == 0,
                    std::to_string(tot.one_step_violations) + " violations in " + std::to_string(tot.steps) +
                        " steps x comparators"});
  checks.push_back({"flow-distance bound along trajectories", tot.distance_violations == 0,
                    std::to_string(tot.distance_violations) + " violations, worst ratio " +
                        fmt12(tot.worst_distance)});
  checks.push_back({"growth condition along trajectories", tot.growth_violations == 0,
                    std::to_string(tot.growth_violations) + " violations"});
  double min_gap = kInf, min_cesaro = kInf;
  std::size_t infeasible = 0;
  for (const auto& r : recs) {
    for (double g : r.gap) min_gap = std::min(min_gap, g);
    for (double g : r.cesaro_gap) min_cesaro = std::min(min_cesaro, g);
    if (!is_feasible(net, r.cesaro, 1e-6)) ++infeasible;
  }
  const double slack = -std::max(1e-8, s.num("tol")) * eq.phi_star;
  checks.push_back({"potential gap nonnegative up to solver tolerance", min_gap >= slack, "min " + fmt12(min_gap)});
  checks.push_back({"Cesaro gap nonnegative up to solver tolerance", min_cesaro >= slack, "min " + fmt12(min_cesaro)});
  checks.push_back({"Cesaro averages are feasible", infeasible == 0, std::to_string(infeasible) + " infeasible"});

  bool all = true;
  Json arr = Json::array();
  for (const auto& c : checks) {
    all = all && c.passed;
    arr.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  }
  Json j;
  j["command"] = "validate";
  j["settings"] = s.echo();
  j["network"] = network_json(net);
  j["checks"] = arr;
  j["passed"] = all;
  j["timings_seconds"] = {{"total", seconds_since(t0)}};
  prepare_out_dir(out);
  write_json(out / "validate.json", j);
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror-descent learning in stochastic congestion games under flow-disturbance attacks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::map<std::string, std::string> raw;
  std::vector<std::string> attacks;
  std::string config;
  auto opt = [&](const std::string& name, const std::string& help) {
    return app.add_option("--" + name, raw[name], help);
  };
  opt("net", "TNTP network file");
  opt("trips", "TNTP trip table");
  app.add_option("--config", config, "flat key = value file mirroring the flags");
  opt("out-dir", "output directory (default: out)");
  opt("in-dir", "report: directory holding a previous run (default: --out-dir)");
  opt("seed", "master seed (fallback: WANES_SEED, then 1)");
  opt("replications", "Monte Carlo replications (default 10)");
  opt("horizon", "iterations T (default 100)");
  app.add_option("--attack", attacks, "unif@T0 or supp@T0:c=C[,floor=F]; repeatable");
  opt("map", "negentropy | euclidean");
  opt("eta1", "initial step size (default 0.1)");
  opt("beta", "rate exponent beta (default -0.25)");
  opt("schedule", "beta: eta_t = eta1 t^(-beta-1); beta-half: eta1 t^(beta-1/2)");
  opt("cap", "step-size cap: none, theory (sigma / 2A) or a number");
  opt("k-paths", "paths per OD pair (default 8)");
  opt("noise", "none | uniform:W | gaussian:MEAN,SD (default uniform:0.5)");
  opt("delta", "confidence parameter in (0, 1) (default 0.1)");
  opt("start", "uniform | reference (default uniform)");
  opt("tol", "equilibrium relative gap tolerance (default 1e-6)");
  opt("threads", "worker threads for replications (default 1)");
  opt("growth-samples", "draws used to estimate and to certify (A, B) (default 1000)");

  auto* solve = app.add_subcommand("solve", "reference equilibrium and Phi*");
  auto* sim = app.add_subcommand("simulate", "mirror-descent runs with attacks");
  auto* base = app.add_subcommand("baseline", "greedy halving runs, paired with mirror descent");
  auto* report = app.add_subcommand("report", "resilience evaluation from a stored run");
  auto* constants = app.add_subcommand("constants", "theory-side constants");
  auto* validate = app.add_subcommand("validate", "invariant suite on a network");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  warning_sink() = [](std::string_view m) { std::cerr << "warning: " << m << "\n"; };
  try {
    Settings s;
    if (!config.empty()) s.load_config(config);
    for (const auto& [k, v] : raw)
      if (app.count("--" + k) > 0) s.set_cli(k, v);
    for (const auto& a : attacks) s.add_cli_attack(a);

    if (solve->parsed()) return cmd_solve(s);
    if (sim->parsed()) return cmd_run(s, Learner::mirror_descent);
    if (base->parsed()) return cmd_run(s, Learner::greedy);
    if (report->parsed()) return cmd_report(s);
    if (constants->parsed()) return cmd_constants(s);
    if (validate->parsed()) return cmd_validate(s);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
