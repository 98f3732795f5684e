#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wanes/common.hpp"
#include "wanes/latency.hpp"
#include "wanes/network.hpp"

namespace wanes {

class ParseError : public Error {
 public:
  ParseError(const std::string& source, int line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct TntpLink {
  int init_node = 0;  // 1-based, as in the file
  int term_node = 0;
  double capacity = 0.0;
  double length = 0.0;
  double free_flow_time = 0.0;
  double b = 0.0;
  double power = 0.0;
  double speed = 0.0;
  double toll = 0.0;
  int link_type = 0;
  bool operator==(const TntpLink&) const = default;
};

struct TntpNetworkFile {
  int zones = 0;
  int nodes = 0;
  int first_thru_node = 1;
  std::vector<TntpLink> links;
  bool operator==(const TntpNetworkFile&) const = default;
};

struct TntpDemand {
  int origin = 0;  // 1-based
  int destination = 0;
  double flow = 0.0;
  bool operator==(const TntpDemand&) const = default;
};

struct TntpTripsFile {
  int zones = 0;
  std::vector<TntpDemand> demands;  // strictly positive entries only
  bool operator==(const TntpTripsFile&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_number(std::string_view tok, const std::string& src, int line) {
  std::string t(tok);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ParseError(src, line, "expected a number, got '" + t + "'");
  }
  if (used != t.size()) throw ParseError(src, line, "expected a number, got '" + t + "'");
  return v;
}

inline int to_int(std::string_view tok, const std::string& src, int line) {
  const double v = to_number(tok, src, line);
  if (v != std::floor(v)) throw ParseError(src, line, "expected an integer, got '" + std::string(tok) + "'");
  return static_cast<int>(v);
}

// Reads "<KEY> value" lines until <END OF METADATA>; returns the line index
// after it.
inline std::size_t read_metadata(const std::vector<std::string>& lines, const std::string& src,
                                 std::map<std::string, std::string>& meta) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto s = trim(lines[i]);
    if (s.empty() || s.front() == '~') continue;
    if (s.front() != '<') throw ParseError(src, static_cast<int>(i + 1), "expected a <TAG> metadata line");
    const auto close = s.find('>');
    if (close == std::string_view::npos) throw ParseError(src, static_cast<int>(i + 1), "unterminated metadata tag");
    const std::string key(s.substr(1, close - 1));
    if (key == "END OF METADATA") return i + 1;
    meta[key] = std::string(trim(s.substr(close + 1)));
  }
  throw ParseError(src, static_cast<int>(lines.size()), "missing <END OF METADATA>");
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in{std::string(text)};
  while (std::getline(in, cur)) out.push_back(cur);
  return out;
}

inline int required_int(const std::map<std::string, std::string>& meta, const std::string& key,
                        const std::string& src) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw ParseError(src, 1, "missing <" + key + "> header");
  return to_int(it->second, src, 1);
}

}  // namespace detail

inline TntpNetworkFile parse_tntp_network(std::string_view text, const std::string& source = "net") {
  const auto lines = detail::split_lines(text);
  std::map<std::string, std::string> meta;
  std::size_t i = detail::read_metadata(lines, source, meta);
  TntpNetworkFile f;
  f.nodes = detail::required_int(meta, "NUMBER OF NODES", source);
  const int links = detail::required_int(meta, "NUMBER OF LINKS", source);
  if (meta.count("NUMBER OF ZONES")) f.zones = detail::required_int(meta, "NUMBER OF ZONES", source);
  if (meta.count("FIRST THRU NODE")) f.first_thru_node = detail::required_int(meta, "FIRST THRU NODE", source);
  if (f.nodes < 1 || links < 0) throw ParseError(source, 1, "nonpositive node or link count");

  for (; i < lines.size(); ++i) {
    const int ln = static_cast<int>(i + 1);
    auto s = detail::trim(lines[i]);
    if (s.empty() || s.front() == '~') continue;
    if (s.back() != ';') throw ParseError(source, ln, "link row must end with ';'");
    s = detail::trim(s.substr(0, s.size() - 1));
    std::vector<std::string> tok;
    std::istringstream row{std::string(s)};
    for (std::string t; row >> t;) tok.push_back(t);
    if (tok.size() != 10) throw ParseError(source, ln, "expected 10 link fields, got " + std::to_string(tok.size()));
    TntpLink l;
    l.init_node = detail::to_int(tok[0], source, ln);
    l.term_node = detail::to_int(tok[1], source, ln);
    l.capacity = detail::to_number(tok[2], source, ln);
    l.length = detail::to_number(tok[3], source, ln);
    l.free_flow_time = detail::to_number(tok[4], source, ln);
    l.b = detail::to_number(tok[5], source, ln);
    l.power = detail::to_number(tok[6], source, ln);
    l.speed = detail::to_number(tok[7], source, ln);
    l.toll = detail::to_number(tok[8], source, ln);
    l.link_type = detail::to_int(tok[9], source, ln);
    if (l.init_node < 1 || l.init_node > f.nodes || l.term_node < 1 || l.term_node > f.nodes)
      throw ParseError(source, ln, "node id out of range 1.." + std::to_string(f.nodes));
    if (!(l.capacity > 0.0)) throw ParseError(source, ln, "capacity must be positive");
    if (!(l.free_flow_time > 0.0)) throw ParseError(source, ln, "free flow time must be positive");
    if (l.b < 0.0) throw ParseError(source, ln, "b must be nonnegative");
    if (l.power < 1.0) throw ParseError(source, ln, "power must be at least 1");
    f.links.push_back(l);
  }
  if (static_cast<int>(f.links.size()) != links)
    throw ParseError(source, static_cast<int>(lines.size()),
                     "header declares " + std::to_string(links) + " links, found " + std::to_string(f.links.size()));
  return f;
}

inline TntpTripsFile parse_tntp_trips(std::string_view text, const std::string& source = "trips") {
  const auto lines = detail::split_lines(text);
  std::map<std::string, std::string> meta;
  std::size_t i = detail::read_metadata(lines, source, meta);
  TntpTripsFile f;
  f.zones = detail::required_int(meta, "NUMBER OF ZONES", source);
  int origin = 0;
  for (; i < lines.size(); ++i) {
    const int ln = static_cast<int>(i + 1);
    const auto s = detail::trim(lines[i]);
    if (s.empty() || s.front() == '~') continue;
    if (s.starts_with("Origin")) {
      origin = detail::to_int(detail::trim(s.substr(6)), source, ln);
      if (origin < 1 || origin > f.zones) throw ParseError(source, ln, "origin out of range");
      continue;
    }
    if (origin == 0) throw ParseError(source, ln, "demand entry before any Origin line");
    std::string_view rest = s;
    while (!(rest = detail::trim(rest)).empty()) {
      const auto semi = rest.find(';');
      if (semi == std::string_view::npos) throw ParseError(source, ln, "demand entry must end with ';'");
      const auto entry = rest.substr(0, semi);
      rest = rest.substr(semi + 1);
      const auto colon = entry.find(':');
      if (colon == std::string_view::npos) throw ParseError(source, ln, "expected 'dest : flow;'");
      const int dest = detail::to_int(detail::trim(entry.substr(0, colon)), source, ln);
      const double flow = detail::to_number(detail::trim(entry.substr(colon + 1)), source, ln);
      if (dest < 1 || dest > f.zones) throw ParseError(source, ln, "destination out of range");
      if (flow < 0.0) throw ParseError(source, ln, "negative demand");
      if (flow > 0.0 && dest != origin) f.demands.push_back({origin, dest, flow});
    }
  }
  return f;
}

inline std::string write_tntp_network(const TntpNetworkFile& f) {
  std::ostringstream out;
  out << "<NUMBER OF ZONES> " << f.zones << "\n<NUMBER OF NODES> " << f.nodes << "\n<FIRST THRU NODE> "
      << f.first_thru_node << "\n<NUMBER OF LINKS> " << f.links.size() << "\n<END OF METADATA>\n\n";
  out << "~\tinit\tterm\tcapacity\tlength\tfftt\tb\tpower\tspeed\ttoll\ttype\t;\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& l : f.links) {
    out << '\t' << l.init_node << '\t' << l.term_node << '\t' << num(l.capacity) << '\t' << num(l.length) << '\t'
        << num(l.free_flow_time) << '\t' << num(l.b) << '\t' << num(l.power) << '\t' << num(l.speed) << '\t'
        << num(l.toll) << '\t' << l.link_type << "\t;\n";
  }
  return out.str();
}

inline std::string write_tntp_trips(const TntpTripsFile& f) {
  std::ostringstream out;
  out << "<NUMBER OF ZONES> " << f.zones << "\n<END OF METADATA>\n";
  char buf[64];
  int origin = 0;
  for (const auto& d : f.demands) {
    if (d.origin != origin) {
      origin = d.origin;
      out << "\nOrigin " << origin << "\n";
    }
    std::snprintf(buf, sizeof buf, "%.17g", d.flow);
    out << "    " << d.destination << " : " << buf << ";\n";
  }
  return out.str();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Network, latency model and the path sets the learner will use.
struct Instance {
  TrafficNetwork network;
  LatencyModel latency;
};

inline Instance build_instance(const TntpNetworkFile& net, const TntpTripsFile& trips, int k_paths,
                               const PerturbationSpec& perturbation) {
  if (net.first_thru_node > 1)
    warn("<FIRST THRU NODE> " + std::to_string(net.first_thru_node) + " ignored: zones may be traversed");
  std::vector<Edge> edges;
  std::vector<BprEdge> bpr;
  Vector fftt;
  for (const auto& l : net.links) {
    edges.push_back({l.init_node - 1, l.term_node - 1});
    bpr.push_back({l.free_flow_time, l.capacity, l.b, l.power});
    fftt.push_back(l.free_flow_time);
  }
  std::vector<OdPair> ods;
  for (const auto& d : trips.demands) {
    if (d.origin > net.nodes || d.destination > net.nodes) throw Error("trip table zone exceeds node count");
    ods.push_back({d.origin - 1, d.destination - 1, d.flow});
  }
  RoadGraph g(net.nodes, std::move(edges));
  return {build_network(std::move(g), ods, fftt, k_paths), LatencyModel(std::move(bpr), perturbation)};
}

/// Two parallel routes 1->2 sharing nothing; handy for docs and tests.
inline Instance toy_instance(double demand = 2.0, const PerturbationSpec& perturbation = PerturbationSpec::none()) {
  RoadGraph g(2, {{0, 1}, {0, 1}});
  std::vector<BprEdge> bpr{{1.0, 1.0, 0.15, 4.0}, {2.0, 1.0, 0.15, 4.0}};
  return {build_network(std::move(g), {{0, 1, demand}}, Vector{1.0, 2.0}, 2), LatencyModel(std::move(bpr), perturbation)};
}

/// Fixed 12-significant-digit rendering used by every CSV writer.
inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Flat key = value text; '#' starts a comment.
inline std::map<std::string, std::string> parse_config(std::string_view text, const std::string& source = "config") {
  std::map<std::string, std::string> out;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view s = lines[i];
    if (const auto h = s.find('#'); h != std::string_view::npos) s = s.substr(0, h);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, static_cast<int>(i + 1), "expected key = value");
    const std::string key(detail::trim(s.substr(0, eq)));
    if (key.empty()) throw ParseError(source, static_cast<int>(i + 1), "empty key");
    out[key] = std::string(detail::trim(s.substr(eq + 1)));
  }
  return out;
}

}  // namespace wanes
