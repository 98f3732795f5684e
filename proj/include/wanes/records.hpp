#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wanes/common.hpp"
#include "wanes/harness.hpp"
#include "wanes/io.hpp"

namespace wanes {

inline constexpr const char* kTrajectoryHeader = "replication,t,eta,phi_t,Phi_t,gap,dist_ref,attacked";
inline constexpr const char* kDiagnosticsHeader = "replication,t,cesaro_gap,xi,xi_bound";

/// One row per (replication, t), replications in index order.
inline std::string trajectory_csv(const std::vector<RunRecord>& records) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out += std::to_string(r.replication) + ',' + std::to_string(i + 1) + ',' + fmt12(r.eta[i]) + ',' +
             fmt12(r.phi[i]) + ',' + fmt12(r.Phi[i]) + ',' + fmt12(r.gap[i]) + ',' + fmt12(r.dist[i]) + ',' +
             (r.attacked[i] ? '1' : '0') + '\n';
    }
  }
  return out;
}

inline std::string diagnostics_csv(const std::vector<RunRecord>& records) {
  std::string out = std::string(kDiagnosticsHeader) + "\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out += std::to_string(r.replication) + ',' + std::to_string(i + 1) + ',' + fmt12(r.cesaro_gap[i]) + ',' +
             fmt12(r.xi[i]) + ',' + fmt12(r.xi_bound[i]) + '\n';
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(std::string_view text, const std::string& header,
                                                      const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != header) throw ParseError(source, 1, "expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(lines[i]);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(std::string(trim(c)));
    rows.push_back(std::move(cells));
  }
  return rows;
}

// Finds or appends the record for replication r; rows of one replication must be contiguous.
inline RunRecord& record_for(std::vector<RunRecord>& recs, int r, const std::string& src, int line) {
  if (recs.empty() || recs.back().replication != r) {
    for (const auto& x : recs)
      if (x.replication == r) throw ParseError(src, line, "replication rows are not contiguous");
    recs.emplace_back();
    recs.back().replication = r;
  }
  return recs.back();
}

}  // namespace detail

inline std::vector<RunRecord> parse_trajectory_csv(std::string_view text, const std::string& source = "trajectory") {
  std::vector<RunRecord> recs;
  const auto rows = detail::read_csv(text, kTrajectoryHeader, source);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int ln = static_cast<int>(i + 2);
    const auto& c = rows[i];
    if (c.size() != 8) throw ParseError(source, ln, "expected 8 columns");
    const int r = detail::to_int(c[0], source, ln);
    const long t = detail::to_int(c[1], source, ln);
    RunRecord& rec = detail::record_for(recs, r, source, ln);
    if (t != static_cast<long>(rec.size()) + 1) throw ParseError(source, ln, "iterations out of order");
    rec.eta.push_back(detail::to_number(c[2], source, ln));
    rec.phi.push_back(detail::to_number(c[3], source, ln));
    rec.Phi.push_back(detail::to_number(c[4], source, ln));
    rec.gap.push_back(detail::to_number(c[5], source, ln));
    rec.dist.push_back(detail::to_number(c[6], source, ln));
    rec.attacked.push_back(c[7] == "1" ? 1 : 0);
    rec.max_dist = std::max(rec.max_dist, rec.dist.back());
  }
  return recs;
}

/// Fills cesaro_gap, xi and xi_bound of records read from the trajectory file.
inline void parse_diagnostics_csv(std::string_view text, std::vector<RunRecord>& recs,
                                  const std::string& source = "diagnostics") {
  const auto rows = detail::read_csv(text, kDiagnosticsHeader, source);
  std::size_t k = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int ln = static_cast<int>(i + 2);
    const auto& c = rows[i];
    if (c.size() != 5) throw ParseError(source, ln, "expected 5 columns");
    const int r = detail::to_int(c[0], source, ln);
    while (k < recs.size() && recs[k].replication != r) ++k;
    if (k == recs.size()) throw ParseError(source, ln, "replication not present in the trajectory");
    RunRecord& rec = recs[k];
    if (detail::to_int(c[1], source, ln) != static_cast<int>(rec.cesaro_gap.size()) + 1)
      throw ParseError(source, ln, "iterations out of order");
    rec.cesaro_gap.push_back(detail::to_number(c[2], source, ln));
    rec.xi.push_back(detail::to_number(c[3], source, ln));
    rec.xi_bound.push_back(detail::to_number(c[4], source, ln));
  }
  for (const auto& rec : recs)
    if (rec.cesaro_gap.size() != rec.size()) throw Error(source + ": row count differs from the trajectory");
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace wanes
