#pragma once

#include <map>
#include <string>

#include "wanes/io.hpp"

#ifndef WANES_DATA_DIR
#error "WANES_DATA_DIR must point at the data directory"
#endif

namespace fixture {

inline std::string data_path(const std::string& name) { return std::string(WANES_DATA_DIR) + "/" + name; }

inline const wanes::TntpNetworkFile& sioux_falls_net() {
  static const auto f = wanes::parse_tntp_network(wanes::read_file(data_path("SiouxFalls_net.tntp")));
  return f;
}

inline const wanes::TntpTripsFile& sioux_falls_trips() {
  static const auto f = wanes::parse_tntp_trips(wanes::read_file(data_path("SiouxFalls_trips.tntp")));
  return f;
}

/// Sioux Falls with K paths per OD and uniform [0, w_max] noise, built once per (K, w_max).
inline const wanes::Instance& sioux_falls(int k = 8, double w_max = 0.5) {
  static std::map<std::pair<int, double>, wanes::Instance> cache;
  auto it = cache.find({k, w_max});
  if (it == cache.end()) {
    const auto p = w_max > 0 ? wanes::PerturbationSpec::uniform(w_max) : wanes::PerturbationSpec::none();
    it = cache.emplace(std::pair(k, w_max), wanes::build_instance(sioux_falls_net(), sioux_falls_trips(), k, p)).first;
  }
  return it->second;
}

}  // namespace fixture
