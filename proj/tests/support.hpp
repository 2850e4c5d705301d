#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rmpt/netsim.hpp"
#include "rmpt/spaces.hpp"

namespace rmpt::testing {

// Chain layout as built: node k listens on SSH (0) when k is odd and on RDP (1)
// when k is even; local vuln 0 escalates, local vuln 1 leaks the next node's
// single credential.
inline int chain_port(int node) { return node % 2 == 0 ? 1 : 0; }

/// Leak, connect, escalate for every hop: 3 * (2N + 1) actions.
inline std::vector<Action> chain_capture_path(int pairs) {
  std::vector<Action> path;
  const int last = 2 * pairs + 1;
  for (int k = 0; k < last; ++k) {
    path.push_back(LocalExploit{k, 1});
    path.push_back(Connection{k, k + 1, chain_port(k + 1), 0});
    path.push_back(LocalExploit{k + 1, 0});
  }
  return path;
}

inline std::filesystem::path fresh_temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rmpt-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random observation within `caps`; used for codec and detector sweeps.
inline Observation random_observation(const Capacities& caps, std::mt19937_64& rng) {
  Observation o = Observation::blank(caps);
  std::uniform_int_distribution<int> tri(0, 2), bit(0, 1), count(0, caps.nodes);
  o.discovered_count = count(rng);
  for (auto& v : o.privilege) v = static_cast<std::uint8_t>(bit(rng));
  for (auto& v : o.properties) v = static_cast<std::uint8_t>(tri(rng));
  for (auto& v : o.credentials) v = static_cast<std::uint8_t>(tri(rng));
  o.lateral_move = static_cast<std::uint8_t>(bit(rng));
  return o;
}

}  // namespace rmpt::testing
