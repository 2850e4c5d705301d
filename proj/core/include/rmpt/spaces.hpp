#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rmpt/capacities.hpp"

namespace rmpt {

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

/// Exploit local vulnerability `vuln` on `node`.
struct LocalExploit {
  int node = 0;
  int vuln = 0;
  bool operator==(const LocalExploit&) const = default;
};

/// Exploit remote vulnerability `vuln` of `target`, launched from `source`.
struct RemoteExploit {
  int source = 0;
  int target = 0;
  int vuln = 0;
  bool operator==(const RemoteExploit&) const = default;
};

/// Connect from `source` to `target` on `port` with credential `credential`.
struct Connection {
  int source = 0;
  int target = 0;
  int port = 0;
  int credential = 0;
  bool operator==(const Connection&) const = default;
};

using Action = std::variant<LocalExploit, RemoteExploit, Connection>;
using ActionIndex = std::size_t;

std::string to_string(const Action& action);

/// Size of the flat action space: the local block, the remote block and the
/// connection block laid out back to back. Pairs with target == source are
/// not representable, so n == 1 leaves only the local block.
std::size_t action_space_size(const Capacities& caps);

/// Decodes a flat index. Throws std::out_of_range when k >= action_space_size.
Action index_to_action(ActionIndex k, const Capacities& caps);

/// Inverse of index_to_action. Throws std::invalid_argument if any field is
/// outside the capacities or a remote/connection action targets its source.
ActionIndex action_to_index(const Action& action, const Capacities& caps);

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

namespace property_value {
inline constexpr std::uint8_t kNo = 0;
inline constexpr std::uint8_t kYes = 1;
inline constexpr std::uint8_t kUnknown = 2;
}  // namespace property_value

namespace credential_value {
inline constexpr std::uint8_t kNotDiscovered = 0;
inline constexpr std::uint8_t kUsed = 1;
inline constexpr std::uint8_t kUnused = 2;
}  // namespace credential_value

/// What the agent sees after the mandatory scan. Tensors are stored flat in
/// row-major order; use the accessors rather than computing offsets by hand.
struct Observation {
  Capacities caps;
  int discovered_count = 0;
  std::vector<std::uint8_t> privilege;    // [node], 0 = not owned, 1 = admin
  std::vector<std::uint8_t> properties;   // [node][property], 0/1/2
  std::vector<std::uint8_t> credentials;  // [target node][port][credential], 0/1/2
  std::uint8_t lateral_move = 0;

  /// Fully unknown observation: nothing discovered, every property unknown.
  static Observation blank(const Capacities& caps);

  std::uint8_t property(int node, int prop) const {
    return properties[static_cast<std::size_t>(node) * caps.properties + prop];
  }
  std::uint8_t& property(int node, int prop) {
    return properties[static_cast<std::size_t>(node) * caps.properties + prop];
  }
  std::uint8_t credential(int node, int port, int cred) const {
    return credentials[credential_offset(node, port, cred)];
  }
  std::uint8_t& credential(int node, int port, int cred) {
    return credentials[credential_offset(node, port, cred)];
  }
  std::size_t credential_offset(int node, int port, int cred) const {
    return (static_cast<std::size_t>(node) * caps.ports + port) * caps.credentials + cred;
  }

  /// Checks extents and per-entry domains against `caps`.
  bool conforms_to(const Capacities& expected) const;

  bool operator==(const Observation&) const = default;
};

/// 2 + n + n*n_pr + n*n_p*n_c.
std::size_t observation_size(const Capacities& caps);

/// Flattens [n_d] ++ privilege ++ properties ++ credentials ++ [lateral_move]
/// into raw reals. Throws std::invalid_argument on a dimension mismatch.
std::vector<double> encode_observation(const Observation& obs, const Capacities& caps);

}  // namespace rmpt
