#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "rmpt/capacities.hpp"
#include "rmpt/spaces.hpp"

namespace rmpt {

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

/// A secret that lets an attacker connect to `node_id` on `port_id`.
struct CredentialRef {
  int node_id = 0;
  int port_id = 0;
  int cred_id = 0;

  auto operator<=>(const CredentialRef&) const = default;
};

enum class VulnKind : std::uint8_t { Local, Remote };

struct CredentialLeak {
  std::vector<CredentialRef> credentials;
  bool operator==(const CredentialLeak&) const = default;
};

struct NodeDiscovery {
  std::vector<int> nodes;
  bool operator==(const NodeDiscovery&) const = default;
};

struct PrivilegeEscalation {
  bool operator==(const PrivilegeEscalation&) const = default;
};

using VulnOutcome = std::variant<CredentialLeak, NodeDiscovery, PrivilegeEscalation>;

/// A pre-planted vulnerability.
///
/// `required_connected` sets the minimum status of the hosting node:
///   - local:  true -> Connected is enough, false -> Admin is required;
///   - remote: true -> the target must be Connected, false -> Discovered is enough.
/// A PrivilegeEscalation outcome additionally requires the node to be exactly
/// Connected; escalating an Admin node does nothing.
struct VulnerabilitySpec {
  int vuln_id = 0;
  VulnKind kind = VulnKind::Local;
  VulnOutcome outcome = PrivilegeEscalation{};
  bool required_connected = true;
  bool repeatable = false;

  bool operator==(const VulnerabilitySpec&) const = default;
};

struct NodeSpec {
  int node_id = 0;
  std::string name;
  std::vector<std::uint8_t> properties;  // 0/1 flags, length n_pr
  std::set<int> listening_ports;
  std::set<std::pair<int, int>> accepted_credentials;  // (port, cred)
  std::vector<VulnerabilitySpec> local_vulns;
  std::vector<VulnerabilitySpec> remote_vulns;
  bool is_flag = false;

  const VulnerabilitySpec* find_local(int vuln_id) const;
  const VulnerabilitySpec* find_remote(int vuln_id) const;

  bool operator==(const NodeSpec&) const = default;
};

/// A complete, validated network. `nodes[k].node_id == k` always holds for
/// specs produced by the builders and by load_env_spec.
struct EnvironmentSpec {
  std::vector<NodeSpec> nodes;
  int start_node = 0;
  Capacities capacities;
  int attainable_flags = 0;

  int flag_count() const;
  bool operator==(const EnvironmentSpec&) const = default;
};

/// Base of every structural problem found in an environment spec.
class EnvSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The document is not shaped like an environment spec (missing field,
/// wrong type, unknown tag, unsupported version).
class SchemaError : public EnvSpecError {
 public:
  using EnvSpecError::EnvSpecError;
};

/// Some index or count exceeds the declared capacities.
class CapacityError : public EnvSpecError {
 public:
  using EnvSpecError::EnvSpecError;
};

/// A vulnerability or the start node refers to a node that does not exist.
class DanglingReferenceError : public EnvSpecError {
 public:
  using EnvSpecError::EnvSpecError;
};

/// Remaining structural rules: unique ids, flag start node, duplicate credentials.
class SpecInvariantError : public EnvSpecError {
 public:
  using EnvSpecError::EnvSpecError;
};

/// Throws one of the EnvSpecError subclasses on the first violated rule.
/// `attainable_flags` is checked against count_attainable_flags().
void validate(const EnvironmentSpec& spec);

/// Every rule of validate() except the attainable-flag count.
void validate_structure(const EnvironmentSpec& spec);

/// Number of flag nodes an attacker can bring to Admin. Every effect in the
/// simulator is monotone, so saturating all valid actions gives the exact set
/// of reachable statuses.
int count_attainable_flags(const EnvironmentSpec& spec);

/// Start node, then N (Linux, Windows) pairs, then the flag node; 2N + 2 nodes.
/// Throws std::invalid_argument for N < 1.
EnvironmentSpec build_chain_env(int pairs);

/// The bundled mesh network with four flags, two of them attainable.
EnvironmentSpec build_toyctf_env();

// ---------------------------------------------------------------------------
// Episode state
// ---------------------------------------------------------------------------

enum class NodeStatus : std::uint8_t { Undiscovered = 0, Discovered = 1, Connected = 2, Admin = 3 };
enum class CredentialStatus : std::uint8_t { NotDiscovered = 0, Unused = 1, Used = 2 };

struct EnvState {
  std::vector<NodeStatus> node_status;              // [node]
  std::vector<CredentialStatus> credential_status;  // [node][port][cred], flat
  int flags_captured = 0;
  std::set<std::tuple<int, VulnKind, int>> exploited;  // non-repeatable vulns already used
  bool last_action_was_lateral_move = false;

  CredentialStatus credential(const Capacities& caps, const CredentialRef& ref) const;

  bool operator==(const EnvState&) const = default;
};

struct StepOutcome {
  bool success = false;
  bool goal_achieved = false;
  /// A PrivilegeEscalation local exploit was aimed at a Connected node.
  bool privesc_attempted = false;
  /// A flag node reached Admin on this step.
  bool flag_captured = false;

  bool operator==(const StepOutcome&) const = default;
};

/// The simulator is deterministic; `seed` is accepted for interface parity
/// with stochastic environments and does not influence the result.
std::pair<EnvState, Observation> reset(const EnvironmentSpec& spec, std::uint64_t seed = 0);

/// Applies `action` in place. Invalid actions leave the state untouched apart
/// from clearing the lateral-move bit.
StepOutcome apply_action_in_place(EnvState& state, const EnvironmentSpec& spec,
                                  const Action& action);

std::pair<EnvState, StepOutcome> apply_action(const EnvState& state, const EnvironmentSpec& spec,
                                              const Action& action);

/// Projects the ground truth into the agent's observation.
Observation scan(const EnvState& state, const EnvironmentSpec& spec);

bool goal_achieved(const EnvState& state, const EnvironmentSpec& spec);

}  // namespace rmpt
