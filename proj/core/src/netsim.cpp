#include "rmpt/netsim.hpp"

#include <algorithm>
#include <stdexcept>

#include "bundled_toyctf.hpp"
#include "rmpt/env_io.hpp"

namespace rmpt {
namespace {

const VulnerabilitySpec* find_vuln(const std::vector<VulnerabilitySpec>& vulns, int vuln_id) {
  for (const auto& v : vulns) {
    if (v.vuln_id == vuln_id) return &v;
  }
  return nullptr;
}

std::string node_label(const NodeSpec& node) {
  return "node " + std::to_string(node.node_id) + (node.name.empty() ? "" : " (" + node.name + ")");
}

void validate_vuln(const VulnerabilitySpec& vuln, VulnKind expected, const NodeSpec& host,
                   const EnvironmentSpec& spec) {
  const Capacities& caps = spec.capacities;
  const bool local = expected == VulnKind::Local;
  const std::string where = node_label(host) + (local ? " local" : " remote") + " vuln " +
                            std::to_string(vuln.vuln_id);
  if (vuln.kind != expected) {
    throw SchemaError(where + ": listed under the wrong kind");
  }
  const int bound = local ? caps.local_vulns : caps.remote_vulns;
  if (vuln.vuln_id < 0 || vuln.vuln_id >= bound) {
    throw CapacityError(where + ": id exceeds capacity " + std::to_string(bound));
  }
  const auto node_count = static_cast<int>(spec.nodes.size());
  if (const auto* leak = std::get_if<CredentialLeak>(&vuln.outcome)) {
    std::set<CredentialRef> seen;
    for (const auto& ref : leak->credentials) {
      if (ref.node_id < 0 || ref.node_id >= node_count) {
        throw DanglingReferenceError(where + ": leaks a credential for missing node " +
                                     std::to_string(ref.node_id));
      }
      if (ref.port_id < 0 || ref.port_id >= caps.ports || ref.cred_id < 0 ||
          ref.cred_id >= caps.credentials) {
        throw CapacityError(where + ": leaked credential port/cred outside capacities");
      }
      if (!seen.insert(ref).second) {
        throw SpecInvariantError(where + ": leaks the same credential twice");
      }
    }
  } else if (const auto* disc = std::get_if<NodeDiscovery>(&vuln.outcome)) {
    for (int id : disc->nodes) {
      if (id < 0 || id >= node_count) {
        throw DanglingReferenceError(where + ": discovers missing node " + std::to_string(id));
      }
    }
  } else if (!local) {
    throw SchemaError(where + ": remote vulnerabilities cannot escalate privileges");
  }
}

void validate_vuln_list(const std::vector<VulnerabilitySpec>& vulns, VulnKind kind,
                        const NodeSpec& host, const EnvironmentSpec& spec) {
  const int bound =
      kind == VulnKind::Local ? spec.capacities.local_vulns : spec.capacities.remote_vulns;
  if (static_cast<int>(vulns.size()) > bound) {
    throw CapacityError(node_label(host) + ": more vulnerabilities than capacity " +
                        std::to_string(bound));
  }
  std::set<int> ids;
  for (const auto& v : vulns) {
    validate_vuln(v, kind, host, spec);
    if (!ids.insert(v.vuln_id).second) {
      throw SpecInvariantError(node_label(host) + ": duplicate vuln id " +
                               std::to_string(v.vuln_id));
    }
  }
}

bool at_least(NodeStatus status, NodeStatus floor) {
  return static_cast<int>(status) >= static_cast<int>(floor);
}

void discover(EnvState& state, int node) {
  auto& status = state.node_status[static_cast<std::size_t>(node)];
  if (status == NodeStatus::Undiscovered) status = NodeStatus::Discovered;
}

std::size_t credential_index(const Capacities& caps, const CredentialRef& ref) {
  return (static_cast<std::size_t>(ref.node_id) * caps.ports + ref.port_id) * caps.credentials +
         ref.cred_id;
}

void apply_outcome(EnvState& state, const EnvironmentSpec& spec, const VulnOutcome& outcome) {
  if (const auto* leak = std::get_if<CredentialLeak>(&outcome)) {
    for (const auto& ref : leak->credentials) {
      auto& cred = state.credential_status[credential_index(spec.capacities, ref)];
      if (cred == CredentialStatus::NotDiscovered) cred = CredentialStatus::Unused;
      // A leaked credential names its host, which makes the host visible.
      discover(state, ref.node_id);
    }
  } else if (const auto* disc = std::get_if<NodeDiscovery>(&outcome)) {
    for (int id : disc->nodes) discover(state, id);
  }
}

bool valid_node(const EnvironmentSpec& spec, int node) {
  return node >= 0 && node < static_cast<int>(spec.nodes.size());
}

StepOutcome apply_local(EnvState& state, const EnvironmentSpec& spec, const LocalExploit& a) {
  StepOutcome out;
  if (!valid_node(spec, a.node)) return out;
  const NodeSpec& node = spec.nodes[static_cast<std::size_t>(a.node)];
  const VulnerabilitySpec* vuln = node.find_local(a.vuln);
  if (vuln == nullptr) return out;

  auto& status = state.node_status[static_cast<std::size_t>(a.node)];
  const bool privesc = std::holds_alternative<PrivilegeEscalation>(vuln->outcome);
  out.privesc_attempted = privesc && status == NodeStatus::Connected;

  const NodeStatus floor = vuln->required_connected ? NodeStatus::Connected : NodeStatus::Admin;
  if (!at_least(status, floor)) return out;
  const auto key = std::make_tuple(a.node, VulnKind::Local, a.vuln);
  if (!vuln->repeatable && state.exploited.contains(key)) return out;

  if (privesc) {
    if (status != NodeStatus::Connected) return out;
    status = NodeStatus::Admin;
    if (node.is_flag) {
      ++state.flags_captured;
      out.flag_captured = true;
    }
  } else {
    apply_outcome(state, spec, vuln->outcome);
  }
  if (!vuln->repeatable) state.exploited.insert(key);
  out.success = true;
  return out;
}

StepOutcome apply_remote(EnvState& state, const EnvironmentSpec& spec, const RemoteExploit& a) {
  StepOutcome out;
  if (!valid_node(spec, a.source) || !valid_node(spec, a.target) || a.source == a.target) {
    return out;
  }
  if (state.node_status[static_cast<std::size_t>(a.source)] != NodeStatus::Admin) return out;
  const NodeStatus target_status = state.node_status[static_cast<std::size_t>(a.target)];
  const VulnerabilitySpec* vuln = spec.nodes[static_cast<std::size_t>(a.target)].find_remote(a.vuln);
  if (vuln == nullptr) return out;
  const NodeStatus floor = vuln->required_connected ? NodeStatus::Connected : NodeStatus::Discovered;
  if (!at_least(target_status, floor)) return out;
  const auto key = std::make_tuple(a.target, VulnKind::Remote, a.vuln);
  if (!vuln->repeatable && state.exploited.contains(key)) return out;

  apply_outcome(state, spec, vuln->outcome);
  if (!vuln->repeatable) state.exploited.insert(key);
  out.success = true;
  return out;
}

StepOutcome apply_connection(EnvState& state, const EnvironmentSpec& spec, const Connection& a) {
  StepOutcome out;
  if (!valid_node(spec, a.source) || !valid_node(spec, a.target) || a.source == a.target) {
    return out;
  }
  if (state.node_status[static_cast<std::size_t>(a.source)] != NodeStatus::Admin) return out;
  auto& target_status = state.node_status[static_cast<std::size_t>(a.target)];
  if (!at_least(target_status, NodeStatus::Discovered)) return out;
  const Capacities& caps = spec.capacities;
  if (a.port < 0 || a.port >= caps.ports || a.credential < 0 || a.credential >= caps.credentials) {
    return out;
  }
  const NodeSpec& target = spec.nodes[static_cast<std::size_t>(a.target)];
  if (!target.listening_ports.contains(a.port) ||
      !target.accepted_credentials.contains({a.port, a.credential})) {
    return out;
  }
  auto& cred = state.credential_status[credential_index(caps, {a.target, a.port, a.credential})];
  if (cred == CredentialStatus::NotDiscovered) return out;

  cred = CredentialStatus::Used;
  if (!at_least(target_status, NodeStatus::Connected)) {
    target_status = NodeStatus::Connected;
    state.last_action_was_lateral_move = true;
  }
  out.success = true;
  return out;
}

}  // namespace

const VulnerabilitySpec* NodeSpec::find_local(int vuln_id) const {
  return find_vuln(local_vulns, vuln_id);
}

const VulnerabilitySpec* NodeSpec::find_remote(int vuln_id) const {
  return find_vuln(remote_vulns, vuln_id);
}

int EnvironmentSpec::flag_count() const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(), [](const NodeSpec& n) { return n.is_flag; }));
}

CredentialStatus EnvState::credential(const Capacities& caps, const CredentialRef& ref) const {
  return credential_status[credential_index(caps, ref)];
}

void validate_structure(const EnvironmentSpec& spec) {
  const Capacities& caps = spec.capacities;
  if (!caps.valid()) throw SchemaError("capacities must all be positive");
  if (spec.nodes.empty()) throw SchemaError("environment has no nodes");
  const auto node_count = static_cast<int>(spec.nodes.size());
  if (node_count > caps.nodes) {
    throw CapacityError(std::to_string(node_count) + " nodes exceed capacity " +
                        std::to_string(caps.nodes));
  }
  for (int k = 0; k < node_count; ++k) {
    const NodeSpec& node = spec.nodes[static_cast<std::size_t>(k)];
    if (node.node_id != k) {
      throw SpecInvariantError("node ids must be unique and cover 0.." +
                               std::to_string(node_count - 1) + "; found id " +
                               std::to_string(node.node_id) + " at position " + std::to_string(k));
    }
    if (static_cast<int>(node.properties.size()) != caps.properties) {
      throw CapacityError(node_label(node) + ": property vector length " +
                          std::to_string(node.properties.size()) + " != n_pr " +
                          std::to_string(caps.properties));
    }
    for (auto bit : node.properties) {
      if (bit > 1) throw SchemaError(node_label(node) + ": properties must be 0/1");
    }
    for (int port : node.listening_ports) {
      if (port < 0 || port >= caps.ports) {
        throw CapacityError(node_label(node) + ": port " + std::to_string(port) +
                            " exceeds capacity");
      }
    }
    for (const auto& [port, cred] : node.accepted_credentials) {
      if (port < 0 || port >= caps.ports || cred < 0 || cred >= caps.credentials) {
        throw CapacityError(node_label(node) + ": accepted credential outside capacities");
      }
      if (!node.listening_ports.contains(port)) {
        throw SpecInvariantError(node_label(node) + ": accepts a credential on closed port " +
                                 std::to_string(port));
      }
    }
    validate_vuln_list(node.local_vulns, VulnKind::Local, node, spec);
    validate_vuln_list(node.remote_vulns, VulnKind::Remote, node, spec);
  }
  if (spec.start_node < 0 || spec.start_node >= node_count) {
    throw DanglingReferenceError("start node " + std::to_string(spec.start_node) +
                                 " does not exist");
  }
  if (spec.nodes[static_cast<std::size_t>(spec.start_node)].is_flag) {
    throw SpecInvariantError("start node cannot be a flag node");
  }
}

void validate(const EnvironmentSpec& spec) {
  validate_structure(spec);
  const int attainable = count_attainable_flags(spec);
  if (spec.attainable_flags != attainable) {
    throw SpecInvariantError("attainable_flags is " + std::to_string(spec.attainable_flags) +
                             " but " + std::to_string(attainable) +
                             " flags are reachable by construction");
  }
}

int count_attainable_flags(const EnvironmentSpec& spec) {
  auto [state, obs] = reset(spec);
  const std::size_t actions = action_space_size(spec.capacities);
  for (bool changed = true; changed;) {
    changed = false;
    for (ActionIndex k = 0; k < actions; ++k) {
      const EnvState before = state;
      apply_action_in_place(state, spec, index_to_action(k, spec.capacities));
      state.last_action_was_lateral_move = false;
      changed = changed || !(before == state);
    }
  }
  return state.flags_captured;
}

EnvironmentSpec build_chain_env(int pairs) {
  if (pairs < 1) throw std::invalid_argument("chain needs at least one Linux-Windows pair");
  constexpr int kSsh = 0;
  constexpr int kRdp = 1;
  constexpr int kPrivesc = 0;
  constexpr int kLeak = 1;

  EnvironmentSpec spec;
  const int count = 2 * pairs + 2;
  const int flag = count - 1;
  // Properties: [linux, windows, holds sensitive data].
  spec.capacities = Capacities{count, 2, 1, 2, 1, 3};
  spec.start_node = 0;

  auto port_of = [](int k) { return k % 2 == 0 ? kRdp : kSsh; };
  for (int k = 0; k < count; ++k) {
    NodeSpec node;
    node.node_id = k;
    if (k == 0) {
      node.name = "start";
      node.properties = {0, 1, 0};
    } else if (k == flag) {
      node.name = "flag";
      node.properties = {1, 0, 1};
    } else {
      const bool is_linux = k % 2 == 1;
      node.name = (is_linux ? "linux-" : "windows-") + std::to_string((k + 1) / 2);
      node.properties = {static_cast<std::uint8_t>(is_linux), static_cast<std::uint8_t>(!is_linux),
                         0};
    }
    if (k != 0) {
      node.listening_ports = {port_of(k)};
      node.accepted_credentials = {{port_of(k), 0}};
    }
    node.local_vulns.push_back(
        {kPrivesc, VulnKind::Local, PrivilegeEscalation{}, /*required_connected=*/true, false});
    if (k != flag) {
      node.local_vulns.push_back({kLeak, VulnKind::Local,
                                  CredentialLeak{{{k + 1, port_of(k + 1), 0}}},
                                  /*required_connected=*/false, false});
    }
    node.is_flag = k == flag;
    spec.nodes.push_back(std::move(node));
  }
  spec.attainable_flags = 1;
  validate(spec);
  return spec;
}

EnvironmentSpec build_toyctf_env() { return load_env_spec(detail::kBundledToyCtf); }

std::pair<EnvState, Observation> reset(const EnvironmentSpec& spec, std::uint64_t /*seed*/) {
  const Capacities& caps = spec.capacities;
  EnvState state;
  state.node_status.assign(spec.nodes.size(), NodeStatus::Undiscovered);
  state.node_status[static_cast<std::size_t>(spec.start_node)] = NodeStatus::Admin;
  state.credential_status.assign(
      static_cast<std::size_t>(caps.nodes) * caps.ports * caps.credentials,
      CredentialStatus::NotDiscovered);
  Observation obs = scan(state, spec);
  return {std::move(state), std::move(obs)};
}

StepOutcome apply_action_in_place(EnvState& state, const EnvironmentSpec& spec,
                                  const Action& action) {
  state.last_action_was_lateral_move = false;
  StepOutcome out = std::visit(
      [&](const auto& a) -> StepOutcome {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, LocalExploit>) {
          return apply_local(state, spec, a);
        } else if constexpr (std::is_same_v<T, RemoteExploit>) {
          return apply_remote(state, spec, a);
        } else {
          return apply_connection(state, spec, a);
        }
      },
      action);
  out.goal_achieved = goal_achieved(state, spec);
  return out;
}

std::pair<EnvState, StepOutcome> apply_action(const EnvState& state, const EnvironmentSpec& spec,
                                              const Action& action) {
  EnvState next = state;
  StepOutcome out = apply_action_in_place(next, spec, action);
  return {std::move(next), out};
}

Observation scan(const EnvState& state, const EnvironmentSpec& spec) {
  const Capacities& caps = spec.capacities;
  Observation obs = Observation::blank(caps);
  for (std::size_t k = 0; k < spec.nodes.size(); ++k) {
    const NodeStatus status = state.node_status[k];
    if (status == NodeStatus::Undiscovered) continue;
    ++obs.discovered_count;
    obs.privilege[k] = status == NodeStatus::Admin ? 1 : 0;
    for (int p = 0; p < caps.properties; ++p) {
      obs.property(static_cast<int>(k), p) = spec.nodes[k].properties[static_cast<std::size_t>(p)];
    }
  }
  for (std::size_t i = 0; i < state.credential_status.size(); ++i) {
    switch (state.credential_status[i]) {
      case CredentialStatus::NotDiscovered:
        obs.credentials[i] = credential_value::kNotDiscovered;
        break;
      case CredentialStatus::Used:
        obs.credentials[i] = credential_value::kUsed;
        break;
      case CredentialStatus::Unused:
        obs.credentials[i] = credential_value::kUnused;
        break;
    }
  }
  obs.lateral_move = state.last_action_was_lateral_move ? 1 : 0;
  return obs;
}

bool goal_achieved(const EnvState& state, const EnvironmentSpec& spec) {
  return state.flags_captured == spec.attainable_flags;
}

}  // namespace rmpt
