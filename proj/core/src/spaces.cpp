#include "rmpt/spaces.hpp"

#include <sstream>
#include <stdexcept>

namespace rmpt {
namespace {

using Size = std::size_t;

Size local_block(const Capacities& caps) {
  return static_cast<Size>(caps.nodes) * caps.local_vulns;
}

Size pair_count(const Capacities& caps) {
  return static_cast<Size>(caps.nodes) * (caps.nodes - 1);
}

Size remote_block(const Capacities& caps) { return pair_count(caps) * caps.remote_vulns; }

// Targets skip the source: target t maps to slot t when t < source, t - 1 otherwise.
int target_slot(int source, int target) { return target < source ? target : target - 1; }
int slot_target(int source, int slot) { return slot < source ? slot : slot + 1; }

void require_range(int value, int bound, const char* field) {
  if (value < 0 || value >= bound) {
    throw std::invalid_argument(std::string("action field '") + field + "' out of range: " +
                                std::to_string(value) + " not in [0, " + std::to_string(bound) +
                                ")");
  }
}

void require_pair(int source, int target, const Capacities& caps) {
  require_range(source, caps.nodes, "source");
  require_range(target, caps.nodes, "target");
  if (source == target) {
    throw std::invalid_argument("action targets its own source node " + std::to_string(source));
  }
}

}  // namespace

std::string to_string(const Action& action) {
  std::ostringstream out;
  std::visit(
      [&out](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, LocalExploit>) {
          out << "local[" << a.node << ", " << a.vuln << "]";
        } else if constexpr (std::is_same_v<T, RemoteExploit>) {
          out << "remote[" << a.source << ", " << a.target << ", " << a.vuln << "]";
        } else {
          out << "connect[" << a.source << ", " << a.target << ", " << a.port << ", "
              << a.credential << "]";
        }
      },
      action);
  return out.str();
}

std::size_t action_space_size(const Capacities& caps) {
  return local_block(caps) + remote_block(caps) +
         pair_count(caps) * caps.ports * caps.credentials;
}

Action index_to_action(ActionIndex k, const Capacities& caps) {
  if (k >= action_space_size(caps)) {
    throw std::out_of_range("action index " + std::to_string(k) + " outside action space of size " +
                            std::to_string(action_space_size(caps)));
  }
  if (k < local_block(caps)) {
    return LocalExploit{static_cast<int>(k / caps.local_vulns),
                        static_cast<int>(k % caps.local_vulns)};
  }
  k -= local_block(caps);
  const Size others = static_cast<Size>(caps.nodes) - 1;
  if (k < remote_block(caps)) {
    const Size per_source = others * caps.remote_vulns;
    const int source = static_cast<int>(k / per_source);
    const Size rest = k % per_source;
    const int target = slot_target(source, static_cast<int>(rest / caps.remote_vulns));
    return RemoteExploit{source, target, static_cast<int>(rest % caps.remote_vulns)};
  }
  k -= remote_block(caps);
  const Size per_target = static_cast<Size>(caps.ports) * caps.credentials;
  const Size per_source = others * per_target;
  const int source = static_cast<int>(k / per_source);
  Size rest = k % per_source;
  const int target = slot_target(source, static_cast<int>(rest / per_target));
  rest %= per_target;
  return Connection{source, target, static_cast<int>(rest / caps.credentials),
                    static_cast<int>(rest % caps.credentials)};
}

ActionIndex action_to_index(const Action& action, const Capacities& caps) {
  const Size others = static_cast<Size>(caps.nodes) - 1;
  return std::visit(
      [&](const auto& a) -> ActionIndex {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, LocalExploit>) {
          require_range(a.node, caps.nodes, "node");
          require_range(a.vuln, caps.local_vulns, "local vuln");
          return static_cast<Size>(a.node) * caps.local_vulns + a.vuln;
        } else if constexpr (std::is_same_v<T, RemoteExploit>) {
          require_pair(a.source, a.target, caps);
          require_range(a.vuln, caps.remote_vulns, "remote vuln");
          return local_block(caps) +
                 (static_cast<Size>(a.source) * others + target_slot(a.source, a.target)) *
                     caps.remote_vulns +
                 a.vuln;
        } else {
          require_pair(a.source, a.target, caps);
          require_range(a.port, caps.ports, "port");
          require_range(a.credential, caps.credentials, "credential");
          const Size pair = static_cast<Size>(a.source) * others + target_slot(a.source, a.target);
          return local_block(caps) + remote_block(caps) +
                 (pair * caps.ports + a.port) * caps.credentials + a.credential;
        }
      },
      action);
}

Observation Observation::blank(const Capacities& caps) {
  Observation obs;
  obs.caps = caps;
  obs.privilege.assign(static_cast<Size>(caps.nodes), 0);
  obs.properties.assign(static_cast<Size>(caps.nodes) * caps.properties,
                        property_value::kUnknown);
  obs.credentials.assign(static_cast<Size>(caps.nodes) * caps.ports * caps.credentials,
                         credential_value::kNotDiscovered);
  return obs;
}

bool Observation::conforms_to(const Capacities& expected) const {
  if (!(caps == expected)) return false;
  const Size n = static_cast<Size>(caps.nodes);
  if (privilege.size() != n || properties.size() != n * caps.properties ||
      credentials.size() != n * caps.ports * caps.credentials) {
    return false;
  }
  if (discovered_count < 0 || discovered_count > caps.nodes || lateral_move > 1) return false;
  for (auto v : privilege) {
    if (v > 1) return false;
  }
  for (auto v : properties) {
    if (v > 2) return false;
  }
  for (auto v : credentials) {
    if (v > 2) return false;
  }
  return true;
}

std::size_t observation_size(const Capacities& caps) {
  const Size n = static_cast<Size>(caps.nodes);
  return 2 + n + n * caps.properties + n * caps.ports * caps.credentials;
}

std::vector<double> encode_observation(const Observation& obs, const Capacities& caps) {
  if (!obs.conforms_to(caps)) {
    throw std::invalid_argument("observation does not match the encoder capacities");
  }
  std::vector<double> out;
  out.reserve(observation_size(caps));
  out.push_back(static_cast<double>(obs.discovered_count));
  for (auto v : obs.privilege) out.push_back(v);
  for (auto v : obs.properties) out.push_back(v);
  for (auto v : obs.credentials) out.push_back(v);
  out.push_back(obs.lateral_move);
  return out;
}

}  // namespace rmpt
