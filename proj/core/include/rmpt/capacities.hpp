#pragma once

#include <cstdint>

namespace rmpt {

/// The agent's upper estimates for every indexed dimension of the action and
/// observation spaces. Environments may use fewer entries than these bounds;
/// the unused slots are padding that the agent learns to ignore.
struct Capacities {
  int nodes = 1;
  int local_vulns = 1;
  int remote_vulns = 1;
  int ports = 1;
  int credentials = 1;
  int properties = 1;

  bool valid() const {
    return nodes > 0 && local_vulns > 0 && remote_vulns > 0 && ports > 0 && credentials > 0 &&
           properties > 0;
  }

  bool operator==(const Capacities&) const = default;
};

}  // namespace rmpt
