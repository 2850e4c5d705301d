#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rmpt/events.hpp"
#include "rmpt/spaces.hpp"

namespace rmpt {

using RmState = int;

/// Conjunction of event literals, e.g. h & d & !f & g. The empty guard is
/// always satisfied.
struct Guard {
  EventSet positive;
  EventSet negative;

  bool satisfied(EventSet events) const {
    return positive.is_subset_of(events) && (negative & events).empty();
  }
  EventSet mentioned() const { return positive | negative; }

  /// Grammar: literal ('&' literal)*, literal = ['!'] symbol, symbol in a..h.
  /// Whitespace is ignored; "true" or "" is the empty guard.
  static Guard parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const Guard&) const = default;
};

/// δʳ output: a reward function over (o, a, o'). Constant functions remember
/// their value so they can be serialized and compared.
class RewardFunction {
 public:
  using Fn = std::function<double(const Observation&, const Action&, const Observation&)>;

  static RewardFunction constant(double value);
  static RewardFunction custom(Fn fn);

  double operator()(const Observation& prev, const Action& action, const Observation& next) const {
    return constant_ ? *constant_ : fn_(prev, action, next);
  }
  std::optional<double> constant_value() const { return constant_; }

 private:
  std::optional<double> constant_;
  Fn fn_;
};

struct Transition {
  RmState from = 0;
  Guard guard;
  RmState to = 0;
  RewardFunction reward = RewardFunction::constant(0.0);
};

class RewardMachineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic reward machine over a subset of the event alphabet. Guards
/// of each state are checked for mutual exclusion on construction by
/// enumerating every truth assignment of the event set.
class RewardMachine {
 public:
  struct StepResult {
    RmState next;
    const RewardFunction& reward;
  };

  RewardMachine(std::vector<std::string> state_names, RmState initial,
                std::vector<RmState> terminals, std::vector<Transition> transitions,
                EventSet event_set);

  /// Events outside the machine's event set are ignored. When no guard holds
  /// the machine stays put and emits the zero reward. Throws on terminal `u`.
  StepResult step(RmState u, EventSet events) const;

  bool is_terminal(RmState u) const;
  RmState initial() const { return initial_; }
  int state_count() const { return static_cast<int>(names_.size()); }
  const std::string& state_name(RmState u) const;
  /// Index of a named state; throws if absent.
  RmState state_id(std::string_view name) const;
  EventSet event_set() const { return event_set_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<RmState>& terminals() const { return terminals_; }

  /// True when some path of explicit transitions leads from `from` to a terminal state.
  bool terminal_reachable_from(RmState from) const;

 private:
  void check_state(RmState u) const;

  std::vector<std::string> names_;
  RmState initial_;
  std::vector<RmState> terminals_;
  std::vector<bool> terminal_mask_;
  std::vector<Transition> transitions_;
  std::vector<std::vector<std::size_t>> outgoing_;
  EventSet event_set_;
};

/// Credential -> connect -> escalate, four states, terminal u3.
RewardMachine build_rm1();
/// Node discovery first, then the rm1 cycle; five states, terminal u4.
RewardMachine build_rm2();

/// JSON document:
///   {"version": 1, "states": ["u0", ...], "initial": "u0", "terminals": [...],
///    "event_set": "bcdfgh",
///    "transitions": [{"from": "u2", "guard": "h&d&!f&g", "to": "u1", "reward": 1}]}
/// Only constant rewards are representable.
RewardMachine load_rm_document(std::string_view document);
RewardMachine load_rm_file(const std::filesystem::path& path);
std::string save_rm_document(const RewardMachine& machine);

}  // namespace rmpt
