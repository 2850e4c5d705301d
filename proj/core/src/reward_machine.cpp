#include "rmpt/reward_machine.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rmpt {
namespace {

const RewardFunction& zero_reward() {
  static const RewardFunction zero = RewardFunction::constant(0.0);
  return zero;
}

Transition edge(RmState from, std::string_view guard, RmState to, double reward) {
  return Transition{from, Guard::parse(guard), to, RewardFunction::constant(reward)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Guard
// ---------------------------------------------------------------------------

Guard Guard::parse(std::string_view text) {
  std::string compact;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
  }
  Guard guard;
  if (compact.empty() || compact == "true") return guard;

  std::size_t pos = 0;
  while (true) {
    bool negated = false;
    if (pos < compact.size() && compact[pos] == '!') {
      negated = true;
      ++pos;
    }
    if (pos >= compact.size()) {
      throw RewardMachineError("guard '" + std::string(text) + "' ends without a symbol");
    }
    auto event = event_from_symbol(compact[pos]);
    if (!event) {
      throw RewardMachineError("guard '" + std::string(text) + "': unknown symbol '" +
                               compact[pos] + "'");
    }
    ++pos;
    if (guard.mentioned().contains(*event)) {
      throw RewardMachineError("guard '" + std::string(text) + "' repeats event '" +
                               symbol(*event) + "'");
    }
    (negated ? guard.negative : guard.positive).insert(*event);
    if (pos == compact.size()) break;
    if (compact[pos] != '&') {
      throw RewardMachineError("guard '" + std::string(text) + "': expected '&' at position " +
                               std::to_string(pos));
    }
    ++pos;
  }
  return guard;
}

std::string Guard::to_string() const {
  std::string out;
  for (Event e : kAllEvents) {
    if (!mentioned().contains(e)) continue;
    if (!out.empty()) out.push_back('&');
    if (negative.contains(e)) out.push_back('!');
    out.push_back(symbol(e));
  }
  return out.empty() ? "true" : out;
}

// ---------------------------------------------------------------------------
// RewardFunction
// ---------------------------------------------------------------------------

RewardFunction RewardFunction::constant(double value) {
  RewardFunction f;
  f.constant_ = value;
  return f;
}

RewardFunction RewardFunction::custom(Fn fn) {
  RewardFunction f;
  f.fn_ = std::move(fn);
  return f;
}

// ---------------------------------------------------------------------------
// RewardMachine
// ---------------------------------------------------------------------------

RewardMachine::RewardMachine(std::vector<std::string> state_names, RmState initial,
                             std::vector<RmState> terminals, std::vector<Transition> transitions,
                             EventSet event_set)
    : names_(std::move(state_names)),
      initial_(initial),
      terminals_(std::move(terminals)),
      transitions_(std::move(transitions)),
      event_set_(event_set) {
  if (names_.empty()) throw RewardMachineError("reward machine needs at least one state");
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw RewardMachineError("duplicate state names");

  check_state(initial_);
  terminal_mask_.assign(names_.size(), false);
  for (RmState t : terminals_) {
    check_state(t);
    terminal_mask_[static_cast<std::size_t>(t)] = true;
  }
  if (terminal_mask_[static_cast<std::size_t>(initial_)]) {
    throw RewardMachineError("initial state cannot be terminal");
  }

  outgoing_.assign(names_.size(), {});
  for (std::size_t i = 0; i < transitions_.size(); ++i) {
    const Transition& t = transitions_[i];
    check_state(t.from);
    check_state(t.to);
    if (terminal_mask_[static_cast<std::size_t>(t.from)]) {
      throw RewardMachineError("terminal state " + names_[static_cast<std::size_t>(t.from)] +
                               " has an outgoing transition");
    }
    if (!t.guard.mentioned().is_subset_of(event_set_)) {
      throw RewardMachineError("guard " + t.guard.to_string() +
                               " uses events outside the event set " + event_set_.to_string());
    }
    if (!(t.guard.positive & t.guard.negative).empty()) {
      throw RewardMachineError("guard " + t.guard.to_string() + " is contradictory");
    }
    outgoing_[static_cast<std::size_t>(t.from)].push_back(i);
  }

  // Exhaustive determinism check over all truth assignments of the event set.
  const std::uint8_t universe = event_set_.bits();
  for (std::size_t u = 0; u < names_.size(); ++u) {
    for (unsigned sub = universe;; sub = (sub - 1) & universe) {
      const EventSet events = EventSet::from_bits(static_cast<std::uint8_t>(sub));
      const Transition* first = nullptr;
      for (std::size_t idx : outgoing_[u]) {
        const Transition& t = transitions_[idx];
        if (!t.guard.satisfied(events)) continue;
        if (first != nullptr) {
          throw RewardMachineError("nondeterministic guards in state " + names_[u] + ": " +
                                   first->guard.to_string() + " and " + t.guard.to_string() +
                                   " both hold for {" + events.to_string() + "}");
        }
        first = &t;
      }
      if (sub == 0) break;
    }
  }
}

void RewardMachine::check_state(RmState u) const {
  if (u < 0 || u >= static_cast<RmState>(names_.size())) {
    throw RewardMachineError("unknown reward machine state " + std::to_string(u));
  }
}

RewardMachine::StepResult RewardMachine::step(RmState u, EventSet events) const {
  check_state(u);
  if (terminal_mask_[static_cast<std::size_t>(u)]) {
    throw RewardMachineError("cannot step from terminal state " +
                             names_[static_cast<std::size_t>(u)]);
  }
  const EventSet visible = events & event_set_;
  for (std::size_t idx : outgoing_[static_cast<std::size_t>(u)]) {
    const Transition& t = transitions_[idx];
    if (t.guard.satisfied(visible)) return {t.to, t.reward};
  }
  return {u, zero_reward()};
}

bool RewardMachine::is_terminal(RmState u) const {
  check_state(u);
  return terminal_mask_[static_cast<std::size_t>(u)];
}

const std::string& RewardMachine::state_name(RmState u) const {
  check_state(u);
  return names_[static_cast<std::size_t>(u)];
}

RmState RewardMachine::state_id(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw RewardMachineError("unknown reward machine state '" + std::string(name) + "'");
  }
  return static_cast<RmState>(it - names_.begin());
}

bool RewardMachine::terminal_reachable_from(RmState from) const {
  check_state(from);
  std::vector<bool> seen(names_.size(), false);
  std::vector<RmState> stack{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!stack.empty()) {
    const RmState u = stack.back();
    stack.pop_back();
    if (terminal_mask_[static_cast<std::size_t>(u)]) return true;
    for (std::size_t idx : outgoing_[static_cast<std::size_t>(u)]) {
      const RmState v = transitions_[idx].to;
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        stack.push_back(v);
      }
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

RewardMachine build_rm1() {
  enum : RmState { u0, u1, u2, u3 };
  return RewardMachine({"u0", "u1", "u2", "u3"}, u0, {u3},
                       {
                           edge(u0, "b", u1, 0),
                           edge(u1, "!c&!g", u0, 0),
                           edge(u1, "c", u2, 0),
                           edge(u2, "h&d&f", u3, 10),
                           edge(u2, "h&d&!f&g", u1, 1),
                           edge(u2, "h&d&!f&!g", u0, 1),
                       },
                       EventSet::parse("bcdfgh"));
}

RewardMachine build_rm2() {
  enum : RmState { u0, u1, u2, u3, u4 };
  return RewardMachine({"u0", "u1", "u2", "u3", "u4"}, u0, {u4},
                       {
                           edge(u0, "a&!b", u1, 0),
                           edge(u0, "a&b", u2, 0),
                           edge(u1, "b", u2, 0),
                           edge(u2, "!c&!g", u1, 0),
                           edge(u2, "c", u3, 0),
                           edge(u3, "h&d&f", u4, 10),
                           edge(u3, "h&d&!f&g", u2, 1),
                           edge(u3, "h&d&!f&!g", u0, 1),
                       },
                       EventSet::parse("abcdfgh"));
}

// ---------------------------------------------------------------------------
// Documents
// ---------------------------------------------------------------------------

RewardMachine load_rm_document(std::string_view document) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw RewardMachineError(std::string("reward machine document is not valid JSON: ") +
                             e.what());
  }
  try {
    if (root.at("version").get<int>() != 1) {
      throw RewardMachineError("unsupported reward machine document version");
    }
    auto names = root.at("states").get<std::vector<std::string>>();
    auto lookup = [&names](const std::string& name) -> RmState {
      auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw RewardMachineError("unknown state '" + name + "'");
      return static_cast<RmState>(it - names.begin());
    };
    const RmState initial = lookup(root.at("initial").get<std::string>());
    std::vector<RmState> terminals;
    for (const auto& t : root.at("terminals")) terminals.push_back(lookup(t.get<std::string>()));
    std::vector<Transition> transitions;
    for (const auto& t : root.at("transitions")) {
      transitions.push_back(Transition{lookup(t.at("from").get<std::string>()),
                                       Guard::parse(t.at("guard").get<std::string>()),
                                       lookup(t.at("to").get<std::string>()),
                                       RewardFunction::constant(t.value("reward", 0.0))});
    }
    EventSet events;
    try {
      events = EventSet::parse(root.at("event_set").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw RewardMachineError(e.what());
    }
    return RewardMachine(std::move(names), initial, std::move(terminals), std::move(transitions),
                         events);
  } catch (const json::exception& e) {
    throw RewardMachineError(std::string("malformed reward machine document: ") + e.what());
  }
}

RewardMachine load_rm_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RewardMachineError("cannot open reward machine document " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_rm_document(buffer.str());
}

std::string save_rm_document(const RewardMachine& machine) {
  using nlohmann::json;
  json root;
  root["version"] = 1;
  std::vector<std::string> names;
  for (RmState u = 0; u < machine.state_count(); ++u) names.push_back(machine.state_name(u));
  root["states"] = names;
  root["initial"] = machine.state_name(machine.initial());
  json terminals = json::array();
  for (RmState t : machine.terminals()) terminals.push_back(machine.state_name(t));
  root["terminals"] = std::move(terminals);
  root["event_set"] = machine.event_set().to_string();
  json transitions = json::array();
  for (const auto& t : machine.transitions()) {
    auto value = t.reward.constant_value();
    if (!value) {
      throw RewardMachineError("only constant reward functions can be saved; transition " +
                               machine.state_name(t.from) + " -> " + machine.state_name(t.to) +
                               " is custom");
    }
    transitions.push_back({{"from", machine.state_name(t.from)},
                           {"guard", t.guard.to_string()},
                           {"to", machine.state_name(t.to)},
                           {"reward", *value}});
  }
  root["transitions"] = std::move(transitions);
  return root.dump(2) + "\n";
}

}  // namespace rmpt
