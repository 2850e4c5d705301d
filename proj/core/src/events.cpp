#include "rmpt/events.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace rmpt {

std::optional<Event> event_from_symbol(char c) {
  if (c < 'a' || c > 'h') return std::nullopt;
  return static_cast<Event>(c - 'a');
}

EventSet EventSet::parse(std::string_view symbols) {
  EventSet out;
  for (char c : symbols) {
    auto e = event_from_symbol(c);
    if (!e) throw std::invalid_argument(std::string("unknown event symbol '") + c + "'");
    out.insert(*e);
  }
  return out;
}

int EventSet::size() const { return std::popcount(bits_); }

std::string EventSet::to_string() const {
  std::string out;
  for (Event e : kAllEvents) {
    if (contains(e)) out.push_back(symbol(e));
  }
  return out;
}

EventSet detect_events(const InteractionRecord& record) {
  const Observation& prev = record.prev;
  const Observation& next = record.next;
  if (!(prev.caps == next.caps)) {
    throw std::invalid_argument("interaction observations use different capacities");
  }
  EventSet events;

  if (next.discovered_count > prev.discovered_count) events.insert(Event::NewNodes);

  bool new_credential = false;
  bool unused_credential = false;
  for (std::size_t i = 0; i < next.credentials.size(); ++i) {
    new_credential = new_credential || (prev.credentials[i] == credential_value::kNotDiscovered &&
                                        next.credentials[i] == credential_value::kUnused);
    unused_credential = unused_credential || next.credentials[i] == credential_value::kUnused;
  }
  if (new_credential) events.insert(Event::NewCredentials);
  if (unused_credential) events.insert(Event::UnusedCredentials);

  if (next.lateral_move == 1) events.insert(Event::LateralMove);

  for (std::size_t i = 0; i < next.privilege.size(); ++i) {
    if (prev.privilege[i] == 0 && next.privilege[i] == 1) {
      events.insert(Event::PrivilegeElevated);
      break;
    }
  }

  if (record.outcome.flag_captured) events.insert(Event::FlagCaptured);
  if (record.outcome.goal_achieved) events.insert(Event::GoalAchieved);
  if (record.outcome.privesc_attempted) events.insert(Event::PrivescAttempted);
  return events;
}

}  // namespace rmpt
