#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rmpt/netsim.hpp"
#include "rmpt/spaces.hpp"

namespace rmpt {

/// The eight lateral-movement events, symbols 'a' through 'h'.
enum class Event : std::uint8_t {
  NewNodes = 0,           // a: discovered new nodes
  NewCredentials = 1,     // b: discovered new credentials
  LateralMove = 2,        // c: connected to a new node
  PrivilegeElevated = 3,  // d
  FlagCaptured = 4,       // e: new target node owned
  GoalAchieved = 5,       // f
  UnusedCredentials = 6,  // g: state predicate, not a change
  PrivescAttempted = 7,   // h: attempt, regardless of success
};

inline constexpr std::array<Event, 8> kAllEvents = {
    Event::NewNodes,    Event::NewCredentials, Event::LateralMove,       Event::PrivilegeElevated,
    Event::FlagCaptured, Event::GoalAchieved,  Event::UnusedCredentials, Event::PrivescAttempted};

constexpr char symbol(Event e) { return static_cast<char>('a' + static_cast<int>(e)); }
std::optional<Event> event_from_symbol(char c);

/// A subset of the eight events, stored as a bit mask.
class EventSet {
 public:
  constexpr EventSet() = default;
  constexpr EventSet(std::initializer_list<Event> events) {
    for (Event e : events) insert(e);
  }
  static constexpr EventSet from_bits(std::uint8_t bits) {
    EventSet s;
    s.bits_ = bits;
    return s;
  }
  /// Parses symbols such as "abd"; throws std::invalid_argument on others.
  static EventSet parse(std::string_view symbols);

  constexpr void insert(Event e) { bits_ |= mask(e); }
  constexpr void erase(Event e) { bits_ &= static_cast<std::uint8_t>(~mask(e)); }
  constexpr bool contains(Event e) const { return (bits_ & mask(e)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  int size() const;

  constexpr bool is_subset_of(EventSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr EventSet operator|(EventSet o) const { return from_bits(bits_ | o.bits_); }
  constexpr EventSet operator&(EventSet o) const { return from_bits(bits_ & o.bits_); }

  /// Symbols in alphabetical order, e.g. "bcg". Empty set prints as "".
  std::string to_string() const;

  constexpr bool operator==(const EventSet&) const = default;

 private:
  static constexpr std::uint8_t mask(Event e) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(e));
  }
  std::uint8_t bits_ = 0;
};

/// One agent-environment interaction as seen by the event detector.
struct InteractionRecord {
  const Observation& prev;
  const Action& action;
  const Observation& next;
  StepOutcome outcome;
};

/// The labeling function. Change events (a, b, d) compare `prev` with `next`;
/// g reads `next` alone; e, f and h come from the environment outcome because
/// the observation carries no flag or goal channel.
EventSet detect_events(const InteractionRecord& record);

}  // namespace rmpt
