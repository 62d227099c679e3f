#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace bellcav::causality {

inline constexpr double kDefaultLightSpeed = 2.998e8;  // m/s

enum class Party { alice, bob, source };
enum class EventKind { setting_choice, quantum_outcome, relay_start, pointer_readout };
enum class AuditMode { strict, relaxed };

inline const char* to_string(Party p) {
  switch (p) {
    case Party::alice: return "alice";
    case Party::bob: return "bob";
    default: return "source";
  }
}

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::setting_choice: return "setting_choice";
    case EventKind::quantum_outcome: return "quantum_outcome";
    case EventKind::relay_start: return "relay_start";
    default: return "pointer_readout";
  }
}

inline const char* to_string(AuditMode m) { return m == AuditMode::strict ? "strict" : "relaxed"; }

/// Timestamped, positioned protocol event on the 1-D separation axis.
struct SpacetimeEvent {
  std::string label;
  Party party = Party::source;
  EventKind kind = EventKind::setting_choice;
  double t = 0.0;         // s
  double position = 0.0;  // m

  void validate() const {
    if (!std::isfinite(t) || !std::isfinite(position))
      throw std::invalid_argument("event '" + label + "' has non-finite coordinates");
  }

  friend bool operator==(const SpacetimeEvent&, const SpacetimeEvent&) = default;
};

struct ViolatingPair {
  std::string first;
  std::string second;
  double slack_seconds = 0.0;  // c|dt| - |dx|, in light-seconds of deficit

  friend bool operator==(const ViolatingPair&, const ViolatingPair&) = default;
};

struct AuditVerdict {
  AuditMode mode = AuditMode::strict;
  bool loophole_free = false;
  std::vector<ViolatingPair> violating_pairs;
  std::vector<std::string> premises;

  friend bool operator==(const AuditVerdict&, const AuditVerdict&) = default;
};

/// Spatial separation needed to keep an operational window of `window`
/// seconds causally disconnected: c * window.
inline double required_separation(double window, double c = kDefaultLightSpeed) {
  if (!(window > 0.0) || !std::isfinite(window))
    throw std::invalid_argument("operational window must be positive");
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("light speed must be positive");
  return c * window;
}

namespace detail {

inline int kind_rank(EventKind k) { return static_cast<int>(k); }

inline void validate_schedule(const std::vector<SpacetimeEvent>& events) {
  std::map<Party, double> last_t;
  std::map<Party, int> last_rank;
  for (const auto& e : events) {
    e.validate();
    auto it = last_rank.find(e.party);
    if (it != last_rank.end()) {
      if (kind_rank(e.kind) < it->second)
        throw std::invalid_argument("event '" + e.label + "' out of protocol order for its party");
      if (e.t < last_t[e.party])
        throw std::invalid_argument("event '" + e.label + "' goes backwards in time for its party");
    }
    last_rank[e.party] = kind_rank(e.kind);
    last_t[e.party] = e.t;
  }
}

}  // namespace detail

/// Light-cone audit of a protocol schedule. Strict mode demands spacelike
/// separation (|dx| > c|dt|) between every Alice and every Bob event across
/// the whole span, choice through pointer readout. Relaxed mode cross-checks
/// only the quantum stage (setting choices and quantum outcomes) and records
/// the autonomy premise it leans on for the classical stage.
inline AuditVerdict audit_schedule(const std::vector<SpacetimeEvent>& events, AuditMode mode,
                                   double c = kDefaultLightSpeed) {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("light speed must be positive");
  detail::validate_schedule(events);

  auto in_scope = [mode](const SpacetimeEvent& e) {
    if (mode == AuditMode::strict) return true;
    return e.kind == EventKind::setting_choice || e.kind == EventKind::quantum_outcome;
  };

  AuditVerdict verdict;
  verdict.mode = mode;
  for (const auto& ea : events) {
    if (ea.party != Party::alice || !in_scope(ea)) continue;
    for (const auto& eb : events) {
      if (eb.party != Party::bob || !in_scope(eb)) continue;
      const double slack = c * std::abs(ea.t - eb.t) - std::abs(ea.position - eb.position);
      if (slack >= 0.0) verdict.violating_pairs.push_back({ea.label, eb.label, slack / c});
    }
  }
  verdict.loophole_free = verdict.violating_pairs.empty();
  if (mode == AuditMode::relaxed)
    verdict.premises.push_back(
        "classical relay dynamics run autonomously once seeded by the local quantum outcome and "
        "are not influenced by distant operations (stated premise, not checked)");
  return verdict;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const SpacetimeEvent& e) {
  j = nlohmann::json{{"label", e.label},
                     {"party", to_string(e.party)},
                     {"kind", to_string(e.kind)},
                     {"t", e.t},
                     {"position", e.position}};
}

inline void from_json(const nlohmann::json& j, SpacetimeEvent& e) {
  e.label = j.at("label").get<std::string>();
  const auto party = j.at("party").get<std::string>();
  if (party == "alice")
    e.party = Party::alice;
  else if (party == "bob")
    e.party = Party::bob;
  else if (party == "source")
    e.party = Party::source;
  else
    throw std::invalid_argument("unknown party: " + party);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "setting_choice")
    e.kind = EventKind::setting_choice;
  else if (kind == "quantum_outcome")
    e.kind = EventKind::quantum_outcome;
  else if (kind == "relay_start")
    e.kind = EventKind::relay_start;
  else if (kind == "pointer_readout")
    e.kind = EventKind::pointer_readout;
  else
    throw std::invalid_argument("unknown event kind: " + kind);
  e.t = j.at("t").get<double>();
  e.position = j.at("position").get<double>();
}

inline void to_json(nlohmann::json& j, const ViolatingPair& p) {
  j = nlohmann::json{{"first", p.first}, {"second", p.second}, {"slack_seconds", p.slack_seconds}};
}

inline void from_json(const nlohmann::json& j, ViolatingPair& p) {
  p.first = j.at("first").get<std::string>();
  p.second = j.at("second").get<std::string>();
  p.slack_seconds = j.at("slack_seconds").get<double>();
}

inline void to_json(nlohmann::json& j, const AuditVerdict& v) {
  j = nlohmann::json{{"mode", to_string(v.mode)},
                     {"loophole_free", v.loophole_free},
                     {"violating_pairs", v.violating_pairs},
                     {"premises", v.premises}};
}

inline void from_json(const nlohmann::json& j, AuditVerdict& v) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "strict")
    v.mode = AuditMode::strict;
  else if (mode == "relaxed")
    v.mode = AuditMode::relaxed;
  else
    throw std::invalid_argument("unknown audit mode: " + mode);
  v.loophole_free = j.at("loophole_free").get<bool>();
  v.violating_pairs = j.at("violating_pairs").get<std::vector<ViolatingPair>>();
  v.premises = j.at("premises").get<std::vector<std::string>>();
}

}  // namespace bellcav::causality
