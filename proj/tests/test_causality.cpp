#include "doctest.h"

#include <cmath>
#include <vector>

#include "json.hpp"

#include "bellcav/causality.hpp"
#include "bellcav/orchestrator.hpp"
#include "bellcav/rng.hpp"

using namespace bellcav;
using namespace bellcav::causality;

namespace {

/// Compact four-event-per-party schedule builder.
std::vector<SpacetimeEvent> two_party_schedule(double x_alice, double x_bob, double t_choice,
                                               double t_outcome, double t_relay,
                                               double t_readout) {
  return {
      {"a_choice", Party::alice, EventKind::setting_choice, t_choice, x_alice},
      {"a_outcome", Party::alice, EventKind::quantum_outcome, t_outcome, x_alice},
      {"a_relay", Party::alice, EventKind::relay_start, t_relay, x_alice},
      {"a_readout", Party::alice, EventKind::pointer_readout, t_readout, x_alice},
      {"b_choice", Party::bob, EventKind::setting_choice, t_choice, x_bob},
      {"b_outcome", Party::bob, EventKind::quantum_outcome, t_outcome, x_bob},
      {"b_relay", Party::bob, EventKind::relay_start, t_relay, x_bob},
      {"b_readout", Party::bob, EventKind::pointer_readout, t_readout, x_bob},
  };
}

}  // namespace

TEST_CASE("required separation is c times the window") {
  CHECK(required_separation(1.0) == 2.998e8);
  CHECK(required_separation(1.0) <= 3.84e8);  // Earth-Moon distance suffices
  CHECK(required_separation(1e-5) == doctest::Approx(2.998e3).epsilon(1e-12));
  CHECK_THROWS_AS(required_separation(0.0), std::invalid_argument);
  CHECK_THROWS_AS(required_separation(-1.0), std::invalid_argument);
}

TEST_CASE("laboratory-scale schedule fails the strict audit") {
  // Parties 20 m apart, protocol spanning ~1 s: light crosses in 67 ns.
  const auto events = two_party_schedule(-10.0, 10.0, 0.0, 0.1, 0.2, 1.0);
  const auto verdict = audit_schedule(events, AuditMode::strict);
  CHECK_FALSE(verdict.loophole_free);
  CHECK(!verdict.violating_pairs.empty());
  for (const auto& pair : verdict.violating_pairs) CHECK(pair.slack_seconds >= 0.0);
}

TEST_CASE("relaxed audit passes when only the quantum stage is tight") {
  // Same 20 m layout; choices and outcomes within 10 ns (3 m light travel),
  // relay and readout much later. Hand arithmetic: 20 m > 3 m, spacelike.
  const auto events = two_party_schedule(-10.0, 10.0, 0.0, 10e-9, 0.2, 1.0);
  const auto relaxed = audit_schedule(events, AuditMode::relaxed);
  CHECK(relaxed.loophole_free);
  CHECK(relaxed.violating_pairs.empty());
  REQUIRE(!relaxed.premises.empty());

  const auto strict = audit_schedule(events, AuditMode::strict);
  CHECK_FALSE(strict.loophole_free);  // readouts at 1 s are in causal contact
}

TEST_CASE("Earth-Moon separation passes the strict audit for a one-second protocol") {
  const auto events = two_party_schedule(-1.92e8, 1.92e8, 0.0, 0.2, 0.3, 1.0);
  const auto verdict = audit_schedule(events, AuditMode::strict);
  CHECK(verdict.loophole_free);

  // The default experiment schedule is exactly this scenario.
  const auto def = audit_schedule(orchestrator::default_schedule(), AuditMode::strict);
  CHECK(def.loophole_free);
}

TEST_CASE("slack reports the separation deficit in seconds") {
  std::vector<SpacetimeEvent> events = {
      {"a", Party::alice, EventKind::setting_choice, 0.0, 0.0},
      {"b", Party::bob, EventKind::setting_choice, 1.0, 1.0e8},
  };
  const auto verdict = audit_schedule(events, AuditMode::strict);
  REQUIRE(verdict.violating_pairs.size() == 1);
  // c*1s - 1e8 m = 1.998e8 m of deficit = 0.6664.. light seconds
  CHECK(verdict.violating_pairs[0].slack_seconds ==
        doctest::Approx((2.998e8 - 1.0e8) / 2.998e8).epsilon(1e-12));
}

TEST_CASE("source events are outside the cross-party check") {
  std::vector<SpacetimeEvent> events = {
      {"emit", Party::source, EventKind::setting_choice, 0.0, 0.0},
      {"a", Party::alice, EventKind::setting_choice, 1.0, -1.0e9},
      {"b", Party::bob, EventKind::setting_choice, 1.0, 1.0e9},
  };
  const auto verdict = audit_schedule(events, AuditMode::strict);
  CHECK(verdict.loophole_free);
}

TEST_CASE("per-party protocol order is validated") {
  std::vector<SpacetimeEvent> events = {
      {"a_read", Party::alice, EventKind::pointer_readout, 0.0, 0.0},
      {"a_choice", Party::alice, EventKind::setting_choice, 1.0, 0.0},
  };
  CHECK_THROWS_AS(audit_schedule(events, AuditMode::strict), std::invalid_argument);

  std::vector<SpacetimeEvent> backwards = {
      {"a_choice", Party::alice, EventKind::setting_choice, 1.0, 0.0},
      {"a_outcome", Party::alice, EventKind::quantum_outcome, 0.5, 0.0},
  };
  CHECK_THROWS_AS(audit_schedule(backwards, AuditMode::strict), std::invalid_argument);

  std::vector<SpacetimeEvent> nan_event = {
      {"a_choice", Party::alice, EventKind::setting_choice, std::nan(""), 0.0},
  };
  CHECK_THROWS_AS(audit_schedule(nan_event, AuditMode::strict), std::invalid_argument);
}

TEST_CASE("property: widening the separation never breaks a clean verdict") {
  RandomStream rng(101);
  for (int rep = 0; rep < 200; ++rep) {
    const double base_x = 1.0 + rng.next_double() * 1e9;
    const double t1 = rng.next_double();
    const double t2 = t1 + rng.next_double();
    const double t3 = t2 + rng.next_double();
    const double t4 = t3 + rng.next_double();
    const auto mode = rng.next_bit() ? AuditMode::strict : AuditMode::relaxed;
    const auto near_verdict =
        audit_schedule(two_party_schedule(-base_x, base_x, t1, t2, t3, t4), mode);
    const auto far_verdict =
        audit_schedule(two_party_schedule(-2.0 * base_x, 2.0 * base_x, t1, t2, t3, t4), mode);
    if (near_verdict.loophole_free) CHECK(far_verdict.loophole_free);
    CHECK(far_verdict.violating_pairs.size() <= near_verdict.violating_pairs.size());
  }
}

TEST_CASE("property: relaxed mode is at least as permissive as strict") {
  RandomStream rng(103);
  for (int rep = 0; rep < 200; ++rep) {
    const double x = rng.next_double() * 1e9;
    const double t1 = rng.next_double();
    const double t2 = t1 + rng.next_double();
    const double t3 = t2 + rng.next_double();
    const double t4 = t3 + rng.next_double() * 10.0;
    const auto events = two_party_schedule(-x, x, t1, t2, t3, t4);
    const auto strict = audit_schedule(events, AuditMode::strict);
    const auto relaxed = audit_schedule(events, AuditMode::relaxed);
    if (strict.loophole_free) CHECK(relaxed.loophole_free);
    CHECK(relaxed.violating_pairs.size() <= strict.violating_pairs.size());
  }
}

TEST_CASE("property: verdict is invariant under mirroring the parties") {
  RandomStream rng(107);
  for (int rep = 0; rep < 100; ++rep) {
    const double x = rng.next_double() * 1e9;
    const double t1 = rng.next_double();
    const double t2 = t1 + rng.next_double();
    auto events = two_party_schedule(-x, x, t1, t2, t2 + 0.1, t2 + 0.5);
    const auto verdict = audit_schedule(events, AuditMode::strict);
    for (auto& e : events) {
      e.position = -e.position;
      if (e.party == Party::alice)
        e.party = Party::bob;
      else if (e.party == Party::bob)
        e.party = Party::alice;
    }
    const auto mirrored = audit_schedule(events, AuditMode::strict);
    CHECK(mirrored.loophole_free == verdict.loophole_free);
    CHECK(mirrored.violating_pairs.size() == verdict.violating_pairs.size());
  }
}

TEST_CASE("events and verdicts round-trip through json") {
  const auto events = two_party_schedule(-10.0, 10.0, 0.0, 0.1, 0.2, 1.0);
  nlohmann::json j = events;
  CHECK(j.get<std::vector<SpacetimeEvent>>() == events);

  const auto verdict = audit_schedule(events, AuditMode::relaxed);
  nlohmann::json jv = verdict;
  CHECK(jv.get<AuditVerdict>() == verdict);
}

TEST_CASE("toy light speed lets desk-scale schedules pass strict audits") {
  const auto events = two_party_schedule(-10.0, 10.0, 0.0, 0.1, 0.2, 1.0);
  const auto verdict = audit_schedule(events, AuditMode::strict, 5.0);  // c = 5 m/s
  CHECK(verdict.loophole_free);
}
