// Acceptance suite: every shipped guarantee, one pass/fail line each.
// Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bellcav/bellcav.hpp"

namespace {

using namespace bellcav;

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> body;
  double budget_seconds;
};

bool check(bool condition, std::string& detail, const std::string& message) {
  if (!condition && detail.empty()) detail = message;
  return condition;
}

// --- 1. Local bound: vertex CHSH maximum and LP soundness ------------------

bool local_bound(std::string& detail) {
  const auto vertices = polytope::enumerate_deterministic_vertices();
  double max_chsh = -10.0;
  for (const auto& v : vertices) max_chsh = std::max(max_chsh, polytope::chsh_value(v));
  bool ok = check(max_chsh == 2.0, detail, "vertex CHSH maximum is not exactly 2");

  RandomStream rng(20240001);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto model = lhv::random_lhv_model(rng, 1 + rep % 6, 1 + (rep / 6) % 6);
    const auto cert = polytope::local_membership(lhv::behavior_from_lhv(model));
    if (cert.verdict != polytope::Verdict::local) {
      ok = check(false, detail, "an LHV behavior was not certified local");
      break;
    }
    worst = std::max(worst, cert.distance);
  }
  ok = check(worst < 1e-9, detail, "LP distance reached " + std::to_string(worst)) && ok;
  return ok;
}

// --- 2. Apparatus-model reduction to standard local form -------------------

bool reduction_equivalence(std::string& detail) {
  RandomStream rng(20240002);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto model = lhv::random_apparatus_model(rng, 1 + rep % 6, 1 + (rep / 6) % 6);
    const auto direct = lhv::apparatus_behavior_direct(model);
    const auto reduced = lhv::reduce_apparatus_model(model);
    try {
      reduced.alice_response.validate(1e-12);
      reduced.bob_response.validate(1e-12);
    } catch (const std::exception& e) {
      return check(false, detail, std::string("tilded response invalid: ") + e.what());
    }
    const auto via_reduction = lhv::behavior_from_lhv(reduced);
    for (std::size_t i = 0; i < 16; ++i)
      worst = std::max(worst, std::abs(direct.p[i] - via_reduction.p[i]));
  }
  return check(worst < 1e-12, detail,
               "reduction mismatch up to " + std::to_string(worst));
}

// --- 3. Quantum violation at the canonical settings ------------------------

bool quantum_violation(std::string& detail) {
  const auto behavior = quantum::behavior_from_state(quantum::TwoQubitState::singlet(),
                                                     quantum::MeasurementSettings::canonical_chsh());
  const double s = polytope::chsh_value(behavior);
  const double tsirelson = 2.0 * std::sqrt(2.0);
  bool ok = check(std::abs(std::abs(s) - tsirelson) < 1e-9, detail,
                  "analytic |S| is " + std::to_string(std::abs(s)));

  std::vector<stats::TrialRecord> records;
  records.reserve(100000);
  for (std::uint64_t i = 0; i < 100000; ++i) {
    RandomStream rng(derive_stream_seed(20240003, i));
    stats::TrialRecord r;
    r.trial_id = i;
    r.x = rng.next_bit();
    r.y = rng.next_bit();
    const auto [a, b] = quantum::sample_outcomes(behavior, r.x, r.y, rng);
    r.a = r.a_macro = a;
    r.b = r.b_macro = b;
    records.push_back(r);
  }
  const auto sig = stats::chsh_significance(stats::estimate_behavior(records, stats::Layer::quantum));
  ok = check(std::abs(sig.s_hat - s) < 5.0 * sig.sigma_s, detail,
             "sampled CHSH " + std::to_string(sig.s_hat) + " further than 5 sigma from " +
                 std::to_string(s)) &&
       ok;
  return ok;
}

// --- 4. Headline pipeline: nonlocal pointers from deterministic relays -----

bool headline_pipeline(std::string& detail) {
  orchestrator::ExperimentConfig config;
  config.trials = 100000;
  config.master_seed = 20240004;
  const auto records = orchestrator::simulate_trials(config, 0);  // all cores
  for (const auto& r : records)
    if (r.a_macro != r.a || r.b_macro != r.b)
      return check(false, detail,
                   "relay was not faithful at trial " + std::to_string(r.trial_id));
  const auto report = orchestrator::analyze(config, records);
  if (!report.macro_layer) return check(false, detail, "macro layer missing");
  bool ok = check(report.macro_layer->certificate.verdict == polytope::Verdict::nonlocal, detail,
                  "macro layer not certified nonlocal");
  ok = check(report.macro_layer->significance.z > 5.0, detail,
             "macro z = " + std::to_string(report.macro_layer->significance.z)) &&
       ok;
  ok = check(report.macro_layer->certificate.distance > config.lp_tol, detail,
             "macro LP distance does not exceed the tolerance") &&
       ok;
  return ok;
}

// --- 5. Noise law: macro CHSH scales by (1-2eps)^2 --------------------------

bool noise_law(std::string& detail) {
  const auto behavior = quantum::behavior_from_state(quantum::TwoQubitState::singlet(),
                                                     quantum::MeasurementSettings::canonical_chsh());
  const double s_quantum = polytope::chsh_value(behavior);
  bool ok = true;
  for (double eps : {0.1, 0.25}) {
    orchestrator::ExperimentConfig config;
    config.trials = 100000;
    config.master_seed = 20240005 + static_cast<std::uint64_t>(eps * 100);
    config.balance.relay_noise = eps;
    const auto report = orchestrator::run_experiment(config, 0);
    if (!report.macro_layer) return check(false, detail, "macro layer missing");
    const double expected = (1.0 - 2.0 * eps) * (1.0 - 2.0 * eps) * s_quantum;
    const double got = report.macro_layer->significance.s_hat;
    const double sigma = report.macro_layer->significance.sigma_s;
    ok = check(std::abs(got - expected) < 5.0 * sigma, detail,
               "eps=" + std::to_string(eps) + ": macro S " + std::to_string(got) +
                   " vs expected " + std::to_string(expected)) &&
         ok;
  }
  return ok;
}

// --- 6. Timing claim: one-second windows need Earth-Moon separation --------

bool timing_claim(std::string& detail) {
  bool ok = check(causality::required_separation(1.0) == 2.998e8, detail,
                  "required separation for 1 s is not 2.998e8 m");
  ok = check(causality::required_separation(1.0) <= 3.84e8, detail,
             "Earth-Moon distance does not cover a 1 s window") &&
       ok;

  const auto moon = orchestrator::default_schedule();  // parties at +/-1.92e8 m, within 1 s
  ok = check(causality::audit_schedule(moon, causality::AuditMode::strict).loophole_free, detail,
             "Earth-Moon schedule failed the strict audit") &&
       ok;

  std::vector<causality::SpacetimeEvent> lab = moon;
  for (auto& e : lab) e.position = e.position < 0 ? -10.0 : 10.0;
  ok = check(!causality::audit_schedule(lab, causality::AuditMode::strict).loophole_free, detail,
             "laboratory schedule unexpectedly passed the strict audit") &&
       ok;
  return ok;
}

// --- 7. Cavendish numerics: equilibrium root and faithful relay ------------

bool cavendish_numerics(std::string& detail) {
  const auto config = cavendish::CavendishConfig::fast();
  bool ok = true;
  for (int bit : {0, 1}) {
    const auto traj = cavendish::integrate_pendulum(config, cavendish::PendulumState{}, bit,
                                                    0.005, 8.0);
    // Independent bisection root of kappa*theta = tau(theta).
    const double sign = bit == 1 ? 1.0 : -1.0;
    double lo = 0.0, hi = sign * config.sphere_offset_angle;
    auto imbalance = [&](double th) {
      return config.torsion_constant * th - cavendish::gravity_torque(config, th, bit);
    };
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (imbalance(lo) * imbalance(mid) <= 0.0)
        hi = mid;
      else
        lo = mid;
    }
    const double root = 0.5 * (lo + hi);
    const double rel = std::abs(traj.samples.back().theta - root) / std::abs(root);
    ok = check(rel < 1e-3, detail,
               "equilibrium off by relative " + std::to_string(rel) + " for bit " +
                   std::to_string(bit)) &&
         ok;
  }
  for (int instance = 0; instance < 2; ++instance)
    for (int bit : {0, 1}) {
      RandomStream rng(derive_stream_seed(20240007, static_cast<std::uint64_t>(instance)));
      const auto record = cavendish::run_relay(config, bit, 0.005, 8.0, rng);
      ok = check(record.output_bit == bit, detail, "relay flipped a bit at zero noise") && ok;
    }
  return ok;
}

// --- 8. Reproducibility across runs and worker counts ----------------------

bool reproducibility(std::string& detail) {
  orchestrator::ExperimentConfig config;
  config.trials = 2000;
  config.master_seed = 20240008;

  std::vector<std::string> ledgers;
  std::vector<std::string> reports;
  for (unsigned threads : {1u, 4u}) {
    const auto records = orchestrator::simulate_trials(config, threads);
    auto report = orchestrator::analyze(config, records);
    std::ostringstream ledger;
    stats::write_ledger(ledger, records);
    ledgers.push_back(ledger.str());
    reports.push_back(orchestrator::emit_report(report, orchestrator::ReportFormat::structured));
  }
  bool ok = check(ledgers[0] == ledgers[1], detail, "ledgers differ across worker counts");
  ok = check(reports[0] == reports[1], detail, "reports differ across worker counts") && ok;
  return ok;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"local bound: vertex CHSH max = 2, LP certifies 1000 LHV behaviors local", local_bound,
       10.0},
      {"apparatus reduction: direct behavior equals reduced LHV form to 1e-12",
       reduction_equivalence, 30.0},
      {"quantum violation: singlet |S| = 2*sqrt(2) analytically and under sampling",
       quantum_violation, 30.0},
      {"headline pipeline: 1e5 faithful relays give a nonlocal macro verdict, z > 5",
       headline_pipeline, 300.0},
      {"noise law: macro CHSH scales by (1-2eps)^2 at eps = 0.1 and 0.25", noise_law, 300.0},
      {"timing claim: 1 s window needs 2.998e8 m; Earth-Moon passes, lab does not", timing_claim,
       1.0},
      {"cavendish numerics: equilibrium matches bisection to 0.1%, relay faithful",
       cavendish_numerics, 60.0},
      {"reproducibility: bit-identical ledger and report for any worker count", reproducibility,
       120.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > criteria[i].budget_seconds) {
      ok = false;
      if (detail.empty())
        detail = "exceeded budget of " + std::to_string(criteria[i].budget_seconds) + " s";
    }
    std::printf("[%s] criterion %zu: %s (%.2f s)\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].name.c_str(), elapsed);
    if (!ok) {
      std::printf("       %s\n", detail.c_str());
      ++failures;
    }
  }
  return failures;
}
