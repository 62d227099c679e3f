#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bellcav/behavior.hpp"
#include "bellcav/causality.hpp"
#include "bellcav/cavendish.hpp"
#include "bellcav/polytope.hpp"
#include "bellcav/quantum.hpp"
#include "bellcav/rng.hpp"
#include "bellcav/stats.hpp"

namespace bellcav::orchestrator {

/// Default audit schedule: parties at Earth-Moon separation, the whole
/// protocol inside one second. Spacelike for every cross-party pair.
inline std::vector<causality::SpacetimeEvent> default_schedule() {
  using causality::EventKind;
  using causality::Party;
  const double x_alice = -1.92e8;
  const double x_bob = 1.92e8;
  return {
      {"alice_choice", Party::alice, EventKind::setting_choice, 0.05, x_alice},
      {"alice_outcome", Party::alice, EventKind::quantum_outcome, 0.15, x_alice},
      {"alice_relay", Party::alice, EventKind::relay_start, 0.20, x_alice},
      {"alice_readout", Party::alice, EventKind::pointer_readout, 0.95, x_alice},
      {"bob_choice", Party::bob, EventKind::setting_choice, 0.05, x_bob},
      {"bob_outcome", Party::bob, EventKind::quantum_outcome, 0.15, x_bob},
      {"bob_relay", Party::bob, EventKind::relay_start, 0.20, x_bob},
      {"bob_readout", Party::bob, EventKind::pointer_readout, 0.95, x_bob},
  };
}

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::uint64_t trials = 1000;

  std::string state_name = "singlet";  // "singlet", "maximally_mixed" or "matrix"
  quantum::TwoQubitState state = quantum::TwoQubitState::singlet();
  quantum::MeasurementSettings settings = quantum::MeasurementSettings::canonical_chsh();

  cavendish::CavendishConfig balance = cavendish::CavendishConfig::fast();
  double dt = 0.005;   // s, integration step
  double t_max = 8.0;  // s, relay time budget

  std::vector<causality::SpacetimeEvent> schedule = default_schedule();
  causality::AuditMode audit_mode = causality::AuditMode::strict;
  double light_speed = causality::kDefaultLightSpeed;

  double lp_tol = 1e-7;
  double z_threshold = 5.0;

  std::string output_dir = "out";  // default run directory; --out overrides at runtime

  void validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    state.validate();
    settings.validate();
    balance.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(t_max >= dt)) throw std::invalid_argument("t_max must be >= dt");
    if (!(light_speed > 0.0)) throw std::invalid_argument("light_speed must be positive");
    if (!(lp_tol > 0.0)) throw std::invalid_argument("lp_tol must be positive");
    if (!(z_threshold > 0.0)) throw std::invalid_argument("z_threshold must be positive");
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Everything derived from one layer of the ledger: the estimated behavior,
/// its membership certificate and the CHSH significance. Both nonlocality
/// signals are reported side by side; the headline claim is the LP verdict.
///
/// Membership of a finite-sample estimate is decided at lp_tol_used =
/// max(lp_tol, 5 * max cell stderr): sampling noise breaks no-signaling by
/// about one standard error, which an exact-membership tolerance would
/// misread as nonlocality on every estimate.
struct LayerOutcome {
  stats::EstimatedBehavior estimate;
  polytope::LocalityCertificate certificate;
  stats::ChshSignificance significance;
  double lp_tol_used = 0.0;
  bool nonlocal_by_lp = false;
  bool nonlocal_by_chsh = false;

  friend bool operator==(const LayerOutcome&, const LayerOutcome&) = default;
};

struct RunReport {
  ExperimentConfig config;
  std::optional<LayerOutcome> quantum_layer;  // absent when a setting cell is empty
  std::optional<LayerOutcome> macro_layer;
  causality::AuditVerdict audit;
  double wall_clock_seconds = 0.0;  // console diagnostics only, never serialized

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

enum class FailureKind { validation, runtime, inconclusive };

/// A trial-stage failure. Carries the completed ledger prefix so callers can
/// persist it with a truncation marker.
class StageError : public std::runtime_error {
 public:
  StageError(std::uint64_t trial_id, std::string stage, FailureKind kind, const std::string& what,
             std::vector<stats::TrialRecord> partial)
      : std::runtime_error("trial " + std::to_string(trial_id) + ", stage " + stage + ": " + what),
        trial_id_(trial_id),
        stage_(std::move(stage)),
        kind_(kind),
        partial_(std::move(partial)) {}

  std::uint64_t trial_id() const { return trial_id_; }
  const std::string& stage() const { return stage_; }
  FailureKind kind() const { return kind_; }
  const std::vector<stats::TrialRecord>& partial_ledger() const { return partial_; }

  std::string marker() const {
    return "trial=" + std::to_string(trial_id_) + " stage=" + stage_ + " error=" + what();
  }

 private:
  std::uint64_t trial_id_;
  std::string stage_;
  FailureKind kind_;
  std::vector<stats::TrialRecord> partial_;
};

namespace detail {

struct TrialFailure {
  std::uint64_t trial_id;
  std::string stage;
  FailureKind kind;
  std::string message;
};

inline FailureKind classify(const std::exception& e) {
  if (dynamic_cast<const cavendish::InconclusiveReadout*>(&e)) return FailureKind::inconclusive;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return FailureKind::validation;
  return FailureKind::runtime;
}

inline stats::TrialRecord simulate_one(const ExperimentConfig& config,
                                       const BehaviorTable& behavior, std::uint64_t trial_id) {
  const std::uint64_t seed = derive_stream_seed(config.master_seed, trial_id);
  RandomStream stream(seed);
  stats::TrialRecord record;
  record.trial_id = trial_id;
  record.seed = seed;

  const char* stage = "sample_settings";
  try {
    record.x = stream.next_bit();
    record.y = stream.next_bit();
    stage = "sample_outcomes";
    const auto [a, b] = quantum::sample_outcomes(behavior, record.x, record.y, stream);
    record.a = a;
    record.b = b;
    stage = "relay_alice";
    record.a_macro =
        cavendish::run_relay(config.balance, record.a, config.dt, config.t_max, stream).output_bit;
    stage = "relay_bob";
    record.b_macro =
        cavendish::run_relay(config.balance, record.b, config.dt, config.t_max, stream).output_bit;
  } catch (const std::exception& e) {
    throw StageError(trial_id, stage, classify(e), e.what(), {});
  }
  return record;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace detail

/// Run all trials. Record i depends only on (config, master_seed, i), so the
/// ledger is identical for any worker count; threads is an execution knob,
/// not part of the experiment identity (0 = all cores). On a trial failure
/// the completed prefix below the failing trial is (re)built and attached to
/// the error.
inline std::vector<stats::TrialRecord> simulate_trials(const ExperimentConfig& config,
                                                       unsigned threads = 0) {
  config.validate();
  const BehaviorTable behavior = quantum::behavior_from_state(config.state, config.settings);

  const std::uint64_t n = config.trials;
  std::vector<stats::TrialRecord> records(n);
  std::vector<char> done(n, 0);

  std::optional<detail::TrialFailure> failure;
  std::mutex failure_mutex;
  std::atomic<bool> cancel{false};
  std::atomic<std::uint64_t> next{0};
  constexpr std::uint64_t kChunk = 64;

  auto worker = [&]() {
    while (!cancel.load(std::memory_order_relaxed)) {
      const std::uint64_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      const std::uint64_t end = std::min(n, begin + kChunk);
      for (std::uint64_t i = begin; i < end; ++i) {
        try {
          records[i] = detail::simulate_one(config, behavior, i);
          done[i] = 1;
        } catch (const StageError& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure || e.trial_id() < failure->trial_id)
            failure = detail::TrialFailure{e.trial_id(), e.stage(), e.kind(), e.what()};
          cancel.store(true, std::memory_order_relaxed);
          return;
        }
      }
    }
  };

  const unsigned thread_count = detail::resolve_threads(threads);
  if (thread_count <= 1 || n < 2) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (unsigned t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (failure) {
    // Rebuild the prefix below the failing trial; an earlier deterministic
    // failure discovered here moves the truncation point up.
    std::vector<stats::TrialRecord> prefix;
    prefix.reserve(failure->trial_id);
    for (std::uint64_t i = 0; i < failure->trial_id; ++i) {
      if (!done[i]) {
        try {
          records[i] = detail::simulate_one(config, behavior, i);
        } catch (const StageError& e) {
          failure = detail::TrialFailure{e.trial_id(), e.stage(), e.kind(), e.what()};
          break;
        }
      }
      prefix.push_back(records[i]);
    }
    throw StageError(failure->trial_id, failure->stage, failure->kind, failure->message,
                     std::move(prefix));
  }
  return records;
}

namespace detail {

inline std::optional<LayerOutcome> analyze_layer(const ExperimentConfig& config,
                                                 std::span<const stats::TrialRecord> records,
                                                 stats::Layer layer) {
  LayerOutcome outcome;
  try {
    outcome.estimate = stats::estimate_behavior(records, layer);
  } catch (const stats::EmptyCellError&) {
    return std::nullopt;
  }
  double max_stderr = 0.0;
  for (double s : outcome.estimate.stderrs) max_stderr = std::max(max_stderr, s);
  outcome.lp_tol_used = std::max(config.lp_tol, 5.0 * max_stderr);
  outcome.certificate = polytope::local_membership(outcome.estimate.table, outcome.lp_tol_used);
  outcome.significance = stats::chsh_significance(outcome.estimate);
  outcome.nonlocal_by_lp = outcome.certificate.verdict == polytope::Verdict::nonlocal;
  outcome.nonlocal_by_chsh = outcome.significance.z >= config.z_threshold;
  return outcome;
}

}  // namespace detail

/// Estimates, certificates, significance and the light-cone audit for a
/// finished ledger.
inline RunReport analyze(const ExperimentConfig& config,
                         std::span<const stats::TrialRecord> records) {
  RunReport report;
  report.config = config;
  report.quantum_layer = detail::analyze_layer(config, records, stats::Layer::quantum);
  report.macro_layer = detail::analyze_layer(config, records, stats::Layer::macro);
  report.audit = causality::audit_schedule(config.schedule, config.audit_mode, config.light_speed);
  return report;
}

/// Full pipeline: simulate, estimate, certify, audit.
inline RunReport run_experiment(const ExperimentConfig& config, unsigned threads = 0) {
  const auto start = std::chrono::steady_clock::now();
  const auto records = simulate_trials(config, threads);
  RunReport report = analyze(config, records);
  report.wall_clock_seconds = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Config serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json quantum{{"state", c.state_name},
                         {"alice_angles", c.settings.alice_angles},
                         {"bob_angles", c.settings.bob_angles}};
  if (c.state_name == "matrix") {
    auto rows = nlohmann::json::array();
    for (int i = 0; i < 4; ++i) {
      auto row = nlohmann::json::array();
      for (int k = 0; k < 4; ++k)
        row.push_back({c.state.rho[i][k].real(), c.state.rho[i][k].imag()});
      rows.push_back(row);
    }
    quantum["matrix"] = rows;
  }
  nlohmann::json balance;
  cavendish::to_json(balance, c.balance);
  balance["dt"] = c.dt;
  balance["t_max"] = c.t_max;
  j = nlohmann::json{{"master_seed", c.master_seed},
                     {"trials", c.trials},
                     {"quantum", quantum},
                     {"cavendish", balance},
                     {"causality",
                      {{"mode", causality::to_string(c.audit_mode)},
                       {"light_speed", c.light_speed},
                       {"events", c.schedule}}},
                     {"tolerances", {{"lp_tol", c.lp_tol}, {"z_threshold", c.z_threshold}}},
                     {"output", {{"dir", c.output_dir}}}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("trials")) c.trials = j.at("trials").get<std::uint64_t>();

  if (j.contains("quantum")) {
    const auto& q = j.at("quantum");
    if (q.contains("state")) {
      c.state_name = q.at("state").get<std::string>();
      if (c.state_name == "singlet") {
        c.state = quantum::TwoQubitState::singlet();
      } else if (c.state_name == "maximally_mixed") {
        c.state = quantum::TwoQubitState::maximally_mixed();
      } else if (c.state_name == "matrix") {
        const auto& rows = q.at("matrix");
        for (int i = 0; i < 4; ++i)
          for (int k = 0; k < 4; ++k)
            c.state.rho[i][k] = cplx{rows.at(i).at(k).at(0).get<double>(),
                                     rows.at(i).at(k).at(1).get<double>()};
      } else {
        throw std::invalid_argument("unknown quantum state: " + c.state_name);
      }
    }
    auto alice = c.settings.alice_angles;
    auto bob = c.settings.bob_angles;
    if (q.contains("alice_angles")) alice = q.at("alice_angles").get<std::array<double, 2>>();
    if (q.contains("bob_angles")) bob = q.at("bob_angles").get<std::array<double, 2>>();
    c.settings = quantum::MeasurementSettings::from_angles(alice[0], alice[1], bob[0], bob[1]);
  }

  if (j.contains("cavendish")) {
    const auto& b = j.at("cavendish");
    cavendish::from_json(b, c.balance);
    if (b.contains("dt")) c.dt = b.at("dt").get<double>();
    if (b.contains("t_max")) c.t_max = b.at("t_max").get<double>();
  }
  if (j.contains("noise_epsilon"))
    c.balance.relay_noise = j.at("noise_epsilon").get<double>();

  if (j.contains("causality")) {
    const auto& k = j.at("causality");
    if (k.contains("mode")) {
      const auto mode = k.at("mode").get<std::string>();
      if (mode == "strict")
        c.audit_mode = causality::AuditMode::strict;
      else if (mode == "relaxed")
        c.audit_mode = causality::AuditMode::relaxed;
      else
        throw std::invalid_argument("unknown audit mode: " + mode);
    }
    if (k.contains("light_speed")) c.light_speed = k.at("light_speed").get<double>();
    if (k.contains("events"))
      c.schedule = k.at("events").get<std::vector<causality::SpacetimeEvent>>();
  }

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    if (t.contains("lp_tol")) c.lp_tol = t.at("lp_tol").get<double>();
    if (t.contains("z_threshold")) c.z_threshold = t.at("z_threshold").get<double>();
  }

  if (j.contains("output") && j.at("output").contains("dir"))
    c.output_dir = j.at("output").at("dir").get<std::string>();
}

/// Load a config file; a "schedule_file" entry in the causality block is
/// resolved relative to the config's directory.
inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.contains("causality") && j.at("causality").contains("schedule_file")) {
    const auto rel = j.at("causality").at("schedule_file").get<std::string>();
    const auto schedule_path = path.parent_path() / rel;
    std::ifstream sched(schedule_path);
    if (!sched)
      throw std::invalid_argument("cannot open schedule file: " + schedule_path.string());
    nlohmann::json sj = nlohmann::json::parse(sched);
    j["causality"]["events"] = sj.at("events");
    j["causality"].erase("schedule_file");
  }
  return j.get<ExperimentConfig>();
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

enum class ReportFormat { text, structured };

inline void to_json(nlohmann::json& j, const LayerOutcome& layer) {
  j = nlohmann::json{{"estimate", layer.estimate},
                     {"certificate", layer.certificate},
                     {"significance", layer.significance},
                     {"lp_tol_used", layer.lp_tol_used},
                     {"nonlocal_by_lp", layer.nonlocal_by_lp},
                     {"nonlocal_by_chsh", layer.nonlocal_by_chsh}};
}

inline void from_json(const nlohmann::json& j, LayerOutcome& layer) {
  layer.estimate = j.at("estimate").get<stats::EstimatedBehavior>();
  layer.certificate = j.at("certificate").get<polytope::LocalityCertificate>();
  layer.significance = j.at("significance").get<stats::ChshSignificance>();
  layer.lp_tol_used = j.at("lp_tol_used").get<double>();
  layer.nonlocal_by_lp = j.at("nonlocal_by_lp").get<bool>();
  layer.nonlocal_by_chsh = j.at("nonlocal_by_chsh").get<bool>();
}

inline void to_json(nlohmann::json& j, const RunReport& r) {
  j = nlohmann::json{{"config", r.config},
                     {"quantum_layer", nullptr},
                     {"macro_layer", nullptr},
                     {"audit", r.audit}};
  if (r.quantum_layer) j["quantum_layer"] = *r.quantum_layer;
  if (r.macro_layer) j["macro_layer"] = *r.macro_layer;
}

inline void from_json(const nlohmann::json& j, RunReport& r) {
  r.config = j.at("config").get<ExperimentConfig>();
  r.quantum_layer.reset();
  r.macro_layer.reset();
  if (!j.at("quantum_layer").is_null())
    r.quantum_layer = j.at("quantum_layer").get<LayerOutcome>();
  if (!j.at("macro_layer").is_null()) r.macro_layer = j.at("macro_layer").get<LayerOutcome>();
  r.audit = j.at("audit").get<causality::AuditVerdict>();
  r.wall_clock_seconds = 0.0;
}

namespace detail {

inline void describe_layer(std::ostringstream& out, const char* name,
                           const std::optional<LayerOutcome>& layer, double z_threshold) {
  out << '[' << name << " layer]\n";
  if (!layer) {
    out << "  insufficient data: at least one setting cell has no trials\n";
    return;
  }
  const auto& sig = layer->significance;
  const auto& cert = layer->certificate;
  out << "  chsh S = " << sig.s_hat << "  sigma = " << sig.sigma_s << "  z = " << sig.z
      << (layer->nonlocal_by_chsh ? "  (exceeds" : "  (below") << " z threshold " << z_threshold
      << ")\n";
  out << "  lp verdict: " << (cert.verdict == polytope::Verdict::local ? "local" : "nonlocal")
      << "  distance = " << cert.distance << "  tol = " << layer->lp_tol_used << '\n';
  out << "  correlators:";
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      out << "  E(" << x << ',' << y << ") = " << correlator(layer->estimate.table, x, y);
  out << '\n';
}

}  // namespace detail

/// Stable serialized report. Structured form round-trips through
/// parse_report; the text form is for humans.
inline std::string emit_report(const RunReport& report, ReportFormat format) {
  if (format == ReportFormat::structured) {
    nlohmann::json j = report;
    return j.dump(2) + "\n";
  }
  std::ostringstream out;
  out.precision(10);
  out << "bell-cavendish relay run\n";
  out << "========================\n";
  out << "trials: " << report.config.trials << "  master_seed: " << report.config.master_seed
      << "  relay_noise: " << report.config.balance.relay_noise << '\n';
  out << "settings: alice [" << report.config.settings.alice_angles[0] << ", "
      << report.config.settings.alice_angles[1] << "]  bob ["
      << report.config.settings.bob_angles[0] << ", " << report.config.settings.bob_angles[1]
      << "]  state " << report.config.state_name << '\n';
  detail::describe_layer(out, "quantum", report.quantum_layer, report.config.z_threshold);
  detail::describe_layer(out, "macro", report.macro_layer, report.config.z_threshold);
  out << "[causality]\n  mode " << causality::to_string(report.audit.mode) << ": "
      << (report.audit.loophole_free ? "loophole-free" : "loophole present") << " ("
      << report.audit.violating_pairs.size() << " violating pairs)\n";
  for (const auto& premise : report.audit.premises) out << "  premise: " << premise << '\n';
  return out.str();
}

inline RunReport parse_report(const std::string& serialized) {
  return nlohmann::json::parse(serialized).get<RunReport>();
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed while writing: " + path.string());
}

/// Persist ledger, reports and results CSV into a run directory.
inline void write_run_outputs(const std::filesystem::path& dir, const RunReport& report,
                              std::span<const stats::TrialRecord> records) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream ledger;
    stats::write_ledger(ledger, records);
    write_text_file(dir / "ledger.txt", ledger.str());
  }
  write_text_file(dir / "report.json", emit_report(report, ReportFormat::structured));
  write_text_file(dir / "report.txt", emit_report(report, ReportFormat::text));
  {
    std::ostringstream csv;
    csv << "record,layer,x,y,a,b,count,value,stderr\n";
    csv.precision(17);
    if (report.quantum_layer)
      stats::append_results_csv(csv, stats::Layer::quantum, report.quantum_layer->estimate,
                                report.quantum_layer->significance);
    if (report.macro_layer)
      stats::append_results_csv(csv, stats::Layer::macro, report.macro_layer->estimate,
                                report.macro_layer->significance);
    write_text_file(dir / "results.csv", csv.str());
  }
}

/// Persist what a truncated run leaves behind: the completed ledger prefix
/// plus a marker naming the failing trial and stage.
inline void write_truncated_ledger(const std::filesystem::path& dir, const StageError& error) {
  std::filesystem::create_directories(dir);
  std::ostringstream ledger;
  stats::write_ledger(ledger, error.partial_ledger(), error.marker());
  write_text_file(dir / "ledger.txt", ledger.str());
}

}  // namespace bellcav::orchestrator
