// Command-line front end: run the Bell-Cavendish relay pipeline, test
// behavior tables for local-polytope membership, audit protocol schedules
// for light-cone violations, and dump the deterministic vertices.
//
// Exit codes: 0 success (and affirmative verdicts), 1 validation error,
// 2 runtime error, 3 inconclusive pointer readout, 4 negative verdict
// (falsify: behavior is local; causality: loophole present).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bellcav/bellcav.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInconclusive = 3;
constexpr int kExitNegativeVerdict = 4;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  return nlohmann::json::parse(in);
}

void write_or_print(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  bellcav::orchestrator::write_text_file(out_path, content);
}

struct RunOptions {
  std::string config_path;
  std::string out_dir;  // empty: use the config's output.dir
  std::string trajectory_dir;
  std::uint64_t trials = 0;
  bool trials_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 0;  // 0 = all cores; execution knob, not experiment identity
};

int command_run(const RunOptions& opt) {
  namespace orch = bellcav::orchestrator;
  orch::ExperimentConfig config =
      opt.config_path.empty() ? orch::ExperimentConfig{} : orch::load_config_file(opt.config_path);
  if (opt.trials_set) config.trials = opt.trials;
  if (opt.seed_set) config.master_seed = opt.seed;
  config.validate();
  const std::string out_dir = opt.out_dir.empty() ? config.output_dir : opt.out_dir;

  if (!opt.trajectory_dir.empty()) {
    // Reference relay trajectories for both orientation bits, for plotting.
    std::filesystem::create_directories(opt.trajectory_dir);
    for (int bit : {0, 1}) {
      const auto traj = bellcav::cavendish::integrate_pendulum(
          config.balance, bellcav::cavendish::PendulumState{}, bit, config.dt, config.t_max);
      std::ofstream csv(std::filesystem::path(opt.trajectory_dir) /
                        ("relay_bit" + std::to_string(bit) + ".csv"));
      bellcav::cavendish::write_trajectory_csv(csv, traj);
    }
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const auto records = orch::simulate_trials(config, opt.threads);
    orch::RunReport report = orch::analyze(config, records);
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    orch::write_run_outputs(out_dir, report, records);
    std::cout << orch::emit_report(report, orch::ReportFormat::text);
    std::cout << "wall clock: " << report.wall_clock_seconds << " s\n";
    std::cout << "outputs written to " << out_dir << std::endl;
    return kExitOk;
  } catch (const orch::StageError& e) {
    orch::write_truncated_ledger(out_dir, e);
    std::cerr << "run aborted: " << e.what() << "\n"
              << "partial ledger written to " << out_dir << std::endl;
    switch (e.kind()) {
      case orch::FailureKind::validation: return kExitValidation;
      case orch::FailureKind::inconclusive: return kExitInconclusive;
      default: return kExitRuntime;
    }
  }
}

int command_falsify(const std::string& behavior_path, double tol, const std::string& out_path) {
  const auto table = load_json(behavior_path).get<bellcav::BehaviorTable>();
  const auto cert = bellcav::polytope::local_membership(table, tol);
  nlohmann::json j = cert;
  write_or_print(out_path, j.dump(2) + "\n");
  return cert.verdict == bellcav::polytope::Verdict::nonlocal ? kExitOk : kExitNegativeVerdict;
}

int command_causality(const std::string& schedule_path, const std::string& mode_name, double c,
                      const std::string& out_path) {
  const auto j = load_json(schedule_path);
  const auto events = j.at("events").get<std::vector<bellcav::causality::SpacetimeEvent>>();
  bellcav::causality::AuditMode mode;
  if (mode_name == "strict")
    mode = bellcav::causality::AuditMode::strict;
  else if (mode_name == "relaxed")
    mode = bellcav::causality::AuditMode::relaxed;
  else
    throw std::invalid_argument("mode must be strict or relaxed");
  const auto verdict = bellcav::causality::audit_schedule(events, mode, c);
  nlohmann::json out = verdict;
  write_or_print(out_path, out.dump(2) + "\n");
  return verdict.loophole_free ? kExitOk : kExitNegativeVerdict;
}

int command_reduce(const std::string& model_path, const std::string& out_path) {
  const auto model = load_json(model_path).get<bellcav::lhv::ApparatusModel>();
  const auto reduced = bellcav::lhv::reduce_apparatus_model(model);
  const auto direct = bellcav::lhv::apparatus_behavior_direct(model);
  const auto via_reduction = bellcav::lhv::behavior_from_lhv(reduced);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < 16; ++i)
    max_diff = std::max(max_diff, std::abs(direct.p[i] - via_reduction.p[i]));
  nlohmann::json j{{"reduced_model", reduced},
                   {"behavior", direct},
                   {"chsh", bellcav::polytope::chsh_value(direct)},
                   {"max_difference_direct_vs_reduced", max_diff}};
  write_or_print(out_path, j.dump(2) + "\n");
  return kExitOk;
}

int command_vertices(const std::string& out_path) {
  const auto vertices = bellcav::polytope::enumerate_deterministic_vertices();
  auto arr = nlohmann::json::array();
  for (int k = 0; k < 16; ++k) {
    const auto strategy = bellcav::polytope::DeterministicStrategy::from_index(k);
    nlohmann::json entry = vertices[static_cast<std::size_t>(k)];
    entry["strategy"] = {{"alice_map", strategy.alice_map},
                         {"bob_map", strategy.bob_map},
                         {"index", k}};
    entry["chsh"] = bellcav::polytope::chsh_value(vertices[static_cast<std::size_t>(k)]);
    arr.push_back(entry);
  }
  write_or_print(out_path, nlohmann::json{{"vertices", arr}}.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bell test relayed through classical torsion-balance dynamics"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "run the full trial pipeline and write a report");
  run->add_option("--config", run_opt.config_path, "experiment config file (JSON)");
  run->add_option("--out", run_opt.out_dir, "output directory (default: config output.dir, else \"out\")");
  auto* trials_opt = run->add_option("--trials", run_opt.trials, "override trial count");
  auto* seed_opt = run->add_option("--seed", run_opt.seed, "override master seed");
  run->add_option("--threads", run_opt.threads, "worker threads (0 = all cores)");
  run->add_option("--export-trajectories", run_opt.trajectory_dir,
                  "also write reference relay trajectories (CSV) to this directory");

  std::string behavior_path;
  double falsify_tol = 1e-7;
  std::string falsify_out;
  auto* falsify = app.add_subcommand(
      "falsify", "test a behavior table for local-polytope membership (exit 0 iff nonlocal)");
  falsify->add_option("--behavior", behavior_path, "behavior table file (JSON)")->required();
  falsify->add_option("--tol", falsify_tol, "membership tolerance (default 1e-7)");
  falsify->add_option("--out", falsify_out, "write certificate here instead of stdout");

  std::string schedule_path;
  std::string mode_name = "strict";
  double light_speed = bellcav::causality::kDefaultLightSpeed;
  std::string causality_out;
  auto* causality = app.add_subcommand(
      "causality", "light-cone audit of a protocol schedule (exit 0 iff loophole-free)");
  causality->add_option("--schedule", schedule_path, "schedule file (JSON)")->required();
  causality->add_option("--mode", mode_name, "strict or relaxed (default strict)");
  causality->add_option("--c", light_speed, "signal speed in m/s");
  causality->add_option("--out", causality_out, "write verdict here instead of stdout");

  std::string model_path;
  std::string reduce_out;
  auto* reduce = app.add_subcommand(
      "reduce", "rewrite an apparatus model in standard local form and verify the equivalence");
  reduce->add_option("--model", model_path, "apparatus model file (JSON)")->required();
  reduce->add_option("--out", reduce_out, "write result here instead of stdout");

  std::string vertices_out;
  auto* vertices =
      app.add_subcommand("vertices", "dump the 16 deterministic-strategy behavior tables");
  vertices->add_option("--out", vertices_out, "write tables here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  run_opt.trials_set = trials_opt->count() > 0;
  run_opt.seed_set = seed_opt->count() > 0;

  try {
    if (run->parsed()) return command_run(run_opt);
    if (falsify->parsed()) return command_falsify(behavior_path, falsify_tol, falsify_out);
    if (causality->parsed())
      return command_causality(schedule_path, mode_name, light_speed, causality_out);
    if (reduce->parsed()) return command_reduce(model_path, reduce_out);
    if (vertices->parsed()) return command_vertices(vertices_out);
  } catch (const bellcav::cavendish::InconclusiveReadout& e) {
    std::cerr << "inconclusive readout: " << e.what() << std::endl;
    return kExitInconclusive;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitRuntime;  // unreachable with require_subcommand(1)
}
