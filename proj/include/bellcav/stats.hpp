#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bellcav/behavior.hpp"
#include "bellcav/polytope.hpp"

namespace bellcav::stats {

/// One experiment trial: quantum settings/outcomes and the relayed
/// macroscopic pointer bits, plus the per-trial stream seed.
struct TrialRecord {
  std::uint64_t trial_id = 0;
  int x = 0, y = 0;              // setting bits
  int a = 0, b = 0;              // quantum outcome bits
  int a_macro = 0, b_macro = 0;  // pointer bits after the relay
  std::uint64_t seed = 0;

  void validate() const {
    for (int v : {x, y, a, b, a_macro, b_macro})
      if (v != 0 && v != 1) throw std::invalid_argument("trial record bit outside {0,1}");
  }

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

enum class Layer { quantum, macro };

inline const char* to_string(Layer layer) { return layer == Layer::quantum ? "quantum" : "macro"; }

/// A setting pair with no trials at all; estimation cannot proceed.
class EmptyCellError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Empirical behavior with per-cell counts and binomial standard errors.
struct EstimatedBehavior {
  BehaviorTable table;
  std::array<std::int64_t, 16> counts{};
  std::array<double, 16> stderrs{};
  std::array<std::int64_t, 4> setting_totals{};  // [x*2+y]

  std::int64_t total(int x, int y) const { return setting_totals[x * 2 + y]; }

  friend bool operator==(const EstimatedBehavior&, const EstimatedBehavior&) = default;
};

/// Relative-frequency estimate of P(a,b|x,y) at one layer of the experiment.
/// Deterministic and permutation-invariant over the records.
inline EstimatedBehavior estimate_behavior(std::span<const TrialRecord> records, Layer layer) {
  EstimatedBehavior est;
  for (const auto& r : records) {
    r.validate();
    const int a = layer == Layer::quantum ? r.a : r.a_macro;
    const int b = layer == Layer::quantum ? r.b : r.b_macro;
    est.counts[BehaviorTable::index(a, b, r.x, r.y)] += 1;
    est.setting_totals[r.x * 2 + r.y] += 1;
  }
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const std::int64_t n = est.total(x, y);
      if (n == 0)
        throw EmptyCellError("no records for setting cell (x=" + std::to_string(x) +
                             ", y=" + std::to_string(y) + ")");
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const auto idx = BehaviorTable::index(a, b, x, y);
          const double p = static_cast<double>(est.counts[idx]) / static_cast<double>(n);
          est.table.p[idx] = p;
          est.stderrs[idx] = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        }
    }
  return est;
}

struct ChshSignificance {
  double s_hat = 0.0;
  double sigma_s = 0.0;
  double z = 0.0;  // (|s_hat| - 2) / sigma_s

  friend bool operator==(const ChshSignificance&, const ChshSignificance&) = default;
};

/// CHSH estimate with propagated multinomial error. Each correlator has
/// var(E) = (1 - E^2)/n for its own setting cell, and cells are disjoint
/// trial sets, so variances add across the four correlators.
inline ChshSignificance chsh_significance(const EstimatedBehavior& est) {
  ChshSignificance sig;
  double var = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const std::int64_t n = est.total(x, y);
      if (n == 0) throw std::invalid_argument("estimate has an empty setting cell");
      const double e = correlator(est.table, x, y);
      var += (1.0 - e * e) / static_cast<double>(n);
    }
  sig.s_hat = polytope::chsh_value(est.table);
  sig.sigma_s = std::sqrt(var);
  const double excess = std::abs(sig.s_hat) - 2.0;
  if (sig.sigma_s > 0.0) {
    sig.z = excess / sig.sigma_s;
  } else {
    // Degenerate (deterministic) estimate: zero exactly at the local
    // boundary, capped elsewhere so the value stays JSON-representable.
    sig.z = excess == 0.0 ? 0.0 : std::copysign(1e9, excess);
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Ledger and results formats
// ---------------------------------------------------------------------------

inline constexpr const char* kLedgerHeader = "# trial_id x y a b a_macro b_macro seed";

inline std::string format_ledger_line(const TrialRecord& r) {
  return std::to_string(r.trial_id) + ' ' + std::to_string(r.x) + ' ' + std::to_string(r.y) + ' ' +
         std::to_string(r.a) + ' ' + std::to_string(r.b) + ' ' + std::to_string(r.a_macro) + ' ' +
         std::to_string(r.b_macro) + ' ' + std::to_string(r.seed);
}

inline TrialRecord parse_ledger_line(const std::string& line) {
  TrialRecord r;
  std::istringstream in(line);
  if (!(in >> r.trial_id >> r.x >> r.y >> r.a >> r.b >> r.a_macro >> r.b_macro >> r.seed))
    throw std::invalid_argument("malformed ledger line: " + line);
  r.validate();
  return r;
}

/// Line-delimited ledger, one trial per line in trial order. A truncated run
/// keeps the completed prefix and ends with a marker naming the failure.
inline void write_ledger(std::ostream& out, std::span<const TrialRecord> records,
                         const std::optional<std::string>& truncation_marker = std::nullopt) {
  out << kLedgerHeader << '\n';
  for (const auto& r : records) out << format_ledger_line(r) << '\n';
  if (truncation_marker) out << "#TRUNCATED " << *truncation_marker << '\n';
}

/// One layer's slice of the results CSV: cell estimates, correlators, CHSH.
inline void append_results_csv(std::ostream& out, Layer layer, const EstimatedBehavior& est,
                               const ChshSignificance& sig) {
  const char* name = to_string(layer);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const auto idx = BehaviorTable::index(a, b, x, y);
          out << "cell," << name << ',' << x << ',' << y << ',' << a << ',' << b << ','
              << est.counts[idx] << ',' << est.table.p[idx] << ',' << est.stderrs[idx] << '\n';
        }
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      out << "correlator," << name << ',' << x << ',' << y << ",,,," << correlator(est.table, x, y)
          << ",\n";
  out << "chsh," << name << ",,,,,," << sig.s_hat << ',' << sig.sigma_s << '\n';
  out << "z," << name << ",,,,,," << sig.z << ",\n";
}

inline void to_json(nlohmann::json& j, const EstimatedBehavior& est) {
  j = nlohmann::json{{"table", est.table},
                     {"counts", est.counts},
                     {"stderrs", est.stderrs},
                     {"setting_totals", est.setting_totals}};
}

inline void from_json(const nlohmann::json& j, EstimatedBehavior& est) {
  est.table = j.at("table").get<BehaviorTable>();
  est.counts = j.at("counts").get<std::array<std::int64_t, 16>>();
  est.stderrs = j.at("stderrs").get<std::array<double, 16>>();
  est.setting_totals = j.at("setting_totals").get<std::array<std::int64_t, 4>>();
}

inline void to_json(nlohmann::json& j, const ChshSignificance& s) {
  j = nlohmann::json{{"s_hat", s.s_hat}, {"sigma_s", s.sigma_s}, {"z", s.z}};
}

inline void from_json(const nlohmann::json& j, ChshSignificance& s) {
  s.s_hat = j.at("s_hat").get<double>();
  s.sigma_s = j.at("sigma_s").get<double>();
  s.z = j.at("z").get<double>();
}

}  // namespace bellcav::stats
