#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace bellcav {

/// Conditional probability table P(a,b|x,y) of a two-party, two-setting,
/// two-outcome Bell scenario. 16 cells indexed by outcomes a,b and settings
/// x,y, all in {0,1}.
struct BehaviorTable {
  std::array<double, 16> p{};

  static constexpr std::size_t index(int a, int b, int x, int y) {
    return static_cast<std::size_t>(((a * 2 + b) * 2 + x) * 2 + y);
  }

  double at(int a, int b, int x, int y) const { return p[index(a, b, x, y)]; }
  double& at(int a, int b, int x, int y) { return p[index(a, b, x, y)]; }

  static BehaviorTable uniform() {
    BehaviorTable t;
    t.p.fill(0.25);
    return t;
  }

  bool finite() const {
    for (double v : p)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Largest |sum_{a,b} p(a,b|x,y) - 1| over the four setting pairs.
  double normalization_error() const {
    double worst = 0.0;
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        double sum = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) sum += at(a, b, x, y);
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    return worst;
  }

  /// Largest marginal mismatch across the other party's setting. Zero for
  /// any behavior with well-defined local marginals (no-signaling).
  double signaling() const {
    double worst = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int x = 0; x < 2; ++x) {
        double m0 = at(a, 0, x, 0) + at(a, 1, x, 0);
        double m1 = at(a, 0, x, 1) + at(a, 1, x, 1);
        worst = std::max(worst, std::abs(m0 - m1));
      }
    for (int b = 0; b < 2; ++b)
      for (int y = 0; y < 2; ++y) {
        double m0 = at(0, b, 0, y) + at(1, b, 0, y);
        double m1 = at(0, b, 1, y) + at(1, b, 1, y);
        worst = std::max(worst, std::abs(m0 - m1));
      }
    return worst;
  }

  /// Throws std::invalid_argument naming the violated invariant. Normalization
  /// and range only; no-signaling is a property of *generated* tables and is
  /// checked separately (finite-sample estimates legitimately fluctuate).
  void validate(double norm_tol = 1e-9) const {
    if (!finite()) throw std::invalid_argument("behavior table contains NaN or infinity");
    for (double v : p)
      if (v < -norm_tol || v > 1.0 + norm_tol)
        throw std::invalid_argument("behavior table entry outside [0,1]: " + std::to_string(v));
    double err = normalization_error();
    if (err > norm_tol)
      throw std::invalid_argument("behavior table not normalized per setting pair, error " +
                                  std::to_string(err));
  }

  friend bool operator==(const BehaviorTable&, const BehaviorTable&) = default;
};

/// E(x,y) = sum_{a,b} (-1)^(a xor b) P(a,b|x,y).
inline double correlator(const BehaviorTable& t, int x, int y) {
  double e = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) e += ((a ^ b) ? -1.0 : 1.0) * t.at(a, b, x, y);
  return e;
}

inline void to_json(nlohmann::json& j, const BehaviorTable& t) {
  // Nested arrays p[a][b][x][y].
  auto arr = nlohmann::json::array();
  for (int a = 0; a < 2; ++a) {
    auto ja = nlohmann::json::array();
    for (int b = 0; b < 2; ++b) {
      auto jb = nlohmann::json::array();
      for (int x = 0; x < 2; ++x) {
        auto jx = nlohmann::json::array();
        for (int y = 0; y < 2; ++y) jx.push_back(t.at(a, b, x, y));
        jb.push_back(jx);
      }
      ja.push_back(jb);
    }
    arr.push_back(ja);
  }
  j = nlohmann::json{{"p", arr}};
}

inline void from_json(const nlohmann::json& j, BehaviorTable& t) {
  const auto& arr = j.at("p");
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) t.at(a, b, x, y) = arr.at(a).at(b).at(x).at(y).get<double>();
}

}  // namespace bellcav
