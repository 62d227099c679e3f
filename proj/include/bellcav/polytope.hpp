#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bellcav/behavior.hpp"

namespace bellcav::polytope {

/// One of the 16 deterministic strategies of the 2-2-2 scenario: a fixed
/// outcome per party and setting.
struct DeterministicStrategy {
  std::array<int, 2> alice_map{};  // setting -> outcome
  std::array<int, 2> bob_map{};

  static DeterministicStrategy from_index(int k) {
    return {{(k >> 0) & 1, (k >> 1) & 1}, {(k >> 2) & 1, (k >> 3) & 1}};
  }

  int index() const {
    return alice_map[0] | (alice_map[1] << 1) | (bob_map[0] << 2) | (bob_map[1] << 3);
  }

  friend bool operator==(const DeterministicStrategy&, const DeterministicStrategy&) = default;
};

inline BehaviorTable vertex_behavior(const DeterministicStrategy& s) {
  BehaviorTable t;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) t.at(s.alice_map[x], s.bob_map[y], x, y) = 1.0;
  return t;
}

/// All 16 extreme points of the local polytope, indexed by strategy index.
inline std::vector<BehaviorTable> enumerate_deterministic_vertices() {
  std::vector<BehaviorTable> vertices;
  vertices.reserve(16);
  for (int k = 0; k < 16; ++k) vertices.push_back(vertex_behavior(DeterministicStrategy::from_index(k)));
  return vertices;
}

/// S = E(0,0) + E(0,1) + E(1,0) - E(1,1), with E(x,y) = sum (-1)^(a xor b) p.
/// |S| <= 2 on the local polytope, 2*sqrt(2) for quantum behaviors, 4 at most.
inline double chsh_value(const BehaviorTable& behavior) {
  behavior.validate();
  return correlator(behavior, 0, 0) + correlator(behavior, 0, 1) + correlator(behavior, 1, 0) -
         correlator(behavior, 1, 1);
}

/// LP solver failure is reported as this, never as a locality verdict.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Verdict { local, nonlocal };

/// Outcome of the local-polytope membership LP. When local, `weights` mixes
/// the 16 deterministic vertices back into the behavior within `distance`.
struct LocalityCertificate {
  Verdict verdict = Verdict::local;
  std::vector<double> weights;  // present iff local
  double distance = 0.0;        // max-norm residual of the best vertex mixture
  double chsh = 0.0;

  friend bool operator==(const LocalityCertificate&, const LocalityCertificate&) = default;
};

namespace detail {

/// Dense two-phase simplex, max c.x s.t. A x <= b, x >= 0. Pair-comparison
/// pivoting keeps it off degenerate cycles. Sized for tiny problems.
class Simplex {
 public:
  Simplex(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
          const std::vector<double>& c)
      : m_(b.size()), n_(c.size()), nonbasic_(n_ + 1), basic_(m_), d_(m_ + 2, std::vector<double>(n_ + 2, 0.0)) {
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j) d_[i][j] = a[i][j];
    for (std::size_t i = 0; i < m_; ++i) {
      basic_[i] = static_cast<int>(n_ + i);
      d_[i][n_] = -1.0;
      d_[i][n_ + 1] = b[i];
    }
    for (std::size_t j = 0; j < n_; ++j) {
      nonbasic_[j] = static_cast<int>(j);
      d_[m_][j] = -c[j];
    }
    nonbasic_[n_] = -1;
    d_[m_ + 1][n_] = 1.0;
  }

  /// Returns the optimum; -inf if infeasible, +inf if unbounded.
  double solve(std::vector<double>& x) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::size_t r = 0;
    for (std::size_t i = 1; i < m_; ++i)
      if (d_[i][n_ + 1] < d_[r][n_ + 1]) r = i;
    if (d_[r][n_ + 1] < -kEps) {
      pivot(r, n_);
      if (!iterate(2) || d_[m_ + 1][n_ + 1] < -kEps) return -kInf;
      for (std::size_t i = 0; i < m_; ++i)
        if (basic_[i] == -1) {
          std::size_t s = 0;
          for (std::size_t j = 1; j <= n_; ++j)
            if (ordered_before(d_[i][j], nonbasic_[j], d_[i][s], nonbasic_[s])) s = j;
          pivot(i, s);
        }
    }
    const bool bounded = iterate(1);
    x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basic_[i] >= 0 && basic_[i] < static_cast<int>(n_)) x[basic_[i]] = d_[i][n_ + 1];
    return bounded ? d_[m_][n_ + 1] : kInf;
  }

 private:
  static constexpr double kEps = 1e-11;

  static bool ordered_before(double v1, int i1, double v2, int i2) {
    return std::pair<double, int>(v1, i1) < std::pair<double, int>(v2, i2);
  }

  void pivot(std::size_t r, std::size_t s) {
    auto& row = d_[r];
    const double inv = 1.0 / row[s];
    for (std::size_t i = 0; i < m_ + 2; ++i) {
      if (i == r || std::abs(d_[i][s]) <= kEps) continue;
      auto& other = d_[i];
      const double factor = other[s] * inv;
      for (std::size_t j = 0; j < n_ + 2; ++j) other[j] -= row[j] * factor;
      other[s] = row[s] * factor;
    }
    for (std::size_t j = 0; j < n_ + 2; ++j)
      if (j != s) row[j] *= inv;
    for (std::size_t i = 0; i < m_ + 2; ++i)
      if (i != r) d_[i][s] *= -inv;
    row[s] = inv;
    std::swap(basic_[r], nonbasic_[s]);
  }

  bool iterate(int phase) {
    const std::size_t obj = m_ + static_cast<std::size_t>(phase) - 1;
    for (;;) {
      std::size_t s = n_ + 1;
      for (std::size_t j = 0; j <= n_; ++j) {
        if (nonbasic_[j] == -phase) continue;
        if (s == n_ + 1 || ordered_before(d_[obj][j], nonbasic_[j], d_[obj][s], nonbasic_[s]))
          s = j;
      }
      if (d_[obj][s] >= -kEps) return true;
      std::size_t r = m_;
      for (std::size_t i = 0; i < m_; ++i) {
        if (d_[i][s] <= kEps) continue;
        if (r == m_ || ordered_before(d_[i][n_ + 1] / d_[i][s], basic_[i],
                                      d_[r][n_ + 1] / d_[r][s], basic_[r]))
          r = i;
      }
      if (r == m_) return false;  // unbounded direction
      pivot(r, s);
    }
  }

  std::size_t m_, n_;
  std::vector<int> nonbasic_, basic_;
  std::vector<std::vector<double>> d_;
};

}  // namespace detail

/// Decide local-polytope membership by LP over the 16 deterministic vertices:
/// minimize the max-norm residual eps of sum_k w_k V_k = P subject to w >= 0,
/// sum w = 1. Verdict is local iff the best mixture reproduces the behavior
/// within `tol`.
inline LocalityCertificate local_membership(const BehaviorTable& behavior, double tol = 1e-7) {
  behavior.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("membership tolerance must be positive");

  const auto vertices = enumerate_deterministic_vertices();
  constexpr std::size_t n_vars = 17;  // 16 weights + eps
  constexpr std::size_t n_rows = 34;  // 2 per cell + 2 for sum w = 1

  std::vector<std::vector<double>> a(n_rows, std::vector<double>(n_vars, 0.0));
  std::vector<double> b(n_rows, 0.0);
  std::vector<double> c(n_vars, 0.0);
  c[16] = -1.0;  // maximize -eps

  for (std::size_t cell = 0; cell < 16; ++cell) {
    for (std::size_t k = 0; k < 16; ++k) {
      a[2 * cell][k] = vertices[k].p[cell];
      a[2 * cell + 1][k] = -vertices[k].p[cell];
    }
    a[2 * cell][16] = -1.0;
    a[2 * cell + 1][16] = -1.0;
    b[2 * cell] = behavior.p[cell];
    b[2 * cell + 1] = -behavior.p[cell];
  }
  for (std::size_t k = 0; k < 16; ++k) {
    a[32][k] = 1.0;
    a[33][k] = -1.0;
  }
  b[32] = 1.0;
  b[33] = -1.0;

  std::vector<double> solution;
  const double objective = detail::Simplex(a, b, c).solve(solution);
  if (!std::isfinite(objective))
    throw SolverError("membership LP did not converge to a finite optimum");

  std::vector<double> weights(solution.begin(), solution.begin() + 16);
  for (double& w : weights)
    if (w < 0.0 && w > -1e-9) w = 0.0;

  // Certify from the weights themselves, not the tableau objective.
  double residual = 0.0;
  double weight_sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw SolverError("membership LP returned a negative weight");
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9)
    throw SolverError("membership LP weights do not sum to 1");
  for (std::size_t cell = 0; cell < 16; ++cell) {
    double mix = 0.0;
    for (std::size_t k = 0; k < 16; ++k) mix += weights[k] * vertices[k].p[cell];
    residual = std::max(residual, std::abs(mix - behavior.p[cell]));
  }

  LocalityCertificate cert;
  cert.distance = residual;
  cert.chsh = chsh_value(behavior);
  if (residual <= tol) {
    cert.verdict = Verdict::local;
    cert.weights = std::move(weights);
  } else {
    cert.verdict = Verdict::nonlocal;
  }
  return cert;
}

inline void to_json(nlohmann::json& j, const LocalityCertificate& c) {
  j = nlohmann::json{{"verdict", c.verdict == Verdict::local ? "local" : "nonlocal"},
                     {"distance", c.distance},
                     {"chsh", c.chsh}};
  if (c.verdict == Verdict::local) j["weights"] = c.weights;
}

inline void from_json(const nlohmann::json& j, LocalityCertificate& c) {
  const auto verdict = j.at("verdict").get<std::string>();
  if (verdict == "local")
    c.verdict = Verdict::local;
  else if (verdict == "nonlocal")
    c.verdict = Verdict::nonlocal;
  else
    throw std::invalid_argument("unknown verdict: " + verdict);
  c.distance = j.at("distance").get<double>();
  c.chsh = j.at("chsh").get<double>();
  c.weights.clear();
  if (j.contains("weights")) c.weights = j.at("weights").get<std::vector<double>>();
}

}  // namespace bellcav::polytope
