#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "bellcav/behavior.hpp"
#include "bellcav/linalg.hpp"
#include "bellcav/rng.hpp"

namespace bellcav::quantum {

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kEigenvalueFloor = -1e-10;
inline constexpr double kImaginaryResidueTol = 1e-10;

/// 4x4 density matrix of a two-qubit system, basis |00>,|01>,|10>,|11>.
struct TwoQubitState {
  Mat4 rho{};

  static TwoQubitState singlet() {
    // (|01> - |10>)/sqrt(2)
    TwoQubitState s;
    s.rho[1][1] = 0.5;
    s.rho[2][2] = 0.5;
    s.rho[1][2] = -0.5;
    s.rho[2][1] = -0.5;
    return s;
  }

  static TwoQubitState maximally_mixed() {
    TwoQubitState s;
    for (int i = 0; i < 4; ++i) s.rho[i][i] = 0.25;
    return s;
  }

  void validate() const {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        if (!std::isfinite(rho[i][j].real()) || !std::isfinite(rho[i][j].imag()))
          throw std::invalid_argument("state matrix contains NaN or infinity");
        if (std::abs(rho[i][j] - std::conj(rho[j][i])) > kHermitianTol)
          throw std::invalid_argument("state matrix is not Hermitian");
      }
    const cplx tr = trace(rho);
    if (std::abs(tr - cplx{1.0, 0.0}) > kTraceTol)
      throw std::invalid_argument("state matrix trace is not 1");
    const auto eig = hermitian_eigenvalues(rho);
    if (eig[0] < kEigenvalueFloor)
      throw std::invalid_argument("state matrix is not positive semidefinite, min eigenvalue " +
                                  std::to_string(eig[0]));
  }

  friend bool operator==(const TwoQubitState&, const TwoQubitState&) = default;
};

/// Projective measurement directions on the Bloch equator, one angle per
/// binary setting and party. Angles reduced to (-pi, pi].
struct MeasurementSettings {
  std::array<double, 2> alice_angles{};
  std::array<double, 2> bob_angles{};

  static double reduce(double angle) {
    if (!std::isfinite(angle)) throw std::invalid_argument("measurement angle not finite");
    double r = std::remainder(angle, 2.0 * std::numbers::pi);
    return r == -0.0 ? 0.0 : r;
  }

  static MeasurementSettings from_angles(double a0, double a1, double b0, double b1) {
    return MeasurementSettings{{reduce(a0), reduce(a1)}, {reduce(b0), reduce(b1)}};
  }

  /// Settings reaching the Tsirelson point for the singlet with the CHSH
  /// combination E(0,0)+E(0,1)+E(1,0)-E(1,1).
  static MeasurementSettings canonical_chsh() {
    const double pi = std::numbers::pi;
    return from_angles(0.0, pi / 2.0, pi / 4.0, -pi / 4.0);
  }

  void validate() const {
    for (double v : alice_angles)
      if (!std::isfinite(v)) throw std::invalid_argument("alice angle not finite");
    for (double v : bob_angles)
      if (!std::isfinite(v)) throw std::invalid_argument("bob angle not finite");
  }

  friend bool operator==(const MeasurementSettings&, const MeasurementSettings&) = default;
};

namespace detail {

/// Projector onto the (-1)^a eigenspace of cos(t) sx + sin(t) sy.
inline Mat2 equator_projector(int outcome, double angle) {
  const double sign = outcome == 0 ? 1.0 : -1.0;
  Mat2 m{};
  m[0][0] = 0.5;
  m[1][1] = 0.5;
  m[0][1] = 0.5 * sign * cplx{std::cos(angle), -std::sin(angle)};
  m[1][0] = 0.5 * sign * cplx{std::cos(angle), std::sin(angle)};
  return m;
}

}  // namespace detail

/// Born-rule behavior P(a,b|x,y) = Tr[rho (Pi_a(x) kron Pi_b(y))].
inline BehaviorTable behavior_from_state(const TwoQubitState& state,
                                         const MeasurementSettings& settings) {
  state.validate();
  settings.validate();
  BehaviorTable table;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const Mat4 proj = kron(detail::equator_projector(a, settings.alice_angles[x]),
                                 detail::equator_projector(b, settings.bob_angles[y]));
          const cplx value = trace_product(state.rho, proj);
          if (std::abs(value.imag()) > kImaginaryResidueTol)
            throw std::runtime_error("Born-rule probability has imaginary residue " +
                                     std::to_string(value.imag()));
          // Tiny negative round-off is clamped; anything larger fails validation below.
          double pr = value.real();
          if (pr < 0.0 && pr > -kImaginaryResidueTol) pr = 0.0;
          table.at(a, b, x, y) = pr;
        }
  table.validate();
  if (table.signaling() > 1e-9)
    throw std::runtime_error("generated behavior violates no-signaling");
  return table;
}

/// One draw from the four-outcome distribution at settings (x, y).
inline std::pair<int, int> sample_outcomes(const BehaviorTable& behavior, int x, int y,
                                           RandomStream& rng) {
  if (x < 0 || x > 1 || y < 0 || y > 1) throw std::invalid_argument("setting bits must be 0 or 1");
  const double u = rng.next_double();
  double cum = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      cum += behavior.at(a, b, x, y);
      if (u < cum) return {a, b};
    }
  return {1, 1};
}

}  // namespace bellcav::quantum
