#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

namespace bellcav {

using cplx = std::complex<double>;
using Mat2 = std::array<std::array<cplx, 2>, 2>;
using Mat4 = std::array<std::array<cplx, 4>, 4>;

inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
  return out;
}

/// Tr[x y] without forming the product.
inline cplx trace_product(const Mat4& x, const Mat4& y) {
  cplx tr{0.0, 0.0};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) tr += x[i][j] * y[j][i];
  return tr;
}

inline cplx trace(const Mat4& m) { return m[0][0] + m[1][1] + m[2][2] + m[3][3]; }

/// Eigenvalues of a Hermitian 4x4 matrix, ascending. The complex matrix
/// H = A + iB is embedded as the real symmetric 8x8 block matrix
/// [[A, -B], [B, A]], whose spectrum is that of H with every eigenvalue
/// doubled; a plain cyclic Jacobi sweep then diagonalizes it.
inline std::array<double, 4> hermitian_eigenvalues(const Mat4& h) {
  constexpr int n = 8;
  std::array<std::array<double, n>, n> s{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double re = h[i][j].real();
      const double im = h[i][j].imag();
      s[i][j] = re;
      s[i + 4][j + 4] = re;
      s[i][j + 4] = -im;
      s[i + 4][j] = im;
    }
  }

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::abs(s[p][q]);
    if (off < 1e-15) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(s[p][q]) < 1e-18) continue;
        const double tau = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        for (int k = 0; k < n; ++k) {
          const double skp = s[k][p];
          const double skq = s[k][q];
          s[k][p] = c * skp - sn * skq;
          s[k][q] = sn * skp + c * skq;
        }
        for (int k = 0; k < n; ++k) {
          const double spk = s[p][k];
          const double sqk = s[q][k];
          s[p][k] = c * spk - sn * sqk;
          s[q][k] = sn * spk + c * sqk;
        }
      }
    }
  }

  std::array<double, n> diag{};
  for (int i = 0; i < n; ++i) diag[i] = s[i][i];
  std::sort(diag.begin(), diag.end());
  // Doubled spectrum: adjacent pairs are the same eigenvalue.
  return {diag[0], diag[2], diag[4], diag[6]};
}

}  // namespace bellcav
