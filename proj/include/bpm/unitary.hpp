#pragma once

#include <array>
#include <complex>

namespace bpm {

using cplx = std::complex<double>;

/// 2x2 complex matrix, row-major. Used for single-spin propagators and
/// target gates; nothing here enforces unitarity, see is_unitary().
struct Unitary2 {
  std::array<cplx, 4> m{cplx{1.0}, cplx{0.0}, cplx{0.0}, cplx{1.0}};

  static Unitary2 identity() { return {}; }
  static Unitary2 pauli_x();
  static Unitary2 pauli_y();
  static Unitary2 pauli_z();

  /// exp(-i (wx sx + wy sy + wz sz)), evaluated in closed form.
  static Unitary2 exp_su2(double wx, double wy, double wz);

  cplx operator()(int row, int col) const { return m[2 * row + col]; }
  cplx& operator()(int row, int col) { return m[2 * row + col]; }

  Unitary2 adjoint() const;
  cplx determinant() const;
  cplx trace() const { return m[0] + m[3]; }

  /// max_ij |(U^dagger U - I)_ij|
  double unitarity_error() const;
  bool is_unitary(double tol = 1e-10) const;
};

Unitary2 operator*(const Unitary2& a, const Unitary2& b);
Unitary2 operator*(cplx s, const Unitary2& a);
Unitary2 operator+(const Unitary2& a, const Unitary2& b);

/// max_ij |a_ij - b_ij|
double max_abs_diff(const Unitary2& a, const Unitary2& b);

}  // namespace bpm
