#include "bpm/unitary.hpp"

#include <algorithm>
#include <cmath>

namespace bpm {

Unitary2 Unitary2::pauli_x() { return {{cplx{0}, cplx{1}, cplx{1}, cplx{0}}}; }
Unitary2 Unitary2::pauli_y() { return {{cplx{0}, cplx{0, -1}, cplx{0, 1}, cplx{0}}}; }
Unitary2 Unitary2::pauli_z() { return {{cplx{1}, cplx{0}, cplx{0}, cplx{-1}}}; }

Unitary2 Unitary2::exp_su2(double wx, double wy, double wz) {
  // exp(-i theta n.sigma) = cos(theta) I - i sin(theta) n.sigma
  const double theta = std::sqrt(wx * wx + wy * wy + wz * wz);
  const double c = std::cos(theta);
  // sin(theta)/theta, with the removable singularity at 0
  const double s = theta > 1e-300 ? std::sin(theta) / theta : 1.0;
  return {{cplx{c, -s * wz}, cplx{-s * wy, -s * wx}, cplx{s * wy, -s * wx},
           cplx{c, s * wz}}};
}

Unitary2 Unitary2::adjoint() const {
  return {{std::conj(m[0]), std::conj(m[2]), std::conj(m[1]), std::conj(m[3])}};
}

cplx Unitary2::determinant() const { return m[0] * m[3] - m[1] * m[2]; }

double Unitary2::unitarity_error() const {
  const Unitary2 p = adjoint() * *this;
  return max_abs_diff(p, identity());
}

bool Unitary2::is_unitary(double tol) const { return unitarity_error() < tol; }

Unitary2 operator*(const Unitary2& a, const Unitary2& b) {
  return {{a.m[0] * b.m[0] + a.m[1] * b.m[2], a.m[0] * b.m[1] + a.m[1] * b.m[3],
           a.m[2] * b.m[0] + a.m[3] * b.m[2], a.m[2] * b.m[1] + a.m[3] * b.m[3]}};
}

Unitary2 operator*(cplx s, const Unitary2& a) {
  return {{s * a.m[0], s * a.m[1], s * a.m[2], s * a.m[3]}};
}

Unitary2 operator+(const Unitary2& a, const Unitary2& b) {
  return {{a.m[0] + b.m[0], a.m[1] + b.m[1], a.m[2] + b.m[2], a.m[3] + b.m[3]}};
}

double max_abs_diff(const Unitary2& a, const Unitary2& b) {
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(a.m[i] - b.m[i]));
  return worst;
}

}  // namespace bpm
