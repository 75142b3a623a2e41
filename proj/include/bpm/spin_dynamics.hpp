#pragma once

#include <array>
#include <variant>
#include <vector>

#include "bpm/control_field.hpp"
#include "bpm/noise_grid.hpp"
#include "bpm/unitary.hpp"

namespace bpm {

inline constexpr int kDefaultSteps = 1000;

/// Hamiltonian H = v . sigma written as its Pauli vector (rad/s).
using PauliVector = std::array<double, 3>;

/// One fourth-order Magnus step of length h for H(t) = v(t) . sigma, given v
/// at the two Gauss-Legendre nodes t0 + (1/2 -+ sqrt(3)/6) h. The result is an
/// exact SU(2) element, so unitarity does not drift with the step count.
Unitary2 magnus_step(double h, const PauliVector& v1, const PauliVector& v2);

/// Gauss-Legendre node offsets within a unit step.
inline constexpr double kGaussNodeLo = 0.5 - 0.28867513459481288225;
inline constexpr double kGaussNodeHi = 0.5 + 0.28867513459481288225;

/// Drive quadratures tabulated at the Magnus nodes of every step. They do not
/// depend on (delta, kappa), so one table serves a whole noise grid.
struct SampledDrive {
  double step = 0.0;
  std::vector<Quadratures> lo;  // node 1 of each step
  std::vector<Quadratures> hi;  // node 2 of each step
  int n_steps() const { return static_cast<int>(lo.size()); }
};

SampledDrive sample_drive(const ControlField& field, int n_steps = kDefaultSteps);

/// Time-ordered propagator of H = (delta/2) sz + kappa (Ox sx + Oy sy) over
/// [0, T].
Unitary2 propagate(const SampledDrive& drive, double detuning, double drift);
Unitary2 propagate(const ControlField& field, double detuning, double drift,
                   int n_steps = kDefaultSteps);

/// |<1| U |0>|^2
double state_fidelity(const Unitary2& u);
double state_fidelity(const ControlField& field, double detuning, double drift,
                      int n_steps = kDefaultSteps);

/// 1/2 + 1/3 sum_e Tr(Ut (s_e/2) Ut^dag U (s_e/2) U^dag). Throws
/// kInvalidArgument when `target` is not unitary.
double gate_fidelity(const Unitary2& u, const Unitary2& target);
double gate_fidelity(const ControlField& field, const Unitary2& target,
                     double detuning, double drift, int n_steps = kDefaultSteps);

/// |0> -> |1> population transfer.
struct StateTransfer {};
/// Fixed target gate.
struct GateTarget {
  Unitary2 target;
};
using FidelityTarget = std::variant<StateTransfer, GateTarget>;

double point_fidelity(const SampledDrive& drive, const FidelityTarget& target,
                      double detuning, double drift);

/// Fidelity at every grid point, flattened k * N + j.
std::vector<double> fidelity_map(const ControlField& field, const NoiseGrid& grid,
                                 const FidelityTarget& target,
                                 int n_steps = kDefaultSteps);

struct EnsembleResult {
  double value = 0.0;
  long evaluations = 0;  // single-point fidelity evaluations (M x N)
};

/// Normalised weighted grid average of the point fidelity.
EnsembleResult ensemble_objective(const ControlField& field, const NoiseGrid& grid,
                                  const FidelityTarget& target,
                                  int n_steps = kDefaultSteps);

/// Weighted average of an arbitrary per-point value map over `grid`,
/// accumulated in flattened index order.
double weighted_average(const NoiseGrid& grid, const std::vector<double>& values);

}  // namespace bpm
