#include "bpm/spin_dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "bpm/error.hpp"

namespace bpm {

namespace {

constexpr double kSqrt3Over6 = 0.28867513459481288225;

}  // namespace

Unitary2 magnus_step(double h, const PauliVector& v1, const PauliVector& v2) {
  // Omega_4 = -i [ h/2 (v1 + v2) + sqrt(3)/6 h^2 (v2 x v1) ] . sigma
  const double c = kSqrt3Over6 * h * h;
  const double wx = 0.5 * h * (v1[0] + v2[0]) + c * (v2[1] * v1[2] - v2[2] * v1[1]);
  const double wy = 0.5 * h * (v1[1] + v2[1]) + c * (v2[2] * v1[0] - v2[0] * v1[2]);
  const double wz = 0.5 * h * (v1[2] + v2[2]) + c * (v2[0] * v1[1] - v2[1] * v1[0]);
  return Unitary2::exp_su2(wx, wy, wz);
}

SampledDrive sample_drive(const ControlField& field, int n_steps) {
  field.validate();
  if (n_steps < 1) throw Error(ErrorCode::kInvalidArgument, "n_steps must be >= 1");
  SampledDrive d;
  d.step = field.duration / n_steps;
  d.lo.resize(static_cast<std::size_t>(n_steps));
  d.hi.resize(static_cast<std::size_t>(n_steps));
  for (int s = 0; s < n_steps; ++s) {
    d.lo[s] = quadratures(field, (s + kGaussNodeLo) * d.step);
    d.hi[s] = quadratures(field, (s + kGaussNodeHi) * d.step);
  }
  return d;
}

Unitary2 propagate(const SampledDrive& drive, double detuning, double drift) {
  Unitary2 u = Unitary2::identity();
  const double hz = 0.5 * detuning;
  for (int s = 0; s < drive.n_steps(); ++s) {
    const PauliVector v1{drift * drive.lo[s].x, drift * drive.lo[s].y, hz};
    const PauliVector v2{drift * drive.hi[s].x, drift * drive.hi[s].y, hz};
    u = magnus_step(drive.step, v1, v2) * u;
  }
  return u;
}

Unitary2 propagate(const ControlField& field, double detuning, double drift,
                   int n_steps) {
  return propagate(sample_drive(field, n_steps), detuning, drift);
}

double state_fidelity(const Unitary2& u) { return std::norm(u(1, 0)); }

double state_fidelity(const ControlField& field, double detuning, double drift,
                      int n_steps) {
  return state_fidelity(propagate(field, detuning, drift, n_steps));
}

double gate_fidelity(const Unitary2& u, const Unitary2& target) {
  if (!target.is_unitary()) {
    throw Error(ErrorCode::kInvalidArgument, "target gate is not unitary");
  }
  const Unitary2 paulis[3] = {Unitary2::pauli_x(), Unitary2::pauli_y(),
                              Unitary2::pauli_z()};
  const Unitary2 ut_dag = target.adjoint();
  const Unitary2 u_dag = u.adjoint();
  double sum = 0.0;
  for (const Unitary2& s : paulis) {
    const Unitary2 half = cplx{0.5} * s;
    sum += (target * half * ut_dag * u * half * u_dag).trace().real();
  }
  return 0.5 + sum / 3.0;
}

double gate_fidelity(const ControlField& field, const Unitary2& target,
                     double detuning, double drift, int n_steps) {
  return gate_fidelity(propagate(field, detuning, drift, n_steps), target);
}

double point_fidelity(const SampledDrive& drive, const FidelityTarget& target,
                      double detuning, double drift) {
  const Unitary2 u = propagate(drive, detuning, drift);
  if (const auto* gate = std::get_if<GateTarget>(&target)) {
    return std::clamp(gate_fidelity(u, gate->target), 0.0, 1.0);
  }
  return std::clamp(state_fidelity(u), 0.0, 1.0);
}

std::vector<double> fidelity_map(const ControlField& field, const NoiseGrid& grid,
                                 const FidelityTarget& target, int n_steps) {
  grid.validate();
  if (const auto* gate = std::get_if<GateTarget>(&target); gate && !gate->target.is_unitary()) {
    throw Error(ErrorCode::kInvalidArgument, "target gate is not unitary");
  }
  const SampledDrive drive = sample_drive(field, n_steps);
  const std::vector<double> det = grid.detunings();
  const std::vector<double> kap = grid.drifts();
  std::vector<double> out(static_cast<std::size_t>(grid.size()));
  for (int k = 0; k < grid.n_detuning; ++k) {
    for (int j = 0; j < grid.n_drift; ++j) {
      out[static_cast<std::size_t>(k) * grid.n_drift + j] =
          point_fidelity(drive, target, det[k], kap[j]);
    }
  }
  return out;
}

double weighted_average(const NoiseGrid& grid, const std::vector<double>& values) {
  const std::vector<double> w = grid.weights();
  if (values.size() != w.size()) {
    throw Error(ErrorCode::kInvalidArgument, "value map does not match grid size");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * values[i];
  return acc;
}

EnsembleResult ensemble_objective(const ControlField& field, const NoiseGrid& grid,
                                  const FidelityTarget& target, int n_steps) {
  const std::vector<double> f = fidelity_map(field, grid, target, n_steps);
  return {weighted_average(grid, f), static_cast<long>(f.size())};
}

}  // namespace bpm
