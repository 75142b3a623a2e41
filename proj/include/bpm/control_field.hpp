#pragma once

#include <span>
#include <vector>

namespace bpm {

enum class Basis { kSFB, kPM };

const char* to_string(Basis basis) noexcept;

/// Interaction-picture drive components (rad/s).
struct Quadratures {
  double x = 0.0;
  double y = 0.0;
};

/// A pulse built from N_D parameter sets in either the standard Fourier basis
/// (amplitude-modulated cosines) or the phase-modulated basis.
///
/// PM set j:  amplitude a_j, modulation depth b_j, modulation rate nu_j;
///            Omega_x + i Omega_y = (a_j/2) exp(i (b_j/nu_j) sin(nu_j t)).
/// SFB set j: amplitude a_j, frequency omega_j, phase phi_j, axis angle
///            varphi_j; Omega = (a_j/2) cos(omega_j t + phi_j) (cos varphi_j,
///            sin varphi_j).
///
/// `quadrature_phase` rotates the whole (Omega_x, Omega_y) vector about z.
/// A value of pi/2 turns an X-gate field into the matching Y-gate field
/// (Omega_1 sigma_y - Omega_2 sigma_x).
struct ControlField {
  Basis basis = Basis::kPM;
  std::vector<double> amplitude;  // a_j, rad/s
  // PM only
  std::vector<double> depth;     // b_j, rad/s
  std::vector<double> mod_rate;  // nu_j, rad/s
  // SFB only
  std::vector<double> frequency;  // omega_j, rad/s
  std::vector<double> phase;      // phi_j, rad
  std::vector<double> axis;       // varphi_j, rad

  double duration = 0.0;   // T, s
  double amp_limit = 0.0;  // Omega_max, rad/s
  double quadrature_phase = 0.0;

  static ControlField pm(std::vector<double> a, std::vector<double> b,
                         std::vector<double> nu, double duration,
                         double amp_limit);
  static ControlField sfb(std::vector<double> a, std::vector<double> omega,
                          std::vector<double> phi, std::vector<double> varphi,
                          double duration, double amp_limit);
  /// Constant drive Omega_x = omega (rad/s) for `duration`.
  static ControlField constant(double omega, double duration, double amp_limit);

  int n_sets() const { return static_cast<int>(amplitude.size()); }

  /// Upper bound of the frequency-type parameters: 5 * 2pi / T.
  double max_frequency() const;

  /// Throws kInvalidField on inconsistent lengths, non-finite values or a
  /// non-positive duration.
  void validate() const;

  /// Flat parameter vector: per set (a, b, nu) for PM, (a, omega, phi, varphi)
  /// for SFB.
  std::vector<double> parameters() const;
  ControlField with_parameters(std::span<const double> params) const;
  static int params_per_set(Basis basis) { return basis == Basis::kPM ? 3 : 4; }
};

inline constexpr int kDefaultDenseGrid = 4001;

/// Drive components at time t in [0, T].
Quadratures quadratures(const ControlField& field, double t);

/// Largest sqrt(Omega_x^2 + Omega_y^2) over `n_points` equally spaced times
/// covering [0, T] inclusive.
double peak_amplitude(const ControlField& field, int n_points = kDefaultDenseGrid);

/// Clamp amplitudes to >= 0, frequencies into [0, 5*2pi/T], phases into
/// [0, 2pi], then rescale every a_j by Omega_max / peak when the dense-grid
/// peak exceeds Omega_max.
ControlField enforce_amplitude_constraint(const ControlField& field,
                                          int n_points = kDefaultDenseGrid);

}  // namespace bpm
