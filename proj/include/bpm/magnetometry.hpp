#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "bpm/control_field.hpp"

namespace bpm {

/// Sequence pulse types. kIdealInstant replaces every pulse by an exact,
/// zero-length pi rotation at its centre.
enum class PulseKind { kRectPi, kShapedPM, kIdealInstant };

const char* to_string(PulseKind kind) noexcept;
PulseKind parse_pulse_kind(std::string_view text);

enum class PulseAxis { kX, kY };

struct Pulse {
  double centre = 0.0;  // s
  PulseAxis axis = PulseAxis::kX;
};

/// XY-8 train. Pulse k (0-based) is centred at (k + 1/2)(T_pulse + tau_pulse),
/// where cos(omega_s t) changes sign.
struct PulseSequence {
  PulseKind kind = PulseKind::kRectPi;
  double pulse_duration = 50e-9;  // T_pulse, s
  double pulse_spacing = 350e-9;  // tau_pulse, s
  int n_periods = 1;
  ControlField x_field;  // X pi pulse; the Y pulse is this field rotated by pi/2
  ControlField y_field;
  std::vector<Pulse> pulses;

  /// One XY-8 period, 8 (T_pulse + tau_pulse).
  double period() const { return 8.0 * (pulse_duration + pulse_spacing); }
  /// omega_s = pi / (T_pulse + tau_pulse)
  double signal_frequency() const;
};

/// Throws kInvalidArgument for non-positive times or periods, and when a
/// shaped sequence comes without a field. Rectangular pulses drive
/// Omega_x = pi / (2 T_pulse), a pi rotation.
PulseSequence build_xy8(PulseKind kind, double pulse_duration, double pulse_spacing,
                        int n_periods, std::optional<ControlField> shaped = std::nullopt);

struct AcSignal {
  double amplitude = 6.283185307179586e5;  // g_ac, rad/s (2pi x 0.1 MHz)
  double frequency = 0.0;                  // omega_s, rad/s; cosine, zero phase at t = 0
};

struct NoiseSettings {
  double detuning_fwhm = 1.6650441064025903e8;  // 2pi x 26.5 MHz; 0 disables
  double detuning_mean = 0.0;
  double ou_tau = 20e-6;                   // s
  double ou_c = 9.869604401089358e15;     // (rad/s)^2 / s; sqrt(c tau / 2) = 2pi x 50 kHz
  double drift = 1.0;                      // kappa
  int realizations = 100;
  std::uint64_t seed = 1;

  /// Stationary OU standard deviation sqrt(c tau / 2).
  double ou_std() const;
  static double ou_c_for_std(double std, double tau) { return 2.0 * std * std / tau; }
  /// No static spread and no OU noise.
  static NoiseSettings none();
  void validate() const;
};

/// Exact OU update over dt with the noise held by the caller between calls.
double ou_step(double x, double dt, double tau, double c, std::mt19937_64& rng);

/// integral_0^t g |cos(omega s)| ds, closed form per half period.
double ideal_phase(double g, double omega, double t);

struct RamseyTrace {
  PulseKind kind = PulseKind::kRectPi;
  std::vector<double> time;  // s, one point per XY-8 period end
  std::vector<double> p0_mean;
  std::vector<double> p0_stderr;
};

/// Realization-averaged population of |0> after ideal pi/2 preparation, the
/// XY-8 train and an ideal 3pi/2 readout, recorded at every period end up to
/// t_max. Realizations run on `threads` workers and are averaged in index
/// order, so the result does not depend on the thread count.
RamseyTrace simulate_ramsey(const PulseSequence& seq, const AcSignal& signal,
                            const NoiseSettings& noise, double t_max,
                            int n_steps_per_pulse = 100, int threads = 1);

struct T2Estimate {
  double t2 = 0.0;         // s
  double amplitude = 0.0;  // fitted envelope at t = 0
  int n_points = 0;        // envelope points used
  bool lower_bound = false;  // no decay seen, t2 reports the last time
};

/// Fits A exp(-t / T2) to the envelope of |2 P0 - 1| by least squares on the
/// logarithm. The envelope is the largest point of each run of `block`
/// consecutive samples (0 picks n / 16), which follows fringes aliased by the
/// readout spacing without inventing decay.
T2Estimate estimate_t2(const std::vector<double>& time, const std::vector<double>& p0,
                       int block = 0);

}  // namespace bpm
