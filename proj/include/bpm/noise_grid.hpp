#pragma once

#include <vector>

namespace bpm {

/// sigma of a Gaussian with the given full width at half maximum.
double fwhm_to_sigma(double fwhm);

/// Normal density N(mean, sigma(fwhm)) evaluated at x. Throws on fwhm <= 0.
double gaussian_weight(double x, double mean, double fwhm);

/// Uniform (detuning, drift) lattice with product-Gaussian weights.
/// Point (k, j) has detuning index k in [0, M) and drift index j in [0, N);
/// flattened index is k * N + j.
struct NoiseGrid {
  double detuning_min = 0.0;  // rad/s
  double detuning_max = 0.0;
  double drift_min = 0.0;
  double drift_max = 0.0;
  int n_detuning = 0;  // M
  int n_drift = 0;     // N
  double detuning_fwhm = 0.0;  // rad/s
  double drift_fwhm = 0.0;
  double detuning_mean = 0.0;
  double drift_mean = 1.0;

  /// delta in 2pi x [-10, 10] MHz, kappa in [0.5, 1.5], FWHM 2pi x 26.5 MHz
  /// and 0.5, M x N points.
  static NoiseGrid standard(int m, int n);

  void validate() const;
  int size() const { return n_detuning * n_drift; }

  std::vector<double> detunings() const;
  std::vector<double> drifts() const;
  /// Normalised weights, flattened k * N + j; they sum to one.
  std::vector<double> weights() const;
  /// Per-axis unnormalised densities, p(delta_k) and p(kappa_j).
  std::vector<double> detuning_density() const;
  std::vector<double> drift_density() const;
};

}  // namespace bpm
