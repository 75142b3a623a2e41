#include "bpm/noise_grid.hpp"

#include <cmath>
#include <numbers>

#include "bpm/error.hpp"
#include "bpm/units.hpp"

namespace bpm {

double fwhm_to_sigma(double fwhm) {
  return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

double gaussian_weight(double x, double mean, double fwhm) {
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) {
    throw Error(ErrorCode::kInvalidArgument, "FWHM must be positive");
  }
  const double sigma = fwhm_to_sigma(fwhm);
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

NoiseGrid NoiseGrid::standard(int m, int n) {
  NoiseGrid g;
  g.detuning_min = -units::mhz_to_rad_per_s(10.0);
  g.detuning_max = units::mhz_to_rad_per_s(10.0);
  g.drift_min = 0.5;
  g.drift_max = 1.5;
  g.n_detuning = m;
  g.n_drift = n;
  g.detuning_fwhm = units::mhz_to_rad_per_s(26.5);
  g.drift_fwhm = 0.5;
  g.detuning_mean = 0.0;
  g.drift_mean = 1.0;
  g.validate();
  return g;
}

void NoiseGrid::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (n_detuning < 1 || n_drift < 1) fail("grid needs at least one point per axis");
  if (!(detuning_max >= detuning_min) || !(drift_max >= drift_min)) {
    fail("grid range must be ordered");
  }
  if ((n_detuning > 1 && detuning_max == detuning_min) ||
      (n_drift > 1 && drift_max == drift_min)) {
    fail("multi-point axis needs a nonempty range");
  }
  if (!(detuning_fwhm > 0.0) || !(drift_fwhm > 0.0)) fail("FWHM must be positive");
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return v;
}

}  // namespace

std::vector<double> NoiseGrid::detunings() const {
  return linspace(detuning_min, detuning_max, n_detuning);
}

std::vector<double> NoiseGrid::drifts() const {
  return linspace(drift_min, drift_max, n_drift);
}

std::vector<double> NoiseGrid::detuning_density() const {
  std::vector<double> p = detunings();
  for (double& x : p) x = gaussian_weight(x, detuning_mean, detuning_fwhm);
  return p;
}

std::vector<double> NoiseGrid::drift_density() const {
  std::vector<double> p = drifts();
  for (double& x : p) x = gaussian_weight(x, drift_mean, drift_fwhm);
  return p;
}

std::vector<double> NoiseGrid::weights() const {
  const std::vector<double> pd = detuning_density();
  const std::vector<double> pk = drift_density();
  std::vector<double> w(static_cast<std::size_t>(size()));
  double total = 0.0;
  for (int k = 0; k < n_detuning; ++k) {
    for (int j = 0; j < n_drift; ++j) {
      const double v = pd[k] * pk[j];
      w[static_cast<std::size_t>(k) * n_drift + j] = v;
      total += v;
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace bpm
