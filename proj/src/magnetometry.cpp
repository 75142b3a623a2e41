#include "bpm/magnetometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "bpm/error.hpp"
#include "bpm/noise_grid.hpp"
#include "bpm/seed.hpp"
#include "bpm/spin_dynamics.hpp"

namespace bpm {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

using Spinor = std::array<cplx, 2>;

Spinor act(const Unitary2& u, const Spinor& s) {
  return {u(0, 0) * s[0] + u(0, 1) * s[1], u(1, 0) * s[0] + u(1, 1) * s[1]};
}

// exp(-i phi sigma_z)
void apply_z_phase(Spinor& s, double phi) {
  const cplx e = std::polar(1.0, -phi);
  s[0] *= e;
  s[1] *= std::conj(e);
}

Unitary2 rotation(PulseAxis axis, double angle) {
  return axis == PulseAxis::kX ? Unitary2::exp_su2(0.5 * angle, 0.0, 0.0)
                               : Unitary2::exp_su2(0.0, 0.5 * angle, 0.0);
}

struct Realization {
  const PulseSequence& seq;
  const AcSignal& signal;
  const NoiseSettings& noise;
  const SampledDrive* drive_x;
  const SampledDrive* drive_y;
  double h;  // propagation step, s

  // z coefficient of the Hamiltonian at time t
  double vz(double t, double static_part) const {
    return static_part + signal.amplitude * std::cos(signal.frequency * t);
  }

  // Integral of the z coefficient over [t0, t1].
  double z_phase(double t0, double t1, double static_part) const {
    double phi = static_part * (t1 - t0);
    if (signal.amplitude != 0.0)
      phi += signal.amplitude * (std::sin(signal.frequency * t1) - std::sin(signal.frequency * t0)) /
             signal.frequency;
    return phi;
  }

  std::vector<double> run(std::uint64_t seed, int n_readouts) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double delta = noise.detuning_fwhm > 0.0
                             ? noise.detuning_mean + fwhm_to_sigma(noise.detuning_fwhm) * normal(rng)
                             : noise.detuning_mean;
    const bool ou = noise.ou_c > 0.0;
    double dd = ou ? noise.ou_std() * normal(rng) : 0.0;

    Spinor psi{cplx{1.0}, cplx{0.0}};
    psi = act(rotation(PulseAxis::kX, 0.5 * kPi), psi);
    const Unitary2 readout = rotation(PulseAxis::kX, 1.5 * kPi);

    std::vector<double> p0;
    p0.reserve(static_cast<std::size_t>(n_readouts));
    double t = 0.0;

    // free evolution up to t_end, OU refreshed every step
    auto free_to = [&](double t_end) {
      const double span = t_end - t;
      if (span <= 0.0) return;
      const int n = std::max(1, static_cast<int>(std::ceil(span / h - 1e-9)));
      const double dt = span / n;
      double phi = 0.0;
      for (int s = 0; s < n; ++s) {
        const double t0 = t + s * dt;
        phi += z_phase(t0, t0 + dt, 0.5 * (delta + dd));
        if (ou) dd = ou_step(dd, dt, noise.ou_tau, noise.ou_c, rng);
      }
      apply_z_phase(psi, phi);
      t = t_end;
    };

    const double half = 0.5 * seq.pulse_duration;
    std::size_t next = 0;
    for (int r = 1; r <= n_readouts; ++r) {
      const double t_read = r * seq.period();
      for (; next < seq.pulses.size() && seq.pulses[next].centre < t_read; ++next) {
        const Pulse& p = seq.pulses[next];
        if (seq.kind == PulseKind::kIdealInstant) {
          free_to(p.centre);
          psi = act(rotation(p.axis, kPi), psi);
          continue;
        }
        free_to(p.centre - half);
        const SampledDrive& d = p.axis == PulseAxis::kX ? *drive_x : *drive_y;
        const double kappa = noise.drift;
        for (int s = 0; s < d.n_steps(); ++s) {
          const double t0 = t + s * d.step;
          const double stat = 0.5 * (delta + dd);
          const PauliVector v1{kappa * d.lo[s].x, kappa * d.lo[s].y,
                               vz(t0 + kGaussNodeLo * d.step, stat)};
          const PauliVector v2{kappa * d.hi[s].x, kappa * d.hi[s].y,
                               vz(t0 + kGaussNodeHi * d.step, stat)};
          psi = act(magnus_step(d.step, v1, v2), psi);
          if (ou) dd = ou_step(dd, d.step, noise.ou_tau, noise.ou_c, rng);
        }
        t += seq.pulse_duration;
      }
      free_to(t_read);
      const Spinor out = act(readout, psi);
      p0.push_back(std::norm(out[0]));
    }
    return p0;
  }
};

}  // namespace

const char* to_string(PulseKind kind) noexcept {
  switch (kind) {
    case PulseKind::kRectPi: return "rect";
    case PulseKind::kShapedPM: return "pm";
    case PulseKind::kIdealInstant: return "ideal";
  }
  return "?";
}

PulseKind parse_pulse_kind(std::string_view text) {
  if (text == "rect") return PulseKind::kRectPi;
  if (text == "pm") return PulseKind::kShapedPM;
  if (text == "ideal") return PulseKind::kIdealInstant;
  throw Error(ErrorCode::kInvalidArgument, "unknown pulse kind '" + std::string(text) + "'");
}

double PulseSequence::signal_frequency() const {
  return kPi / (pulse_duration + pulse_spacing);
}

PulseSequence build_xy8(PulseKind kind, double pulse_duration, double pulse_spacing,
                        int n_periods, std::optional<ControlField> shaped) {
  require(pulse_duration > 0.0 && std::isfinite(pulse_duration), "T_pulse must be positive");
  require(pulse_spacing > 0.0 && std::isfinite(pulse_spacing), "tau_pulse must be positive");
  require(n_periods >= 1, "n_periods must be >= 1");
  PulseSequence seq;
  seq.kind = kind;
  seq.pulse_duration = pulse_duration;
  seq.pulse_spacing = pulse_spacing;
  seq.n_periods = n_periods;
  if (kind == PulseKind::kShapedPM) {
    require(shaped.has_value(), "shaped pulses need a control field");
    shaped->validate();
    seq.x_field = *shaped;
    seq.x_field.duration = pulse_duration;
    seq.x_field.quadrature_phase = 0.0;
  } else {
    const double omega = kPi / (2.0 * pulse_duration);
    seq.x_field = ControlField::constant(omega, pulse_duration, omega);
  }
  seq.y_field = seq.x_field;
  seq.y_field.quadrature_phase = 0.5 * kPi;

  constexpr PulseAxis X = PulseAxis::kX, Y = PulseAxis::kY;
  constexpr PulseAxis order[8] = {X, Y, X, Y, Y, X, Y, X};
  const double slot = pulse_duration + pulse_spacing;
  for (int k = 0; k < 8 * n_periods; ++k) seq.pulses.push_back({(k + 0.5) * slot, order[k % 8]});
  return seq;
}

double NoiseSettings::ou_std() const { return std::sqrt(0.5 * ou_c * ou_tau); }

NoiseSettings NoiseSettings::none() {
  NoiseSettings n;
  n.detuning_fwhm = 0.0;
  n.ou_c = 0.0;
  n.realizations = 1;
  return n;
}

void NoiseSettings::validate() const {
  require(realizations >= 1, "realization count must be >= 1");
  require(ou_tau > 0.0, "OU correlation time must be positive");
  require(ou_c >= 0.0, "OU diffusion constant must be >= 0");
  require(detuning_fwhm >= 0.0, "detuning FWHM must be >= 0");
  require(std::isfinite(detuning_mean) && std::isfinite(drift), "non-finite noise setting");
}

double ou_step(double x, double dt, double tau, double c, std::mt19937_64& rng) {
  require(dt > 0.0, "OU step must be positive");
  const double decay = std::exp(-dt / tau);
  if (c == 0.0) return x * decay;
  std::normal_distribution<double> normal(0.0, 1.0);
  return x * decay + std::sqrt(0.5 * c * tau * (1.0 - decay * decay)) * normal(rng);
}

double ideal_phase(double g, double omega, double t) {
  require(omega > 0.0, "signal frequency must be positive");
  if (t <= 0.0) return 0.0;
  // |cos| has period pi/omega and integrates to 2/omega over each
  const double x = omega * t;
  const double k = std::floor(x / kPi);
  const double r = x - k * kPi;  // in [0, pi)
  // integral_0^r |cos u| du on [0, pi)
  const double partial = r <= 0.5 * kPi ? std::sin(r) : 2.0 - std::sin(r);
  return g * (2.0 * k + partial) / omega;
}

RamseyTrace simulate_ramsey(const PulseSequence& seq, const AcSignal& signal,
                            const NoiseSettings& noise, double t_max, int n_steps_per_pulse,
                            int threads) {
  noise.validate();
  require(n_steps_per_pulse >= 1, "n_steps_per_pulse must be >= 1");
  require(signal.amplitude >= 0.0, "signal amplitude must be >= 0");
  require(signal.amplitude == 0.0 || signal.frequency > 0.0, "signal frequency must be positive");
  require(!seq.pulses.empty(), "empty pulse sequence");
  const int n_readouts =
      std::min(seq.n_periods, static_cast<int>(std::floor(t_max / seq.period() + 1e-9)));
  require(n_readouts >= 2, "t_max must span at least two XY-8 periods");

  SampledDrive dx, dy;
  if (seq.kind != PulseKind::kIdealInstant) {
    dx = sample_drive(seq.x_field, n_steps_per_pulse);
    dy = sample_drive(seq.y_field, n_steps_per_pulse);
  }
  const Realization sim{seq, signal, noise, &dx, &dy, seq.pulse_duration / n_steps_per_pulse};

  const int R = noise.realizations;
  std::vector<std::vector<double>> runs(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < R; i = next++)
      runs[static_cast<std::size_t>(i)] =
          sim.run(split_seed(noise.seed, static_cast<std::uint64_t>(i)), n_readouts);
  };
  threads = std::clamp(threads, 1, R);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  RamseyTrace tr;
  tr.kind = seq.kind;
  for (int k = 0; k < n_readouts; ++k) {
    double sum = 0.0, sq = 0.0;
    for (const auto& r : runs) sum += r[static_cast<std::size_t>(k)];
    const double mean = sum / R;
    for (const auto& r : runs) sq += (r[static_cast<std::size_t>(k)] - mean) * (r[static_cast<std::size_t>(k)] - mean);
    tr.time.push_back((k + 1) * seq.period());
    tr.p0_mean.push_back(mean);
    tr.p0_stderr.push_back(R > 1 ? std::sqrt(sq / (R - 1) / R) : 0.0);
  }
  return tr;
}

T2Estimate estimate_t2(const std::vector<double>& time, const std::vector<double>& p0,
                       int block) {
  require(time.size() == p0.size(), "time and population lengths differ");
  require(time.size() >= 10, "need at least 10 trace points");
  const std::size_t n = time.size();
  if (block <= 0) block = std::max(1, static_cast<int>(n) / 16);

  std::vector<double> xs, ys;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(block)) {
    std::size_t best = b;
    const std::size_t end = std::min(n, b + static_cast<std::size_t>(block));
    for (std::size_t i = b; i < end; ++i)
      if (std::abs(2.0 * p0[i] - 1.0) > std::abs(2.0 * p0[best] - 1.0)) best = i;
    const double e = std::abs(2.0 * p0[best] - 1.0);
    if (e > 0.0) {
      xs.push_back(time[best]);
      ys.push_back(std::log(e));
    }
  }
  T2Estimate est;
  est.n_points = static_cast<int>(xs.size());
  if (xs.size() < 2) {
    est.t2 = time.back();
    est.lower_bound = true;
    return est;
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  est.amplitude = std::exp(my - slope * mx);
  if (slope < 0.0) {
    est.t2 = -1.0 / slope;
  } else {
    est.t2 = time.back();
    est.lower_bound = true;
  }
  return est;
}

}  // namespace bpm
