#include "bpm/control_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bpm/error.hpp"
#include "bpm/units.hpp"

namespace bpm {

const char* to_string(Basis basis) noexcept {
  return basis == Basis::kPM ? "PM" : "SFB";
}

ControlField ControlField::pm(std::vector<double> a, std::vector<double> b,
                              std::vector<double> nu, double duration,
                              double amp_limit) {
  ControlField f;
  f.basis = Basis::kPM;
  f.amplitude = std::move(a);
  f.depth = std::move(b);
  f.mod_rate = std::move(nu);
  f.duration = duration;
  f.amp_limit = amp_limit;
  f.validate();
  return f;
}

ControlField ControlField::sfb(std::vector<double> a, std::vector<double> omega,
                               std::vector<double> phi,
                               std::vector<double> varphi, double duration,
                               double amp_limit) {
  ControlField f;
  f.basis = Basis::kSFB;
  f.amplitude = std::move(a);
  f.frequency = std::move(omega);
  f.phase = std::move(phi);
  f.axis = std::move(varphi);
  f.duration = duration;
  f.amp_limit = amp_limit;
  f.validate();
  return f;
}

ControlField ControlField::constant(double omega, double duration,
                                    double amp_limit) {
  return pm({2.0 * omega}, {0.0}, {0.0}, duration, amp_limit);
}

double ControlField::max_frequency() const {
  return 5.0 * units::kTwoPi / duration;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidField, what);
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void ControlField::validate() const {
  require(std::isfinite(duration) && duration > 0.0, "duration must be positive");
  require(std::isfinite(amp_limit) && amp_limit > 0.0,
          "amplitude limit must be positive");
  require(std::isfinite(quadrature_phase), "quadrature phase must be finite");
  const std::size_t n = amplitude.size();
  require(n >= 1, "at least one parameter set is required");
  require(all_finite(amplitude), "non-finite amplitude");
  if (basis == Basis::kPM) {
    require(depth.size() == n && mod_rate.size() == n,
            "PM parameter vectors must share length N_D");
    require(all_finite(depth) && all_finite(mod_rate), "non-finite PM parameter");
  } else {
    require(frequency.size() == n && phase.size() == n && axis.size() == n,
            "SFB parameter vectors must share length N_D");
    require(all_finite(frequency) && all_finite(phase) && all_finite(axis),
            "non-finite SFB parameter");
  }
}

std::vector<double> ControlField::parameters() const {
  std::vector<double> out;
  out.reserve(amplitude.size() * params_per_set(basis));
  for (std::size_t j = 0; j < amplitude.size(); ++j) {
    out.push_back(amplitude[j]);
    if (basis == Basis::kPM) {
      out.push_back(depth[j]);
      out.push_back(mod_rate[j]);
    } else {
      out.push_back(frequency[j]);
      out.push_back(phase[j]);
      out.push_back(axis[j]);
    }
  }
  return out;
}

ControlField ControlField::with_parameters(std::span<const double> params) const {
  const auto per = static_cast<std::size_t>(params_per_set(basis));
  if (params.empty() || params.size() % per != 0) {
    throw Error(ErrorCode::kInvalidField, "parameter vector length mismatch");
  }
  const std::size_t n = params.size() / per;
  ControlField f = *this;
  f.amplitude.assign(n, 0.0);
  if (basis == Basis::kPM) {
    f.depth.assign(n, 0.0);
    f.mod_rate.assign(n, 0.0);
  } else {
    f.frequency.assign(n, 0.0);
    f.phase.assign(n, 0.0);
    f.axis.assign(n, 0.0);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double* p = params.data() + j * per;
    f.amplitude[j] = p[0];
    if (basis == Basis::kPM) {
      f.depth[j] = p[1];
      f.mod_rate[j] = p[2];
    } else {
      f.frequency[j] = p[1];
      f.phase[j] = p[2];
      f.axis[j] = p[3];
    }
  }
  f.validate();
  return f;
}

namespace {

// (b/nu) sin(nu t), continued to b t at nu = 0.
double modulation_phase(double b, double nu, double t) {
  const double x = nu * t;
  if (std::abs(x) < 1e-6) {
    // sin(x)/x = 1 - x^2/6 + x^4/120
    const double x2 = x * x;
    return b * t * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0));
  }
  return b / nu * std::sin(x);
}

}  // namespace

Quadratures quadratures(const ControlField& field, double t) {
  double qx = 0.0;
  double qy = 0.0;
  const std::size_t n = field.amplitude.size();
  if (field.basis == Basis::kPM) {
    for (std::size_t j = 0; j < n; ++j) {
      const double ph = modulation_phase(field.depth[j], field.mod_rate[j], t);
      const double half = 0.5 * field.amplitude[j];
      qx += half * std::cos(ph);
      qy += half * std::sin(ph);
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double env = 0.5 * field.amplitude[j] *
                         std::cos(field.frequency[j] * t + field.phase[j]);
      qx += env * std::cos(field.axis[j]);
      qy += env * std::sin(field.axis[j]);
    }
  }
  if (field.quadrature_phase != 0.0) {
    const double c = std::cos(field.quadrature_phase);
    const double s = std::sin(field.quadrature_phase);
    return {c * qx - s * qy, s * qx + c * qy};
  }
  return {qx, qy};
}

double peak_amplitude(const ControlField& field, int n_points) {
  if (n_points < 2) throw Error(ErrorCode::kInvalidArgument, "dense grid needs >= 2 points");
  double peak = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double t = field.duration * static_cast<double>(i) / (n_points - 1);
    const Quadratures q = quadratures(field, t);
    peak = std::max(peak, std::hypot(q.x, q.y));
  }
  return peak;
}

ControlField enforce_amplitude_constraint(const ControlField& field, int n_points) {
  field.validate();
  ControlField out = field;
  const double fmax = field.max_frequency();
  auto clamp_all = [](std::vector<double>& v, double lo, double hi) {
    for (double& x : v) x = std::clamp(x, lo, hi);
  };
  for (double& a : out.amplitude) a = std::max(a, 0.0);
  if (out.basis == Basis::kPM) {
    clamp_all(out.depth, 0.0, fmax);
    clamp_all(out.mod_rate, 0.0, fmax);
  } else {
    clamp_all(out.frequency, 0.0, fmax);
    clamp_all(out.phase, 0.0, units::kTwoPi);
    clamp_all(out.axis, 0.0, units::kTwoPi);
  }
  const double peak = peak_amplitude(out, n_points);
  if (peak > out.amp_limit) {
    const double scale = out.amp_limit / peak;
    for (double& a : out.amplitude) a *= scale;
  }
  return out;
}

}  // namespace bpm
