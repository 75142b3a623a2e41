#include <cmath>
#include <numbers>
#include <random>

#include "bpm/error.hpp"
#include "bpm/magnetometry.hpp"
#include "bpm/units.hpp"
#include "doctest.h"

using namespace bpm;

namespace {

constexpr double kPi = std::numbers::pi;

// Adaptive Simpson on g |cos(w t)|, independent of the per-half-period form.
double simpson(double g, double w, double a, double b) {
  auto f = [&](double t) { return g * std::abs(std::cos(w * t)); };
  auto rule = [&](double l, double r) {
    return (r - l) / 6.0 * (f(l) + 4.0 * f(0.5 * (l + r)) + f(r));
  };
  struct Rec {
    decltype(rule)& s;
    double go(double l, double r, double whole, double eps, int depth) {
      const double m = 0.5 * (l + r);
      const double left = s(l, m), right = s(m, r);
      if (depth <= 0 || std::abs(left + right - whole) <= 15 * eps)
        return left + right + (left + right - whole) / 15.0;
      return go(l, m, left, eps / 2, depth - 1) + go(m, r, right, eps / 2, depth - 1);
    }
  } rec{rule};
  return rec.go(a, b, rule(a, b), 1e-14, 50);
}

}  // namespace

TEST_CASE("ou_step") {
  std::mt19937_64 rng(1);
  SUBCASE("pure decay without diffusion") {
    CHECK(ou_step(2.0, 1e-6, 20e-6, 0.0, rng) == doctest::Approx(2.0 * std::exp(-0.05)));
  }
  SUBCASE("stationary variance and correlation time") {
    NoiseSettings n;
    CHECK(n.ou_std() == doctest::Approx(units::khz_to_rad_per_s(50.0)));
    const double dt = 1e-6;
    const int steps = 100000;
    std::vector<double> x(steps);
    double v = n.ou_std() * std::normal_distribution<double>()(rng);
    for (int i = 0; i < steps; ++i) x[i] = v = ou_step(v, dt, n.ou_tau, n.ou_c, rng);
    double mean = 0, var = 0;
    for (double y : x) mean += y;
    mean /= steps;
    for (double y : x) var += (y - mean) * (y - mean);
    var /= steps;
    CHECK(std::abs(var / (0.5 * n.ou_c * n.ou_tau) - 1.0) < 0.05);
    // lag-one autocorrelation exp(-dt / tau)
    double c1 = 0;
    for (int i = 1; i < steps; ++i) c1 += (x[i] - mean) * (x[i - 1] - mean);
    c1 /= (steps - 1) * var;
    const double tau_hat = -dt / std::log(c1);
    CHECK(std::abs(tau_hat / n.ou_tau - 1.0) < 0.10);
  }
  CHECK_THROWS_AS(ou_step(0.0, 0.0, 1.0, 1.0, rng), Error);
}

TEST_CASE("ideal_phase") {
  const double g = units::mhz_to_rad_per_s(0.1), w = 2.5 * kPi * 1e6;
  CHECK(ideal_phase(g, w, 0.0) == 0.0);
  CHECK(ideal_phase(g, w, kPi / w) == doctest::Approx(2.0 * g / w).epsilon(1e-14));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 20e-6);
  for (int i = 0; i < 20; ++i) {
    const double t = u(rng);
    double oracle = 0.0;
    const double half = kPi / w;
    // split at the kinks of |cos| so Simpson sees smooth pieces
    double a = 0.0;
    for (double k = 0.5 * half; k < t; k += half) {
      oracle += simpson(g, w, a, k);
      a = k;
    }
    oracle += simpson(g, w, a, t);
    CHECK(std::abs(ideal_phase(g, w, t) - oracle) < 1e-10);
  }
  CHECK_THROWS_AS(ideal_phase(g, 0.0, 1.0), Error);
}

TEST_CASE("build_xy8") {
  PulseSequence rect = build_xy8(PulseKind::kRectPi, 50e-9, 350e-9, 1);
  REQUIRE(rect.pulses.size() == 8);
  CHECK(rect.period() == doctest::Approx(3.2e-6));
  CHECK(rect.signal_frequency() == doctest::Approx(2.5 * kPi * 1e6));
  const PulseAxis X = PulseAxis::kX, Y = PulseAxis::kY;
  const PulseAxis order[8] = {X, Y, X, Y, Y, X, Y, X};
  for (int k = 0; k < 8; ++k) {
    CHECK(rect.pulses[k].axis == order[k]);
    // centred on a zero crossing of cos(omega_s t)
    CHECK(std::abs(std::cos(rect.signal_frequency() * rect.pulses[k].centre)) < 1e-12);
  }
  // rectangular pulse is a pi rotation
  CHECK(rect.x_field.duration == 50e-9);
  CHECK(quadratures(rect.x_field, 10e-9).x * 50e-9 == doctest::Approx(kPi / 2));
  CHECK(quadratures(rect.y_field, 10e-9).y == doctest::Approx(quadratures(rect.x_field, 10e-9).x));

  auto pm = ControlField::pm({0.0583e9, 0.0046e9}, {0.0844e9, 0.1493e9}, {0.0307e9, 0.0413e9},
                             100e-9, units::mhz_to_rad_per_s(5.0));
  PulseSequence shaped = build_xy8(PulseKind::kShapedPM, 100e-9, 300e-9, 3, pm);
  CHECK(shaped.pulses.size() == 24);
  CHECK(shaped.signal_frequency() == doctest::Approx(rect.signal_frequency()));
  CHECK(shaped.period() == doctest::Approx(3.2e-6));
  CHECK_THROWS_AS(build_xy8(PulseKind::kShapedPM, 100e-9, 300e-9, 1), Error);
  CHECK_THROWS_AS(build_xy8(PulseKind::kRectPi, 0.0, 300e-9, 1), Error);
}

TEST_CASE("simulate_ramsey noise-free") {
  AcSignal sig;
  SUBCASE("ideal pulses follow the accumulated phase") {
    PulseSequence seq = build_xy8(PulseKind::kIdealInstant, 50e-9, 350e-9, 40);
    sig.frequency = seq.signal_frequency();
    RamseyTrace tr = simulate_ramsey(seq, sig, NoiseSettings::none(), 40 * seq.period());
    REQUIRE(tr.time.size() == 40);
    for (std::size_t k = 0; k < tr.time.size(); ++k) {
      const double chi = ideal_phase(sig.amplitude, sig.frequency, tr.time[k]);
      CHECK(std::abs(tr.p0_mean[k] - 0.5 * (1 + std::cos(2 * chi))) < 1e-6);
      CHECK(tr.p0_stderr[k] == 0.0);
    }
  }
  SUBCASE("no signal, perfect pulses: echo returns to |0>") {
    sig.amplitude = 0.0;
    for (PulseKind kind : {PulseKind::kRectPi, PulseKind::kIdealInstant}) {
      PulseSequence seq = build_xy8(kind, 50e-9, 350e-9, 10);
      RamseyTrace tr = simulate_ramsey(seq, sig, NoiseSettings::none(), 10 * seq.period(), 50);
      for (double p : tr.p0_mean) CHECK(std::abs(p - 1.0) < 1e-8);
    }
  }
  SUBCASE("t_max must span two periods") {
    PulseSequence seq = build_xy8(PulseKind::kRectPi, 50e-9, 350e-9, 10);
    CHECK_THROWS_AS(simulate_ramsey(seq, sig, NoiseSettings::none(), 1.5 * seq.period()), Error);
    NoiseSettings bad = NoiseSettings::none();
    bad.realizations = 0;
    CHECK_THROWS_AS(simulate_ramsey(seq, sig, bad, 4 * seq.period()), Error);
  }
}

TEST_CASE("simulate_ramsey with noise") {
  PulseSequence seq = build_xy8(PulseKind::kRectPi, 50e-9, 350e-9, 12);
  AcSignal sig;
  sig.frequency = seq.signal_frequency();
  NoiseSettings n;
  n.realizations = 12;
  n.seed = 5;
  RamseyTrace a = simulate_ramsey(seq, sig, n, 12 * seq.period(), 40, 1);
  RamseyTrace b = simulate_ramsey(seq, sig, n, 12 * seq.period(), 40, 3);
  CHECK(a.p0_mean == b.p0_mean);
  CHECK(a.p0_stderr == b.p0_stderr);
  for (std::size_t k = 0; k < a.time.size(); ++k) {
    CHECK(a.p0_mean[k] >= 0.0);
    CHECK(a.p0_mean[k] <= 1.0);
    CHECK(a.p0_stderr[k] > 0.0);
  }
  n.seed = 6;
  RamseyTrace c = simulate_ramsey(seq, sig, n, 12 * seq.period(), 40, 1);
  CHECK(c.p0_mean != a.p0_mean);
}

TEST_CASE("estimate_t2") {
  SUBCASE("exact exponential") {
    std::vector<double> t, p;
    for (int k = 1; k <= 125; ++k) {
      t.push_back(k * 3.2e-6);
      p.push_back(0.5 * (1.0 + std::exp(-t.back() / 100e-6)));
    }
    T2Estimate e = estimate_t2(t, p);
    CHECK(std::abs(e.t2 / 100e-6 - 1.0) < 0.02);
    CHECK_FALSE(e.lower_bound);
    CHECK(e.amplitude == doctest::Approx(1.0));
  }
  SUBCASE("decaying fringes") {
    std::vector<double> t, p;
    const double g = units::mhz_to_rad_per_s(0.1), w = 2.5 * kPi * 1e6;
    for (int k = 1; k <= 125; ++k) {
      t.push_back(k * 3.2e-6);
      const double chi = ideal_phase(g, w, t.back());
      p.push_back(0.5 * (1.0 + std::exp(-t.back() / 150e-6) * std::cos(2 * chi)));
    }
    T2Estimate e = estimate_t2(t, p);
    CHECK(std::abs(e.t2 / 150e-6 - 1.0) < 0.15);
  }
  SUBCASE("no decay") {
    std::vector<double> t, p;
    for (int k = 1; k <= 20; ++k) {
      t.push_back(k * 1e-6);
      p.push_back(1.0);
    }
    T2Estimate e = estimate_t2(t, p);
    CHECK(e.lower_bound);
    CHECK(e.t2 == t.back());
  }
  CHECK_THROWS_AS(estimate_t2(std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)), Error);
}

TEST_CASE("averaged envelope does not grow beyond Monte-Carlo error") {
  PulseSequence seq = build_xy8(PulseKind::kRectPi, 50e-9, 350e-9, 40);
  AcSignal sig;
  sig.amplitude = 0.0;
  sig.frequency = seq.signal_frequency();
  NoiseSettings n;
  n.realizations = 40;
  RamseyTrace tr = simulate_ramsey(seq, sig, n, 40 * seq.period(), 40);
  // block means of |2 P0 - 1| over 10 readouts each
  std::vector<double> mean, err;
  for (std::size_t b = 0; b + 10 <= tr.time.size(); b += 10) {
    double m = 0.0, v = 0.0;
    for (std::size_t k = b; k < b + 10; ++k) {
      m += std::abs(2 * tr.p0_mean[k] - 1) / 10;
      v += std::pow(2 * tr.p0_stderr[k] / 10, 2);
    }
    mean.push_back(m);
    err.push_back(std::sqrt(v));
  }
  REQUIRE(mean.size() == 4);
  for (std::size_t b = 1; b < mean.size(); ++b)
    CHECK(mean[b] <= mean[b - 1] + 3 * std::hypot(err[b], err[b - 1]));
}
