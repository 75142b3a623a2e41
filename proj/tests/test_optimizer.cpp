#include <cmath>
#include <random>

#include "bpm/error.hpp"
#include "bpm/optimizer.hpp"
#include "bpm/units.hpp"
#include "doctest.h"

using namespace bpm;

namespace {

// Small grids and coarse stepping keep these runs fast.
OptConfig quick(Method m, int n_sets = 1) {
  OptConfig c;
  c.method = m;
  c.n_sets = n_sets;
  c.n_steps = 200;
  c.surrogate_grid = NoiseGrid::standard(20, 20);
  c.verify_grid = NoiseGrid::standard(10, 10);
  c.search.max_iterations = 40;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : {Method::kBPM, Method::kPM, Method::kBSFB, Method::kSFB})
    CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("b_pm") == Method::kBPM);
  CHECK_THROWS_AS(parse_method("grape"), Error);
  CHECK(parse_amplitude_limit("quadrature") == AmplitudeLimit::kQuadrature);
  CHECK_THROWS_AS(parse_amplitude_limit("nope"), Error);
}

TEST_CASE("config validation") {
  OptConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.is_standard_scenario());
  c.surrogate_samples = 10;
  CHECK_THROWS_AS(c.validate(), Error);
  c = OptConfig{};
  c.n_sets = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = OptConfig{};
  CHECK(c.quadrature_limit() == doctest::Approx(c.omega_max / 2));
  c.amplitude_limit = AmplitudeLimit::kQuadrature;
  CHECK(c.quadrature_limit() == c.omega_max);
}

TEST_CASE("trial seeds are deterministic and distinct") {
  CHECK(trial_seed(7, 0) == trial_seed(7, 0));
  CHECK(trial_seed(7, 0) != trial_seed(7, 1));
  CHECK(trial_seed(7, 0) != trial_seed(8, 0));
}

TEST_CASE("parameter box folding") {
  const double T = 100e-9, wmax = units::mhz_to_rad_per_s(10.0);
  const double fmax = 5.0 * units::kTwoPi / T;
  SUBCASE("pm") {
    ParameterBox box = parameter_box(Basis::kPM, 1, T, wmax);
    REQUIRE(box.width.size() == 3);
    std::vector<double> in{0.3 * wmax, 0.2 * fmax, 0.9 * fmax};
    CHECK(box.fold(in) == in);
    auto out = box.fold(std::vector<double>{-0.3 * wmax, -0.2 * fmax, 1.1 * fmax});
    CHECK(out[0] == doctest::Approx(0.3 * wmax));
    CHECK(out[1] == doctest::Approx(0.2 * fmax));
    CHECK(out[2] == doctest::Approx(0.9 * fmax));
    // beyond one full reflection
    CHECK(box.fold(std::vector<double>{0.0, 2.5 * fmax, 0.0})[1] == doctest::Approx(0.5 * fmax));
  }
  SUBCASE("sfb phases wrap") {
    ParameterBox box = parameter_box(Basis::kSFB, 2, T, wmax);
    REQUIRE(box.width.size() == 8);
    std::vector<double> in(8, 0.0);
    in[2] = -1.0;
    in[3] = units::kTwoPi + 0.5;
    auto out = box.fold(in);
    CHECK(out[2] == doctest::Approx(units::kTwoPi - 1.0));
    CHECK(out[3] == doctest::Approx(0.5));
  }
}

TEST_CASE("validation threshold is strict") {
  CHECK_FALSE(accepts_model(0.6, 0.6));
  CHECK(accepts_model(0.6000001, 0.6));
}

TEST_CASE("build_valid_surrogate") {
  Region region = Region::of(NoiseGrid::standard(50, 50));
  std::mt19937_64 rng(3);
  SUBCASE("smooth truth passes first time") {
    long calls = 0;
    TruthFunction truth = [&](const Point2& p) {
      ++calls;
      return 0.5 + 0.3 * std::cos(p[0] * 1e-8) * p[1];
    };
    ValidatedSurrogate v = build_valid_surrogate(truth, region, 9, 10, rng);
    CHECK(v.attempts == 1);
    CHECK(v.true_calls == 9);
    CHECK(calls == 9);
    CHECK(v.p_fit > 0.6);
  }
  SUBCASE("white noise exhausts the attempts") {
    std::mt19937_64 noise(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long calls = 0;
    TruthFunction truth = [&](const Point2&) {
      ++calls;
      return u(noise);
    };
    FitOptions opts;
    opts.log_alpha_min = 5.0;  // forces a short correlation length
    try {
      build_valid_surrogate(truth, region, 9, 4, rng, 0.6, opts);
      FAIL("expected model-validation-failed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kModelValidationFailed);
    }
    CHECK(calls == 4 * 9);
  }
  SUBCASE("constant truth is degenerate every time") {
    TruthFunction truth = [](const Point2&) { return 0.25; };
    CHECK_THROWS_AS(build_valid_surrogate(truth, region, 9, 3, rng), Error);
  }
}

TEST_CASE("surrogate objective refreshes sample values") {
  OptConfig c = quick(Method::kBPM);
  ControlField f0 = enforce_amplitude_constraint(
      ControlField::pm({4e7}, {2e7}, {3e7}, c.duration, c.quadrature_limit()));
  SampledDrive d0 = sample_drive(f0, c.n_steps);
  std::mt19937_64 rng(5);
  ValidatedSurrogate v = build_valid_surrogate(
      [&](const Point2& p) { return point_fidelity(d0, c.target, p[0], p[1]); },
      Region::of(c.surrogate_grid), 9, 10, rng);
  SurrogateObjective obj(v.model, c.surrogate_grid, c.target, c.n_steps);

  ControlField f1 = f0.with_parameters(std::vector<double>{6e7, 1e7, 5e7});
  auto value = obj(f1);
  CHECK(value.true_calls == 9);
  SampledDrive d1 = sample_drive(f1, c.n_steps);
  std::vector<double> y;
  for (const auto& s : v.model.samples()) y.push_back(point_fidelity(d1, c.target, s[0], s[1]));
  std::vector<double> pred;
  KrigingModel m1 = v.model.with_values(y);
  for (double dd : c.surrogate_grid.detunings())
    for (double kk : c.surrogate_grid.drifts()) pred.push_back(std::clamp(m1.predict({dd, kk}), 0.0, 1.0));
  CHECK(value.estimate == doctest::Approx(weighted_average(c.surrogate_grid, pred)).epsilon(1e-12));
  // the initial field reproduces the accepted model exactly
  CHECK(obj(f0).estimate == doctest::Approx(surrogate_objective(v.model, c.surrogate_grid)).epsilon(1e-12));
}

TEST_CASE("optimizer runs") {
  for (Method m : {Method::kBPM, Method::kPM, Method::kBSFB, Method::kSFB}) {
    CAPTURE(to_string(m));
    OptConfig c = quick(m, basis_of(m) == Basis::kSFB ? 2 : 1);
    OptRun r = optimize(c);

    SUBCASE("deterministic") {
      OptRun again = optimize(c);
      CHECK(again.lambda_opt == r.lambda_opt);
      CHECK(again.f_search == r.f_search);
      CHECK(again.f_verified == r.f_verified);
      CHECK(again.true_calls == r.true_calls);
    }
    SUBCASE("feasible") {
      CHECK(peak_amplitude(r.field) <= c.quadrature_limit() * (1 + 1e-9));
      ParameterBox box = parameter_box(basis_of(m), c.n_sets, c.duration, c.omega_max);
      for (std::size_t i = 0; i < r.lambda_opt.size(); ++i) {
        CHECK(r.lambda_opt[i] >= 0.0);
        CHECK(r.lambda_opt[i] <= box.hi[i]);
      }
    }
    SUBCASE("verification from a cold start") {
      OptRun cold;
      cold.field = basis_of(m) == Basis::kPM
                       ? ControlField::pm({0.0}, {0.0}, {0.0}, c.duration, c.quadrature_limit())
                       : ControlField::sfb({0, 0}, {0, 0}, {0, 0}, {0, 0}, c.duration,
                                           c.quadrature_limit());
      cold.field = cold.field.with_parameters(r.lambda_opt);
      CHECK(std::abs(verify(cold, c) - r.f_verified) < 1e-12);
      CHECK(r.verification_calls == c.verify_grid.size());
    }
    SUBCASE("call accounting") {
      if (uses_surrogate(m)) {
        CHECK(r.true_calls == c.surrogate_samples * (r.model_attempts + r.search_evaluations));
        CHECK(r.p_fit > c.p_fit_threshold);
      } else {
        CHECK(r.true_calls == c.search_grid.size() * r.search_evaluations);
        CHECK(r.model_attempts == 0);
      }
    }
    SUBCASE("search improves on the start") {
      OptRun start;
      start.field = r.field.with_parameters(r.lambda_init);
      CHECK(r.f_verified >= 0.0);
      CHECK(r.f_verified <= 1.0);
      if (!uses_surrogate(m))
        CHECK(r.f_search >= ensemble_objective(start.field, c.search_grid, c.target, c.n_steps).value);
    }
  }
}

TEST_CASE("run_trials is independent of thread count") {
  OptConfig c = quick(Method::kPM);
  c.search.max_iterations = 10;
  TrialStats a = run_trials(c, 4, 1);
  TrialStats b = run_trials(c, 4, 3);
  REQUIRE(a.trials.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.trials[i].seed == trial_seed(c.seed, static_cast<int>(i)));
    CHECK(a.trials[i].seed == b.trials[i].seed);
    REQUIRE(a.trials[i].run);
    REQUIRE(b.trials[i].run);
    CHECK(a.trials[i].run->lambda_opt == b.trials[i].run->lambda_opt);
    CHECK(a.trials[i].run->f_verified == b.trials[i].run->f_verified);
  }
  CHECK(a.mean_f == b.mean_f);
}

TEST_CASE("summarize") {
  std::vector<TrialOutcome> t(4);
  double f[] = {0.905, 0.5, 0.895};
  for (int i = 0; i < 3; ++i) {
    t[i].run = OptRun{};
    t[i].run->f_verified = f[i];
    t[i].run->true_calls = 100 * (i + 1);
  }
  t[3].error = "model-validation-failed";
  TrialStats s = summarize(t);
  CHECK(s.succeeded == 3);
  CHECK(s.best_f == 0.905);
  CHECK(s.median_f == 0.895);
  CHECK(s.mean_f == doctest::Approx((0.905 + 0.5 + 0.895) / 3));
  CHECK(s.mean_true_calls == doctest::Approx(200.0));
  CHECK(s.count_at_least(0.89) == 2);
  CHECK(s.histogram[90] == 1);
  CHECK(s.histogram[89] == 1);
  CHECK(s.histogram[50] == 1);
  int total = 0;
  for (int h : s.histogram) total += h;
  CHECK(total == 3);
}
