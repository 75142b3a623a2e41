#include <cmath>
#include <limits>

#include "bpm/error.hpp"
#include "bpm/nelder_mead.hpp"
#include "doctest.h"

using namespace bpm;

TEST_CASE("nelder-mead: convex bowl") {
  const Objective bowl = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += (v - 3.0) * (v - 3.0);
    return s;
  };
  NelderMeadOptions opt;
  opt.initial_step = {1.0};
  opt.f_tolerance = 1e-14;
  const std::vector<double> x0(4, 0.0);
  const NelderMeadResult r = nelder_mead(bowl, x0, opt);
  CHECK(r.converged);
  CHECK(r.f < 1e-8);
  for (double v : r.x) CHECK(v == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("nelder-mead: Rosenbrock from (-1.2, 1)") {
  const Objective rosen = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  NelderMeadOptions opt;
  opt.initial_step = {0.1};
  opt.f_tolerance = 1e-14;
  opt.max_evaluations = 500;
  const std::vector<double> x0{-1.2, 1.0};
  const NelderMeadResult r = nelder_mead(rosen, x0, opt);
  CHECK(r.evaluations <= 500 + 2);
  CHECK(r.f < 1e-6);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("nelder-mead: evaluation count matches an external counter") {
  long calls = 0;
  const Objective f = [&](std::span<const double> x) {
    ++calls;
    return std::abs(x[0] - 1.0) + 2.0 * std::abs(x[1] + 0.5);
  };
  const std::vector<double> x0{0.0, 0.0};
  const NelderMeadResult r = nelder_mead(f, x0, {});
  CHECK(r.evaluations == calls);
  CHECK(r.iterations <= 400);
}

TEST_CASE("nelder-mead: non-finite objective aborts with a diagnostic") {
  const Objective f = [](std::span<const double> x) {
    return x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : -x[0];
  };
  const std::vector<double> x0{0.0};
  NelderMeadOptions opt;
  opt.initial_step = {0.3};
  try {
    nelder_mead(f, x0, opt);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteObjective);
    CHECK(std::string(e.what()).find("x = [") != std::string::npos);
  }
  CHECK_THROWS_AS(nelder_mead(f, std::vector<double>{}, opt), Error);
}

TEST_CASE("nelder-mead: iteration cap defaults to 200 * dim") {
  // f strictly decreasing forever along x: never converges by spread
  const Objective f = [](std::span<const double> x) { return -x[0] - x[1]; };
  const std::vector<double> x0{0.0, 0.0};
  NelderMeadOptions opt;
  opt.f_tolerance = 0.0;
  const NelderMeadResult r = nelder_mead(f, x0, opt);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 400);
}
