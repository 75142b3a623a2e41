#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "bpm/error.hpp"
#include "bpm/kriging.hpp"
#include "bpm/units.hpp"
#include "doctest.h"

using namespace bpm;

namespace {

const NoiseGrid kGrid = NoiseGrid::standard(50, 50);
const Region kRegion = Region::of(kGrid);

// smooth test response expressed on the unit square
double quadratic(const Point2& x) {
  const Point2 u = kRegion.to_unit(x);
  return 0.2 + 0.6 * u[0] * u[0] - 0.3 * u[0] * u[1] + 0.4 * u[1] - 0.25 * u[1] * u[1];
}

double linear(const Point2& x) {
  const Point2 u = kRegion.to_unit(x);
  return 0.1 + 0.7 * u[0] + 0.2 * u[1];
}

template <typename F>
std::vector<double> eval(const std::vector<Point2>& pts, F f) {
  std::vector<double> v;
  for (const Point2& p : pts) v.push_back(f(p));
  return v;
}

void check_interpolates(const KrigingModel& m) {
  for (int i = 0; i < m.size(); ++i) {
    CHECK(std::abs(m.predict(m.samples()[i]) - m.values()[i]) < 1e-8);
  }
}

}  // namespace

TEST_CASE("correlation: closed forms") {
  CorrelationParams p;
  p.alpha = {1.0, 1.0};
  p.power = {2.0, 2.0};
  CHECK(correlation({0.3, 0.2}, {0.3, 0.2}, p) == 1.0);
  CHECK(correlation({0.0, 0.0}, {1.0, 0.0}, p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(correlation({0.0, 0.0}, {1.0, 0.0}, p) == doctest::Approx(0.367879).epsilon(1e-6));

  // p = 1: product of Ornstein-Uhlenbeck kernels
  CorrelationParams ou;
  ou.alpha = {0.7, 2.5};
  ou.power = {1.0, 1.0};
  const Point2 a{0.1, 0.9}, b{0.45, 0.35};
  CHECK(correlation(a, b, ou) ==
        doctest::Approx(std::exp(-0.7 * 0.35) * std::exp(-2.5 * 0.55)).epsilon(1e-14));

  CorrelationParams bad;
  bad.power = {0.5, 2.0};
  CHECK_THROWS_AS(correlation(a, b, bad), Error);
  bad.power = {1.0, 2.0};
  bad.alpha = {-1.0, 1.0};
  CHECK_THROWS_AS(correlation(a, b, bad), Error);
}

TEST_CASE("correlation: symmetric and non-increasing in each axis distance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    CorrelationParams p;
    p.alpha = {5 * u(rng), 5 * u(rng)};
    p.power = {1 + u(rng), 1 + u(rng)};
    const Point2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
    CHECK(correlation(a, b, p) == correlation(b, a, p));
    CHECK(correlation(a, a, p) == 1.0);
    const Point2 farther{a[0] + 1.1 * (b[0] - a[0]), b[1]};
    CHECK(correlation(a, farther, p) <= correlation(a, b, p));
  }
}

TEST_CASE("jittered grid") {
  std::mt19937_64 rng(11);
  SUBCASE("one point per cell") {
    const auto pts = jittered_grid(kRegion, 9, rng);
    REQUIRE(pts.size() == 9);
    std::vector<int> hits(9, 0);
    for (const Point2& p : pts) {
      const Point2 u = kRegion.to_unit(p);
      CHECK(u[0] >= 0.0);
      CHECK(u[0] < 1.0);
      CHECK(u[1] >= 0.0);
      CHECK(u[1] < 1.0);
      ++hits[static_cast<int>(u[0] * 3) * 3 + static_cast<int>(u[1] * 3)];
    }
    for (int h : hits) CHECK(h == 1);
  }
  SUBCASE("zero jitter gives cell centres") {
    const auto pts = jittered_grid(kRegion, 16, rng, false);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const Point2 u = kRegion.to_unit(pts[a * 4 + b]);
        CHECK(u[0] == doctest::Approx((a + 0.5) / 4).epsilon(1e-14));
        CHECK(u[1] == doctest::Approx((b + 0.5) / 4).epsilon(1e-14));
      }
    }
  }
  SUBCASE("deterministic for a fixed seed") {
    std::mt19937_64 r1(5), r2(5);
    CHECK(jittered_grid(kRegion, 16, r1) == jittered_grid(kRegion, 16, r2));
  }
  SUBCASE("non-square counts are rejected") {
    CHECK_THROWS_AS(jittered_grid(kRegion, 8, rng), Error);
    CHECK_THROWS_AS(jittered_grid(kRegion, 0, rng), Error);
  }
}

TEST_CASE("fit: constant data gives a constant predictor") {
  std::mt19937_64 rng(1);
  const auto pts = jittered_grid(kRegion, 9, rng);
  const KrigingModel m = fit(kRegion, pts, std::vector<double>(9, 0.73), rng);
  CHECK(m.sigma2_hat() == doctest::Approx(0.0));
  CHECK(m.mu_hat() == doctest::Approx(0.73).epsilon(1e-12));
  CHECK(m.predict({0.0, 1.0}) == doctest::Approx(0.73).epsilon(1e-12));
  CHECK(m.predict({1e9, 0.6}) == doctest::Approx(0.73).epsilon(1e-12));
  CHECK(surrogate_objective(m, NoiseGrid::standard(10, 10)) == doctest::Approx(0.73).epsilon(1e-12));
  CHECK_THROWS_AS(loo_validate(m), Error);
}

TEST_CASE("fit: smooth quadratic, n = 16, held-out accuracy") {
  std::mt19937_64 rng(2024);
  const auto pts = jittered_grid(kRegion, 16, rng);
  const KrigingModel m = fit(kRegion, pts, eval(pts, quadratic), rng);
  check_interpolates(m);

  const NoiseGrid held = NoiseGrid::standard(10, 10);
  double err = 0.0, lo = 1e9, hi = -1e9;
  for (double d : held.detunings()) {
    for (double k : held.drifts()) {
      const double truth = quadratic({d, k});
      err += std::abs(m.predict({d, k}) - truth);
      lo = std::min(lo, truth);
      hi = std::max(hi, truth);
    }
  }
  CHECK(err / 100.0 < 0.05 * (hi - lo));
}

TEST_CASE("fit: model invariants") {
  std::mt19937_64 rng(77);
  const auto pts = jittered_grid(kRegion, 9, rng);
  const KrigingModel m = fit(kRegion, pts, eval(pts, quadratic), rng);
  m.params().validate();

  const Eigen::MatrixXd& r = m.correlation_matrix();
  CHECK((r - r.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < r.rows(); ++i) CHECK(r(i, i) == doctest::Approx(1.0).epsilon(1e-9));

  // mu_hat against an independent dense solve
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(m.size());
  const Eigen::Map<const Eigen::VectorXd> y(m.values().data(), m.size());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
  const double mu = one.dot(lu.solve(y)) / one.dot(lu.solve(one));
  CHECK(std::abs(mu - m.mu_hat()) < 1e-10);

  check_interpolates(m);
  // far from every sample the predictor reverts to mu_hat
  CHECK(m.predict({1e12, -1e6}) == doctest::Approx(m.mu_hat()).epsilon(1e-14));

  // (mu_hat, sigma2_hat) is a local maximum of the full likelihood
  const double at_hat = m.log_likelihood(m.mu_hat(), m.sigma2_hat());
  for (double eps : {1e-3, -1e-3, 1e-5, -1e-5}) {
    CHECK(at_hat >= m.log_likelihood(m.mu_hat() * (1 + eps), m.sigma2_hat()));
    CHECK(at_hat >= m.log_likelihood(m.mu_hat(), m.sigma2_hat() * (1 + eps)));
  }
}

TEST_CASE("fit: determinism") {
  std::mt19937_64 a(99), b(99);
  const auto pa = jittered_grid(kRegion, 16, a);
  const auto pb = jittered_grid(kRegion, 16, b);
  const KrigingModel ma = fit(kRegion, pa, eval(pa, quadratic), a);
  const KrigingModel mb = fit(kRegion, pb, eval(pb, quadratic), b);
  CHECK(ma.params().alpha == mb.params().alpha);
  CHECK(ma.params().power == mb.params().power);
  CHECK(ma.mu_hat() == mb.mu_hat());
  CHECK(loo_validate(ma) == loo_validate(mb));
}

TEST_CASE("fit: error paths") {
  std::mt19937_64 rng(4);
  auto pts = jittered_grid(kRegion, 9, rng);
  auto vals = eval(pts, quadratic);
  auto dup = pts;
  dup[3] = dup[5];
  try {
    fit(kRegion, dup, vals, rng);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateDesign);
  }
  auto bad = vals;
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit(kRegion, pts, bad, rng), Error);
  CHECK_THROWS_AS(fit(kRegion, {pts[0], pts[1]}, {0.1, 0.2}, rng), Error);
}

TEST_CASE("leave-one-out validation") {
  SUBCASE("linear data is predictable") {
    std::mt19937_64 rng(8);
    const auto pts = jittered_grid(kRegion, 16, rng);
    const KrigingModel m = fit(kRegion, pts, eval(pts, linear), rng);
    CHECK(loo_validate(m) == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("white noise is not") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto pts = jittered_grid(kRegion, 16, rng);
    std::vector<double> y(16);
    for (double& v : y) v = noise(rng);
    CorrelationParams short_range;
    short_range.alpha = {200.0, 200.0};
    const KrigingModel m = KrigingModel::build(kRegion, pts, y, short_range);
    CHECK(std::abs(loo_validate(m)) < 0.1);
  }
  SUBCASE("reuses the parent parameters fold by fold") {
    std::mt19937_64 rng(21);
    const auto pts = jittered_grid(kRegion, 9, rng);
    const KrigingModel m = fit(kRegion, pts, eval(pts, quadratic), rng);
    const auto pred = loo_predictions(m);
    std::vector<Point2> s(pts.begin() + 1, pts.end());
    std::vector<double> y(m.values().begin() + 1, m.values().end());
    const KrigingModel fold = KrigingModel::build(kRegion, s, y, m.params());
    CHECK(pred[0] == doctest::Approx(fold.predict(pts[0])).epsilon(1e-14));
  }
}

TEST_CASE("refreshing sample values keeps the factorisation consistent") {
  std::mt19937_64 rng(31);
  const auto pts = jittered_grid(kRegion, 9, rng);
  const KrigingModel m = fit(kRegion, pts, eval(pts, quadratic), rng);
  const auto y2 = eval(pts, linear);
  const KrigingModel refreshed = m.with_values(y2);
  const KrigingModel rebuilt = KrigingModel::build(kRegion, pts, y2, m.params());
  CHECK(refreshed.mu_hat() == doctest::Approx(rebuilt.mu_hat()).epsilon(1e-13));
  CHECK(refreshed.sigma2_hat() == doctest::Approx(rebuilt.sigma2_hat()).epsilon(1e-12));
  check_interpolates(refreshed);
  CHECK_THROWS_AS(m.with_values(std::vector<double>(4, 0.0)), Error);
}

TEST_CASE("surrogate grid matches pointwise prediction") {
  std::mt19937_64 rng(41);
  const auto pts = jittered_grid(kRegion, 16, rng);
  const KrigingModel m = fit(kRegion, pts, eval(pts, quadratic), rng);
  const NoiseGrid g = NoiseGrid::standard(13, 7);
  const SurrogateGrid sg(m, g);
  const auto map = sg.predictions(m);
  const auto det = g.detunings();
  const auto kap = g.drifts();
  double direct = 0.0;
  const auto w = g.weights();
  for (int k = 0; k < 13; ++k) {
    for (int j = 0; j < 7; ++j) {
      const double p = m.predict({det[k], kap[j]});
      CHECK(map[k * 7 + j] == doctest::Approx(p).epsilon(1e-12));
      direct += w[k * 7 + j] * std::clamp(p, 0.0, 1.0);
    }
  }
  CHECK(surrogate_objective(m, g) == doctest::Approx(direct).epsilon(1e-12));

  // a model with different parameters is refused
  CorrelationParams other = m.params();
  other.alpha[0] *= 2;
  const KrigingModel m2 = KrigingModel::build(kRegion, pts, m.values(), other);
  CHECK_THROWS_AS(sg.objective(m2), Error);
}

TEST_CASE("model dump and load") {
  std::mt19937_64 rng(55);
  const auto pts = jittered_grid(kRegion, 9, rng);
  const KrigingModel m = fit(kRegion, pts, eval(pts, quadratic), rng);
  const std::string text = dump_model(m);
  const KrigingModel back = load_model(text);
  CHECK(back.mu_hat() == m.mu_hat());
  CHECK(back.params().alpha == m.params().alpha);
  CHECK(back.samples() == m.samples());
  for (const Point2& x : std::vector<Point2>{{0.0, 1.0}, {3e7, 0.8}}) {
    CHECK(back.predict(x) == m.predict(x));
  }
  CHECK(dump_model(back) == text);
  CHECK_THROWS_AS(load_model("{\"kind\": \"nope\"}"), Error);
  CHECK_THROWS_AS(load_model("not json"), Error);
}
