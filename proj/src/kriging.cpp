#include "bpm/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bpm/error.hpp"
#include "bpm/nelder_mead.hpp"
#include "json.hpp"

namespace bpm {

Region Region::of(const NoiseGrid& grid) {
  Region r{{grid.detuning_min, grid.drift_min}, {grid.detuning_max, grid.drift_max}};
  r.validate();
  return r;
}

void Region::validate() const {
  for (int h = 0; h < 2; ++h) {
    if (!std::isfinite(lo[h]) || !std::isfinite(hi[h]) || !(hi[h] > lo[h])) {
      throw Error(ErrorCode::kInvalidArgument, "region must be a nonempty finite box");
    }
  }
}

Point2 Region::to_unit(const Point2& x) const {
  return {(x[0] - lo[0]) / (hi[0] - lo[0]), (x[1] - lo[1]) / (hi[1] - lo[1])};
}

void CorrelationParams::validate() const {
  for (int h = 0; h < 2; ++h) {
    if (!(alpha[h] >= 0.0) || !std::isfinite(alpha[h])) {
      throw Error(ErrorCode::kInvalidArgument, "correlation alpha must be >= 0");
    }
    if (!(power[h] >= 1.0 && power[h] <= 2.0)) {
      throw Error(ErrorCode::kInvalidArgument, "correlation power must lie in [1, 2]");
    }
  }
}

namespace {

inline double axis_term(double alpha, double power, double d) {
  d = std::abs(d);
  if (d == 0.0) return 0.0;
  if (power == 2.0) return alpha * d * d;
  if (power == 1.0) return alpha * d;
  return alpha * std::pow(d, power);
}

inline double corr_unchecked(const Point2& a, const Point2& b, const CorrelationParams& p) {
  return std::exp(-(axis_term(p.alpha[0], p.power[0], a[0] - b[0]) +
                    axis_term(p.alpha[1], p.power[1], a[1] - b[1])));
}

Eigen::MatrixXd assemble_correlation(const std::vector<Point2>& unit,
                                   const CorrelationParams& params, double nugget) {
  const auto n = static_cast<Eigen::Index>(unit.size());
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0 + nugget;
    for (Eigen::Index j = 0; j < i; ++j) {
      r(i, j) = r(j, i) = corr_unchecked(unit[i], unit[j], params);
    }
  }
  return r;
}

}  // namespace

double correlation(const Point2& a, const Point2& b, const CorrelationParams& params) {
  params.validate();
  return corr_unchecked(a, b, params);
}

std::vector<Point2> jittered_grid(const Region& region, int n, std::mt19937_64& rng,
                                  bool jitter) {
  region.validate();
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(std::max(n, 0)))));
  if (n < 1 || side * side != n) {
    throw Error(ErrorCode::kInvalidArgument, "sample count must be a perfect square");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w0 = (region.hi[0] - region.lo[0]) / side;
  const double w1 = (region.hi[1] - region.lo[1]) / side;
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int a = 0; a < side; ++a) {
    for (int b = 0; b < side; ++b) {
      const double u0 = jitter ? unit(rng) : 0.5;
      const double u1 = jitter ? unit(rng) : 0.5;
      pts.push_back({region.lo[0] + (a + u0) * w0, region.lo[1] + (b + u1) * w1});
    }
  }
  return pts;
}

KrigingModel KrigingModel::build(const Region& region, std::vector<Point2> samples,
                                 std::vector<double> values,
                                 const CorrelationParams& params, double nugget) {
  region.validate();
  params.validate();
  if (samples.size() != values.size() || samples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "samples and values must be nonempty and match");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite sample value");
  }
  KrigingModel m;
  m.region_ = region;
  m.samples_ = std::move(samples);
  m.values_ = std::move(values);
  m.params_ = params;
  m.nugget_ = nugget;
  m.unit_.reserve(m.samples_.size());
  for (const Point2& s : m.samples_) m.unit_.push_back(region.to_unit(s));
  m.corr_ = assemble_correlation(m.unit_, params, nugget);
  m.llt_.compute(m.corr_);
  if (m.llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::kFitFailed, "correlation matrix is not positive definite");
  }
  const auto n = static_cast<Eigen::Index>(m.samples_.size());
  m.rinv_one_ = m.llt_.solve(Eigen::VectorXd::Ones(n));
  m.one_rinv_one_ = m.rinv_one_.sum();
  const auto& l = m.llt_.matrixL();
  m.log_det_ = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) m.log_det_ += 2.0 * std::log(l(i, i));
  m.solve_for_values();
  return m;
}

void KrigingModel::solve_for_values() {
  const auto n = static_cast<Eigen::Index>(values_.size());
  const Eigen::Map<const Eigen::VectorXd> y(values_.data(), n);
  mu_ = rinv_one_.dot(y) / one_rinv_one_;
  const Eigen::VectorXd resid = y.array() - mu_;
  weights_ = llt_.solve(resid);
  sigma2_ = std::max(0.0, resid.dot(weights_) / static_cast<double>(n));
}

KrigingModel KrigingModel::with_values(std::span<const double> values) const {
  if (values.size() != samples_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "value count does not match sample count");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite sample value");
  }
  KrigingModel m = *this;
  m.values_.assign(values.begin(), values.end());
  m.solve_for_values();
  return m;
}

double KrigingModel::predict(const Point2& x) const {
  const Point2 ux = region_.to_unit(x);
  double acc = mu_;
  for (std::size_t i = 0; i < unit_.size(); ++i) {
    acc += corr_unchecked(unit_[i], ux, params_) * weights_[static_cast<Eigen::Index>(i)];
  }
  return acc;
}

double KrigingModel::concentrated_log_likelihood() const {
  const double n = static_cast<double>(samples_.size());
  if (!(sigma2_ > 0.0)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(sigma2_) - 0.5 * log_det_;
}

double KrigingModel::log_likelihood(double mu, double sigma2) const {
  const auto n = static_cast<Eigen::Index>(values_.size());
  const Eigen::Map<const Eigen::VectorXd> y(values_.data(), n);
  const Eigen::VectorXd resid = y.array() - mu;
  const double quad = resid.dot(llt_.solve(resid));
  const double nd = static_cast<double>(n);
  return -0.5 * nd * std::log(2.0 * std::numbers::pi) - 0.5 * nd * std::log(sigma2) -
         0.5 * log_det_ - quad / (2.0 * sigma2);
}

namespace {

void check_design(const std::vector<Point2>& samples, const Region& region,
                  double floor) {
  const double min_dist = floor * std::sqrt(2.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Point2 a = region.to_unit(samples[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const Point2 b = region.to_unit(samples[j]);
      if (std::hypot(a[0] - b[0], a[1] - b[1]) < min_dist) {
        throw Error(ErrorCode::kDegenerateDesign, "samples " + std::to_string(j) + " and " +
                                                      std::to_string(i) + " coincide");
      }
    }
  }
}

double interpolation_residual(const KrigingModel& m) {
  // predict(s_i) - y_i = -nugget * w_i exactly
  return m.nugget() * m.weights().cwiseAbs().maxCoeff();
}

CorrelationParams params_from(std::span<const double> theta, const FitOptions& opt) {
  CorrelationParams p;
  for (int h = 0; h < 2; ++h) {
    p.alpha[h] = std::exp(std::clamp(theta[h], opt.log_alpha_min, opt.log_alpha_max));
    p.power[h] = std::clamp(theta[2 + h], 1.0, 2.0);
  }
  return p;
}

}  // namespace

KrigingModel fit(const Region& region, std::vector<Point2> samples,
                 std::vector<double> values, std::mt19937_64& rng,
                 const FitOptions& options) {
  region.validate();
  if (samples.size() < 3) throw Error(ErrorCode::kInvalidArgument, "fit needs n >= 3");
  if (samples.size() != values.size()) {
    throw Error(ErrorCode::kInvalidArgument, "samples and values must match");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite sample value");
  }
  check_design(samples, region, options.separation_floor);

  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi - *lo <= 1e-14 * std::max(1.0, std::abs(*hi))) {
    // No spread to learn a length scale from; sigma2 = 0 and the predictor is
    // the constant mu_hat.
    return KrigingModel::build(region, std::move(samples), std::move(values),
                               CorrelationParams{}, options.nugget);
  }

  constexpr double kPenalty = 1e300;
  // Near-singular R (long length scales, smooth data) inflates R^-1 (y - 1 mu)
  // until the nugget alone spoils interpolation. Such hyperparameters are
  // treated as infeasible; the graded penalty steers the simplex back.
  constexpr double kInfeasible = 1e6;
  const Objective neg_loglik = [&](std::span<const double> theta) {
    try {
      const KrigingModel m = KrigingModel::build(region, samples, values,
                                                 params_from(theta, options), options.nugget);
      const double ll = m.concentrated_log_likelihood();
      if (!std::isfinite(ll)) return kPenalty;
      const double resid = interpolation_residual(m);
      if (resid > options.interpolation_tolerance) {
        return kInfeasible * (1.0 + std::log10(resid / options.interpolation_tolerance));
      }
      return -ll;
    } catch (const Error&) {
      return kPenalty;
    }
  };

  NelderMeadOptions nm;
  nm.initial_step = {1.0, 1.0, 0.25, 0.25};
  nm.f_tolerance = 1e-8;
  nm.max_iterations = options.max_iterations;

  std::uniform_real_distribution<double> log_alpha(options.log_alpha_min, options.log_alpha_max);
  std::uniform_real_distribution<double> power(1.0, 2.0);
  double best = kPenalty;
  std::vector<double> best_theta;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    std::vector<double> x0{log_alpha(rng), log_alpha(rng), power(rng), power(rng)};
    // step inward so the initial simplex does not start outside the box
    const NelderMeadResult res = nelder_mead(neg_loglik, x0, nm);
    if (res.f < best) {
      best = res.f;
      best_theta = res.x;
    }
  }
  if (best_theta.empty() || !(best < kInfeasible)) {
    throw Error(ErrorCode::kFitFailed, "likelihood maximisation failed on every restart");
  }
  return KrigingModel::build(region, std::move(samples), std::move(values),
                             params_from(best_theta, options), options.nugget);
}

std::vector<double> loo_predictions(const KrigingModel& model) {
  const int n = model.size();
  if (n < 3) throw Error(ErrorCode::kInvalidArgument, "leave-one-out needs n >= 3");
  std::vector<double> pred(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<Point2> s;
    std::vector<double> y;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      s.push_back(model.samples()[j]);
      y.push_back(model.values()[j]);
    }
    const KrigingModel fold = KrigingModel::build(model.region(), std::move(s), std::move(y),
                                                  model.params(), model.nugget());
    pred[i] = fold.predict(model.samples()[i]);
  }
  return pred;
}

double loo_validate(const KrigingModel& model) {
  const std::vector<double>& y = model.values();
  const std::vector<double> p = loo_predictions(model);
  const double n = static_cast<double>(y.size());
  double my = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mp += p[i];
  }
  my /= n;
  mp /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sxx += (y[i] - my) * (y[i] - my);
    sxy += (y[i] - my) * (p[i] - mp);
  }
  if (!(sxx > 1e-24 * std::max(1.0, my * my) * n)) {
    throw Error(ErrorCode::kDegenerateValidation, "sample values have zero variance");
  }
  return sxy / sxx;
}

SurrogateGrid::SurrogateGrid(const KrigingModel& model, const NoiseGrid& grid)
    : grid_(grid),
      weights_(grid.weights()),
      unit_samples_(model.unit_samples()),
      params_(model.params()) {
  const auto n = static_cast<Eigen::Index>(unit_samples_.size());
  const std::vector<double> det = grid.detunings();
  const std::vector<double> kap = grid.drifts();
  const Region& reg = model.region();
  factor_detuning_.resize(n, grid.n_detuning);
  factor_drift_.resize(n, grid.n_drift);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point2& s = unit_samples_[i];
    for (int k = 0; k < grid.n_detuning; ++k) {
      const double u = (det[k] - reg.lo[0]) / (reg.hi[0] - reg.lo[0]);
      factor_detuning_(i, k) = std::exp(-axis_term(params_.alpha[0], params_.power[0], u - s[0]));
    }
    for (int j = 0; j < grid.n_drift; ++j) {
      const double u = (kap[j] - reg.lo[1]) / (reg.hi[1] - reg.lo[1]);
      factor_drift_(i, j) = std::exp(-axis_term(params_.alpha[1], params_.power[1], u - s[1]));
    }
  }
}

void SurrogateGrid::check_compatible(const KrigingModel& model) const {
  if (model.unit_samples() != unit_samples_ || model.params().alpha != params_.alpha ||
      model.params().power != params_.power) {
    throw Error(ErrorCode::kInvalidArgument,
                "model does not share sample positions and parameters with the grid");
  }
}

std::vector<double> SurrogateGrid::predictions(const KrigingModel& model) const {
  check_compatible(model);
  const Eigen::Index n = factor_detuning_.rows();
  std::vector<double> out(static_cast<std::size_t>(grid_.size()));
  Eigen::VectorXd scaled(n);
  for (int k = 0; k < grid_.n_detuning; ++k) {
    scaled = factor_detuning_.col(k).cwiseProduct(model.weights());
    for (int j = 0; j < grid_.n_drift; ++j) {
      out[static_cast<std::size_t>(k) * grid_.n_drift + j] =
          model.mu_hat() + scaled.dot(factor_drift_.col(j));
    }
  }
  return out;
}

double SurrogateGrid::objective(const KrigingModel& model) const {
  const std::vector<double> pred = predictions(model);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += weights_[i] * std::clamp(pred[i], 0.0, 1.0);
  }
  return acc;
}

double surrogate_objective(const KrigingModel& model, const NoiseGrid& grid) {
  return SurrogateGrid(model, grid).objective(model);
}

std::string dump_model(const KrigingModel& model) {
  using nlohmann::json;
  json j;
  j["kind"] = "kriging-model";
  j["region"] = {{"lo", model.region().lo}, {"hi", model.region().hi}};
  j["samples"] = model.samples();
  j["values"] = model.values();
  j["alpha"] = model.params().alpha;
  j["power"] = model.params().power;
  j["nugget"] = model.nugget();
  j["mu_hat"] = model.mu_hat();
  j["sigma2_hat"] = model.sigma2_hat();
  const Eigen::MatrixXd& r = model.correlation_matrix();
  json rows = json::array();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(r.cols()));
    for (Eigen::Index c = 0; c < r.cols(); ++c) row[c] = r(i, c);
    rows.push_back(row);
  }
  j["correlation_matrix"] = rows;
  j["weights"] = std::vector<double>(model.weights().data(),
                                     model.weights().data() + model.weights().size());
  return j.dump(2);
}

KrigingModel load_model(std::string_view text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    if (j.at("kind").get<std::string>() != "kriging-model") {
      throw Error(ErrorCode::kConfig, "not a kriging-model document");
    }
    Region region{j.at("region").at("lo").get<Point2>(), j.at("region").at("hi").get<Point2>()};
    CorrelationParams params;
    params.alpha = j.at("alpha").get<std::array<double, 2>>();
    params.power = j.at("power").get<std::array<double, 2>>();
    KrigingModel m = KrigingModel::build(region, j.at("samples").get<std::vector<Point2>>(),
                                         j.at("values").get<std::vector<double>>(), params,
                                         j.at("nugget").get<double>());
    const double stored = j.at("mu_hat").get<double>();
    if (std::abs(stored - m.mu_hat()) > 1e-10 * std::max(1.0, std::abs(stored))) {
      throw Error(ErrorCode::kConfig, "stored mu_hat disagrees with the recomputed model");
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed model document: ") + e.what());
  }
}

}  // namespace bpm
