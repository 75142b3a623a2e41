#pragma once

#include <array>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bpm/noise_grid.hpp"

namespace bpm {

/// A (detuning [rad/s], drift) coordinate pair.
using Point2 = std::array<double, 2>;

/// Axis-aligned box used to rescale sample coordinates onto the unit square
/// before any distance is taken.
struct Region {
  Point2 lo{0.0, 0.0};
  Point2 hi{1.0, 1.0};

  static Region of(const NoiseGrid& grid);
  void validate() const;
  Point2 to_unit(const Point2& x) const;
};

/// Power-exponential correlation exp(-sum_h alpha_h |dx_h|^p_h).
struct CorrelationParams {
  std::array<double, 2> alpha{1.0, 1.0};  // >= 0
  std::array<double, 2> power{2.0, 2.0};  // in [1, 2]

  void validate() const;
};

double correlation(const Point2& a, const Point2& b, const CorrelationParams& params);

/// sqrt(n) x sqrt(n) cells over `region`, one point per cell, each displaced
/// uniformly inside its cell (cell centres when `jitter` is false). Points are
/// ordered detuning-major.
std::vector<Point2> jittered_grid(const Region& region, int n, std::mt19937_64& rng,
                                  bool jitter = true);

struct FitOptions {
  int restarts = 5;
  double log_alpha_min = -6.0;
  double log_alpha_max = 6.0;
  double nugget = 1e-10;
  /// Minimum pairwise distance in the unit square, as a fraction of its
  /// diagonal.
  double separation_floor = 1e-6;
  int max_iterations = 800;
  /// Hyperparameters whose nugget-induced interpolation error exceeds this
  /// are rejected by the likelihood search.
  double interpolation_tolerance = 1e-9;
};

/// Constant-mean Kriging predictor over (detuning, drift). Immutable once
/// built; concurrent predict() calls are safe.
class KrigingModel {
 public:
  /// Assemble the predictor for fixed correlation parameters.
  static KrigingModel build(const Region& region, std::vector<Point2> samples,
                            std::vector<double> values, const CorrelationParams& params,
                            double nugget = 1e-10);

  /// Same sample positions and correlation parameters, new responses. Reuses
  /// the factorised correlation matrix.
  KrigingModel with_values(std::span<const double> values) const;

  /// mu + r(x)' R^-1 (y - 1 mu)
  double predict(const Point2& x) const;

  /// -(n/2) ln sigma2_hat - (1/2) ln|R| (constants dropped).
  double concentrated_log_likelihood() const;
  /// Full Gaussian log likelihood of the samples at (mu, sigma2).
  double log_likelihood(double mu, double sigma2) const;

  int size() const { return static_cast<int>(samples_.size()); }
  const Region& region() const { return region_; }
  const std::vector<Point2>& samples() const { return samples_; }
  const std::vector<double>& values() const { return values_; }
  const CorrelationParams& params() const { return params_; }
  double nugget() const { return nugget_; }
  double mu_hat() const { return mu_; }
  double sigma2_hat() const { return sigma2_; }
  const Eigen::MatrixXd& correlation_matrix() const { return corr_; }
  /// R^-1 (y - 1 mu)
  const Eigen::VectorXd& weights() const { return weights_; }
  /// Samples mapped onto the unit square.
  const std::vector<Point2>& unit_samples() const { return unit_; }

 private:
  KrigingModel() = default;
  void solve_for_values();

  Region region_;
  std::vector<Point2> samples_;
  std::vector<Point2> unit_;
  std::vector<double> values_;
  CorrelationParams params_;
  double nugget_ = 0.0;
  Eigen::MatrixXd corr_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd rinv_one_;
  double one_rinv_one_ = 0.0;
  double log_det_ = 0.0;
  double mu_ = 0.0;
  double sigma2_ = 0.0;
  Eigen::VectorXd weights_;
};

/// Maximum-likelihood fit of (alpha, p) by Nelder-Mead over
/// (ln alpha_1, ln alpha_2, p_1, p_2) with random restarts.
/// Throws kDegenerateDesign (coincident samples), kInvalidArgument (n < 3 or
/// non-finite values) or kFitFailed.
KrigingModel fit(const Region& region, std::vector<Point2> samples,
                 std::vector<double> values, std::mt19937_64& rng,
                 const FitOptions& options = {});

/// Leave-one-out predictions using the parent model's (alpha, p).
std::vector<double> loo_predictions(const KrigingModel& model);

/// OLS slope (with intercept) of LOO prediction against true value. Throws
/// kDegenerateValidation when the sample values have no spread.
double loo_validate(const KrigingModel& model);

/// Predictions at every grid point, flattened k * N + j, using the separable
/// structure of the kernel on a tensor grid.
class SurrogateGrid {
 public:
  SurrogateGrid(const KrigingModel& model, const NoiseGrid& grid);

  /// Raw BLUP map. `model` must share sample positions and correlation
  /// parameters with the one this grid was built for.
  std::vector<double> predictions(const KrigingModel& model) const;
  /// Weighted grid average of predictions clipped to [0, 1].
  double objective(const KrigingModel& model) const;

 private:
  void check_compatible(const KrigingModel& model) const;

  NoiseGrid grid_;
  std::vector<double> weights_;
  std::vector<Point2> unit_samples_;
  CorrelationParams params_;
  // factor_detuning_(i, k) * factor_drift_(i, j) = r_i(delta_k, kappa_j)
  Eigen::MatrixXd factor_detuning_;
  Eigen::MatrixXd factor_drift_;
};

/// Weighted average of clipped predictions over the grid; no true-function
/// calls.
double surrogate_objective(const KrigingModel& model, const NoiseGrid& grid);

/// JSON document with every model field in round-trip double precision.
std::string dump_model(const KrigingModel& model);
/// Rebuilds the model from a dump; throws kConfig on malformed input or when
/// the stored mu_hat disagrees with the recomputed one.
KrigingModel load_model(std::string_view text);

}  // namespace bpm
