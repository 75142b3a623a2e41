#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bpm/control_field.hpp"
#include "bpm/kriging.hpp"
#include "bpm/nelder_mead.hpp"
#include "bpm/noise_grid.hpp"
#include "bpm/spin_dynamics.hpp"

namespace bpm {

enum class Method { kBPM, kPM, kBSFB, kSFB };

const char* to_string(Method method) noexcept;
/// Accepts "b-pm", "pm", "b-sfb", "sfb" (case-insensitive, '_' or '-').
Method parse_method(std::string_view text);
Basis basis_of(Method method) noexcept;
bool uses_surrogate(Method method) noexcept;

/// What Omega_max bounds. kLabField bounds the lab-frame field |g(t)|, whose
/// rotating-frame quadratures then peak at Omega_max / 2; kQuadrature bounds
/// sqrt(Omega_x^2 + Omega_y^2) directly.
enum class AmplitudeLimit { kLabField, kQuadrature };

const char* to_string(AmplitudeLimit limit) noexcept;
AmplitudeLimit parse_amplitude_limit(std::string_view text);

struct OptConfig {
  Method method = Method::kBPM;
  int n_sets = 1;             // N_D
  int surrogate_samples = 9;  // n, surrogate methods only
  /// Truth grid searched directly by PM / SFB.
  NoiseGrid search_grid = NoiseGrid::standard(4, 4);
  /// Grid the surrogate objective averages its predictions over.
  NoiseGrid surrogate_grid = NoiseGrid::standard(50, 50);
  NoiseGrid verify_grid = NoiseGrid::standard(50, 50);
  double duration = 100e-9;          // T, s
  double omega_max = 6.283185307179586e7;  // 2pi x 10 MHz
  AmplitudeLimit amplitude_limit = AmplitudeLimit::kLabField;
  int n_steps = kDefaultSteps;
  FidelityTarget target = StateTransfer{};
  NelderMeadOptions search{};        // initial_step is overwritten, see below
  double initial_step_fraction = 0.05;
  int max_model_attempts = 10;
  double p_fit_threshold = 0.6;
  FitOptions fit{};
  std::uint64_t seed = 1;

  void validate() const;
  /// True for the standard sample counts
  /// (n in {9, 16} for surrogate methods, M x N = 16 otherwise).
  bool is_standard_scenario() const;
  /// Bound handed to ControlField::amp_limit.
  double quadrature_limit() const;
};

/// Ranges the random starting point is drawn from, the per-parameter widths
/// the simplex is scaled by, and the feasible box the search folds into.
/// Layout matches ControlField::parameters().
struct ParameterBox {
  std::vector<double> init_lo, init_hi;
  std::vector<double> width;
  std::vector<double> hi;      // upper bound, +inf for amplitudes; lower is 0
  std::vector<bool> periodic;  // phases wrap, everything else reflects

  /// Maps any point into the box (mirror at the bounds, or mod the period).
  std::vector<double> fold(std::span<const double> lambda) const;
};
ParameterBox parameter_box(Basis basis, int n_sets, double duration, double omega_max);

struct OptRun {
  Method method = Method::kBPM;
  int n_sets = 1;
  std::uint64_t seed = 0;
  std::vector<double> lambda_init;  // after constraint enforcement
  std::vector<double> lambda_opt;   // after constraint enforcement
  ControlField field;               // optimised field
  double f_search = 0.0;            // objective value the search ended on
  double f_verified = 0.0;          // truth on verify_grid
  long true_calls = 0;              // single-point true fidelities before verification
  long verification_calls = 0;
  long search_evaluations = 0;      // distinct parameter vectors evaluated
  int model_attempts = 0;           // surrogate builds (surrogate methods)
  double p_fit = 0.0;
  CorrelationParams correlation{};
  double wall_ms = 0.0;
};

/// Strict threshold test used by the rebuild loop.
inline bool accepts_model(double p_fit, double threshold) { return p_fit > threshold; }

using TruthFunction = std::function<double(const Point2&)>;

struct ValidatedSurrogate {
  KrigingModel model;
  long true_calls = 0;
  int attempts = 0;
  double p_fit = 0.0;
};

/// Sample -> fit -> leave-one-out loop until p_fit exceeds the threshold.
/// Attempts whose samples are degenerate (no spread) count as rejected.
/// Throws kModelValidationFailed once `max_attempts` builds were rejected.
ValidatedSurrogate build_valid_surrogate(const TruthFunction& truth, const Region& region,
                                         int n, int max_attempts, std::mt19937_64& rng,
                                         double p_fit_threshold = 0.6,
                                         const FitOptions& fit_options = {});

/// Surrogate estimate of the ensemble objective for arbitrary fields: sample
/// positions and (alpha, p) are frozen, the n sample responses are recomputed
/// for each field (n true calls) and the predictor averaged over the grid.
class SurrogateObjective {
 public:
  SurrogateObjective(KrigingModel model, const NoiseGrid& grid, FidelityTarget target,
                     int n_steps);

  struct Value {
    double estimate = 0.0;
    long true_calls = 0;
  };
  Value operator()(const ControlField& field) const;

  const KrigingModel& model() const { return model_; }

 private:
  KrigingModel model_;
  SurrogateGrid grid_;
  FidelityTarget target_;
  int n_steps_;
};

OptRun bpm_optimize(const OptConfig& config);
OptRun baseline_optimize(const OptConfig& config);
/// Dispatches on config.method.
OptRun optimize(const OptConfig& config);

/// Weighted truth objective of `run.field` recomputed from scratch.
double verify(const OptRun& run, const OptConfig& config);

/// Per-trial seed: SplitMix64 of master + (index + 1) * golden-ratio increment.
std::uint64_t trial_seed(std::uint64_t master, int index);

struct TrialOutcome {
  std::uint64_t seed = 0;
  std::optional<OptRun> run;
  std::string error;  // set when run is empty
};

struct TrialStats {
  std::vector<TrialOutcome> trials;
  int succeeded = 0;
  double mean_f = 0.0;
  double median_f = 0.0;
  double best_f = 0.0;
  double mean_true_calls = 0.0;
  /// counts of f_verified in [i/100, (i+1)/100), last bin closed
  std::vector<int> histogram = std::vector<int>(100, 0);

  int count_at_least(double threshold) const;
};

TrialStats summarize(std::vector<TrialOutcome> trials);

/// Independent trials with seeds trial_seed(config.seed, i); results are
/// ordered by trial index whatever the thread count. Throws only when every
/// trial failed.
TrialStats run_trials(const OptConfig& config, int n_trials, int threads = 1);

}  // namespace bpm
