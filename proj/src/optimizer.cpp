#include "bpm/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "bpm/error.hpp"
#include "bpm/seed.hpp"
#include "bpm/units.hpp"

namespace bpm {

const char* to_string(Method method) noexcept {
  switch (method) {
    case Method::kBPM: return "B-PM";
    case Method::kPM: return "PM";
    case Method::kBSFB: return "B-SFB";
    case Method::kSFB: return "SFB";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c == '_') c = '-';
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (s == "b-pm" || s == "bpm") return Method::kBPM;
  if (s == "pm") return Method::kPM;
  if (s == "b-sfb" || s == "bsfb") return Method::kBSFB;
  if (s == "sfb") return Method::kSFB;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(text) + "'");
}

const char* to_string(AmplitudeLimit limit) noexcept {
  return limit == AmplitudeLimit::kLabField ? "lab-field" : "quadrature";
}

AmplitudeLimit parse_amplitude_limit(std::string_view text) {
  if (text == "lab-field") return AmplitudeLimit::kLabField;
  if (text == "quadrature") return AmplitudeLimit::kQuadrature;
  throw Error(ErrorCode::kInvalidArgument, "unknown amplitude limit '" + std::string(text) + "'");
}

Basis basis_of(Method method) noexcept {
  return (method == Method::kPM || method == Method::kBPM) ? Basis::kPM : Basis::kSFB;
}

bool uses_surrogate(Method method) noexcept {
  return method == Method::kBPM || method == Method::kBSFB;
}

void OptConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (n_sets < 1) bad("n_sets must be >= 1");
  if (!(duration > 0.0) || !std::isfinite(duration)) bad("duration must be positive");
  if (!(omega_max > 0.0) || !std::isfinite(omega_max)) bad("omega_max must be positive");
  if (n_steps < 1) bad("n_steps must be >= 1");
  if (max_model_attempts < 1) bad("max_model_attempts must be >= 1");
  if (!(initial_step_fraction > 0.0)) bad("initial_step_fraction must be positive");
  if (uses_surrogate(method)) {
    int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(surrogate_samples))));
    if (surrogate_samples < 4 || r * r != surrogate_samples)
      bad("surrogate_samples must be a perfect square >= 4");
    surrogate_grid.validate();
  } else {
    search_grid.validate();
  }
  verify_grid.validate();
}

bool OptConfig::is_standard_scenario() const {
  if (uses_surrogate(method)) return surrogate_samples == 9 || surrogate_samples == 16;
  return search_grid.size() == 16;
}

double OptConfig::quadrature_limit() const {
  return amplitude_limit == AmplitudeLimit::kLabField ? 0.5 * omega_max : omega_max;
}

ParameterBox parameter_box(Basis basis, int n_sets, double duration, double omega_max) {
  const double f0 = units::kTwoPi / duration;
  ParameterBox box;
  auto add = [&](double init_hi, double width, double hi, bool periodic) {
    box.init_lo.push_back(0.0);
    box.init_hi.push_back(init_hi);
    box.width.push_back(width);
    box.hi.push_back(hi);
    box.periodic.push_back(periodic);
  };
  for (int j = 0; j < n_sets; ++j) {
    add(omega_max, omega_max, std::numeric_limits<double>::infinity(), false);
    add(f0, 5.0 * f0, 5.0 * f0, false);
    if (basis == Basis::kPM) {
      add(f0, 5.0 * f0, 5.0 * f0, false);
    } else {
      add(units::kTwoPi, units::kTwoPi, units::kTwoPi, true);
      add(units::kTwoPi, units::kTwoPi, units::kTwoPi, true);
    }
  }
  return box;
}

std::vector<double> ParameterBox::fold(std::span<const double> lambda) const {
  std::vector<double> out(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = out[i];
    if (periodic[i]) {
      v = std::fmod(v, hi[i]);
      if (v < 0.0) v += hi[i];
    } else if (std::isinf(hi[i])) {
      v = std::abs(v);
    } else {
      double r = std::fmod(std::abs(v), 2.0 * hi[i]);
      v = r > hi[i] ? 2.0 * hi[i] - r : r;
    }
    out[i] = v;
  }
  return out;
}

ValidatedSurrogate build_valid_surrogate(const TruthFunction& truth, const Region& region,
                                         int n, int max_attempts, std::mt19937_64& rng,
                                         double p_fit_threshold,
                                         const FitOptions& fit_options) {
  if (max_attempts < 1) throw Error(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
  long calls = 0;
  double last_p = 0.0;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::vector<Point2> samples = jittered_grid(region, n, rng);
    std::vector<double> values(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) values[i] = truth(samples[i]);
    calls += static_cast<long>(samples.size());
    try {
      KrigingModel model = fit(region, samples, values, rng, fit_options);
      last_p = loo_validate(model);
      if (accepts_model(last_p, p_fit_threshold))
        return {std::move(model), calls, attempt, last_p};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateValidation && e.code() != ErrorCode::kFitFailed)
        throw;
      last_p = 0.0;
    }
  }
  throw Error(ErrorCode::kModelValidationFailed,
              "no surrogate passed validation after " + std::to_string(max_attempts) +
                  " attempts (last p_fit = " + std::to_string(last_p) + ")");
}

SurrogateObjective::SurrogateObjective(KrigingModel model, const NoiseGrid& grid,
                                       FidelityTarget target, int n_steps)
    : model_(std::move(model)), grid_(model_, grid), target_(std::move(target)),
      n_steps_(n_steps) {}

SurrogateObjective::Value SurrogateObjective::operator()(const ControlField& field) const {
  SampledDrive drive = sample_drive(field, n_steps_);
  const auto& s = model_.samples();
  std::vector<double> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    y[i] = point_fidelity(drive, target_, s[i][0], s[i][1]);
  KrigingModel m = model_.with_values(y);
  return {grid_.objective(m), static_cast<long>(s.size())};
}

namespace {

ControlField template_field(const OptConfig& c) {
  std::vector<double> z(static_cast<std::size_t>(c.n_sets), 0.0);
  const double limit = c.quadrature_limit();
  if (basis_of(c.method) == Basis::kPM) return ControlField::pm(z, z, z, c.duration, limit);
  return ControlField::sfb(z, z, z, z, c.duration, limit);
}

struct Search {
  std::vector<double> x;  // normalised
  double f = 0.0;
  long distinct = 0;
  long calls = 0;
};

/// Nelder-Mead over normalised coordinates with enforcement before every
/// evaluation. `eval` maps an enforced field to (objective, true calls).
template <class Eval>
Search run_search(const OptConfig& c, const ControlField& tmpl, const ParameterBox& box,
                  const std::vector<double>& lambda0, Eval&& eval,
                  std::map<std::vector<double>, double>& memo) {
  Search out;
  const std::size_t dim = box.width.size();
  auto field_at = [&](std::span<const double> x) {
    std::vector<double> lam(dim);
    for (std::size_t i = 0; i < dim; ++i) lam[i] = x[i] * box.width[i];
    return enforce_amplitude_constraint(tmpl.with_parameters(box.fold(lam)));
  };
  Objective obj = [&](std::span<const double> x) {
    ControlField f = field_at(x);
    std::vector<double> key = f.parameters();
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    auto [value, calls] = eval(f);
    out.calls += calls;
    ++out.distinct;
    double loss = 1.0 - value;
    memo.emplace(std::move(key), loss);
    return loss;
  };
  std::vector<double> x0(dim);
  for (std::size_t i = 0; i < dim; ++i) x0[i] = lambda0[i] / box.width[i];
  NelderMeadOptions opts = c.search;
  opts.initial_step = {c.initial_step_fraction};
  NelderMeadResult r = nelder_mead(obj, x0, opts);
  out.x = r.x;
  out.f = r.f;
  return out;
}

std::vector<double> random_start(const ParameterBox& box, std::mt19937_64& rng) {
  std::vector<double> lam(box.width.size());
  for (std::size_t i = 0; i < lam.size(); ++i) {
    std::uniform_real_distribution<double> u(box.init_lo[i], box.init_hi[i]);
    lam[i] = u(rng);
  }
  return lam;
}

void finish(OptRun& run, const OptConfig& c, const ControlField& tmpl, const ParameterBox& box,
            const Search& s) {
  std::vector<double> lam(s.x.size());
  for (std::size_t i = 0; i < lam.size(); ++i) lam[i] = s.x[i] * box.width[i];
  run.field = enforce_amplitude_constraint(tmpl.with_parameters(box.fold(lam)));
  run.lambda_opt = run.field.parameters();
  run.f_search = 1.0 - s.f;
  run.search_evaluations = s.distinct;
  run.f_verified = verify(run, c);
  run.verification_calls = c.verify_grid.size();
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double verify(const OptRun& run, const OptConfig& config) {
  return ensemble_objective(run.field, config.verify_grid, config.target, config.n_steps).value;
}

OptRun bpm_optimize(const OptConfig& c) {
  c.validate();
  if (!uses_surrogate(c.method))
    throw Error(ErrorCode::kInvalidArgument, "bpm_optimize needs a surrogate method");
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(c.seed);
  const ControlField tmpl = template_field(c);
  const ParameterBox box = parameter_box(tmpl.basis, c.n_sets, c.duration, c.omega_max);

  OptRun run;
  run.method = c.method;
  run.n_sets = c.n_sets;
  run.seed = c.seed;
  const ControlField init = enforce_amplitude_constraint(tmpl.with_parameters(random_start(box, rng)));
  run.lambda_init = init.parameters();

  const SampledDrive drive0 = sample_drive(init, c.n_steps);
  TruthFunction truth = [&](const Point2& p) {
    return point_fidelity(drive0, c.target, p[0], p[1]);
  };
  ValidatedSurrogate vs = build_valid_surrogate(truth, Region::of(c.surrogate_grid),
                                                c.surrogate_samples, c.max_model_attempts, rng,
                                                c.p_fit_threshold, c.fit);
  run.model_attempts = vs.attempts;
  run.p_fit = vs.p_fit;
  run.correlation = vs.model.params();

  SurrogateObjective surrogate(vs.model, c.surrogate_grid, c.target, c.n_steps);
  std::map<std::vector<double>, double> memo;
  // the accepted model already holds the initial field's sample responses
  memo.emplace(run.lambda_init, 1.0 - SurrogateGrid(vs.model, c.surrogate_grid).objective(vs.model));
  auto eval = [&](const ControlField& f) {
    auto v = surrogate(f);
    return std::pair<double, long>(v.estimate, v.true_calls);
  };
  Search s = run_search(c, tmpl, box, run.lambda_init, eval, memo);
  run.true_calls = vs.true_calls + s.calls;
  finish(run, c, tmpl, box, s);
  run.wall_ms = elapsed_ms(t0);
  return run;
}

OptRun baseline_optimize(const OptConfig& c) {
  c.validate();
  if (uses_surrogate(c.method)) return bpm_optimize(c);
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(c.seed);
  const ControlField tmpl = template_field(c);
  const ParameterBox box = parameter_box(tmpl.basis, c.n_sets, c.duration, c.omega_max);

  OptRun run;
  run.method = c.method;
  run.n_sets = c.n_sets;
  run.seed = c.seed;
  const ControlField init = enforce_amplitude_constraint(tmpl.with_parameters(random_start(box, rng)));
  run.lambda_init = init.parameters();

  std::map<std::vector<double>, double> memo;
  auto eval = [&](const ControlField& f) {
    EnsembleResult r = ensemble_objective(f, c.search_grid, c.target, c.n_steps);
    return std::pair<double, long>(r.value, r.evaluations);
  };
  Search s = run_search(c, tmpl, box, run.lambda_init, eval, memo);
  run.true_calls = s.calls;
  finish(run, c, tmpl, box, s);
  run.wall_ms = elapsed_ms(t0);
  return run;
}

OptRun optimize(const OptConfig& config) {
  return uses_surrogate(config.method) ? bpm_optimize(config) : baseline_optimize(config);
}

std::uint64_t trial_seed(std::uint64_t master, int index) {
  return split_seed(master, static_cast<std::uint64_t>(index));
}

int TrialStats::count_at_least(double threshold) const {
  int k = 0;
  for (const auto& t : trials)
    if (t.run && t.run->f_verified >= threshold) ++k;
  return k;
}

TrialStats summarize(std::vector<TrialOutcome> trials) {
  TrialStats st;
  st.trials = std::move(trials);
  std::vector<double> f;
  double calls = 0.0;
  for (const auto& t : st.trials) {
    if (!t.run) continue;
    f.push_back(t.run->f_verified);
    calls += static_cast<double>(t.run->true_calls);
    int bin = std::clamp(static_cast<int>(std::floor(t.run->f_verified * 100.0)), 0, 99);
    ++st.histogram[static_cast<std::size_t>(bin)];
  }
  st.succeeded = static_cast<int>(f.size());
  if (f.empty()) return st;
  st.mean_f = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  st.mean_true_calls = calls / static_cast<double>(f.size());
  st.best_f = *std::max_element(f.begin(), f.end());
  std::vector<double> sorted = f;
  std::sort(sorted.begin(), sorted.end());
  std::size_t m = sorted.size();
  st.median_f = (m % 2 == 1) ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  return st;
}

TrialStats run_trials(const OptConfig& config, int n_trials, int threads) {
  config.validate();
  if (n_trials < 1) throw Error(ErrorCode::kInvalidArgument, "n_trials must be >= 1");
  threads = std::clamp(threads, 1, n_trials);
  std::vector<TrialOutcome> out(static_cast<std::size_t>(n_trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n_trials; i = next++) {
      OptConfig c = config;
      c.seed = trial_seed(config.seed, i);
      TrialOutcome& o = out[static_cast<std::size_t>(i)];
      o.seed = c.seed;
      try {
        o.run = optimize(c);
      } catch (const Error& e) {
        o.error = std::string(to_string(e.code())) + ": " + e.what();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  TrialStats st = summarize(std::move(out));
  if (st.succeeded == 0)
    throw Error(ErrorCode::kModelValidationFailed,
                "all " + std::to_string(n_trials) + " trials failed; first: " +
                    st.trials.front().error);
  return st;
}

}  // namespace bpm
