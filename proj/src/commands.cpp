#include "bpm/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "bpm/error.hpp"
#include "bpm/seed.hpp"
#include "bpm/units.hpp"
#include "json.hpp"

namespace bpm {

namespace fs = std::filesystem;
using json = nlohmann::json;
namespace u = units;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

class Csv {
 public:
  Csv(const fs::path& path, std::string_view header) : out_(path) {
    if (!out_) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
    out_ << header << '\n';
  }
  template <class... Ts>
  void row(const Ts&... cols) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cols), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double x) { return format_double(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(long x) { return std::to_string(x); }
  static std::string cell(std::uint64_t x) { return std::to_string(x); }
  static std::string cell(bool x) { return x ? "1" : "0"; }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  out << text;
}

// Wall-clock data kept apart from the reproducible outputs.
void write_metadata(const fs::path& out, std::string_view command, const RunConfig& c,
                    double wall_ms, json extra = json::object()) {
  std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  extra["command"] = command;
  extra["finished_utc"] = stamp;
  extra["wall_ms"] = wall_ms;
  extra["threads"] = c.threads;
  write_text(out / "metadata.json", extra.dump(2) + "\n");
}

std::string target_name(const FidelityTarget& t) {
  if (const auto* g = std::get_if<GateTarget>(&t))
    return max_abs_diff(g->target, Unitary2::pauli_y()) < 1e-15 ? "y-gate" : "x-gate";
  return "state";
}

json run_json(const OptRun& r, const OptConfig& c) {
  json j;
  j["kind"] = "trial-record";
  j["method"] = to_string(r.method);
  j["n_sets"] = r.n_sets;
  j["seed"] = r.seed;
  j["target"] = target_name(c.target);
  j["amplitude_limit"] = to_string(c.amplitude_limit);
  j["surrogate_samples"] = uses_surrogate(r.method) ? c.surrogate_samples : 0;
  j["search_grid"] = {c.search_grid.n_detuning, c.search_grid.n_drift};
  j["field"] = json::parse(field_to_json(r.field));
  j["initial_field"] = json::parse(field_to_json(r.field.with_parameters(r.lambda_init)));
  j["f_search"] = r.f_search;
  j["f_verified"] = r.f_verified;
  j["true_calls"] = r.true_calls;
  j["verification_calls"] = r.verification_calls;
  j["search_evaluations"] = r.search_evaluations;
  j["model_attempts"] = r.model_attempts;
  j["p_fit"] = r.p_fit;
  j["alpha"] = {r.correlation.alpha[0], r.correlation.alpha[1]};
  j["power"] = {r.correlation.power[0], r.correlation.power[1]};
  return j;
}

void write_map(const fs::path& path, const NoiseGrid& g, const std::vector<double>& v) {
  Csv csv(path, "detuning_mhz,drift,fidelity");
  const auto d = g.detunings(), k = g.drifts();
  for (int i = 0; i < g.n_detuning; ++i)
    for (int j = 0; j < g.n_drift; ++j)
      csv.row(u::rad_per_s_to_mhz(d[i]), k[j], v[static_cast<std::size_t>(i * g.n_drift + j)]);
}

void write_field_shape(const fs::path& path, const ControlField& f) {
  Csv csv(path, "t_ns,omega_x_mhz,omega_y_mhz");
  const int n = 201;
  for (int i = 0; i < n; ++i) {
    const double t = f.duration * i / (n - 1);
    const Quadratures q = quadratures(f, t);
    csv.row(u::s_to_ns(t), u::rad_per_s_to_mhz(q.x), u::rad_per_s_to_mhz(q.y));
  }
}

void write_trials(const fs::path& out, const TrialStats& st, const std::string& prefix) {
  Csv csv(out / (prefix + "trials.csv"),
          "index,seed,status,f_search,f_verified,true_calls,search_evaluations,model_attempts,"
          "p_fit,error");
  for (std::size_t i = 0; i < st.trials.size(); ++i) {
    const TrialOutcome& t = st.trials[i];
    if (t.run) {
      csv.row(static_cast<int>(i), t.seed, "ok", t.run->f_search, t.run->f_verified,
              t.run->true_calls, t.run->search_evaluations, t.run->model_attempts, t.run->p_fit,
              "");
    } else {
      std::string e = t.error;
      for (char& ch : e)
        if (ch == ',' || ch == '\n') ch = ';';
      const double nan = std::numeric_limits<double>::quiet_NaN();
      csv.row(static_cast<int>(i), t.seed, "failed", nan, nan, 0L, 0L, 0, nan, e);
    }
  }
}

json stats_json(const TrialStats& st) {
  return {{"trials", st.trials.size()},
          {"succeeded", st.succeeded},
          {"mean_f", st.mean_f},
          {"median_f", st.median_f},
          {"best_f", st.best_f},
          {"mean_true_calls", st.mean_true_calls},
          {"count_ge_0_87", st.count_at_least(0.87)},
          {"count_ge_0_89", st.count_at_least(0.89)},
          {"count_ge_0_90", st.count_at_least(0.90)}};
}

double mean_abs_error(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Value of the nearest sample (unit-square metric) at every grid point.
std::vector<double> nearest_sample_map(const KrigingModel& m, const NoiseGrid& g) {
  std::vector<double> out;
  const Region& r = m.region();
  for (double d : g.detunings())
    for (double k : g.drifts()) {
      const Point2 x = r.to_unit({d, k});
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m.unit_samples().size(); ++i) {
        const double dx = m.unit_samples()[i][0] - x[0], dy = m.unit_samples()[i][1] - x[1];
        if (dx * dx + dy * dy < bd) {
          bd = dx * dx + dy * dy;
          best = i;
        }
      }
      out.push_back(m.values()[best]);
    }
  return out;
}

NoiseGrid resized(const NoiseGrid& g, int m, int n) {
  NoiseGrid r = g;
  r.n_detuning = m;
  r.n_drift = n;
  return r;
}

template <class F>
int guarded(std::ostream& log, F&& body) {
  try {
    body();
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  for (int p = 15; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string run_record(const OptRun& run, const OptConfig& config) {
  return run_json(run, config).dump(2) + "\n";
}

fs::path resolve_output_dir(const std::string& cli_out, const RunConfig& config) {
  if (!cli_out.empty()) return cli_out;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "bpm_out";
}

int cmd_optimize(const RunConfig& c, const fs::path& out, std::ostream& log) {
  return guarded(log, [&] {
    fs::create_directories(out);
    const auto t0 = Clock::now();
    OptRun run = optimize(c.optimizer);
    write_text(out / "run.json", run_record(run, c.optimizer));
    write_map(out / "fidelity_map.csv", c.optimizer.verify_grid,
              fidelity_map(run.field, c.optimizer.verify_grid, c.optimizer.target,
                           c.optimizer.n_steps));
    write_field_shape(out / "field.csv", run.field);
    write_metadata(out, "optimize", c, ms_since(t0), {{"optimize_ms", run.wall_ms}});
    log << to_string(run.method) << " N_D=" << run.n_sets << " F_verified=" << run.f_verified
        << " true_calls=" << run.true_calls << '\n';
  });
}

int cmd_trials(const RunConfig& c, const fs::path& out, std::ostream& log) {
  return guarded(log, [&] {
    fs::create_directories(out);
    const auto t0 = Clock::now();
    TrialStats st = run_trials(c.optimizer, c.trials, c.threads);
    write_trials(out, st, "");
    write_text(out / "trials_summary.json", stats_json(st).dump(2) + "\n");
    Csv hist(out / "histogram.csv", "bin_lo,bin_hi,count");
    for (int b = 0; b < 100; ++b) hist.row(b / 100.0, (b + 1) / 100.0, st.histogram[b]);
    const TrialOutcome* best = nullptr;
    json wall = json::array();
    for (const auto& t : st.trials) {
      wall.push_back(t.run ? t.run->wall_ms : 0.0);
      if (t.run && (!best || t.run->f_verified > best->run->f_verified)) best = &t;
    }
    if (best) write_text(out / "best_run.json", run_record(*best->run, c.optimizer));
    write_metadata(out, "trials", c, ms_since(t0), {{"trial_wall_ms", wall}});
    log << to_string(c.optimizer.method) << " trials=" << st.trials.size()
        << " ok=" << st.succeeded << " mean_F=" << st.mean_f << " best_F=" << st.best_f
        << " mean_true_calls=" << st.mean_true_calls << '\n';
  });
}

int cmd_surrogate_demo(const RunConfig& c, const fs::path& out, std::ostream& log) {
  return guarded(log, [&] {
    fs::create_directories(out);
    const auto t0 = Clock::now();
    const OptConfig& o = c.optimizer;
    const NoiseGrid& grid = o.verify_grid;
    const Region region = Region::of(grid);
    const SurrogateDemoConfig& d = c.demo;
    const SampledDrive drive = sample_drive(d.field, o.n_steps);
    auto truth_at = [&](double delta, double kappa) {
      return d.synthetic_constant ? *d.synthetic_constant
                                  : point_fidelity(drive, o.target, delta, kappa);
    };

    std::vector<double> truth;
    for (double dd : grid.detunings())
      for (double kk : grid.drifts()) truth.push_back(truth_at(dd, kk));
    write_map(out / "truth_map.csv", grid, truth);
    const double f_truth = weighted_average(grid, truth);

    Csv errors(out / "map_errors.csv",
               "n,mae_prediction,mae_subsample,p_fit,f_truth,f_estimate");
    for (int n : d.sample_counts) {
      std::mt19937_64 rng(split_seed(c.seed, static_cast<std::uint64_t>(n)));
      std::vector<Point2> s = jittered_grid(region, n, rng, d.jitter);
      std::vector<double> y;
      for (const auto& p : s) y.push_back(truth_at(p[0], p[1]));
      const std::string tag = "_n" + std::to_string(n) + ".csv";
      {
        Csv csv(out / ("samples" + tag), "detuning_mhz,drift,fidelity");
        for (std::size_t i = 0; i < s.size(); ++i)
          csv.row(u::rad_per_s_to_mhz(s[i][0]), s[i][1], y[i]);
      }
      KrigingModel m = fit(region, s, y, rng);
      double p_fit = std::numeric_limits<double>::quiet_NaN();
      try {
        p_fit = loo_validate(m);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateValidation) throw;
      }
      std::vector<double> pred = SurrogateGrid(m, grid).predictions(m);
      for (double& v : pred) v = std::clamp(v, 0.0, 1.0);
      std::vector<double> sub = nearest_sample_map(m, grid);
      write_map(out / ("prediction" + tag), grid, pred);
      write_map(out / ("subsample" + tag), grid, sub);
      errors.row(n, mean_abs_error(pred, truth), mean_abs_error(sub, truth), p_fit, f_truth,
                 weighted_average(grid, pred));
    }

    // Objective value and cost against the grid size, over random PM fields.
    const double f0 = u::kTwoPi / o.duration;
    const double lim = o.quadrature_limit();
    const NoiseGrid ref_grid = resized(grid, 50, 50);
    const std::size_t ns = d.timing_sides.size();
    std::vector<double> t_true(ns), t_fixed(ns), t_refit(ns), dev_true(ns), dev_fixed(ns),
        dev_refit(ns);
    std::optional<SurrogateObjective> fixed;
    double t_fit = 0.0;
    for (int i = 0; i < d.timing_fields; ++i) {
      std::mt19937_64 rng(split_seed(c.seed, 1000 + static_cast<std::uint64_t>(i)));
      std::uniform_real_distribution<double> ua(0.0, o.omega_max), uf(0.0, f0);
      const double a = ua(rng), b = uf(rng), nu = uf(rng);
      ControlField f = enforce_amplitude_constraint(ControlField::pm({a}, {b}, {nu}, o.duration, lim));
      const SampledDrive fd = sample_drive(f, o.n_steps);
      auto field_truth = [&](const Point2& p) {
        return d.synthetic_constant ? *d.synthetic_constant
                                    : point_fidelity(fd, o.target, p[0], p[1]);
      };
      double ref = 0.0;
      if (d.synthetic_constant) {
        ref = *d.synthetic_constant;
      } else {
        ref = ensemble_objective(f, ref_grid, o.target, o.n_steps).value;
      }

      // surrogate with refreshed hyperparameters
      auto ts = Clock::now();
      std::vector<Point2> s = jittered_grid(region, d.timing_samples, rng, d.jitter);
      std::vector<double> y;
      for (const auto& p : s) y.push_back(field_truth(p));
      KrigingModel m = fit(region, s, y, rng);
      t_fit = ms_since(ts);
      if (!fixed) fixed.emplace(m, grid, o.target, o.n_steps);

      for (std::size_t k = 0; k < ns; ++k) {
        const int side = d.timing_sides[k];
        const NoiseGrid g = resized(grid, side, side);
        auto t1 = Clock::now();
        double ft;
        if (d.synthetic_constant) {
          std::vector<double> v(static_cast<std::size_t>(g.size()), *d.synthetic_constant);
          ft = weighted_average(g, v);
        } else {
          ft = ensemble_objective(f, g, o.target, o.n_steps).value;
        }
        t_true[k] += ms_since(t1);
        dev_true[k] += std::abs(ft - ref);

        t1 = Clock::now();
        const double fr = surrogate_objective(m, g);
        t_refit[k] += t_fit + ms_since(t1);
        dev_refit[k] += std::abs(fr - ref);

        t1 = Clock::now();
        double ff;
        if (d.synthetic_constant) {
          ff = surrogate_objective(fixed->model().with_values(std::vector<double>(
                                       s.size(), *d.synthetic_constant)),
                                   g);
        } else {
          SurrogateObjective fo(fixed->model(), g, o.target, o.n_steps);
          ff = fo(f).estimate;
        }
        t_fixed[k] += ms_since(t1);
        dev_fixed[k] += std::abs(ff - ref);
      }
    }
    const double nf = d.timing_fields;
    Csv dev(out / "deviation.csv", "mn,true_dev,surrogate_refit_dev,surrogate_fixed_dev");
    Csv tim(out / "timing.csv", "mn,true_ms,surrogate_refit_ms,surrogate_fixed_ms");
    for (std::size_t k = 0; k < ns; ++k) {
      const int mn = d.timing_sides[k] * d.timing_sides[k];
      dev.row(mn, dev_true[k] / nf, dev_refit[k] / nf, dev_fixed[k] / nf);
      tim.row(mn, t_true[k] / nf, t_refit[k] / nf, t_fixed[k] / nf);
    }
    write_metadata(out, "surrogate-demo", c, ms_since(t0));
    log << "surrogate-demo: F_truth=" << f_truth << " maps for " << d.sample_counts.size()
        << " sample counts, timing over " << d.timing_fields << " fields\n";
  });
}

int cmd_magnetometry(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const MagnetometryConfig& m = c.magnetometry;
  ControlField shaped = m.shaped_field;
  if (!m.shaped_field_file.empty()) {
    const int rc = guarded(log, [&] {
      std::ifstream in(m.shaped_field_file);
      if (!in) throw Error(ErrorCode::kConfig, "cannot open " + m.shaped_field_file);
      json rec;
      try {
        rec = json::parse(in);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kConfig, m.shaped_field_file + ": " + e.what());
      }
      if (!rec.contains("field"))
        throw Error(ErrorCode::kConfig, m.shaped_field_file + ": no field in record");
      shaped = field_from_json(rec.at("field").dump(), c.optimizer.quadrature_limit());
      if (shaped.basis != Basis::kPM)
        throw Error(ErrorCode::kConfig, m.shaped_field_file + ": shaped pulses must be PM");
    });
    if (rc != kExitOk) return rc;
  }
  return guarded(log, [&] {
    fs::create_directories(out);
    const auto t0 = Clock::now();
    Csv traces(out / "traces.csv", "time_us,p0_mean,p0_stderr,pulse_kind");
    Csv report(out / "t2_report.csv", "pulse_kind,t2_us,amplitude,n_points,lower_bound");
    json summary = json::object();
    for (PulseKind kind : m.kinds) {
      const bool sh = kind == PulseKind::kShapedPM;
      const double tp = sh ? m.shaped_pulse : m.rect_pulse;
      const double sp = sh ? m.shaped_spacing : m.rect_spacing;
      const double period = 8.0 * (tp + sp);
      const int periods = std::max(2, static_cast<int>(std::floor(m.t_max / period + 1e-9)));
      PulseSequence seq = build_xy8(kind, tp, sp, periods,
                                    sh ? std::optional<ControlField>(shaped) : std::nullopt);
      AcSignal sig{m.g_ac, seq.signal_frequency()};
      RamseyTrace tr = simulate_ramsey(seq, sig, m.noise, m.t_max, m.steps_per_pulse, c.threads);
      for (std::size_t k = 0; k < tr.time.size(); ++k)
        traces.row(u::s_to_us(tr.time[k]), tr.p0_mean[k], tr.p0_stderr[k], to_string(kind));
      T2Estimate e = estimate_t2(tr.time, tr.p0_mean);
      report.row(to_string(kind), u::s_to_us(e.t2), e.amplitude, e.n_points, e.lower_bound);
      summary[to_string(kind)] = {{"t2_us", u::s_to_us(e.t2)}, {"lower_bound", e.lower_bound}};
      log << to_string(kind) << ": T2 = " << u::s_to_us(e.t2) << " us"
          << (e.lower_bound ? " (lower bound)" : "") << '\n';
    }
    if (summary.contains("rect") && summary.contains("pm")) {
      const double ratio = summary["pm"]["t2_us"].get<double>() / summary["rect"]["t2_us"].get<double>();
      summary["t2_ratio_pm_over_rect"] = ratio;
      log << "T2(pm) / T2(rect) = " << ratio << '\n';
    }
    write_text(out / "t2_summary.json", summary.dump(2) + "\n");
    write_metadata(out, "magnetometry", c, ms_since(t0));
  });
}

int cmd_compare(const RunConfig& c, const fs::path& out, std::ostream& log) {
  return guarded(log, [&] {
    fs::create_directories(out);
    const auto t0 = Clock::now();
    Csv csv(out / "compare.csv",
            "method,n_sets,surrogate_samples,search_mn,trials,succeeded,mean_f,median_f,best_f,"
            "count_ge_0_89,mean_true_calls,calls_vs_first");
    double first_calls = 0.0;
    for (std::size_t i = 0; i < c.compare.size(); ++i) {
      const CompareEntry& e = c.compare[i];
      OptConfig o = c.optimizer;
      o.method = e.method;
      o.n_sets = e.n_sets;
      o.surrogate_samples = e.surrogate_samples;
      o.search_grid = resized(o.search_grid, e.grid_side, e.grid_side);
      TrialStats st = run_trials(o, c.trials, c.threads);
      if (i == 0) first_calls = st.mean_true_calls;
      write_trials(out, st, "entry" + std::to_string(i) + "_");
      csv.row(std::string(to_string(e.method)), e.n_sets,
              uses_surrogate(e.method) ? e.surrogate_samples : 0,
              uses_surrogate(e.method) ? 0 : e.grid_side * e.grid_side,
              static_cast<int>(st.trials.size()), st.succeeded, st.mean_f, st.median_f,
              st.best_f, st.count_at_least(0.89), st.mean_true_calls,
              first_calls > 0 ? st.mean_true_calls / first_calls : 0.0);
      log << to_string(e.method) << " N_D=" << e.n_sets << ": mean_F=" << st.mean_f
          << " best_F=" << st.best_f << " mean_true_calls=" << st.mean_true_calls << '\n';
    }
    write_metadata(out, "compare", c, ms_since(t0));
  });
}

int run_command(std::string_view name, const RunConfig& c, const fs::path& out,
                std::ostream& log) {
  if (name == "optimize") return cmd_optimize(c, out, log);
  if (name == "trials") return cmd_trials(c, out, log);
  if (name == "surrogate-demo") return cmd_surrogate_demo(c, out, log);
  if (name == "magnetometry") return cmd_magnetometry(c, out, log);
  if (name == "compare") return cmd_compare(c, out, log);
  log << "error: unknown command '" << name << "'\n";
  return kExitUsage;
}

}  // namespace bpm
