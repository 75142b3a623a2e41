#include "bpm/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "bpm/error.hpp"
#include "bpm/units.hpp"
#include "json.hpp"

namespace bpm {

using json = nlohmann::json;
namespace u = units;

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

// Object view that rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_ + ": expected an object");
  }
  ~Reader() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string where(const std::string& key) const { return path_ + "." + key; }
  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(where(key) + ": wrong type");
    }
  }
  void number(const std::string& key, double& out, double scale = 1.0) {
    if (!has(key)) return;
    if (!j_.at(key).is_number()) fail(where(key) + ": expected a number");
    out = j_.at(key).get<double>() * scale;
  }
  void numbers(const std::string& key, std::vector<double>& out, double scale = 1.0) {
    if (!has(key)) return;
    const json& a = j_.at(key);
    if (!a.is_array()) fail(where(key) + ": expected an array of numbers");
    out.clear();
    for (const json& v : a) {
      if (!v.is_number()) fail(where(key) + ": expected an array of numbers");
      out.push_back(v.get<double>() * scale);
    }
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(where(it.key()) + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_grid_size(Reader& r, const std::string& key, NoiseGrid& g) {
  if (!r.has(key)) return;
  const json& a = r.at(key);
  if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() || !a[1].is_number_integer())
    fail(r.where(key) + ": expected [M, N]");
  g.n_detuning = a[0].get<int>();
  g.n_drift = a[1].get<int>();
}

ControlField read_field(const json& j, const std::string& path, double amp_limit) {
  Reader r(j, path);
  std::string basis = "pm";
  r.get("basis", basis);
  double duration = 100e-9;
  r.number("duration_ns", duration, 1e-9);
  std::vector<double> a, b, nu, w, phi, varphi;
  r.numbers("a_rad_per_ns", a, 1e9);
  if (basis == "pm") {
    r.numbers("b_rad_per_ns", b, 1e9);
    r.numbers("nu_rad_per_ns", nu, 1e9);
  } else if (basis == "sfb") {
    r.numbers("omega_rad_per_ns", w, 1e9);
    r.numbers("phi_rad", phi);
    r.numbers("varphi_rad", varphi);
  } else {
    fail(path + ".basis: expected \"pm\" or \"sfb\"");
  }
  r.finish();
  ControlField f;
  try {
    f = basis == "pm" ? ControlField::pm(a, b, nu, duration, amp_limit)
                      : ControlField::sfb(a, w, phi, varphi, duration, amp_limit);
    f.validate();
    if (f.n_sets() == 0) fail(path + ": field has no parameter sets");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    fail(path + ": " + e.what());
  }
  return f;
}

// Unit conversions leave last-bit noise (0.0583 -> 0.058300000000000005);
// 12 significant digits is far below any physical tolerance.
double tidy(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

json field_json(const ControlField& f, bool rounded = false) {
  auto scaled = [&](const std::vector<double>& v, double s) {
    json a = json::array();
    for (double x : v) a.push_back(rounded ? tidy(x * s) : x * s);
    return a;
  };
  json j;
  j["basis"] = f.basis == Basis::kPM ? "pm" : "sfb";
  j["duration_ns"] = rounded ? tidy(u::s_to_ns(f.duration)) : u::s_to_ns(f.duration);
  j["a_rad_per_ns"] = scaled(f.amplitude, 1e-9);
  if (f.basis == Basis::kPM) {
    j["b_rad_per_ns"] = scaled(f.depth, 1e-9);
    j["nu_rad_per_ns"] = scaled(f.mod_rate, 1e-9);
  } else {
    j["omega_rad_per_ns"] = scaled(f.frequency, 1e-9);
    j["phi_rad"] = scaled(f.phase, 1.0);
    j["varphi_rad"] = scaled(f.axis, 1.0);
  }
  return j;
}

void read_noise_grid_shape(Reader& r, OptConfig& c) {
  if (!r.has("noise_region")) return;
  Reader g(r.at("noise_region"), r.where("noise_region"));
  NoiseGrid shape = c.verify_grid;
  g.number("detuning_min_mhz", shape.detuning_min, u::mhz_to_rad_per_s(1.0));
  g.number("detuning_max_mhz", shape.detuning_max, u::mhz_to_rad_per_s(1.0));
  g.number("drift_min", shape.drift_min);
  g.number("drift_max", shape.drift_max);
  g.number("detuning_fwhm_mhz", shape.detuning_fwhm, u::mhz_to_rad_per_s(1.0));
  g.number("detuning_mean_mhz", shape.detuning_mean, u::mhz_to_rad_per_s(1.0));
  g.number("drift_fwhm", shape.drift_fwhm);
  g.number("drift_mean", shape.drift_mean);
  g.finish();
  for (NoiseGrid* grid : {&c.search_grid, &c.surrogate_grid, &c.verify_grid}) {
    const int m = grid->n_detuning, n = grid->n_drift;
    *grid = shape;
    grid->n_detuning = m;
    grid->n_drift = n;
  }
}

void read_optimizer(const json& j, OptConfig& c) {
  Reader r(j, "optimizer");
  std::string s;
  if (r.has("method")) {
    r.get("method", s);
    try {
      c.method = parse_method(s);
    } catch (const Error& e) {
      fail(std::string("optimizer.method: ") + e.what());
    }
  }
  r.get("n_sets", c.n_sets);
  r.get("surrogate_samples", c.surrogate_samples);
  read_noise_grid_shape(r, c);
  read_grid_size(r, "search_grid", c.search_grid);
  read_grid_size(r, "surrogate_grid", c.surrogate_grid);
  read_grid_size(r, "verify_grid", c.verify_grid);
  r.number("duration_ns", c.duration, 1e-9);
  r.number("omega_max_mhz", c.omega_max, u::mhz_to_rad_per_s(1.0));
  if (r.has("amplitude_limit")) {
    r.get("amplitude_limit", s);
    try {
      c.amplitude_limit = parse_amplitude_limit(s);
    } catch (const Error& e) {
      fail(std::string("optimizer.amplitude_limit: ") + e.what());
    }
  }
  r.get("n_steps", c.n_steps);
  if (r.has("target")) {
    r.get("target", s);
    if (s == "state") c.target = StateTransfer{};
    else if (s == "x-gate") c.target = GateTarget{Unitary2::pauli_x()};
    else if (s == "y-gate") c.target = GateTarget{Unitary2::pauli_y()};
    else fail("optimizer.target: expected state, x-gate or y-gate");
  }
  r.number("initial_step_fraction", c.initial_step_fraction);
  r.number("f_tolerance", c.search.f_tolerance);
  r.get("max_iterations", c.search.max_iterations);
  r.get("max_model_attempts", c.max_model_attempts);
  r.number("p_fit_threshold", c.p_fit_threshold);
  r.finish();
}

void read_demo(const json& j, SurrogateDemoConfig& d, double amp_limit) {
  Reader r(j, "surrogate_demo");
  if (r.has("field")) d.field = read_field(r.at("field"), "surrogate_demo.field", amp_limit);
  r.get("sample_counts", d.sample_counts);
  r.get("timing_sides", d.timing_sides);
  r.get("timing_fields", d.timing_fields);
  r.get("timing_samples", d.timing_samples);
  r.get("jitter", d.jitter);
  if (r.has("synthetic_constant")) {
    const json& v = r.at("synthetic_constant");
    if (v.is_null()) d.synthetic_constant.reset();
    else if (v.is_number()) d.synthetic_constant = v.get<double>();
    else fail("surrogate_demo.synthetic_constant: expected a number or null");
  }
  r.finish();
}

void read_magnetometry(const json& j, MagnetometryConfig& m, double amp_limit) {
  Reader r(j, "magnetometry");
  if (r.has("kinds")) {
    std::vector<std::string> names;
    r.get("kinds", names);
    m.kinds.clear();
    for (const auto& n : names) {
      try {
        m.kinds.push_back(parse_pulse_kind(n));
      } catch (const Error& e) {
        fail(std::string("magnetometry.kinds: ") + e.what());
      }
    }
  }
  r.number("rect_pulse_ns", m.rect_pulse, 1e-9);
  r.number("rect_spacing_ns", m.rect_spacing, 1e-9);
  r.number("shaped_pulse_ns", m.shaped_pulse, 1e-9);
  r.number("shaped_spacing_ns", m.shaped_spacing, 1e-9);
  if (r.has("shaped_field"))
    m.shaped_field = read_field(r.at("shaped_field"), "magnetometry.shaped_field", amp_limit);
  r.get("shaped_field_file", m.shaped_field_file);
  r.number("g_ac_mhz", m.g_ac, u::mhz_to_rad_per_s(1.0));
  r.number("t_max_us", m.t_max, 1e-6);
  r.get("steps_per_pulse", m.steps_per_pulse);
  r.get("realizations", m.noise.realizations);
  r.number("detuning_fwhm_mhz", m.noise.detuning_fwhm, u::mhz_to_rad_per_s(1.0));
  r.number("detuning_mean_mhz", m.noise.detuning_mean, u::mhz_to_rad_per_s(1.0));
  r.number("drift", m.noise.drift);
  double tau_us = m.noise.ou_tau * 1e6;
  double std_khz = m.noise.ou_std() / u::khz_to_rad_per_s(1.0);
  r.number("ou_tau_us", tau_us);
  r.number("ou_std_khz", std_khz);
  m.noise.ou_tau = u::us_to_s(tau_us);
  m.noise.ou_c = NoiseSettings::ou_c_for_std(u::khz_to_rad_per_s(std_khz), m.noise.ou_tau);
  bool enabled = true;
  r.get("noise", enabled);
  if (!enabled) {
    m.noise.detuning_fwhm = 0.0;
    m.noise.ou_c = 0.0;
  }
  r.finish();
}

void read_compare(const json& j, std::vector<CompareEntry>& out) {
  if (!j.is_array() || j.empty()) fail("compare: expected a non-empty array");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    Reader r(j[i], "compare[" + std::to_string(i) + "]");
    CompareEntry e;
    std::string s = to_string(e.method);
    r.get("method", s);
    try {
      e.method = parse_method(s);
    } catch (const Error& err) {
      fail(r.where("method") + ": " + err.what());
    }
    r.get("n_sets", e.n_sets);
    r.get("surrogate_samples", e.surrogate_samples);
    r.get("grid_side", e.grid_side);
    r.finish();
    out.push_back(e);
  }
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  optimizer.seed = s;
  magnetometry.noise.seed = s;
}

void RunConfig::validate() const {
  try {
    if (threads < 1) fail("threads must be >= 1");
    if (trials < 1) fail("trials.count must be >= 1");
    optimizer.validate();
    if (demo.sample_counts.empty()) fail("surrogate_demo.sample_counts is empty");
    if (demo.timing_fields < 1) fail("surrogate_demo.timing_fields must be >= 1");
    for (int side : demo.timing_sides)
      if (side < 2) fail("surrogate_demo.timing_sides entries must be >= 2");
    demo.field.validate();
    magnetometry.noise.validate();
    if (magnetometry.steps_per_pulse < 1) fail("magnetometry.steps_per_pulse must be >= 1");
    if (!(magnetometry.t_max > 0.0)) fail("magnetometry.t_max_us must be positive");
    if (magnetometry.g_ac < 0.0) fail("magnetometry.g_ac_mhz must be >= 0");
    if (magnetometry.kinds.empty()) fail("magnetometry.kinds is empty");
    for (PulseKind k : magnetometry.kinds) {
      const bool rect = k != PulseKind::kShapedPM;
      const double period = 8.0 * (rect ? magnetometry.rect_pulse + magnetometry.rect_spacing
                                        : magnetometry.shaped_pulse + magnetometry.shaped_spacing);
      if (magnetometry.t_max < 10.0 * period)
        fail("magnetometry.t_max_us must cover at least 10 XY-8 periods");
    }
    for (const auto& e : compare) {
      if (e.n_sets < 1 || e.grid_side < 2) fail("compare entry out of range");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    fail(e.what());
  }
}

RunConfig default_run_config() {
  RunConfig c;
  const double lim = c.optimizer.quadrature_limit();
  c.demo.field = ControlField::pm({u::rad_per_ns_to_rad_per_s(0.0332)},
                                  {u::rad_per_ns_to_rad_per_s(0.0104)},
                                  {u::rad_per_ns_to_rad_per_s(0.0378)}, 100e-9, lim);
  c.magnetometry.shaped_field = ControlField::pm(
      {u::rad_per_ns_to_rad_per_s(0.0583), u::rad_per_ns_to_rad_per_s(0.0046)},
      {u::rad_per_ns_to_rad_per_s(0.0844), u::rad_per_ns_to_rad_per_s(0.1493)},
      {u::rad_per_ns_to_rad_per_s(0.0307), u::rad_per_ns_to_rad_per_s(0.0413)}, 100e-9, lim);
  c.apply_seed(1);
  return c;
}

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  RunConfig c = default_run_config();
  Reader r(j, "config");
  r.get("command", c.command);
  std::uint64_t seed = c.seed;
  if (r.has("seed")) {
    if (!r.at("seed").is_number_unsigned()) fail("config.seed: expected an unsigned integer");
    seed = r.at("seed").get<std::uint64_t>();
  }
  r.get("threads", c.threads);
  r.get("output_dir", c.output_dir);
  if (r.has("optimizer")) read_optimizer(r.at("optimizer"), c.optimizer);
  if (r.has("trials")) {
    Reader t(r.at("trials"), "trials");
    t.get("count", c.trials);
    t.finish();
  }
  const double lim = c.optimizer.quadrature_limit();
  c.demo.field.amp_limit = lim;
  c.magnetometry.shaped_field.amp_limit = lim;
  if (r.has("surrogate_demo")) read_demo(r.at("surrogate_demo"), c.demo, lim);
  if (r.has("magnetometry")) read_magnetometry(r.at("magnetometry"), c.magnetometry, lim);
  if (r.has("compare")) read_compare(r.at("compare"), c.compare);
  r.finish();
  c.apply_seed(seed);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string default_config_json() {
  RunConfig c = default_run_config();
  const OptConfig& o = c.optimizer;
  const NoiseGrid& g = o.verify_grid;
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["optimizer"] = {
      {"method", to_string(o.method)},
      {"n_sets", o.n_sets},
      {"surrogate_samples", o.surrogate_samples},
      {"noise_region",
       {{"detuning_min_mhz", tidy(u::rad_per_s_to_mhz(g.detuning_min))},
        {"detuning_max_mhz", tidy(u::rad_per_s_to_mhz(g.detuning_max))},
        {"drift_min", g.drift_min},
        {"drift_max", g.drift_max},
        {"detuning_fwhm_mhz", tidy(u::rad_per_s_to_mhz(g.detuning_fwhm))},
        {"detuning_mean_mhz", tidy(u::rad_per_s_to_mhz(g.detuning_mean))},
        {"drift_fwhm", g.drift_fwhm},
        {"drift_mean", g.drift_mean}}},
      {"search_grid", {o.search_grid.n_detuning, o.search_grid.n_drift}},
      {"surrogate_grid", {o.surrogate_grid.n_detuning, o.surrogate_grid.n_drift}},
      {"verify_grid", {o.verify_grid.n_detuning, o.verify_grid.n_drift}},
      {"duration_ns", tidy(u::s_to_ns(o.duration))},
      {"omega_max_mhz", tidy(u::rad_per_s_to_mhz(o.omega_max))},
      {"amplitude_limit", to_string(o.amplitude_limit)},
      {"n_steps", o.n_steps},
      {"target", "state"},
      {"initial_step_fraction", o.initial_step_fraction},
      {"f_tolerance", o.search.f_tolerance},
      {"max_iterations", o.search.max_iterations},
      {"max_model_attempts", o.max_model_attempts},
      {"p_fit_threshold", o.p_fit_threshold}};
  j["trials"] = {{"count", c.trials}};
  j["surrogate_demo"] = {{"field", field_json(c.demo.field, true)},
                         {"sample_counts", c.demo.sample_counts},
                         {"timing_sides", c.demo.timing_sides},
                         {"timing_fields", c.demo.timing_fields},
                         {"timing_samples", c.demo.timing_samples},
                         {"jitter", c.demo.jitter},
                         {"synthetic_constant", nullptr}};
  const MagnetometryConfig& m = c.magnetometry;
  json kinds = json::array();
  for (PulseKind k : m.kinds) kinds.push_back(to_string(k));
  j["magnetometry"] = {{"kinds", kinds},
                       {"rect_pulse_ns", tidy(u::s_to_ns(m.rect_pulse))},
                       {"rect_spacing_ns", tidy(u::s_to_ns(m.rect_spacing))},
                       {"shaped_pulse_ns", tidy(u::s_to_ns(m.shaped_pulse))},
                       {"shaped_spacing_ns", tidy(u::s_to_ns(m.shaped_spacing))},
                       {"shaped_field", field_json(m.shaped_field, true)},
                       {"shaped_field_file", m.shaped_field_file},
                       {"g_ac_mhz", tidy(u::rad_per_s_to_mhz(m.g_ac))},
                       {"t_max_us", tidy(u::s_to_us(m.t_max))},
                       {"steps_per_pulse", m.steps_per_pulse},
                       {"realizations", m.noise.realizations},
                       {"detuning_fwhm_mhz", tidy(u::rad_per_s_to_mhz(m.noise.detuning_fwhm))},
                       {"detuning_mean_mhz", tidy(u::rad_per_s_to_mhz(m.noise.detuning_mean))},
                       {"drift", m.noise.drift},
                       {"ou_tau_us", tidy(u::s_to_us(m.noise.ou_tau))},
                       {"ou_std_khz", tidy(m.noise.ou_std() / u::khz_to_rad_per_s(1.0))},
                       {"noise", true}};
  json cmp = json::array();
  for (const auto& e : c.compare)
    cmp.push_back({{"method", to_string(e.method)},
                   {"n_sets", e.n_sets},
                   {"surrogate_samples", e.surrogate_samples},
                   {"grid_side", e.grid_side}});
  j["compare"] = cmp;
  return j.dump(2) + "\n";
}

std::string field_to_json(const ControlField& field) { return field_json(field).dump(); }

ControlField field_from_json(std::string_view text, double amp_limit) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed field JSON: ") + e.what());
  }
  return read_field(j, "field", amp_limit);
}

}  // namespace bpm
