#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpm/control_field.hpp"
#include "bpm/magnetometry.hpp"
#include "bpm/optimizer.hpp"

// Run configuration. Every physical key carries its unit as a suffix:
// *_mhz is a cyclic frequency (x 2pi on import), *_rad_per_ns an angular
// rate, *_ns / *_us times, *_khz cyclic kHz.
namespace bpm {

struct SurrogateDemoConfig {
  ControlField field;                   // PM, default a = 0.0332, b = 0.0104, nu = 0.0378 rad/ns
  std::vector<int> sample_counts{9, 16};
  std::vector<int> timing_sides{2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30, 40, 50};  // M = N
  int timing_fields = 100;
  int timing_samples = 16;
  bool jitter = true;
  std::optional<double> synthetic_constant;  // replaces the simulation by a constant truth
};

struct MagnetometryConfig {
  std::vector<PulseKind> kinds{PulseKind::kRectPi, PulseKind::kShapedPM};
  double rect_pulse = 50e-9;
  double rect_spacing = 350e-9;
  double shaped_pulse = 100e-9;
  double shaped_spacing = 300e-9;
  ControlField shaped_field;         // PM X-gate field
  std::string shaped_field_file;     // optimize record to take the field from
  double g_ac = 6.283185307179586e5;  // rad/s
  double t_max = 400e-6;
  int steps_per_pulse = 100;
  NoiseSettings noise{};
};

struct CompareEntry {
  Method method = Method::kBPM;
  int n_sets = 1;
  int surrogate_samples = 9;
  int grid_side = 4;  // M = N of the truth search grid for PM / SFB
};

struct RunConfig {
  std::string command;  // optional, the CLI subcommand wins
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir;  // empty: --out, then the environment default
  OptConfig optimizer{};
  int trials = 20;
  SurrogateDemoConfig demo{};
  MagnetometryConfig magnetometry{};
  std::vector<CompareEntry> compare{{Method::kBPM, 1, 9, 4}, {Method::kSFB, 2, 9, 4}};

  /// Pushes the master seed into the embedded settings.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

RunConfig default_run_config();

/// Parses a JSON document over the defaults. Unknown keys, wrong types and
/// invalid values throw Error(kConfig).
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::string& path);

/// Default configuration written in the file schema.
std::string default_config_json();

/// Field <-> JSON object with rad/ns parameters and duration_ns.
std::string field_to_json(const ControlField& field);
ControlField field_from_json(std::string_view json_text, double amp_limit);

}  // namespace bpm
