#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "bpm/config.hpp"

namespace bpm {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "BPM_OUT_DIR";

/// --out wins, then the config's output_dir, then $BPM_OUT_DIR, then "bpm_out".
std::filesystem::path resolve_output_dir(const std::string& cli_out, const RunConfig& config);

int cmd_optimize(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);
int cmd_trials(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);
int cmd_surrogate_demo(const RunConfig& config, const std::filesystem::path& out,
                       std::ostream& log);
int cmd_magnetometry(const RunConfig& config, const std::filesystem::path& out,
                     std::ostream& log);
int cmd_compare(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// Dispatch by subcommand name; unknown names return kExitUsage.
int run_command(std::string_view name, const RunConfig& config,
                const std::filesystem::path& out, std::ostream& log);

/// Shortest text that reads back to the same double.
std::string format_double(double x);

/// JSON trial record; wall-clock data is left out so records are reproducible.
std::string run_record(const OptRun& run, const OptConfig& config);

}  // namespace bpm
