// Batch front-end: bpm <command> [--config file] [--seed n] [--threads n] [--out dir]
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "bpm/commands.hpp"
#include "bpm/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Robust ensemble control: B-PM optimisation, surrogate demo, XY-8 magnetometry"};
  app.require_subcommand(0, 1);

  std::string config_path, out_dir, method;
  std::uint64_t seed = 0;
  int threads = 0, n_sets = 0, trials = 0;
  bool print_defaults = false;

  app.add_flag("--print-default-config", print_defaults, "Write the default config to stdout");
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--threads", threads, "Worker threads (1 = bit-stable)")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--method", method, "b-pm | pm | b-sfb | sfb");
  app.add_option("--nd", n_sets, "Parameter sets N_D")->check(CLI::PositiveNumber);
  app.add_option("--trials", trials, "Trial count")->check(CLI::PositiveNumber);
  app.fallthrough();

  for (const char* name : {"optimize", "trials", "surrogate-demo", "magnetometry", "compare"})
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return bpm::kExitUsage;
  }
  if (print_defaults) {
    std::cout << bpm::default_config_json();
    return bpm::kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return bpm::kExitUsage;
  }

  bpm::RunConfig config;
  try {
    config = config_path.empty() ? bpm::default_run_config() : bpm::load_run_config(config_path);
    if (app.count("--seed")) config.apply_seed(seed);
    if (threads > 0) config.threads = threads;
    if (!method.empty()) config.optimizer.method = bpm::parse_method(method);
    if (n_sets > 0) config.optimizer.n_sets = n_sets;
    if (trials > 0) config.trials = trials;
    config.validate();
  } catch (const bpm::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return bpm::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return bpm::run_command(command, config, bpm::resolve_output_dir(out_dir, config), std::cerr);
}
