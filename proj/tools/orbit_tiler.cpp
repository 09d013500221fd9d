// orbit-tiler: batch front end for the tiling and convergence experiments.

#include "orbit_tiler/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace orbit_tiler;

  CLI::App app{"Finite-window experiments for the pointwise ergodic theorem"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--seed", seed, "top-level seed (overrides run.seed)");
  app.add_option("--out", out, "output directory (overrides run.out)");
  app.add_option("--jobs", jobs, "worker threads (overrides run.jobs)")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "section.key=value override, repeatable");

  for (const char* name : {"lemma1", "sections", "tile", "chain", "converge", "condexp"}) {
    app.add_subcommand(name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  ExperimentConfig config;
  try {
    config = load_config(config_path, overrides);
    config.command = parse_command(app.get_subcommands().front()->get_name());
    if (seed) config.seed = *seed;
    if (out) config.out = *out;
    if (jobs) config.jobs = *jobs;
    apply_environment(config);
    validate_config(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const int code = run(config, std::cerr);
    if (code != kExitConfig) {
      std::cout << "wrote " << (config.out / "report.txt").string() << '\n';
    }
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAssertion;
  }
}
