#include <string>

#include <CLI11.hpp>

#include "netspde/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "netspde: stochastic reaction-diffusion on metric graphs with "
      "delayed dynamic boundary conditions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int paths = 0;
  bool seed_set = false, paths_set = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override sde.master_seed")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--paths", paths, "override the path count")
        ->each([&](const std::string&) { paths_set = true; });
  };

  for (const char* name : {"simulate", "analyze-semigroup", "converge",
                           "control-tournament", "validate-config"})
    add_common(app.add_subcommand(name));

  CLI11_PARSE(app, argc, argv);

  netspde::CommandOverrides overrides;
  if (seed_set) overrides.seed = seed;
  if (paths_set) overrides.n_paths = paths;

  const std::string command = app.get_subcommands().front()->get_name();
  return netspde::run_command(command, config_path, out_dir, overrides);
}
