// cpf: batch driver for the conserved Penrose-Fife simulator.
//
//   cpf simulate --config run.ini [--out DIR] [--seed N] [--quiet]
//   cpf steady   --config run.ini ...
//   cpf sweep    --config run.ini ...
//   cpf verify   [--config run.ini] [--samples N] ...

#include "cpf/app.hpp"

#include <CLI11.hpp>

#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Conserved Penrose-Fife phase-field simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "Run configuration (INI sections of key = value)");
    if (config_required) opt->required();
    sub->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
    sub->add_option("--seed", seed, "Random seed (overrides [initial] seed)");
    sub->add_flag("--quiet", quiet, "Suppress progress output");
  };
  auto* simulate = app.add_subcommand("simulate", "Integrate in time, writing ledger.csv and snapshots");
  auto* steady = app.add_subcommand("steady", "Solve the constrained stationary problem");
  auto* sweep = app.add_subcommand("sweep", "Run independent simulations or steady solves over a parameter grid");
  auto* verify = app.add_subcommand("verify", "Run the invariant suite and report pass/fail per check");
  add_common(simulate, true);
  add_common(steady, true);
  add_common(sweep, true);
  add_common(verify, false);
  verify->add_option("--samples", samples, "Random samples per check (overrides [verify] samples)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cpf::exit_config;
  }

  cpf::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = cpf::load_config(config_path);
  } catch (const cpf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cpf::exit_config;
  }
  if (seed) cfg.initial.seed = *seed;
  if (samples) {
    if (*samples < 0) {
      std::cerr << "config error: --samples must be nonnegative\n";
      return cpf::exit_config;
    }
    cfg.verify_samples = *samples;
  }

  cpf::CommandContext ctx;
  ctx.out_dir = out_dir.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(out_dir);
  ctx.quiet = quiet;

  if (*simulate) return cpf::simulate(cfg, ctx).status;
  if (*steady) return cpf::steady_command(cfg, ctx).status;
  if (*sweep) return cpf::sweep_command(cfg, ctx);
  return cpf::verify_command(cfg, ctx);
}
