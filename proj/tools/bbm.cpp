#include <csignal>
#include <cstdlib>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bbm/harness/config.hpp"
#include "bbm/harness/experiment.hpp"
#include "bbm/harness/io.hpp"

namespace {

extern "C" void on_signal(int sig) {
  bbm::harness::PartialRegistry::unlink_all();
  std::_Exit(128 + sig);
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool full_positions = false;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment configuration")->required();
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--workers", o.workers, "worker threads (default: BBM_WORKERS, then hardware)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--full-positions", o.full_positions, "write every particle position into snapshots.jsonl");
  cmd->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace bbm::harness;
  CLI::App app{"Branching Brownian motion with absorption: simulation, analytic tables and acceptance checks"};
  app.require_subcommand(1);
  Overrides o;
  for (const auto& kind : experiment_kinds()) add_common(app.add_subcommand(kind), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    ExperimentConfig cfg = load_config(o.config);
    cfg.kind = kind;
    if (o.seed) {
      cfg.sim.seed = *o.seed;
      cfg.seed_given = true;
    }
    if (o.workers) cfg.workers = *o.workers;
    if (o.full_positions) cfg.full_positions = true;
    if (o.out) cfg.out_dir = *o.out;
    const auto outcome = run_experiment(cfg, &std::cerr, &std::cout);
    for (const auto& f : outcome.files) std::cerr << "wrote " << f.string() << '\n';
    return outcome.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}
