#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "horolab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"horofunction and block-coding experiments on hyperbolic groups"};
  std::string subcommand;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool dry_run = false;
  app.add_option("subcommand", subcommand, "spheres | blocks | spectral | average | joint | validate | all")
      ->required()
      ->check(CLI::IsMember(horolab::subcommands()));
  app.add_option("--config", config, "experiment config (JSON)")->required();
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out, "override the output directory");
  app.add_flag("--dry-run", dry_run, "print the planned stages and write nothing");
  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = horolab::load_config(config, seed);
    if (!out.empty()) cfg.output_dir = out;
    const auto result = horolab::run_experiment(cfg, subcommand, dry_run, std::cout);
    if (!result.passed()) {
      std::cerr << "horolab: " << result.failed_assertions.size() << " assertion(s) failed\n";
      for (const auto& f : result.failed_assertions) std::cerr << "  " << f << "\n";
      return 1;
    }
    return 0;
  } catch (const horolab::Error& e) {
    std::cerr << "horolab: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "horolab: " << e.what() << "\n";
    return 2;
  }
}
