#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bilevel/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Saddle-point escape experiments for bilevel and minimax problems"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "run every seed of an experiment and write traces plus summary.json");
  run->add_option("config", config, "experiment JSON file")->required();
  auto* verify = app.add_subcommand("verify-constants", "print smoothness constants and theory parameters");
  verify->add_option("config", config, "experiment JSON file")->required();
  auto* sweep = app.add_subcommand("sweep", "run a grid of epsilon or kappa values and fit the iteration slope");
  sweep->add_option("config", config, "experiment JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bilevel::kExitInvalid;
  }

  if (run->parsed()) return bilevel::cmd_run(config, std::cout, std::cerr);
  if (verify->parsed()) return bilevel::cmd_verify_constants(config, std::cout, std::cerr);
  return bilevel::cmd_sweep(config, std::cout, std::cerr);
}
