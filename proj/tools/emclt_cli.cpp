#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "emclt/common.hpp"
#include "emclt/config.hpp"
#include "emclt/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Euler-Maruyama CLT experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment and write its artifacts");
  std::string experiment, config_path, out;
  std::optional<std::uint64_t> seed, workers;
  std::optional<double> scale;
  run->add_option("--experiment", experiment, "experiment name")
      ->check(CLI::IsMember(emclt::experiment_names()));
  run->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory");
  run->add_option("--seed", seed, "base seed");
  run->add_option("--scale", scale, "size factor for repro experiments");
  run->add_option("--workers", workers, "worker threads (default: all cores)");

  auto* list = app.add_subcommand("list", "list experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? emclt::kExitOk : emclt::kExitError;
  }

  if (*list) {
    for (const auto& n : emclt::experiment_names()) std::cout << n << "\n";
    return emclt::kExitOk;
  }

  try {
    auto cfg = config_path.empty() ? emclt::RunConfig{} : emclt::RunConfig::load(config_path);
    if (!experiment.empty()) cfg.set("experiment", experiment);
    if (!out.empty()) cfg.set("out", out);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (scale) cfg.set("scale", fmt::format("{}", *scale));
    if (workers) cfg.set("workers", std::to_string(*workers));
    if (cfg.experiment().empty()) {
      std::cerr << "error: no experiment given (--experiment or experiment= in the config)\n";
      return emclt::kExitError;
    }
    return emclt::run_experiment(cfg, std::cout);
  } catch (const emclt::BudgetExceeded& e) {
    std::cerr << "refused: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return emclt::kExitError;
}
