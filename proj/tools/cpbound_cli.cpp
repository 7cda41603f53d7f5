#include "cpbound/config.hpp"
#include "cpbound/error.hpp"
#include "cpbound/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  CLI::App app{"Compound Poisson error bounds for renewal and Markov renewal point counts"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::string> output_path;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  const char* commands[][2] = {
      {"bound", "Compute the total variation bound and the compound Poisson law"},
      {"simulate", "Estimate the law of the count by stationary simulation"},
      {"validate", "Run the validation battery; exit 1 if any check fails"},
      {"sweep", "Tabulate the bound over a rate or horizon grid"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output_path, "Write the artifact here instead of stdout");
    sub->add_option("-f,--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("-s,--seed", seed, "Override simulation.seed");
    sub->add_option("-j,--threads", threads, "Override simulation.threads");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cpbound::RunConfig config;
  try {
    config = cpbound::load_config(config_path);
  } catch (const cpbound::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cpbound::exit_status(e.code());
  }
  if (output_path) config.output.path = *output_path;
  if (format) config.output.format = *format;
  if (seed) config.simulation.seed = *seed;
  if (threads) config.simulation.threads = *threads;

  const std::string command = app.get_subcommands().front()->get_name();
  return cpbound::run_command(command, config, std::cout, std::cerr);
}
