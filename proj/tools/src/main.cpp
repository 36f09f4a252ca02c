#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "omt/app/runner.hpp"
#include "omt/app/schema.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Term-structure pricing and verification runs"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the task described by a JSON config");
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  unsigned threads = 0;
  run->add_option("config", config, "Path to the config file")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--set", overrides, "Override a config field, e.g. mc.seed=7")->take_all();
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* schema = app.add_subcommand("schema", "Print the JSON schema of the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : omt::app::exit_code::config_error;
  }

  if (*schema) {
    std::cout << omt::app::config_schema();
    return 0;
  }
  return omt::app::run_command(config, out, overrides, threads, std::cout, std::cerr);
}
