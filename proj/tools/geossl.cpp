#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "geossl/config.hpp"
#include "geossl/error.hpp"
#include "geossl/parallel.hpp"

int main(int argc, char** argv) {
  using namespace geossl;
  CLI::App app{"Geometric graph construction, GNN training and generalization-gap experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  cli::RunOptions options;
  std::size_t threads = 0;
  bool print_config = false;

  for (const auto& [name, command] : cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_option("-s,--set", overrides, "override one key (key=value), repeatable");
    sub->add_option("-j,--jobs", options.jobs, "concurrent sweep runs")->check(CLI::PositiveNumber);
    sub->add_option("-t,--threads", threads, "internal worker threads (overrides GEOSSL_THREADS)");
    sub->add_flag("--timing", options.timing, "record wall times in traces and timing.log");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    config::ExperimentConfig config;
    if (!config_path.empty()) config = config::load_config(config_path);
    for (const auto& o : overrides) config::apply_override(config, o);
    if (print_config) {
      std::cout << config::to_text(config);
      return 0;
    }
    config::validate(config);
    if (threads > 0) set_thread_count(threads);
    const std::string name = app.get_subcommands().front()->get_name();
    for (const auto& [command_name, command] : cli::commands()) {
      if (command_name == name) command(config, options);
    }
    return 0;
  } catch (const std::exception& e) {
    return cli::exit_code_for(e);
  }
}
