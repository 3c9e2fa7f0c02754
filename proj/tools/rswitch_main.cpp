#include "rswitch/cli.hpp"
#include "rswitch/errors.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

void add_run_options(CLI::App& sub, std::string& config, rswitch::cli::Overrides& o) {
  sub.add_option("--config,-c", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  sub.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; },
                                         "Override sim.seed");
  sub.add_option_function<std::int64_t>("--replicas", [&](const std::int64_t& v) { o.replicas = v; },
                                        "Override sim.replicas");
  sub.add_option_function<double>("--dt", [&](const double& v) { o.dt = v; }, "Override sim.dt");
  sub.add_option_function<int>("--threads", [&](const int& v) { o.threads = v; },
                               "Worker threads (0 = hardware concurrency)");
  sub.add_option_function<std::string>("--report", [&](const std::string& v) { o.report = v; },
                                       "Report path (JSON lines); default stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching diffusion simulator and bound checkers"};
  app.require_subcommand(1);

  std::string config;
  rswitch::cli::Overrides overrides;
  std::string selected;
  for (std::string_view name : rswitch::cli::subcommands()) {
    auto* sub = app.add_subcommand(std::string(name));
    add_run_options(*sub, config, overrides);
    sub->callback([&selected, name] { selected = std::string(name); });
  }

  std::string input, output;
  auto* plot = app.add_subcommand("plot-data", "Turn a report file into a plot-ready CSV table");
  plot->add_option("--input,-i", input, "Report file (JSON lines)")->required()->check(CLI::ExistingFile);
  plot->add_option("--output,-o", output, "CSV path; default stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rswitch::cli::kConfigError;
  }

  if (plot->parsed()) {
    try {
      std::ifstream in(input);
      if (output.empty()) {
        rswitch::cli::emit_plot_data(in, std::cout);
      } else {
        std::ofstream out(output, std::ios::binary);
        if (!out) throw rswitch::ConfigError("cannot open '" + output + "'");
        rswitch::cli::emit_plot_data(in, out);
      }
    } catch (const rswitch::Error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return rswitch::cli::kConfigError;
    }
    return 0;
  }
  return rswitch::cli::run_file(selected, config, overrides, std::cerr);
}
