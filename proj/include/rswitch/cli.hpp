#pragma once

// Subcommand runner behind the rswitch executable. Every subcommand reads a
// ScenarioConfig, writes JSON-lines report records and returns an exit code:
//
//   0  every check record passed
//   1  at least one check record failed
//   2  configuration error
//   3  model-assumption failure (the witness is written to the report)
//   4  numerical blowup

#include "rswitch/config.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace rswitch::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigError = 2,
  kAssumptionFailure = 3,
  kNumericalBlowup = 4,
};

std::span<const std::string_view> subcommands() noexcept;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replicas;
  std::optional<double> dt;
  std::optional<int> threads;
  std::optional<std::string> report;

  void apply(ScenarioConfig& cfg) const;
};

/// Runs one subcommand; errors are mapped to exit codes and described on `err`.
int run(std::string_view subcommand, const ScenarioConfig& cfg, std::ostream& err);

/// Loads `config_path`, applies overrides and runs.
int run_file(std::string_view subcommand, const std::string& config_path, const Overrides& overrides,
             std::ostream& err);

/// Converts one checker family's report records into a plot-ready CSV table.
/// Mixed families raise ConfigError.
void emit_plot_data(std::istream& reports, std::ostream& csv);

/// RFC 4180 field quoting (only when needed).
std::string csv_field(std::string_view value);

}  // namespace rswitch::cli
