#pragma once

// Scenario configuration files (JSON). Four sections:
//
//   model   {"zoo": name, "params": {...}}
//   sim     {"T", "dt", "K", "seed", "scheme", "replicas", "threads"}
//   task    subcommand-specific keys (validated by the subcommand)
//   output  {"report", "trajectory_csv", "trajectory_bin", "plot_data"}
//
// Unknown keys in model, sim and output are rejected at parse time.

#include "rswitch/engine.hpp"
#include "rswitch/models.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace rswitch {

/// Either a zoo model with parameters or an external coefficient table
/// (see affine_table_model); exactly one of `zoo` and `table` is set.
struct ModelSection {
  std::string zoo;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json table;  // null unless a coefficient table is given

  bool operator==(const ModelSection&) const = default;
};

struct SimSection {
  double T = 1.0;
  double dt = 1e-3;
  std::optional<int> K;
  std::uint64_t seed = kDefaultSeed;
  Scheme scheme = Scheme::FrozenRate;
  std::int64_t replicas = 10000;
  int threads = 0;

  bool operator==(const SimSection&) const = default;
};

struct OutputSection {
  std::string report;          // JSON-lines report path ("" = stdout)
  std::string trajectory_csv;  // simulate only
  std::string trajectory_bin;  // simulate only
  std::string plot_data;       // CSV table for plotting

  bool operator==(const OutputSection&) const = default;
};

struct ScenarioConfig {
  std::optional<ModelSection> model;
  SimSection sim;
  nlohmann::json task = nlohmann::json::object();
  OutputSection output;

  static ScenarioConfig parse(const nlohmann::json& j);
  static ScenarioConfig parse_text(const std::string& text);
  static ScenarioConfig load(const std::string& path);
  nlohmann::json render() const;

  /// FNV-1a 64 of the canonical rendering, excluding sim.threads (which
  /// never changes results).
  std::uint64_t hash() const;
  std::string hash_hex() const;

  SimConfig sim_config() const;
  ModelSpec build_model() const;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Strict accessors for task sections: unknown keys raise ConfigError.
class TaskReader {
 public:
  TaskReader(const nlohmann::json& task, std::string subcommand);

  template <typename T>
  T get(const char* key, T fallback) {
    seen_.push_back(key);
    if (!task_.contains(key)) return fallback;
    try {
      return task_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw_config(key, e.what());
    }
  }

  bool has(const char* key) const { return task_.contains(key); }
  const nlohmann::json& raw(const char* key) {
    seen_.push_back(key);
    return task_.at(key);
  }

  /// Raises ConfigError if the task section has keys that were never read.
  void finish() const;

 private:
  [[noreturn]] void throw_config(const char* key, const char* what) const;

  const nlohmann::json& task_;
  std::string subcommand_;
  std::vector<std::string> seen_;
};

}  // namespace rswitch
