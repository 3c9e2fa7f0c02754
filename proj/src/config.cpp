#include "rswitch/config.hpp"

#include "rswitch/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rswitch {

namespace {

void reject_unknown(const nlohmann::json& section, const char* name,
                    std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw ConfigError(std::string("section '") + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in section '" + name + "'");
    }
  }
}

template <typename T>
T read(const nlohmann::json& section, const char* section_name, const char* key, T fallback) {
  if (!section.contains(key)) return fallback;
  try {
    return section.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section_name) + "." + key + ": " + e.what());
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::parse(const nlohmann::json& j) {
  reject_unknown(j, "top level", {"model", "sim", "task", "output"});
  ScenarioConfig c;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, "model", {"zoo", "params", "table"});
    ModelSection ms;
    if (m.contains("table")) {
      if (m.contains("zoo") || m.contains("params")) {
        throw ConfigError("model.table cannot be combined with model.zoo or model.params");
      }
      ms.table = m.at("table");
      affine_table_model(ms.table);  // validates eagerly
    } else {
      if (!m.contains("zoo")) throw ConfigError("model.zoo or model.table is required");
      ms.zoo = read<std::string>(m, "model", "zoo", "");
      ms.params = m.contains("params") ? m.at("params") : nlohmann::json::object();
      if (!ms.params.is_object()) throw ConfigError("model.params must be an object");
      const auto names = zoo_names();
      if (std::find(names.begin(), names.end(), ms.zoo) == names.end()) {
        throw ConfigError("unknown zoo model '" + ms.zoo + "'");
      }
      const auto keys = zoo_param_keys(ms.zoo);
      for (const auto& [key, value] : ms.params.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
          throw ConfigError("unknown parameter '" + key + "' for model '" + ms.zoo + "'");
        }
      }
    }
    c.model = std::move(ms);
  }
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    reject_unknown(s, "sim", {"T", "dt", "K", "seed", "scheme", "replicas", "threads"});
    c.sim.T = read(s, "sim", "T", c.sim.T);
    c.sim.dt = read(s, "sim", "dt", c.sim.dt);
    if (s.contains("K") && !s.at("K").is_null()) c.sim.K = read<int>(s, "sim", "K", 0);
    c.sim.seed = read<std::uint64_t>(s, "sim", "seed", c.sim.seed);
    c.sim.scheme = parse_scheme(read<std::string>(s, "sim", "scheme", std::string(to_string(c.sim.scheme))));
    c.sim.replicas = read<std::int64_t>(s, "sim", "replicas", c.sim.replicas);
    c.sim.threads = read<int>(s, "sim", "threads", c.sim.threads);
  }
  if (j.contains("task")) {
    c.task = j.at("task");
    if (!c.task.is_object()) throw ConfigError("section 'task' must be an object");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    reject_unknown(o, "output", {"report", "trajectory_csv", "trajectory_bin", "plot_data"});
    c.output.report = read<std::string>(o, "output", "report", "");
    c.output.trajectory_csv = read<std::string>(o, "output", "trajectory_csv", "");
    c.output.trajectory_bin = read<std::string>(o, "output", "trajectory_bin", "");
    c.output.plot_data = read<std::string>(o, "output", "plot_data", "");
  }
  if (!(c.sim.dt > 0.0)) throw ConfigError("sim.dt must be positive");
  if (!(c.sim.T >= 0.0)) throw ConfigError("sim.T must be nonnegative");
  if (c.sim.K && *c.sim.K < 1) throw ConfigError("sim.K must be at least 1");
  if (c.sim.replicas < 1) throw ConfigError("sim.replicas must be positive");
  if (c.sim.threads < 0) throw ConfigError("sim.threads must be nonnegative");
  return c;
}

ScenarioConfig ScenarioConfig::parse_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse(j);
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

nlohmann::json ScenarioConfig::render() const {
  nlohmann::json j;
  if (model && !model->table.is_null()) {
    j["model"] = {{"table", model->table}};
  } else if (model) {
    j["model"] = {{"zoo", model->zoo}, {"params", model->params}};
  }
  j["sim"] = {{"T", sim.T},
              {"dt", sim.dt},
              {"seed", sim.seed},
              {"scheme", std::string(to_string(sim.scheme))},
              {"replicas", sim.replicas},
              {"threads", sim.threads}};
  j["sim"]["K"] = sim.K ? nlohmann::json(*sim.K) : nlohmann::json(nullptr);
  j["task"] = task;
  j["output"] = {{"report", output.report},
                 {"trajectory_csv", output.trajectory_csv},
                 {"trajectory_bin", output.trajectory_bin},
                 {"plot_data", output.plot_data}};
  return j;
}

std::uint64_t ScenarioConfig::hash() const {
  nlohmann::json j = render();
  // Thread count and output paths do not change results.
  j["sim"].erase("threads");
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ScenarioConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

SimConfig ScenarioConfig::sim_config() const {
  SimConfig c;
  c.T = sim.T;
  c.dt = sim.dt;
  c.K = sim.K;
  c.seed = sim.seed;
  c.scheme = sim.scheme;
  c.threads = sim.threads;
  return c;
}

ModelSpec ScenarioConfig::build_model() const {
  if (!model) throw ConfigError("this subcommand needs a 'model' section");
  if (!model->table.is_null()) return affine_table_model(model->table);
  return zoo(model->zoo, model->params);
}

TaskReader::TaskReader(const nlohmann::json& task, std::string subcommand)
    : task_(task), subcommand_(std::move(subcommand)) {}

void TaskReader::finish() const {
  for (const auto& [key, value] : task_.items()) {
    if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
      throw ConfigError("unknown task key '" + key + "' for subcommand '" + subcommand_ + "'");
    }
  }
}

void TaskReader::throw_config(const char* key, const char* what) const {
  throw ConfigError("task." + std::string(key) + ": " + what);
}

}  // namespace rswitch
