#include "rswitch/cli.hpp"
#include "rswitch/config.hpp"
#include "rswitch/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rswitch;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "rswitch_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("config_cli") {
  TEST_CASE("parse and render round-trip") {
    for (const char* file : {"simulate_ou.json", "feller_degenerate.json", "constant_model.json", "lemma21_sweep.json",
                             "harnack_random.json", "chain_marginal.json"}) {
      INFO(file);
      const auto cfg = ScenarioConfig::load(std::string(RSWITCH_TEST_DATA_DIR) + "/" + file);
      const auto back = ScenarioConfig::parse(cfg.render());
      CHECK(back == cfg);
      CHECK(back.hash() == cfg.hash());
    }
  }

  TEST_CASE("unknown keys and malformed values are rejected") {
    CHECK_THROWS_AS(ScenarioConfig::parse_text(R"({"colour": 1})"), ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::parse_text(R"({"sim": {"colour": 1}})"), ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::parse_text(R"({"model": {"zoo": "switching_ou", "params": {"colour": 1}}})"),
                    ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::parse_text(R"({"model": {"zoo": "nope"}})"), ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::parse_text(R"({"sim": {"dt": -1}})"), ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::parse_text(R"({"sim": {"scheme": "leapfrog"}})"), ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::parse_text(R"({"output": {"format": "xml"}})"), ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::parse_text("{not json"), ConfigError);
    CHECK_THROWS_AS(
        ScenarioConfig::parse_text(R"({"model": {"zoo": "switching_ou", "table": {"regimes": [{}]}}})"),
        ConfigError);
  }

  TEST_CASE("defaults and hashing") {
    const auto cfg = ScenarioConfig::parse_text("{}");
    CHECK(cfg.sim.seed == kDefaultSeed);
    CHECK(cfg.sim.scheme == Scheme::FrozenRate);
    auto other = cfg;
    other.sim.threads = 7;
    other.output.report = "elsewhere.jsonl";
    CHECK(other.hash() == cfg.hash());
    other.sim.seed = 1;
    CHECK(other.hash() != cfg.hash());
    CHECK(cfg.hash_hex().size() == 16);
  }

  TEST_CASE("unread task keys are rejected by the runner") {
    auto cfg = ScenarioConfig::parse_text(R"({"task": {"cases": 3, "typo": 1}})");
    std::ostringstream err;
    CHECK(cli::run("lemma21", cfg, err) == cli::kConfigError);
    CHECK(err.str().find("typo") != std::string::npos);
  }

  TEST_CASE("runner writes reports with the config hash") {
    auto cfg = ScenarioConfig::parse_text(R"({"task": {"cases": 5, "max_regime": 6}})");
    cfg.output.report = scratch("lemma.jsonl").string();
    std::ostringstream err;
    CHECK(cli::run("lemma21", cfg, err) == cli::kOk);
    std::istringstream lines(read_file(cfg.output.report));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.at("config_hash") == cfg.hash_hex());
      CHECK(j.at("kind") == "check");
      ++count;
    }
    CHECK(count == 5);
    CHECK(cli::run("no-such-command", cfg, err) == cli::kConfigError);
  }

  TEST_CASE("simulate writes trajectory files") {
    auto cfg = ScenarioConfig::load(std::string(RSWITCH_TEST_DATA_DIR) + "/constant_model.json");
    cfg.output.report = scratch("sim.jsonl").string();
    cfg.output.trajectory_csv = scratch("sim.csv").string();
    cfg.output.trajectory_bin = scratch("sim.bin").string();
    std::ostringstream err;
    REQUIRE(cli::run("simulate", cfg, err) == cli::kOk);
    std::istringstream csv(read_file(cfg.output.trajectory_csv));
    std::string header, row;
    std::getline(csv, header);
    CHECK(header == "time,regime,x1,x2,event");
    int rows = 0;
    while (std::getline(csv, row)) {
      CHECK(row.substr(row.find(',') + 1) == "1,1.5,-2,0");
      ++rows;
    }
    CHECK(rows == 11);
    std::ifstream bin(cfg.output.trajectory_bin, std::ios::binary);
    const auto tr = Trajectory::read_binary(bin);
    CHECK(tr.config_hash == cfg.hash());
    CHECK(tr.size() == 11);
  }

  TEST_CASE("same config gives byte-identical reports across thread counts") {
    auto cfg = ScenarioConfig::load(std::string(RSWITCH_TEST_DATA_DIR) + "/moments_ou.json");
    cfg.sim.replicas = 300;
    std::ostringstream err;
    cfg.sim.threads = 1;
    cfg.output.report = scratch("m1.jsonl").string();
    REQUIRE(cli::run("moments", cfg, err) == cli::kOk);
    cfg.sim.threads = 4;
    cfg.output.report = scratch("m4.jsonl").string();
    REQUIRE(cli::run("moments", cfg, err) == cli::kOk);
    CHECK(read_file(scratch("m1.jsonl")) == read_file(scratch("m4.jsonl")));
  }

  TEST_CASE("overrides") {
    auto cfg = ScenarioConfig::parse_text("{}");
    cli::Overrides o;
    o.seed = 9;
    o.replicas = 12;
    o.dt = 0.5;
    o.apply(cfg);
    CHECK(cfg.sim.seed == 9);
    CHECK(cfg.sim.replicas == 12);
    CHECK(cfg.sim.dt == 0.5);
    o.dt = -1.0;
    CHECK_THROWS_AS(o.apply(cfg), ConfigError);
    std::ostringstream err;
    CHECK(cli::run_file("simulate", "/nonexistent/config.json", cli::Overrides{}, err) == cli::kConfigError);
  }

  TEST_CASE("CSV quoting") {
    CHECK(cli::csv_field("plain") == "plain");
    CHECK(cli::csv_field("a,b") == "\"a,b\"");
    CHECK(cli::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(cli::csv_field("two\nlines") == "\"two\nlines\"");
  }

  TEST_CASE("plot data tables") {
    std::istringstream feller(
        R"({"checker":"feller","kind":"detail","params":{"radius":0.1},"lhs":0.4})" "\n"
        R"({"checker":"feller","kind":"detail","params":{"radius":0.01},"lhs":0.37})" "\n"
        R"({"checker":"feller","kind":"check","verdict":"discontinuous","pass":true})" "\n");
    std::ostringstream csv;
    cli::emit_plot_data(feller, csv);
    CHECK(csv.str() == "radius,gap\n0.1,0.4\n0.01,0.37\n");

    std::istringstream harnack(
        R"({"checker":"harnack","kind":"detail","params":{"case":0},"lhs":-1,"rhs":0.5,"margin":2})" "\n");
    std::ostringstream csv2;
    cli::emit_plot_data(harnack, csv2);
    CHECK(csv2.str() == "case,lhs,rhs,margin\n0,-1,0.5,2\n");

    std::istringstream mixed(R"({"checker":"feller","params":{}})" "\n" R"({"checker":"holding","params":{}})" "\n");
    std::ostringstream sink;
    CHECK_THROWS_AS(cli::emit_plot_data(mixed, sink), ConfigError);
    std::istringstream empty("");
    CHECK_THROWS_AS(cli::emit_plot_data(empty, sink), ConfigError);
  }
}
