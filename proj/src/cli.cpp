#include "rswitch/cli.hpp"

#include "rswitch/errors.hpp"
#include "rswitch/estimators.hpp"
#include "rswitch/format.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace rswitch::cli {

namespace {

constexpr std::array<std::string_view, 8> kSubcommands = {
    "simulate", "lemma21", "moments", "holding", "harnack", "feller", "chain-marginal",
    "truncation-check"};

/// JSON-lines sink. Every record carries the config hash and a kind:
/// "check" (counts toward the exit code), "detail" or "assumption".
class ReportWriter {
 public:
  explicit ReportWriter(const ScenarioConfig& cfg) : hash_(cfg.hash_hex()) {
    if (!cfg.output.report.empty()) {
      file_ = std::make_unique<std::ofstream>(cfg.output.report, std::ios::binary);
      if (!*file_) throw ConfigError("cannot open report file '" + cfg.output.report + "'");
      out_ = file_.get();
    } else {
      out_ = &std::cout;
    }
  }

  void check(const BoundReport& rep) { write(rep.to_json(), "check", rep.pass); }
  void detail(const BoundReport& rep) { write(rep.to_json(), "detail", true); }
  void detail(nlohmann::json j) { write(std::move(j), "detail", true); }
  void check(nlohmann::json j, bool pass) {
    j["pass"] = pass;
    write(std::move(j), "check", pass);
  }
  void assumption(nlohmann::json j) { write(std::move(j), "assumption", true); }

  int exit_code() const { return failed_ ? kCheckFailed : kOk; }

  void flush() { out_->flush(); }

 private:
  void write(nlohmann::json j, const char* kind, bool pass) {
    j["kind"] = kind;
    j["config_hash"] = hash_;
    *out_ << j.dump() << '\n';
    if (std::string_view(kind) == "check" && !pass) failed_ = true;
  }

  std::string hash_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
  bool failed_ = false;
};

class AssumptionFailure : public Error {
 public:
  using Error::Error;
};

Point default_point(const TaskReader&, const ModelSpec& m) {
  return Point(static_cast<std::size_t>(m.dim), 0.0);
}

Point read_point(TaskReader& task, const char* key, const ModelSpec& m) {
  Point x = task.get<std::vector<double>>(key, default_point(task, m));
  if (x.size() != static_cast<std::size_t>(m.dim)) {
    throw ConfigError(std::string("task.") + key + " must have " + std::to_string(m.dim) + " entries");
  }
  return x;
}

SamplingPlan read_plan(TaskReader& task, const ScenarioConfig& cfg) {
  SamplingPlan plan;
  plan.horizon = cfg.sim.T;
  plan.seed = cfg.sim.seed;
  if (task.has("sampling")) {
    const auto& s = task.raw("sampling");
    for (const auto& [key, value] : s.items()) {
      if (key != "pairs" && key != "local_pairs" && key != "radius" && key != "max_regime") {
        throw ConfigError("unknown key '" + key + "' in task.sampling");
      }
    }
    plan.pairs = s.value("pairs", plan.pairs);
    plan.local_pairs = s.value("local_pairs", plan.local_pairs);
    plan.radius = s.value("radius", plan.radius);
    plan.max_regime = s.value("max_regime", plan.max_regime);
  }
  return plan;
}

/// Gate on the assumptions a subcommand relies on; failures are written to the
/// report with their witnesses and abort with exit code 3.
void require(const ModelSpec& m, std::initializer_list<Assumption> needed, const SamplingPlan& plan,
             ReportWriter& out, std::ostream& err) {
  const auto report = check_assumptions(m, plan);
  bool ok = true;
  for (Assumption a : needed) {
    const auto& r = report.get(a);
    bool pass = r.pass;
    std::string note = r.note;
    if (a == Assumption::StateIndependence && !m.q.state_independent) {
      pass = false;
      note = "switching rates are not declared state-independent";
    }
    if (pass) continue;
    ok = false;
    nlohmann::json j = nlohmann::json::object();
    for (const auto& item : report.to_json()) {
      if (item.at("assumption") == to_string(a)) j = item;
    }
    j["assumption"] = to_string(a);
    j["pass"] = false;
    j["model"] = m.id;
    if (!note.empty()) j["note"] = note;
    out.assumption(j);
    err << "assumption '" << to_string(a) << "' fails for model '" << m.id << "'";
    if (!note.empty()) err << " (" << note << ")";
    err << '\n';
  }
  if (!ok) throw AssumptionFailure("model assumptions not satisfied");
}

std::vector<double> positive_list(TaskReader& task, const char* key, std::vector<double> fallback) {
  auto v = task.get<std::vector<double>>(key, std::move(fallback));
  if (v.empty()) throw ConfigError(std::string("task.") + key + " must be non-empty");
  return v;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_simulate(const ScenarioConfig& cfg, ReportWriter& out, std::ostream& err) {
  const ModelSpec m = cfg.build_model();
  TaskReader task(cfg.task, "simulate");
  const Point x0 = read_point(task, "x0", m);
  const int i0 = task.get<int>("i0", 1);
  const auto replica = task.get<std::uint64_t>("replica", 0);
  const SamplingPlan plan = read_plan(task, cfg);
  task.finish();
  if (cfg.sim.scheme == Scheme::EventDrivenExact) {
    require(m, {Assumption::Conservative, Assumption::BandLimited, Assumption::StateIndependence}, plan,
            out, err);
  } else {
    require(m, {Assumption::Conservative, Assumption::BandLimited}, plan, out, err);
  }

  const SimConfig sim = cfg.sim_config();
  const NoiseStream noise(sim.seed);
  Trajectory tr;
  PathOptions opts;
  opts.record = &tr;
  run_path(m, x0, i0, sim, noise, replica, opts);
  tr.config_hash = cfg.hash();

  if (!cfg.output.trajectory_csv.empty()) {
    std::ofstream f(cfg.output.trajectory_csv, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + cfg.output.trajectory_csv + "'");
    tr.write_csv(f);
  }
  if (!cfg.output.trajectory_bin.empty()) {
    std::ofstream f(cfg.output.trajectory_bin, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + cfg.output.trajectory_bin + "'");
    tr.write_binary(f);
  }
  nlohmann::json j{{"checker", "simulate"},
                   {"model", m.id},
                   {"scheme", std::string(to_string(sim.scheme))},
                   {"rows", tr.size()},
                   {"jumps", tr.jumps.size()},
                   {"final_x", std::vector<double>(tr.x(tr.size() - 1).begin(), tr.x(tr.size() - 1).end())},
                   {"final_regime", tr.regimes.back()},
                   {"eta", tr.eta},
                   {"tau_K", tr.tau_K ? nlohmann::json(*tr.tau_K) : nlohmann::json(nullptr)},
                   {"rate_warnings", tr.rate_warnings}};
  out.detail(j);
  if (tr.rate_warnings > 0) {
    err << "warning: " << tr.rate_warnings << " cells with dt * q_i(x) > 0.1\n";
  }
  return out.exit_code();
}

int cmd_lemma21(const ScenarioConfig& cfg, ReportWriter& out) {
  TaskReader task(cfg.task, "lemma21");
  const auto cases = task.get<std::int64_t>("cases", 1000);
  const int max_regime = task.get<int>("max_regime", 20);
  task.finish();
  if (cases < 1 || max_regime < 1) throw ConfigError("task.cases and task.max_regime must be positive");
  for (const auto& rep : lipschitz_sweep(cfg.sim.seed, cases, max_regime, cfg.sim.threads)) out.check(rep);
  return out.exit_code();
}

int cmd_moments(const ScenarioConfig& cfg, ReportWriter& out, std::ostream& err) {
  const ModelSpec m = cfg.build_model();
  TaskReader task(cfg.task, "moments");
  const Point x0 = read_point(task, "x0", m);
  const int i0 = task.get<int>("i0", 1);
  const auto horizons = positive_list(task, "horizons", {cfg.sim.T});
  const double bdg = task.get<double>("bdg", 3.0);
  const SamplingPlan plan = read_plan(task, cfg);
  task.finish();
  require(m, {Assumption::Conservative, Assumption::BandLimited, Assumption::LinearGrowth,
              Assumption::RateLinearBound},
          plan, out, err);
  for (double T : horizons) {
    out.check(moment_bound_check(m, x0, i0, T, cfg.sim.replicas, cfg.sim_config(), bdg));
  }
  return out.exit_code();
}

int cmd_holding(const ScenarioConfig& cfg, ReportWriter& out, std::ostream& err) {
  const ModelSpec m = cfg.build_model();
  TaskReader task(cfg.task, "holding");
  const Point x0 = read_point(task, "x0", m);
  const int K = task.get<int>("K", cfg.sim.K.value_or(5));
  std::vector<int> all(static_cast<std::size_t>(std::max(K, 0)));
  for (int k = 1; k <= K; ++k) all[static_cast<std::size_t>(k - 1)] = k;
  const auto ks = task.get<std::vector<int>>("k", all);
  const auto times = positive_list(task, "times", {0.1, 0.25, 0.5, 0.75, 1.0});
  const SamplingPlan plan = read_plan(task, cfg);
  task.finish();
  require(m, {Assumption::Conservative, Assumption::BandLimited, Assumption::RateSupLinear}, plan, out,
          err);
  for (int k : ks) {
    for (const auto& rep : holding_time_check(m, x0, k, K, times, cfg.sim.replicas, cfg.sim_config())) {
      out.check(rep);
    }
  }
  return out.exit_code();
}

int cmd_harnack(const ScenarioConfig& cfg, ReportWriter& out, std::ostream& err) {
  const ModelSpec m = cfg.build_model();
  TaskReader task(cfg.task, "harnack");
  const auto random_cases = task.get<std::int64_t>("random_cases", 0);
  const double f_floor = task.get<double>("f_floor", 1e-6);
  const SamplingPlan plan = read_plan(task, cfg);
  const std::initializer_list<Assumption> needed = {
      Assumption::StateIndependence, Assumption::HarnackModulus,   Assumption::UniformEllipticity,
      Assumption::BoundedAtOrigin,   Assumption::BoundedConstants, Assumption::UClass,
      Assumption::PhiDomination};

  if (random_cases <= 0) {
    const Point x = read_point(task, "x", m);
    const Point y = read_point(task, "y", m);
    const int i = task.get<int>("i", 1);
    const double T = task.get<double>("T", cfg.sim.T);
    const TestFunction f = task.has("f") ? TestFunction::from_json(task.raw("f"))
                                         : TestFunction::gaussian(1.0, f_floor);
    task.finish();
    require(m, needed, plan, out, err);
    out.check(harnack_check(m, f, x, y, i, T, cfg.sim.replicas, cfg.sim_config(), f_floor));
    return out.exit_code();
  }

  task.finish();
  const auto keys = cfg.model->zoo.empty() ? std::span<const std::string_view>{}
                                           : zoo_param_keys(cfg.model->zoo);
  if (std::find(keys.begin(), keys.end(), "dim") == keys.end()) {
    throw ConfigError("task.random_cases needs a model with a 'dim' parameter");
  }
  require(m, needed, plan, out, err);
  std::int64_t passed = 0, statistical = 0, hard = 0;
  for (std::int64_t k = 0; k < random_cases; ++k) {
    const HarnackCase c = random_harnack_case(cfg.sim.seed, static_cast<std::uint64_t>(k));
    nlohmann::json params = cfg.model->params;
    params["dim"] = c.dim;
    const ModelSpec mk = zoo(cfg.model->zoo, params);
    BoundReport rep = harnack_check(mk, c.f, c.x, c.y, c.regime, c.T, cfg.sim.replicas, cfg.sim_config(),
                                    f_floor);
    rep.params["case"] = k;
    if (rep.pass) {
      ++passed;
    } else if (rep.extra.value("within_4sigma", false)) {
      ++statistical;
    } else {
      ++hard;
    }
    out.detail(rep);
  }
  const double rate = static_cast<double>(passed) / static_cast<double>(random_cases);
  out.check({{"checker", "harnack"},
             {"model", m.id},
             {"cases", random_cases},
             {"passed", passed},
             {"statistical_failures", statistical},
             {"hard_failures", hard},
             {"pass_rate", rate}},
            rate >= 0.99 && hard == 0);
  return out.exit_code();
}

int cmd_feller(const ScenarioConfig& cfg, ReportWriter& out, std::ostream& err) {
  const ModelSpec m = cfg.build_model();
  TaskReader task(cfg.task, "feller");
  const Point x0 = read_point(task, "x0", m);
  const int i0 = task.get<int>("i0", 1);
  const double t = task.get<double>("t", cfg.sim.T);
  const TestFunction f = task.has("f") ? TestFunction::from_json(task.raw("f"))
                                       : TestFunction::indicator(0, 0.0);
  const auto radii = positive_list(task, "radii", {0.1, 0.03, 0.01, 0.003, 0.001});
  const bool straddle = task.get<bool>("straddle", false);
  const auto expect = task.get<std::string>("expect", "");
  const SamplingPlan plan = read_plan(task, cfg);
  task.finish();
  if (!expect.empty() && expect != "continuous" && expect != "discontinuous") {
    throw ConfigError("task.expect must be 'continuous' or 'discontinuous'");
  }
  require(m, {Assumption::Conservative, Assumption::BandLimited}, plan, out, err);
  const FellerReport rep = feller_modulus(m, f, t, x0, i0, radii, cfg.sim.replicas, cfg.sim_config(),
                                          straddle);
  for (const auto& r : rep.to_reports(m.id)) out.detail(r);
  const auto& last = rep.points.back();
  const std::string verdict = rep.discontinuity_witness ? "discontinuous"
                              : rep.monotone_trend      ? "continuous"
                                                        : "inconclusive";
  bool pass = expect.empty() || verdict == expect;
  for (const auto& p : rep.points) pass = pass && !p.gap.flagged();
  out.check({{"checker", "feller"},
             {"model", m.id},
             {"t", t},
             {"straddle", straddle},
             {"verdict", verdict},
             {"expect", expect},
             {"monotone_trend", rep.monotone_trend},
             {"discontinuity_witness", rep.discontinuity_witness},
             {"plateau", last.gap.mean},
             {"plateau_stderr", last.gap.std_error},
             {"smallest_radius", last.radius}},
            pass);
  return out.exit_code();
}

int cmd_chain_marginal(const ScenarioConfig& cfg, ReportWriter& out, std::ostream& err) {
  const ModelSpec m = cfg.build_model();
  TaskReader task(cfg.task, "chain-marginal");
  const Point x0 = read_point(task, "x0", m);
  std::vector<int> all;
  for (int k = 1; k <= m.q.max_state; ++k) all.push_back(k);
  const auto starts = task.get<std::vector<int>>("start_states", all);
  const auto times = positive_list(task, "times", {0.5, 1.0, 2.0});
  const SamplingPlan plan = read_plan(task, cfg);
  task.finish();
  if (!m.q.finite()) throw ConfigError("chain-marginal needs a model with finitely many regimes");
  require(m, {Assumption::Conservative, Assumption::BandLimited, Assumption::StateIndependence}, plan,
          out, err);
  std::int64_t total = 0, passed = 0;
  for (int i0 : starts) {
    const auto rep = chain_marginal_check(m, x0, i0, times, cfg.sim.replicas, cfg.sim_config());
    for (const auto& e : rep.entries) out.detail(e);
    total += static_cast<std::int64_t>(rep.entries.size());
    passed += rep.passed;
  }
  const double fraction = total ? static_cast<double>(passed) / static_cast<double>(total) : 1.0;
  out.check({{"checker", "chain-marginal"},
             {"model", m.id},
             {"entries", total},
             {"within_3se", passed},
             {"fraction", fraction}},
            fraction >= 0.99);
  return out.exit_code();
}

int cmd_truncation(const ScenarioConfig& cfg, ReportWriter& out, std::ostream& err) {
  const ModelSpec m = cfg.build_model();
  TaskReader task(cfg.task, "truncation-check");
  const Point x0 = read_point(task, "x0", m);
  const int i0 = task.get<int>("i0", 1);
  const auto levels = task.get<std::vector<int>>(
      "levels", cfg.sim.K ? std::vector<int>{*cfg.sim.K} : std::vector<int>{5, 10, 20});
  const double t = task.get<double>("t", cfg.sim.T);
  const auto paths = task.get<std::int64_t>("paths", 100);
  const double bdg = task.get<double>("bdg", 3.0);
  const SamplingPlan plan = read_plan(task, cfg);
  task.finish();
  double r0 = 0.0;
  for (double v : x0) r0 += v * v;
  for (int K : levels) {
    if (std::sqrt(r0) + i0 >= K) throw ConfigError("truncation levels must satisfy |x0| + i0 < K");
  }
  require(m, {Assumption::Conservative, Assumption::BandLimited, Assumption::LinearGrowth,
              Assumption::RateLinearBound},
          plan, out, err);

  SimConfig sim = cfg.sim_config();
  sim.T = t;
  sim.scheme = Scheme::FrozenRate;
  const NoiseStream noise(sim.seed);
  for (int K : levels) {
    SimConfig with_k = sim;
    with_k.K = K;
    std::int64_t agree = 0;
    for (std::int64_t r = 0; r < paths; ++r) {
      const auto full = simulate_path(m, x0, i0, with_k, noise, static_cast<std::uint64_t>(r));
      const auto cut = simulate_truncated(m, x0, i0, K, with_k, noise, static_cast<std::uint64_t>(r));
      agree += agree_until_exit(full, cut) ? 1 : 0;
    }
    out.check({{"checker", "truncation-agreement"}, {"model", m.id}, {"K", K}, {"paths", paths},
               {"agreeing", agree}},
              agree == paths);
  }
  for (const auto& rep : truncation_exit_check(m, x0, i0, levels, t, cfg.sim.replicas, sim, bdg)) {
    out.check(rep);
  }
  return out.exit_code();
}

}  // namespace

std::span<const std::string_view> subcommands() noexcept { return kSubcommands; }

void Overrides::apply(ScenarioConfig& cfg) const {
  if (seed) cfg.sim.seed = *seed;
  if (replicas) {
    if (*replicas < 1) throw ConfigError("--replicas must be positive");
    cfg.sim.replicas = *replicas;
  }
  if (dt) {
    if (!(*dt > 0.0)) throw ConfigError("--dt must be positive");
    cfg.sim.dt = *dt;
  }
  if (threads) {
    if (*threads < 0) throw ConfigError("--threads must be nonnegative");
    cfg.sim.threads = *threads;
  }
  if (report) cfg.output.report = *report;
}

int run(std::string_view subcommand, const ScenarioConfig& cfg, std::ostream& err) {
  try {
    ReportWriter out(cfg);
    int code = kOk;
    if (subcommand == "simulate") {
      code = cmd_simulate(cfg, out, err);
    } else if (subcommand == "lemma21") {
      code = cmd_lemma21(cfg, out);
    } else if (subcommand == "moments") {
      code = cmd_moments(cfg, out, err);
    } else if (subcommand == "holding") {
      code = cmd_holding(cfg, out, err);
    } else if (subcommand == "harnack") {
      code = cmd_harnack(cfg, out, err);
    } else if (subcommand == "feller") {
      code = cmd_feller(cfg, out, err);
    } else if (subcommand == "chain-marginal") {
      code = cmd_chain_marginal(cfg, out, err);
    } else if (subcommand == "truncation-check") {
      code = cmd_truncation(cfg, out, err);
    } else {
      throw ConfigError("unknown subcommand '" + std::string(subcommand) + "'");
    }
    out.flush();
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const AssumptionFailure& e) {
    err << "error: " << e.what() << '\n';
    return kAssumptionFailure;
  } catch (const MissingMetadata& e) {
    err << "model assumption error: " << e.what() << '\n';
    return kAssumptionFailure;
  } catch (const InvalidModel& e) {
    err << "model assumption error: " << e.what() << '\n';
    return kAssumptionFailure;
  } catch (const Unsupported& e) {
    err << "model assumption error: " << e.what() << '\n';
    return kAssumptionFailure;
  } catch (const NumericalBlowup& e) {
    err << "numerical blowup: " << e.what() << '\n';
    return kNumericalBlowup;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

int run_file(std::string_view subcommand, const std::string& config_path, const Overrides& overrides,
             std::ostream& err) {
  ScenarioConfig cfg;
  try {
    cfg = ScenarioConfig::load(config_path);
    overrides.apply(cfg);
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return run(subcommand, cfg, err);
}

// ---------------------------------------------------------------------------
// Plot data

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string cell(const nlohmann::json& j) {
  if (j.is_null()) return "";
  if (j.is_number_float()) return format_double(j.get<double>());
  if (j.is_number()) return j.dump();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_string()) return csv_field(j.get<std::string>());
  return csv_field(j.dump());
}

const nlohmann::json& at_path(const nlohmann::json& rec, const std::string& path) {
  static const nlohmann::json null_value;
  const nlohmann::json* cur = &rec;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) return null_value;
    cur = &cur->at(key);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *cur;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::string> fields;  // dotted paths into a record
  bool summaries = false;           // take check records without params
};

const std::map<std::string, Table, std::less<>>& tables() {
  static const std::map<std::string, Table, std::less<>> t = {
      {"feller", {{"radius", "gap"}, {"params.radius", "lhs"}}},
      {"holding",
       {{"k", "t", "empirical", "bound", "pass"}, {"params.k", "params.t", "lhs", "rhs", "pass"}}},
      {"harnack", {{"case", "lhs", "rhs", "margin"}, {"params.case", "lhs", "rhs", "margin"}}},
      {"moments", {{"T", "lhs", "rhs", "margin", "pass"}, {"params.T", "lhs", "rhs", "margin", "pass"}}},
      {"lemma21",
       {{"case", "i", "p", "lhs", "rhs", "margin", "pass"},
        {"params.case", "i", "p", "lhs", "rhs", "margin", "pass"}}},
      {"chain-marginal",
       {{"i0", "t", "j", "empirical", "oracle", "pass"},
        {"params.i0", "params.t", "params.j", "lhs", "rhs", "pass"}}},
      {"truncation-check",
       {{"K", "t", "empirical", "bound", "pass"}, {"params.K", "params.t", "lhs", "rhs", "pass"}}},
  };
  return t;
}

}  // namespace

void emit_plot_data(std::istream& reports, std::ostream& csv) {
  std::string family;
  std::vector<nlohmann::json> rows;
  std::string line;
  while (std::getline(reports, line)) {
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("report line is not JSON: ") + e.what());
    }
    const std::string kind = rec.value("kind", "");
    if (kind == "assumption") continue;
    std::string checker = rec.value("checker", "");
    if (checker == "truncation-agreement") checker = "truncation-check";
    if (checker == "simulate") throw ConfigError("simulate records have no plot table");
    if (family.empty()) family = checker;
    if (checker != family) {
      throw ConfigError("mixed checker families in report stream: '" + family + "' and '" + checker + "'");
    }
    // Per-item rows carry params; aggregate summary records do not.
    if (rec.contains("params")) rows.push_back(std::move(rec));
  }
  if (family.empty()) throw ConfigError("report stream is empty");
  const auto it = tables().find(family);
  if (it == tables().end()) throw ConfigError("no plot table for checker '" + family + "'");
  const Table& table = it->second;
  for (std::size_t c = 0; c < table.header.size(); ++c) csv << (c ? "," : "") << table.header[c];
  csv << '\n';
  for (const auto& rec : rows) {
    for (std::size_t c = 0; c < table.fields.size(); ++c) {
      csv << (c ? "," : "") << cell(at_path(rec, table.fields[c]));
    }
    csv << '\n';
  }
}

}  // namespace rswitch::cli
