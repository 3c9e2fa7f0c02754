#include "rswitch/estimators.hpp"

#include "rswitch/errors.hpp"
#include "rswitch/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rswitch {

// ---------------------------------------------------------------------------
// McEstimate

McEstimate McEstimate::from_values(std::span<const double> values, std::int64_t aborted) {
  McEstimate e;
  e.n = static_cast<std::int64_t>(values.size()) + aborted;
  e.n_aborted = aborted;
  if (values.empty()) {
    e.mean = std::numeric_limits<double>::quiet_NaN();
    e.std_error = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  const auto count = static_cast<double>(values.size());
  e.mean = pairwise_sum(values) / count;
  if (values.size() > 1) {
    std::vector<double> dev(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) dev[k] = (values[k] - e.mean) * (values[k] - e.mean);
    e.std_error = std::sqrt(pairwise_sum(dev) / (count - 1.0) / count);
  }
  return e;
}

namespace {

/// Per-replica vectors of N values; aborted replicas are marked, not dropped.
template <std::size_t N>
struct ReplicaBatch {
  std::vector<std::array<double, N>> values;
  std::vector<std::uint8_t> ok;

  std::int64_t aborted() const {
    return static_cast<std::int64_t>(std::count(ok.begin(), ok.end(), std::uint8_t{0}));
  }

  McEstimate estimate(std::size_t component) const {
    std::vector<double> kept;
    kept.reserve(values.size());
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (ok[r]) kept.push_back(values[r][component]);
    }
    return McEstimate::from_values(kept, aborted());
  }
};

template <std::size_t N, typename Fn>
ReplicaBatch<N> run_replicas(std::int64_t n, int threads, Fn&& fn) {
  if (n < 1) throw InvalidArgument("replica count must be positive");
  ReplicaBatch<N> batch;
  batch.values.resize(static_cast<std::size_t>(n));
  batch.ok.assign(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t r) {
    try {
      batch.values[r] = fn(static_cast<std::uint64_t>(r));
      batch.ok[r] = 1;
    } catch (const NumericalBlowup&) {
      batch.ok[r] = 0;
    }
  });
  return batch;
}

SimConfig with_horizon(const SimConfig& cfg, double T) {
  SimConfig c = cfg;
  c.T = T;
  return c;
}

double norm2(PointView x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

nlohmann::json point_json(PointView x) { return std::vector<double>(x.begin(), x.end()); }

}  // namespace

// ---------------------------------------------------------------------------
// Test functions

TestFunction TestFunction::constant(double c) {
  return {{{"kind", "const"}, {"value", c}}, [c](PointView, int) { return c; }, std::abs(c)};
}

TestFunction TestFunction::regime() {
  return {{{"kind", "regime"}}, [](PointView, int k) { return static_cast<double>(k); },
          std::numeric_limits<double>::infinity()};
}

TestFunction TestFunction::coordinate(int index) {
  if (index < 0) throw ConfigError("coordinate index must be nonnegative");
  return {{{"kind", "coord"}, {"index", index}},
          [index](PointView x, int) { return x[static_cast<std::size_t>(index)]; },
          std::numeric_limits<double>::infinity()};
}

TestFunction TestFunction::indicator(int index, double threshold) {
  if (index < 0) throw ConfigError("indicator index must be nonnegative");
  return {{{"kind", "indicator"}, {"index", index}, {"threshold", threshold}},
          [index, threshold](PointView x, int) {
            return x[static_cast<std::size_t>(index)] > threshold ? 1.0 : 0.0;
          },
          1.0};
}

TestFunction TestFunction::gaussian(double scale, double floor) {
  if (!(scale > 0.0)) throw ConfigError("gauss scale must be positive");
  return {{{"kind", "gauss"}, {"scale", scale}, {"floor", floor}},
          [scale, floor](PointView x, int) { return std::max(std::exp(-norm2(x) / scale), floor); },
          std::max(1.0, std::abs(floor))};
}

TestFunction TestFunction::wave(std::vector<double> w, double phase, double regime_shift,
                                double amplitude) {
  if (!(std::abs(amplitude) < 1.0)) throw ConfigError("wave amplitude must lie in (-1, 1)");
  nlohmann::json spec{{"kind", "wave"},  {"w", w}, {"phase", phase}, {"regime_shift", regime_shift},
                      {"amplitude", amplitude}};
  return {std::move(spec),
          [w = std::move(w), phase, regime_shift, amplitude](PointView x, int k) {
            double arg = phase + regime_shift * k;
            for (std::size_t a = 0; a < w.size() && a < x.size(); ++a) arg += w[a] * x[a];
            return 1.0 + amplitude * std::sin(arg);
          },
          1.0 + std::abs(amplitude)};
}

TestFunction TestFunction::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("test function needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") continue;
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        throw ConfigError("unknown key '" + key + "' for test function '" + kind + "'");
      }
    }
  };
  try {
    if (kind == "const") {
      allow({"value"});
      return constant(j.value("value", 1.0));
    }
    if (kind == "regime") {
      allow({});
      return regime();
    }
    if (kind == "coord") {
      allow({"index"});
      return coordinate(j.value("index", 0));
    }
    if (kind == "indicator") {
      allow({"index", "threshold"});
      return indicator(j.value("index", 0), j.value("threshold", 0.0));
    }
    if (kind == "gauss") {
      allow({"scale", "floor"});
      return gaussian(j.value("scale", 1.0), j.value("floor", 1e-6));
    }
    if (kind == "wave") {
      allow({"w", "phase", "regime_shift", "amplitude"});
      return wave(j.value("w", std::vector<double>{1.0}), j.value("phase", 0.0),
                  j.value("regime_shift", 0.0), j.value("amplitude", 0.5));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("test function: ") + e.what());
  }
  throw ConfigError("unknown test function kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Reports

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j{{"checker", checker},
                   {"model", model},
                   {"params", params},
                   {"lhs", lhs.mean},
                   {"lhs_stderr", lhs.std_error},
                   {"rhs", rhs},
                   {"rhs_stderr", rhs_stderr},
                   {"margin", margin},
                   {"pass", pass},
                   {"replicas", lhs.n},
                   {"aborted", lhs.n_aborted},
                   {"flagged", lhs.flagged()}};
  for (const auto& [key, value] : extra.items()) j[key] = value;
  return j;
}

// ---------------------------------------------------------------------------
// Semigroup and first-jump estimators

McEstimate semigroup_estimate(const ModelSpec& m, const TestFunction& f, double t, PointView x, int i,
                              std::int64_t n, const SimConfig& cfg) {
  const SimConfig c = with_horizon(cfg, t);
  c.validate();
  const NoiseStream noise(cfg.seed);
  auto batch = run_replicas<1>(n, cfg.threads, [&](std::uint64_t r) {
    const auto s = run_path(m, x, i, c, noise, r);
    return std::array<double, 1>{f(s.x, s.regime)};
  });
  return batch.estimate(0);
}

FirstJumpEstimate first_jump_estimate(const ModelSpec& m, const TestFunction& f, double t, PointView x,
                                      int i, std::int64_t n, const SimConfig& cfg) {
  if (!m.q.state_independent) {
    throw Unsupported("first_jump_estimate requires state-independent switching");
  }
  cfg.validate();
  const NoiseStream base(cfg.seed);
  const NoiseStream frozen_noise = base.derive(1);
  const NoiseStream continuation_noise = base.derive(2);
  const double rate = m.q.exit_rate(x, i);
  const double stay_weight = std::exp(-rate * t);
  const double jump_weight = -std::expm1(-rate * t);

  PathOptions frozen;
  frozen.frozen_regime = true;
  SimConfig to_t = with_horizon(cfg, t);
  to_t.scheme = Scheme::EventDrivenExact;

  auto batch = run_replicas<3>(n, cfg.threads, [&](std::uint64_t r) {
    const auto stay = run_path(m, x, i, to_t, frozen_noise, r, frozen);
    const double stay_term = stay_weight * f(stay.x, i);
    double jump_term = 0.0;
    if (rate > 0.0) {
      // eta ~ Exp(rate) conditioned on eta < t, by inversion.
      const auto u = base.uniforms(Channel::Auxiliary, r, 0, 0);
      const double eta = std::min(-std::log1p(-u[0] * jump_weight) / rate, t);
      const auto [to, mark] = sample_destination(m.q, x, i, u[1]);
      (void)mark;
      const auto before = run_path(m, x, i, with_horizon(cfg, eta), frozen_noise, r, frozen);
      PathOptions cont;
      cont.t0 = eta;
      const auto after = run_path(m, before.x, to, to_t, continuation_noise, r, cont);
      jump_term = jump_weight * f(after.x, after.regime);
    }
    return std::array<double, 3>{stay_term + jump_term, stay_term, jump_term};
  });
  return {batch.estimate(0), batch.estimate(1), batch.estimate(2)};
}

// ---------------------------------------------------------------------------
// Moment bound

double moment_bound_rhs(const ModelSpec& m, PointView x, int i, double T, double bdg) {
  const double alpha = m.q.linear_bound_alpha;
  const double beta = m.q.linear_bound_beta;
  if (std::isnan(alpha) || std::isnan(beta)) {
    throw MissingMetadata("moment bound needs the rate constants alpha and beta");
  }
  const double kappa = m.q.bandwidth;
  const double c_int = m.integrated_growth(T);
  const double prefactor = 4.0 / 3.0 * norm2(x) + 4.0 * static_cast<double>(i) * i;
  const double exponent = (4.0 + 4.0 / 3.0 * bdg * bdg) * c_int +
                          8.0 * kappa * kappa * (alpha * alpha + beta * beta + 2.0) * (T + 1.0) * T;
  return prefactor * std::exp(exponent);
}

BoundReport moment_bound_check(const ModelSpec& m, PointView x, int i, double T, std::int64_t n,
                               const SimConfig& cfg, double bdg) {
  BoundReport rep;
  rep.checker = "moments";
  rep.model = m.id;
  rep.params = {{"x", point_json(x)}, {"i", i}, {"T", T}, {"bdg", bdg}, {"dt", cfg.dt}};
  rep.rhs = moment_bound_rhs(m, x, i, T, bdg);
  const SimConfig c = with_horizon(cfg, T);
  c.validate();
  const NoiseStream noise(cfg.seed);
  auto batch = run_replicas<1>(n, cfg.threads, [&](std::uint64_t r) {
    const auto s = run_path(m, x, i, c, noise, r);
    return std::array<double, 1>{s.sup_x2 + s.sup_regime2};
  });
  rep.lhs = batch.estimate(0);
  rep.margin = rep.rhs - (rep.lhs.mean + 3.0 * rep.lhs.std_error);
  rep.pass = rep.margin >= 0.0 && !rep.lhs.flagged();
  return rep;
}

// ---------------------------------------------------------------------------
// Holding times

double wilson_lower(std::int64_t successes, std::int64_t n, double z) {
  if (n <= 0) return 0.0;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = p + z2 / (2.0 * nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return std::max(0.0, (center - half) / denom);
}

double holding_bound(int k, int K, double alpha, int kappa, double t) {
  return std::exp(-(std::min(kappa, k - 1) + kappa) * alpha * K * t);
}

std::vector<BoundReport> holding_time_check(const ModelSpec& m, PointView x, int k, int K,
                                            std::span<const double> times, std::int64_t n,
                                            const SimConfig& cfg) {
  if (k < 1 || k > K) throw InvalidArgument("holding_time_check requires 1 <= k <= K");
  const double alpha = m.q.linear_bound_alpha;
  if (std::isnan(alpha)) throw MissingMetadata("holding-time bound needs the rate constant alpha");
  if (times.empty()) throw InvalidArgument("holding_time_check needs a time grid");
  const double t_max = *std::max_element(times.begin(), times.end());
  const NoiseStream noise(cfg.seed);
  const bool exact = cfg.scheme == Scheme::EventDrivenExact;
  if (exact && !m.q.state_independent) {
    throw Unsupported("event_driven_exact requires state-independent switching");
  }
  const SimConfig c = with_horizon(cfg, t_max);
  c.validate();
  PathOptions opts;
  opts.stop_at_first_switch = true;

  auto batch = run_replicas<1>(n, cfg.threads, [&](std::uint64_t r) {
    if (exact) {
      const auto ev = simulate_chain_skeleton(m.q, x, k, 0.0, t_max, noise, r, 1);
      return std::array<double, 1>{ev.empty() ? kNever : ev.front().time};
    }
    return std::array<double, 1>{run_path(m, x, k, c, noise, r, opts).eta};
  });

  std::vector<BoundReport> out;
  for (double t : times) {
    BoundReport rep;
    rep.checker = "holding";
    rep.model = m.id;
    rep.params = {{"x", point_json(x)}, {"k", k}, {"K", K}, {"t", t}, {"alpha", alpha},
                  {"kappa", m.q.bandwidth}};
    rep.rhs = holding_bound(k, K, alpha, m.q.bandwidth, t);
    std::vector<double> stays;
    stays.reserve(batch.values.size());
    std::int64_t successes = 0;
    for (std::size_t r = 0; r < batch.values.size(); ++r) {
      if (!batch.ok[r]) continue;
      const double v = batch.values[r][0] >= t ? 1.0 : 0.0;
      successes += static_cast<std::int64_t>(v);
      stays.push_back(v);
    }
    rep.lhs = McEstimate::from_values(stays, batch.aborted());
    double lower = 0.0;
    if (t <= 0.0) {
      // P(eta >= 0) = 1 holds surely; no estimation involved.
      lower = 1.0;
    } else {
      lower = wilson_lower(successes, static_cast<std::int64_t>(stays.size()));
    }
    rep.margin = lower - rep.rhs;
    rep.pass = rep.margin >= 0.0 && !rep.lhs.flagged();
    rep.extra = {{"wilson_lower", lower}};
    out.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Harnack inequality

double harnack_cost(const ModelSpec& m, int regime, double T, double dist2) {
  if (dist2 <= 0.0) return 0.0;
  if (!m.modulus || !m.ellipticity || !m.u.raw) {
    throw MissingMetadata("Harnack cost needs C_i(t), lambda(t) and u");
  }
  const double C = m.modulus(regime, T);
  const double lambda = m.ellipticity(T);
  const double gamma = m.u.gamma;
  return C * m.u.phi(dist2) / (lambda * -std::expm1(-2.0 * C * T / gamma));
}

BoundReport harnack_check(const ModelSpec& m, const TestFunction& f, PointView x, PointView y, int i,
                          double T, std::int64_t n, const SimConfig& cfg, double f_floor) {
  if (!m.q.state_independent) throw Unsupported("harnack_check requires state-independent switching");
  if (!m.ellipticity) throw MissingMetadata("harnack_check needs the ellipticity lambda(t)");
  if (!(m.ellipticity(T) > 0.0)) throw InvalidModel("harnack_check needs lambda(T) > 0");
  if (!(f_floor > 0.0)) throw InvalidArgument("f floor must be positive");
  if (!(T > 0.0)) throw InvalidArgument("harnack_check needs T > 0");

  double dist2 = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) dist2 += (x[a] - y[a]) * (x[a] - y[a]);

  SimConfig c = with_horizon(cfg, T);
  c.scheme = Scheme::EventDrivenExact;
  c.validate();
  const NoiseStream noise(cfg.seed);
  auto clamp = [&](PointView z, int k) { return std::max(f(z, k), f_floor); };

  // Both paths share the skeleton and the Brownian path (same replica address).
  auto batch = run_replicas<3>(n, cfg.threads, [&](std::uint64_t r) {
    const auto from_x = run_path(m, x, i, c, noise, r);
    const auto from_y = run_path(m, y, i, c, noise, r);
    return std::array<double, 3>{std::log(clamp(from_y.x, from_y.regime)),
                                 clamp(from_x.x, from_x.regime),
                                 harnack_cost(m, from_x.regime, T, dist2)};
  });

  BoundReport rep;
  rep.checker = "harnack";
  rep.model = m.id;
  rep.params = {{"x", point_json(x)}, {"y", point_json(y)}, {"i", i}, {"T", T}, {"f", f.spec},
                {"f_floor", f_floor}, {"dt", cfg.dt}};
  rep.lhs = batch.estimate(0);
  const McEstimate pf = batch.estimate(1);
  const McEstimate cost = batch.estimate(2);
  rep.rhs = std::log(pf.mean) + cost.mean;
  const double rel = pf.std_error / pf.mean;
  rep.rhs_stderr = std::sqrt(rel * rel + cost.std_error * cost.std_error);
  rep.margin = (rep.rhs + 3.0 * rep.rhs_stderr) - (rep.lhs.mean - 3.0 * rep.lhs.std_error);
  rep.pass = rep.margin >= 0.0 && !rep.lhs.flagged();
  const double combined = std::hypot(rep.lhs.std_error, rep.rhs_stderr);
  rep.extra = {{"log_pf", std::log(pf.mean)},
               {"cost", cost.mean},
               {"within_4sigma", rep.lhs.mean - rep.rhs <= 4.0 * combined}};
  return rep;
}

nlohmann::json HarnackCase::to_json() const {
  return {{"dim", dim}, {"x", point_json(x)}, {"y", point_json(y)}, {"i", regime}, {"T", T},
          {"f", f.spec}};
}

HarnackCase random_harnack_case(std::uint64_t seed, std::uint64_t index) {
  const NoiseStream noise = NoiseStream(seed).derive(0x4A52ull).derive(index);
  std::uint64_t step = 0;
  auto uniform = [&] { return noise.uniforms(Channel::Auxiliary, 0, step++, 0)[0]; };
  HarnackCase c;
  c.dim = 1 + static_cast<int>(uniform() * 3.0);
  const auto d = static_cast<std::size_t>(c.dim);
  c.x.resize(d);
  c.y.resize(d);
  Point dir(d);
  double len = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    c.x[a] = (2.0 * uniform() - 1.0) * 1.5 / std::sqrt(static_cast<double>(d));
    dir[a] = uniform() - 0.5;
    len += dir[a] * dir[a];
  }
  len = std::sqrt(std::max(len, 1e-300));
  const double sep = 0.05 + 0.95 * uniform();
  for (std::size_t a = 0; a < d; ++a) c.y[a] = c.x[a] + sep * dir[a] / len;
  c.regime = uniform() < 0.5 ? 1 : 2;
  c.T = 0.25 + 0.75 * uniform();
  if (uniform() < 0.5) {
    c.f = TestFunction::gaussian(0.5 + 1.5 * uniform(), 1e-6);
  } else {
    std::vector<double> w(d);
    for (auto& v : w) v = 4.0 * uniform() - 2.0;
    const double phase = 2.0 * std::numbers::pi * uniform();
    const double shift = uniform();
    c.f = TestFunction::wave(std::move(w), phase, shift, 0.9 * uniform());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Strong-Feller probe

FellerReport feller_modulus(const ModelSpec& m, const TestFunction& f, double t, PointView x, int i,
                            std::span<const double> radii, std::int64_t n, const SimConfig& cfg,
                            bool straddle) {
  if (radii.empty()) throw InvalidArgument("feller_modulus needs at least one radius");
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (!(radii[k] < radii[k - 1])) throw InvalidArgument("radii must be strictly decreasing");
  }
  const SimConfig c = with_horizon(cfg, t);
  c.validate();
  const NoiseStream noise(cfg.seed);
  FellerReport out;
  out.straddle = straddle;
  for (double radius : radii) {
    Point a(x.begin(), x.end()), b(x.begin(), x.end());
    if (straddle) {
      a[0] -= 0.5 * radius;
      b[0] += 0.5 * radius;
    } else {
      b[0] += radius;
    }
    auto batch = run_replicas<1>(n, cfg.threads, [&](std::uint64_t r) {
      const auto pa = run_path(m, a, i, c, noise, r);
      const auto pb = run_path(m, b, i, c, noise, r);
      return std::array<double, 1>{f(pb.x, pb.regime) - f(pa.x, pa.regime)};
    });
    FellerPoint p{radius, batch.estimate(0)};
    p.gap.mean = std::abs(p.gap.mean);
    out.points.push_back(p);
  }
  for (std::size_t k = 1; k < out.points.size(); ++k) {
    const auto& prev = out.points[k - 1].gap;
    const auto& cur = out.points[k].gap;
    if (cur.mean > prev.mean + 3.0 * cur.std_error) out.monotone_trend = false;
  }
  const auto& last = out.points.back().gap;
  out.discontinuity_witness = last.mean - 3.0 * last.std_error > out.witness_threshold;
  return out;
}

std::vector<BoundReport> FellerReport::to_reports(const std::string& model) const {
  std::vector<BoundReport> out;
  for (const auto& p : points) {
    BoundReport rep;
    rep.checker = "feller";
    rep.model = model;
    rep.params = {{"radius", p.radius}, {"straddle", straddle}};
    rep.lhs = p.gap;
    rep.rhs = std::numeric_limits<double>::quiet_NaN();
    rep.margin = std::numeric_limits<double>::quiet_NaN();
    rep.pass = !p.gap.flagged();
    rep.extra = {{"radius", p.radius}, {"gap", p.gap.mean}};
    out.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chain marginals

ChainMarginalReport chain_marginal_check(const ModelSpec& m, PointView x, int i0,
                                         std::span<const double> times, std::int64_t n,
                                         const SimConfig& cfg) {
  if (!m.q.finite()) throw InvalidArgument("chain_marginal_check needs a finite regime space");
  if (!m.q.state_independent) throw Unsupported("chain_marginal_check needs state-independent rates");
  if (times.empty()) throw InvalidArgument("chain_marginal_check needs a time grid");
  if (n < 1) throw InvalidArgument("replica count must be positive");
  const int states = m.q.max_state;
  const Eigen::MatrixXd gen = m.q.generator(x);
  const double t_max = *std::max_element(times.begin(), times.end());
  const NoiseStream noise(cfg.seed);
  const std::size_t nt = times.size();

  std::vector<int> regimes(static_cast<std::size_t>(n) * nt);
  parallel_for(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t r) {
    const auto ev = simulate_chain_skeleton(m.q, x, i0, 0.0, t_max, noise, r);
    for (std::size_t k = 0; k < nt; ++k) {
      int regime = i0;
      for (const auto& e : ev) {
        if (e.time > times[k]) break;
        regime = e.to;
      }
      regimes[r * nt + k] = regime;
    }
  });

  ChainMarginalReport out;
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < nt; ++k) {
    const Eigen::MatrixXd P = transition_matrix(gen, times[k]);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(states) + 1, 0);
    for (std::int64_t r = 0; r < n; ++r) ++counts[static_cast<std::size_t>(regimes[static_cast<std::size_t>(r) * nt + k])];
    for (int j = 1; j <= states; ++j) {
      BoundReport rep;
      rep.checker = "chain-marginal";
      rep.model = m.id;
      rep.params = {{"i0", i0}, {"j", j}, {"t", times[k]}};
      const double p_hat = static_cast<double>(counts[static_cast<std::size_t>(j)]) / nn;
      const double p = P(i0 - 1, j - 1);
      rep.lhs.mean = p_hat;
      rep.lhs.std_error = std::sqrt(p_hat * (1.0 - p_hat) / nn);
      rep.lhs.n = n;
      rep.rhs = p;
      const double oracle_se = std::sqrt(std::max(0.0, p * (1.0 - p)) / nn);
      rep.margin = 3.0 * oracle_se + 1e-12 - std::abs(p_hat - p);
      rep.pass = rep.margin >= 0.0;
      rep.extra = {{"oracle_stderr", oracle_se}};
      out.passed += rep.pass ? 1 : 0;
      out.entries.push_back(std::move(rep));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Truncation

std::vector<BoundReport> truncation_exit_check(const ModelSpec& m, PointView x, int i,
                                               std::span<const int> levels, double t, std::int64_t n,
                                               const SimConfig& cfg, double bdg) {
  const double B = moment_bound_rhs(m, x, i, t, bdg);
  const NoiseStream noise(cfg.seed);
  PathOptions opts;
  opts.stop_at_exit = true;
  std::vector<BoundReport> out;
  for (int K : levels) {
    SimConfig c = with_horizon(cfg, t);
    c.K = K;
    c.validate();
    auto batch = run_replicas<1>(n, cfg.threads, [&](std::uint64_t r) {
      const auto s = run_path(m, x, i, c, noise, r, opts);
      return std::array<double, 1>{s.tau_K && *s.tau_K <= t ? 1.0 : 0.0};
    });
    BoundReport rep;
    rep.checker = "truncation-check";
    rep.model = m.id;
    rep.params = {{"x", point_json(x)}, {"i", i}, {"K", K}, {"t", t}, {"bdg", bdg}};
    rep.lhs = batch.estimate(0);
    rep.rhs = B / K;
    rep.margin = rep.rhs - (rep.lhs.mean + 3.0 * rep.lhs.std_error);
    rep.pass = rep.margin >= 0.0 && !rep.lhs.flagged();
    bool nonincreasing = true;
    if (!out.empty()) {
      const auto& prev = out.back().lhs;
      nonincreasing = rep.lhs.mean <= prev.mean + 3.0 * std::hypot(prev.std_error, rep.lhs.std_error);
    }
    rep.extra = {{"nonincreasing", nonincreasing}};
    out.push_back(std::move(rep));
  }
  return out;
}

bool agree_until_exit(const Trajectory& full, const Trajectory& truncated) {
  const double tau = full.tau_K ? *full.tau_K : kNever;
  const auto d = static_cast<std::size_t>(full.dim);
  if (full.dim != truncated.dim) return false;
  std::size_t r = 0;
  for (; r < full.size() && full.times[r] < tau; ++r) {
    if (r >= truncated.size()) return false;
    if (full.times[r] != truncated.times[r] || full.regimes[r] != truncated.regimes[r] ||
        full.flags[r] != truncated.flags[r]) {
      return false;
    }
    for (std::size_t k = 0; k < d; ++k) {
      if (full.xs[r * d + k] != truncated.xs[r * d + k]) return false;
    }
  }
  if (tau == kNever) return r == truncated.size();
  if (r >= full.size() || r >= truncated.size() || truncated.times[r] != tau) return false;
  for (std::size_t k = 0; k < d; ++k) {
    if (full.xs[r * d + k] != truncated.xs[r * d + k]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Jump-function Lipschitz sweep

RandomBandedRates RandomBandedRates::draw(std::uint64_t seed, std::uint64_t index, int rows) {
  const NoiseStream noise = NoiseStream(seed).derive(index);
  std::uint64_t step = 0;
  auto uniform = [&] { return noise.uniforms(Channel::Auxiliary, 0, step++, 0)[0]; };
  auto normal = [&] { return noise.normals(Channel::Auxiliary, 1, step++, 0)[0]; };

  RandomBandedRates q;
  q.rows = rows;
  q.dim = 1 + static_cast<int>(uniform() * 3.0);
  q.bandwidth = 1 + static_cast<int>(uniform() * 3.0);
  const std::size_t entries = static_cast<std::size_t>(rows) * 2u * static_cast<std::size_t>(q.bandwidth);
  for (std::size_t e = 0; e < entries; ++e) {
    q.base.push_back(2.0 * uniform());
    q.amplitude.push_back(2.0 * uniform());
    q.phase.push_back(2.0 * std::numbers::pi * uniform());
    double len2 = 0.0;
    std::vector<double> w(static_cast<std::size_t>(q.dim));
    for (double& v : w) {
      v = normal();
      len2 += v * v;
    }
    const double scale = (0.2 + 2.8 * uniform()) / std::sqrt(std::max(len2, 1e-300));
    double norm = 0.0;
    for (double& v : w) {
      v *= scale;
      norm += v * v;
    }
    q.lipschitz = std::max(q.lipschitz, q.amplitude.back() * std::sqrt(norm));
    q.direction.insert(q.direction.end(), w.begin(), w.end());
  }
  return q;
}

QMatrixSpec RandomBandedRates::spec() const {
  QMatrixSpec q;
  q.bandwidth = bandwidth;
  q.max_state = 0;
  q.lipschitz_cq = lipschitz;
  q.rate = [self = *this](PointView x, int i, int j) {
    const int off = j - i;
    if (off == 0 || std::abs(off) > self.bandwidth || j < 1) return 0.0;
    const int row = std::min(i, self.rows);
    const auto slot = static_cast<std::size_t>((row - 1) * 2 * self.bandwidth +
                                               (off < 0 ? off + self.bandwidth : off + self.bandwidth - 1));
    double arg = self.phase[slot];
    for (int a = 0; a < self.dim; ++a) {
      arg += self.direction[slot * static_cast<std::size_t>(self.dim) + static_cast<std::size_t>(a)] *
             x[static_cast<std::size_t>(a)];
    }
    return self.base[slot] + self.amplitude[slot] * std::abs(std::sin(arg));
  };
  return q;
}

BoundReport lipschitz_sweep_case(std::uint64_t seed, std::uint64_t index, int max_regime) {
  const RandomBandedRates rates = RandomBandedRates::draw(seed, index);
  const QMatrixSpec q = rates.spec();
  const NoiseStream noise = NoiseStream(seed).derive(index).derive(7);
  std::uint64_t step = 0;
  auto uniform = [&] { return noise.uniforms(Channel::Auxiliary, 2, step++, 0)[0]; };

  const auto d = static_cast<std::size_t>(rates.dim);
  Point x(d), y(d);
  for (auto& v : x) v = -3.0 + 6.0 * uniform();
  const bool local = index % 2 == 1;
  if (local) {
    const double sep = std::pow(10.0, -6.0 + 6.0 * uniform());
    Point dir(d);
    double len = 0.0;
    for (auto& v : dir) {
      v = uniform() - 0.5;
      len += v * v;
    }
    len = std::sqrt(std::max(len, 1e-300));
    for (std::size_t a = 0; a < d; ++a) y[a] = x[a] + sep * dir[a] / len;
  } else {
    for (auto& v : y) v = -3.0 + 6.0 * uniform();
  }
  double dist = 0.0;
  for (std::size_t a = 0; a < d; ++a) dist += (x[a] - y[a]) * (x[a] - y[a]);
  dist = std::sqrt(dist);

  BoundReport rep;
  rep.checker = "lemma21";
  rep.model = "random_banded";
  rep.params = {{"case", index}, {"dim", rates.dim}, {"kappa", rates.bandwidth},
                {"c_q", rates.lipschitz}, {"dist", dist}, {"local", local}};
  double worst_ratio = -1.0;
  int failures = 0;
  for (int i = 1; i <= max_regime; ++i) {
    for (double p : {1.0, 2.0}) {
      const double lhs = h_lp_distance(q, x, y, i, p);
      const double rhs = h_lp_bound(q, i, p, dist);
      if (lhs > rhs) ++failures;
      const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? kNever : 0.0);
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        rep.lhs.mean = lhs;
        rep.rhs = rhs;
        rep.extra = {{"i", i}, {"p", p}};
      }
    }
  }
  rep.lhs.n = 1;
  rep.margin = rep.rhs - rep.lhs.mean;
  rep.pass = failures == 0;
  rep.extra["worst_ratio"] = worst_ratio;
  rep.extra["failures"] = failures;
  return rep;
}

std::vector<BoundReport> lipschitz_sweep(std::uint64_t seed, std::int64_t cases, int max_regime,
                                         int threads) {
  std::vector<BoundReport> out(static_cast<std::size_t>(std::max<std::int64_t>(cases, 0)));
  parallel_for(out.size(), threads, [&](std::size_t k) {
    out[k] = lipschitz_sweep_case(seed, static_cast<std::uint64_t>(k), max_regime);
  });
  return out;
}

}  // namespace rswitch
