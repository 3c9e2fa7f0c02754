#include "rswitch/engine.hpp"
#include "rswitch/errors.hpp"
#include "rswitch/estimators.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace rswitch;

namespace {

ModelSpec constant_model(int dim) {
  return affine_table_model(
      {{"dim", dim}, {"regimes", {{{"diffusion", std::vector<std::vector<double>>(dim, std::vector<double>(dim, 0.0))}}}}});
}

// Pure two-state chain: b = 0, sigma = 0, q12 = q21 = 1.
ModelSpec pure_chain() {
  return affine_table_model({{"dim", 1},
                             {"regimes", {{{"diffusion", {{0}}}}, {{"diffusion", {{0}}}}}},
                             {"rates", {{0, 1}, {1, 0}}}});
}

ModelSpec scalar_model(std::function<double(double)> b, std::function<double(double)> s) {
  ModelSpec m = constant_model(1);
  m.drift = [b](double, PointView x, int, std::span<double> out) { out[0] = b(x[0]); };
  m.diffusion = [s](double, PointView x, int, std::span<double> out) { out[0] = s(x[0]); };
  return m;
}

void check_path_invariants(const Trajectory& tr, int kappa) {
  for (std::size_t r = 1; r < tr.size(); ++r) CHECK(tr.times[r] > tr.times[r - 1]);
  for (int k : tr.regimes) CHECK(k >= 1);
  for (const auto& j : tr.jumps) {
    CHECK(std::abs(j.to - j.from) <= kappa);
    CHECK(j.to != j.from);
  }
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("Euler step") {
    const auto m = scalar_model([](double x) { return -x; }, [](double) { return 0.0; });
    CHECK(step_euler(m, 0.0, Point{1.0}, 1, 0.1, Point{0.3})[0] == doctest::Approx(0.9));
    const auto bm = scalar_model([](double) { return 0.0; }, [](double) { return 1.0; });
    CHECK(step_euler(bm, 0.0, Point{1.0}, 1, 0.1, Point{0.3})[0] == doctest::Approx(1.3));
    const auto bad = scalar_model([](double) { return std::nan(""); }, [](double) { return 0.0; });
    CHECK_THROWS_AS(step_euler(bad, 0.0, Point{1.0}, 1, 0.1, Point{0.0}), NumericalBlowup);
  }

  TEST_CASE("Euler strong error shrinks like dt in mean square") {
    // Geometric noise: Euler's strong order is 1/2, so the mean-square error
    // against a fine reference is proportional to dt.
    const auto m = scalar_model([](double x) { return -x; }, [](double x) { return 0.5 * x; });
    const NoiseStream noise(11);
    const int fine_steps = 1 << 10;
    const double T = 1.0, h = T / fine_steps;
    const int paths = 2000;
    std::vector<double> levels;
    std::vector<double> mse;
    for (int level = 4; level <= 8; ++level) levels.push_back(level);
    mse.assign(levels.size(), 0.0);
    std::vector<double> dw(fine_steps);
    std::vector<double> pair(2);
    for (int p = 0; p < paths; ++p) {
      for (int k = 0; k < fine_steps; k += 2) {
        noise.gaussians(Channel::Brownian, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k), h, pair);
        dw[k] = pair[0];
        dw[k + 1] = pair[1];
      }
      Point ref{1.0};
      for (int k = 0; k < fine_steps; ++k) ref = step_euler(m, k * h, ref, 1, h, Point{dw[k]});
      for (std::size_t l = 0; l < levels.size(); ++l) {
        const int steps = 1 << static_cast<int>(levels[l]);
        const int block = fine_steps / steps;
        Point x{1.0};
        for (int k = 0; k < steps; ++k) {
          double w = 0.0;
          for (int j = 0; j < block; ++j) w += dw[k * block + j];
          x = step_euler(m, k * T / steps, x, 1, T / steps, Point{w});
        }
        mse[l] += (x[0] - ref[0]) * (x[0] - ref[0]) / paths;
      }
    }
    // Least-squares slope of log2(mse) against log2(dt) = -level.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(levels.size());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const double x = -levels[l], y = std::log2(mse[l]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == doctest::Approx(1.0).epsilon(0.3));
  }

  TEST_CASE("a model with no drift, noise or switching stays put") {
    const auto m = constant_model(2);
    SimConfig cfg;
    cfg.T = 0.05;
    const auto tr = simulate_path(m, Point{1.5, -2.0}, 1, cfg, NoiseStream(1));
    CHECK(tr.eta == kNever);
    CHECK(tr.jumps.empty());
    for (std::size_t r = 0; r < tr.size(); ++r) {
      CHECK(tr.x(r)[0] == 1.5);
      CHECK(tr.x(r)[1] == -2.0);
      CHECK(tr.regimes[r] == 1);
    }
    std::ostringstream csv;
    tr.write_csv(csv);
    std::istringstream lines(csv.str());
    std::string header, row;
    std::getline(lines, header);
    CHECK(header == "time,regime,x1,x2,event");
    std::getline(lines, row);
    CHECK(row == "0,1,1.5,-2,0");
  }

  TEST_CASE("degenerate regime is frozen until the first switch") {
    const auto m = zoo("degenerate_regime");
    SimConfig cfg;
    cfg.T = 3.0;
    for (std::uint64_t r = 0; r < 20; ++r) {
      const auto tr = simulate_path(m, Point{0.4}, 1, cfg, NoiseStream(5), r);
      for (std::size_t k = 0; k < tr.size() && tr.times[k] < tr.eta; ++k) CHECK(tr.x(k)[0] == 0.4);
      check_path_invariants(tr, 1);
    }
  }

  TEST_CASE("frozen-rate chain marginal matches the oracle") {
    const auto m = pure_chain();
    SimConfig cfg;
    cfg.T = 1.0;
    const auto est = semigroup_estimate(m, TestFunction::regime(), 1.0, Point{0.0}, 1, 20000, cfg);
    const double oracle = 2.0 - (1 + std::exp(-2.0)) / 2;
    CHECK(std::abs(est.mean - oracle) <= 3 * est.std_error + 1e-3);
  }

  TEST_CASE("event-driven holding times are exponential") {
    const auto m = zoo("switching_ou", {{"beta", {1, 1, 1}}, {"rates", {{0, 1, 2}, {1, 0, 1}, {1, 1, 0}}}});
    const NoiseStream noise(3);
    const int n = 20000;
    double sum = 0.0, sum2 = 0.0;
    int to_third = 0;
    for (int r = 0; r < n; ++r) {
      const auto jumps = simulate_chain_skeleton(m.q, Point{0.0}, 1, 0.0, 100.0, noise, static_cast<std::uint64_t>(r), 1);
      REQUIRE(jumps.size() == 1);
      sum += jumps[0].time;
      sum2 += jumps[0].time * jumps[0].time;
      to_third += jumps[0].to == 3 ? 1 : 0;
    }
    const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 1.0 / 3.0) <= 3 * se);
    const double p = static_cast<double>(to_third) / n;
    CHECK(std::abs(p - 2.0 / 3.0) <= 3 * std::sqrt(p * (1 - p) / n));
  }

  TEST_CASE("regime-independent drift ignores the skeleton") {
    const auto m = affine_table_model({{"dim", 1},
                                       {"regimes",
                                        {{{"drift_matrix", {{-1}}}, {"diffusion", {{0}}}},
                                         {{"drift_matrix", {{-1}}}, {"diffusion", {{0}}}}}},
                                       {"rates", {{0, 10}, {10, 0}}}});
    SimConfig cfg;
    cfg.T = 1.0;
    cfg.dt = 1e-3;
    cfg.scheme = Scheme::EventDrivenExact;
    for (std::uint64_t r = 0; r < 10; ++r) {
      const auto tr = simulate_state_independent(m, Point{2.0}, 1, cfg, NoiseStream(8), r);
      CHECK_FALSE(tr.jumps.empty());
      CHECK(tr.x(tr.size() - 1)[0] == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-3));
      check_path_invariants(tr, 1);
    }
  }

  TEST_CASE("event-driven scheme rejects state-dependent rates") {
    const auto m = zoo("switching_ou", {{"rate_modulation", 0.5}});
    SimConfig cfg;
    cfg.scheme = Scheme::EventDrivenExact;
    CHECK_THROWS_AS(simulate_state_independent(m, Point{0.0}, 1, cfg, NoiseStream(1)), Unsupported);
  }

  TEST_CASE("truncated and full paths agree up to the exit time") {
    const auto m = zoo("birth_death_switch");
    SimConfig cfg;
    cfg.T = 1.0;
    int exits = 0;
    for (std::uint64_t r = 0; r < 40; ++r) {
      SimConfig with_k = cfg;
      with_k.K = 4;
      const auto full = simulate_path(m, Point{0.5}, 1, with_k, NoiseStream(9), r);
      const auto cut = simulate_truncated(m, Point{0.5}, 1, 4, with_k, NoiseStream(9), r);
      CHECK(agree_until_exit(full, cut));
      exits += full.tau_K ? 1 : 0;
    }
    CHECK(exits > 0);
    CHECK_THROWS_AS(simulate_truncated(m, Point{3.5}, 1, 4, cfg, NoiseStream(9)), InvalidArgument);
  }

  TEST_CASE("a distant truncation level changes nothing") {
    const auto m = zoo("birth_death_switch");
    SimConfig cfg;
    cfg.T = 0.5;
    const auto full = simulate_path(m, Point{0.5}, 1, cfg, NoiseStream(2), 3);
    const auto cut = simulate_truncated(m, Point{0.5}, 1, 1000, cfg, NoiseStream(2), 3);
    CHECK(full.times == cut.times);
    CHECK(full.xs == cut.xs);
    CHECK(full.regimes == cut.regimes);
  }

  TEST_CASE("coupled paths from identical data are identical") {
    const auto m = zoo("switching_ou", {{"rate_modulation", 0.8}});
    SimConfig cfg;
    for (std::uint64_t r = 0; r < 5; ++r) {
      const auto c = coupled_simulate(m, Point{0.3}, 1, Point{0.3}, 1, cfg, NoiseStream(4), r);
      CHECK(c.first == c.second);
      CHECK(c.zeta == kNever);
    }
  }

  TEST_CASE("state-independent coupling never separates the regimes") {
    const auto m = zoo("switching_ou", {{"beta", {1, 2, 3}}});
    SimConfig cfg;
    cfg.T = 2.0;
    for (std::uint64_t r = 0; r < 20; ++r) {
      const auto c = coupled_simulate(m, Point{-1.0}, 2, Point{1.5}, 2, cfg, NoiseStream(6), r);
      CHECK(c.zeta == kNever);
      CHECK(c.first.regimes == c.second.regimes);
    }
  }

  TEST_CASE("state-dependent coupling separates with positive frequency") {
    const auto m = zoo("switching_ou", {{"rate_modulation", 2.0}, {"switch_rate", 2.0}});
    SimConfig cfg;
    cfg.T = 2.0;
    int separated = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
      const auto c = coupled_simulate(m, Point{0.0}, 1, Point{3.0}, 1, cfg, NoiseStream(6), r);
      if (c.zeta < kNever) {
        ++separated;
        CHECK(c.zeta == separation_time(c.first, c.second));
      }
    }
    CHECK(separated > 0);
  }

  TEST_CASE("trajectory binary round trip") {
    const auto m = zoo("switching_ou", {{"dim", 2}});
    SimConfig cfg;
    cfg.K = 2;
    auto tr = simulate_path(m, Point{0.1, 0.2}, 1, cfg, NoiseStream(12), 1);
    tr.config_hash = 0x1234abcdULL;
    std::stringstream buf;
    tr.write_binary(buf);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 8) == "RSWTRAJ1");
    const auto back = Trajectory::read_binary(buf);
    CHECK(back == tr);
    std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS(Trajectory::read_binary(truncated));
  }

  TEST_CASE("paths are reproducible") {
    const auto m = zoo("birth_death_switch");
    SimConfig cfg;
    const auto a = simulate_path(m, Point{0.2}, 2, cfg, NoiseStream(77), 5);
    const auto b = simulate_path(m, Point{0.2}, 2, cfg, NoiseStream(77), 5);
    const auto c = simulate_path(m, Point{0.2}, 2, cfg, NoiseStream(77), 6);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    check_path_invariants(a, 1);
  }

  TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.dt = 0.0;
    CHECK_THROWS(cfg.validate());
    CHECK_THROWS_AS(parse_scheme("leapfrog"), ConfigError);
    CHECK(parse_scheme("event_driven_exact") == Scheme::EventDrivenExact);
  }
}
