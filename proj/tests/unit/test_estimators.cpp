#include "rswitch/errors.hpp"
#include "rswitch/estimators.hpp"

#include <doctest.h>

#include <cmath>

using namespace rswitch;

namespace {

ModelSpec pure_chain() {
  return affine_table_model({{"dim", 1},
                             {"regimes", {{{"diffusion", {{0}}}}, {{"diffusion", {{0}}}}}},
                             {"rates", {{0, 1}, {1, 0}}}});
}

ModelSpec single_ou() {
  return affine_table_model({{"dim", 1}, {"regimes", {{{"drift_matrix", {{-1}}}, {"diffusion", {{1}}}}}}});
}

SimConfig event_driven() {
  SimConfig cfg;
  cfg.scheme = Scheme::EventDrivenExact;
  return cfg;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("McEstimate statistics") {
    const auto e = McEstimate::from_values(std::vector<double>{1, 2, 3, 4}, 0);
    CHECK(e.mean == 2.5);
    CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    McEstimate f;
    f.n = 1000;
    f.n_aborted = 1;
    CHECK_FALSE(f.flagged());
    f.n_aborted = 2;
    CHECK(f.flagged());
  }

  TEST_CASE("constant test function has zero error") {
    const auto e = semigroup_estimate(zoo("switching_ou"), TestFunction::constant(1.0), 1.0, Point{0.0}, 1,
                                      500, SimConfig{});
    CHECK(e.mean == 1.0);
    CHECK(e.std_error == 0.0);
  }

  TEST_CASE("regime expectation of a pure chain") {
    const auto e = semigroup_estimate(pure_chain(), TestFunction::regime(), 1.0, Point{0.0}, 1, 40000,
                                      event_driven());
    CHECK(std::abs(e.mean - 1.4323323) <= 3 * e.std_error);
  }

  TEST_CASE("OU mean") {
    SimConfig cfg;
    const auto e = semigroup_estimate(single_ou(), TestFunction::coordinate(0), 1.0, Point{1.0}, 1, 20000, cfg);
    CHECK(std::abs(e.mean - std::exp(-1.0)) <= 3 * e.std_error + 1e-3);
  }

  TEST_CASE("estimates do not depend on the thread count") {
    const auto m = zoo("switching_ou", {{"dim", 2}});
    const auto f = TestFunction::gaussian(1.0, 1e-6);
    SimConfig a, b;
    a.threads = 1;
    b.threads = 3;
    const auto ea = semigroup_estimate(m, f, 0.5, Point{0.3, 0.1}, 1, 3000, a);
    const auto eb = semigroup_estimate(m, f, 0.5, Point{0.3, 0.1}, 1, 3000, b);
    CHECK(ea.mean == eb.mean);
    CHECK(ea.std_error == eb.std_error);
  }

  TEST_CASE("first-jump estimator without switching is the frozen estimate") {
    const auto m = single_ou();
    const auto f = TestFunction::coordinate(0);
    const auto fj = first_jump_estimate(m, f, 1.0, Point{1.0}, 1, 5000, SimConfig{});
    CHECK(fj.jump.mean == 0.0);
    CHECK(fj.total.mean == fj.stay.mean);
    CHECK(std::abs(fj.total.mean - std::exp(-1.0)) <= 3 * fj.total.std_error + 2e-3);
  }

  TEST_CASE("first-jump estimator on the degenerate regime") {
    const auto m = zoo("degenerate_regime");
    const auto f = TestFunction::indicator(0, 0.0);
    const auto fj = first_jump_estimate(m, f, 1.0, Point{0.5}, 1, 4000, SimConfig{});
    // The frozen regime keeps x = 0.5 > 0, so the no-switch term is exactly e^{-t}.
    CHECK(fj.stay.mean == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(fj.stay.std_error < 1e-15);
    const auto direct = semigroup_estimate(m, f, 1.0, Point{0.5}, 1, 4000, SimConfig{});
    const double se = std::hypot(fj.total.std_error, direct.std_error);
    CHECK(std::abs(fj.total.mean - direct.mean) <= 3 * se);
  }

  TEST_CASE("first-jump estimator agrees with direct simulation on switching OU") {
    const auto m = zoo("switching_ou", {{"beta", {0.5, 2.0}}, {"offset", {1.0, -1.0}}});
    const auto f = TestFunction::wave({1.0}, 0.3, 0.7, 0.8);
    const auto fj = first_jump_estimate(m, f, 1.0, Point{0.2}, 2, 5000, SimConfig{});
    const auto direct = semigroup_estimate(m, f, 1.0, Point{0.2}, 2, 5000, SimConfig{});
    CHECK(std::abs(fj.total.mean - direct.mean) <= 3 * std::hypot(fj.total.std_error, direct.std_error));
    CHECK_THROWS_AS(first_jump_estimate(zoo("switching_ou", {{"rate_modulation", 1.0}}), f, 1.0, Point{0.0}, 1,
                                        10, SimConfig{}),
                    Unsupported);
  }

  TEST_CASE("moment bound on a constant path") {
    const auto m = affine_table_model({{"dim", 1}, {"regimes", {{{"diffusion", {{0}}}}}}});
    const auto rep = moment_bound_check(m, Point{1.0}, 1, 1.0, 100, SimConfig{});
    CHECK(rep.lhs.mean == 2.0);
    CHECK(rep.lhs.std_error == 0.0);
    CHECK(rep.rhs == doctest::Approx((4.0 / 3.0 + 4.0) * std::exp(8.0 * 2.0 * 2.0)).epsilon(1e-9));
    CHECK(rep.pass);
    CHECK(rep.margin == doctest::Approx(rep.rhs - 2.0));
  }

  TEST_CASE("moment bound on zoo models") {
    for (const char* name : {"switching_ou", "birth_death_switch"}) {
      const auto rep = moment_bound_check(zoo(name), Point{0.5}, 1, 0.5, 1000, SimConfig{});
      INFO(name);
      CHECK(rep.pass);
      CHECK(rep.margin >= 0.0);
    }
    auto m = zoo("switching_ou");
    m.growth = nullptr;
    m.growth_integral = nullptr;
    CHECK_THROWS_AS(moment_bound_check(m, Point{0.5}, 1, 0.5, 10, SimConfig{}), MissingMetadata);
    m = zoo("switching_ou");
    m.q.linear_bound_alpha = std::nan("");
    CHECK_THROWS_AS(moment_bound_check(m, Point{0.5}, 1, 0.5, 10, SimConfig{}), MissingMetadata);
  }

  TEST_CASE("Wilson lower bound") {
    CHECK(wilson_lower(0, 100) == 0.0);
    CHECK(wilson_lower(100, 100) < 1.0);
    CHECK(wilson_lower(100, 100) > 0.9);
    CHECK(wilson_lower(50, 100) < 0.5);
  }

  TEST_CASE("holding-time bound") {
    CHECK(holding_bound(1, 3, 2.0, 1, 0.0) == 1.0);
    CHECK(holding_bound(2, 5, 2.0, 1, 0.1) == doctest::Approx(std::exp(-2.0 * 2.0 * 5 * 0.1)));
    const std::vector<double> times{0.0, 0.1, 0.5, 1.0};
    const auto reps = holding_time_check(zoo("birth_death_switch"), Point{0.0}, 2, 5, times, 20000, event_driven());
    REQUIRE(reps.size() == times.size());
    CHECK(reps[0].lhs.mean == 1.0);
    CHECK(reps[0].rhs == 1.0);
    for (const auto& r : reps) CHECK(r.pass);
    // q_k = alpha k exactly: P(eta >= t) = exp(-alpha k t).
    const auto m = zoo("switching_ou", {{"beta", {1, 1, 1}}, {"rates", {{0, 1, 0}, {1, 0, 1}, {0, 3, 0}}}});
    for (const auto& r : holding_time_check(m, Point{0.0}, 2, 3, times, 20000, event_driven())) CHECK(r.pass);
    CHECK_THROWS(holding_time_check(m, Point{0.0}, 4, 3, times, 10, event_driven()));
  }

  TEST_CASE("Harnack inequality") {
    const auto m = zoo("switching_ou");
    SimConfig cfg;
    cfg.dt = 2e-3;
    const auto constant = harnack_check(m, TestFunction::constant(2.0), Point{0.0}, Point{0.5}, 1, 1.0, 500, cfg);
    CHECK(constant.lhs.mean == doctest::Approx(std::log(2.0)));
    CHECK(constant.pass);
    const auto f = TestFunction::gaussian(1.0, 1e-6);
    const auto same = harnack_check(m, f, Point{0.3}, Point{0.3}, 1, 1.0, 2000, cfg);
    CHECK(same.pass);
    CHECK(same.extra.at("cost").get<double>() == 0.0);
    const auto shifted = harnack_check(m, f, Point{0.0}, Point{0.5}, 1, 1.0, 4000, cfg);
    CHECK(shifted.pass);
    CHECK(shifted.margin > 0.0);
    CHECK(harnack_cost(m, 1, 1.0, 0.25) > 0.0);
    CHECK(harnack_cost(m, 1, 1.0, 0.0) == 0.0);
  }

  TEST_CASE("Harnack sweep cases are deterministic and in range") {
    for (std::uint64_t k = 0; k < 50; ++k) {
      const auto a = random_harnack_case(1, k);
      const auto b = random_harnack_case(1, k);
      CHECK(a.to_json() == b.to_json());
      CHECK(a.dim >= 1);
      CHECK(a.dim <= 3);
      double d2 = 0.0;
      for (int j = 0; j < a.dim; ++j) d2 += (a.x[j] - a.y[j]) * (a.x[j] - a.y[j]);
      CHECK(std::sqrt(d2) >= 0.05 - 1e-12);
      CHECK(std::sqrt(d2) <= 1.0 + 1e-12);
      CHECK(a.T >= 0.25);
      CHECK(a.T <= 1.0);
      for (double v : {a.f(a.x, 1), a.f(a.y, 2)}) CHECK(v > 0.0);
    }
  }

  TEST_CASE("Feller probe separates the two mechanisms") {
    SimConfig cfg;
    cfg.dt = 2e-3;
    const std::vector<double> radii{0.3, 0.1, 0.03, 0.01};
    const auto smooth = feller_modulus(zoo("switching_ou"), TestFunction::indicator(0, 0.0), 1.0, Point{0.0}, 1,
                                       radii, 4000, cfg);
    CHECK(smooth.monotone_trend);
    CHECK_FALSE(smooth.discontinuity_witness);
    CHECK(smooth.points.back().gap.mean < 0.05);

    const auto rough = feller_modulus(zoo("degenerate_regime"), TestFunction::indicator(0, 0.0), 1.0, Point{0.0},
                                      1, radii, 4000, event_driven(), true);
    CHECK(rough.discontinuity_witness);
    const auto& last = rough.points.back().gap;
    CHECK(std::abs(last.mean - std::exp(-1.0)) <= 3 * last.std_error + 0.01);
    CHECK_THROWS(feller_modulus(zoo("switching_ou"), TestFunction::constant(1), 1.0, Point{0.0}, 1,
                                std::vector<double>{0.1, 0.2}, 10, cfg));
  }

  TEST_CASE("chain marginal report") {
    const auto m = zoo("switching_ou", {{"beta", {1, 2, 3}}, {"rates", {{0, 1, 0.5}, {2, 0, 1}, {0.5, 1.5, 0}}}});
    const std::vector<double> times{0.5, 1.0};
    const auto rep = chain_marginal_check(m, Point{0.0}, 2, times, 20000, event_driven());
    CHECK(rep.entries.size() == 6);
    CHECK(rep.pass_fraction() >= 0.8);
  }

  TEST_CASE("truncation exit probabilities") {
    const std::vector<int> levels{4, 6, 10};
    const auto reps = truncation_exit_check(zoo("birth_death_switch"), Point{0.5}, 1, levels, 1.0, 2000, SimConfig{});
    REQUIRE(reps.size() == 3);
    for (const auto& r : reps) CHECK(r.pass);
    CHECK(reps[0].lhs.mean >= reps[1].lhs.mean);
    CHECK(reps[1].lhs.mean >= reps[2].lhs.mean);
  }

  TEST_CASE("test function specs") {
    const auto f = TestFunction::from_json({{"kind", "wave"}, {"w", {1.0, 2.0}}, {"phase", 0.1},
                                            {"regime_shift", 0.5}, {"amplitude", 0.5}});
    CHECK(f(Point{0.0, 0.0}, 1) == doctest::Approx(1 + 0.5 * std::sin(0.6)));
    CHECK(f.bound == doctest::Approx(1.5));
    CHECK(TestFunction::from_json(f.spec).spec == f.spec);
    CHECK_THROWS_AS(TestFunction::from_json({{"kind", "cubic"}}), ConfigError);
    CHECK_THROWS_AS(TestFunction::from_json({{"kind", "const"}, {"value", 1}, {"extra", 2}}), ConfigError);
  }

  TEST_CASE("report records carry the documented fields") {
    const auto rep = moment_bound_check(zoo("switching_ou"), Point{0.5}, 1, 0.25, 50, SimConfig{});
    const auto j = rep.to_json();
    for (const char* key : {"checker", "model", "params", "lhs", "lhs_stderr", "rhs", "margin", "pass", "replicas",
                            "aborted", "flagged"}) {
      CHECK(j.contains(key));
    }
    CHECK(j.at("pass").get<bool>() == (j.at("margin").get<double>() >= 0.0));
  }
}
