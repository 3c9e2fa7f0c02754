#include "rswitch/errors.hpp"
#include "rswitch/estimators.hpp"
#include "rswitch/regime_graph.hpp"

#include <doctest.h>

#include <cmath>

using namespace rswitch;

namespace {

QMatrixSpec three_state() {
  QMatrixSpec q;
  q.bandwidth = 2;
  q.max_state = 3;
  q.state_independent = true;
  q.rate = [](PointView, int i, int j) {
    static const double r[3][3] = {{0, 1, 2}, {2, 0, 1}, {1, 1, 0}};
    if (i < 1 || i > 3 || j < 1 || j > 3) return 0.0;
    return r[i - 1][j - 1];
  };
  return q;
}

// q12(x) = x (scalar), q21 = 1.
QMatrixSpec linear_two_state() {
  QMatrixSpec q;
  q.bandwidth = 1;
  q.max_state = 2;
  q.lipschitz_cq = 1.0;
  q.rate = [](PointView x, int i, int j) {
    if (i == 1 && j == 2) return x[0];
    if (i == 2 && j == 1) return 1.0;
    return 0.0;
  };
  return q;
}

QMatrixSpec birth_death() {
  QMatrixSpec q;
  q.bandwidth = 1;
  q.rate = [](PointView, int i, int j) {
    if (j == i + 1) return static_cast<double>(i);
    if (j == i - 1) return static_cast<double>(i - 1);
    return 0.0;
  };
  return q;
}

void check_interval(const Interval& e, int from, int to, double left, double right) {
  CHECK(e.from == from);
  CHECK(e.to == to);
  CHECK(e.left == doctest::Approx(left));
  CHECK(e.right == doctest::Approx(right));
}

}  // namespace

TEST_SUITE("regime_graph") {
  TEST_CASE("partition layout for a three-state chain") {
    const auto part = build_partition(three_state(), Point{0.0}, 3);
    const auto e = part.entries();
    REQUIRE(e.size() == 6);
    check_interval(e[0], 1, 2, 0, 1);
    check_interval(e[1], 1, 3, 1, 3);
    check_interval(e[2], 2, 1, 3, 5);
    check_interval(e[3], 2, 3, 5, 6);
    check_interval(e[4], 3, 1, 6, 7);
    check_interval(e[5], 3, 2, 7, 8);
    CHECK(part.total_length() == 8.0);
    CHECK(part.row_start(2) == 3.0);
  }

  TEST_CASE("jump function lookups") {
    const auto part = build_partition(three_state(), Point{0.0}, 3);
    CHECK(h_eval(part, 1, 0.5) == 1);
    CHECK(h_eval(part, 3, 6.2) == -2);
    CHECK(h_eval(part, 1, 100.0) == 0);
    // z inside row 2's block does not move a process sitting in row 1.
    CHECK(h_eval(part, 1, 3.5) == 0);
    // Half-open convention: the left endpoint belongs to the interval.
    CHECK(h_eval(part, 1, 1.0) == 2);
    CHECK(h_eval(part, 1, 3.0) == 0);
  }

  TEST_CASE("all-zero rates give an empty partition") {
    QMatrixSpec q;
    q.max_state = 3;
    q.rate = [](PointView, int, int) { return 0.0; };
    const auto part = build_partition(q, Point{1.0}, 3);
    CHECK(part.empty());
    CHECK(part.total_length() == 0.0);
    CHECK(h_eval(part, 2, 0.0) == 0);
  }

  TEST_CASE("state-dependent layout") {
    const auto part = build_partition(linear_two_state(), Point{0.7}, 2);
    REQUIRE(part.entries().size() == 2);
    check_interval(part.entries()[0], 1, 2, 0.0, 0.7);
    check_interval(part.entries()[1], 2, 1, 0.7, 1.7);
  }

  TEST_CASE("negative rate raises InvalidModel") {
    QMatrixSpec q;
    q.max_state = 2;
    q.rate = [](PointView, int, int) { return -1.0; };
    CHECK_THROWS_AS(build_partition(q, Point{0.0}, 2), InvalidModel);
  }

  TEST_CASE("exact Lp distance of jump functions") {
    const auto q = linear_two_state();
    CHECK(h_lp_distance(q, Point{0.7}, Point{0.4}, 1, 1.0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(h_lp_distance(q, Point{0.7}, Point{0.7}, 1, 1.0) == 0.0);
    CHECK(h_lp_distance(q, Point{0.7}, Point{0.4}, 2, 1.0) == doctest::Approx(0.6).epsilon(1e-12));
    // Symmetry.
    CHECK(h_lp_distance(q, Point{0.4}, Point{0.7}, 2, 2.0) == h_lp_distance(q, Point{0.7}, Point{0.4}, 2, 2.0));
  }

  TEST_CASE("Lp bound formula") {
    QMatrixSpec q;
    q.bandwidth = 1;
    q.lipschitz_cq = 1.0;
    CHECK(h_lp_bound(q, 2, 1.0, 0.3) == doctest::Approx(3.0));
    CHECK(h_lp_bound(q, 2, 1.0, 0.0) == 0.0);
    q.bandwidth = 2;
    q.lipschitz_cq = 0.5;
    // 2 * 2^3 * (2 + 2) * 0.5
    CHECK(h_lp_bound(q, 1, 2.0, 1.0) == doctest::Approx(32.0));
  }

  // Coherent rate growth shifts every row block in the same direction, and the
  // shifts accumulate along the row offsets. For this family the exact
  // distance is 16 delta while the closed-form bound gives 14 delta.
  TEST_CASE("Lp bound is not universal for coherent monotone rates") {
    QMatrixSpec q;
    q.bandwidth = 1;
    q.lipschitz_cq = 1.0;
    q.rate = [](PointView x, int i, int j) { return std::abs(i - j) == 1 ? 1.0 + x[0] : 0.0; };
    const double delta = 1e-3;
    const double exact = h_lp_distance(q, Point{0.5}, Point{0.5 + delta}, 3, 1.0);
    CHECK(exact == doctest::Approx(16.0 * delta).epsilon(1e-9));
    CHECK(h_lp_bound(q, 3, 1.0, delta) == doctest::Approx(14.0 * delta));
    CHECK(exact > h_lp_bound(q, 3, 1.0, delta));
  }

  TEST_CASE("Lp bound holds on the randomized banded family (property)") {
    int failures = 0;
    for (std::uint64_t k = 0; k < 200; ++k) {
      const auto rep = lipschitz_sweep_case(99, k, 20);
      failures += rep.pass ? 0 : 1;
    }
    CHECK(failures == 0);
  }

  TEST_CASE("partition total length equals the summed exit rates (property)") {
    const auto rates = RandomBandedRates::draw(5, 3);
    const auto q = rates.spec();
    const NoiseStream noise(5);
    for (std::uint64_t s = 0; s < 50; ++s) {
      Point x(static_cast<std::size_t>(rates.dim));
      for (auto& v : x) v = 6.0 * noise.uniforms(Channel::Auxiliary, 0, s, 0)[0] - 3.0;
      const auto part = build_partition(q, x, 20);
      double total = 0.0;
      for (int i = 1; i <= 20; ++i) total += q.exit_rate(x, i);
      CHECK(part.total_length() == doctest::Approx(total).epsilon(1e-13));
      for (int i = 1; i <= 20; ++i) CHECK(part.row_length(i) == doctest::Approx(q.exit_rate(x, i)).epsilon(1e-12));
    }
  }

  TEST_CASE("cutoff and smooth step") {
    CHECK(smooth_step_down(0.0) == 1.0);
    CHECK(smooth_step_down(1.0) == 0.0);
    CHECK(smooth_step_down(0.5) == doctest::Approx(0.5));
    double prev = 1.0;
    for (int k = 1; k < 100; ++k) {
      const double v = smooth_step_down(k / 100.0);
      CHECK(v <= prev);
      prev = v;
    }
    CHECK(cutoff(Point{3.0}, 3) == 1.0);
    CHECK(cutoff(Point{4.0}, 3) == 0.0);
    CHECK(cutoff(Point{3.0, 4.0}, 3) == 0.0);
  }

  TEST_CASE("truncated birth-death matrix") {
    const auto qk = truncate_q(birth_death(), 3);
    CHECK(qk.max_state == 5);
    const Point x{1.0};
    CHECK(qk.at(x, 4, 5) == doctest::Approx(4.0));
    CHECK(qk.at(x, 5, 4) == doctest::Approx(5.0));
    const auto g = qk.generator(x);
    CHECK(g(4, 4) == doctest::Approx(-5.0));
    for (int i = 0; i < 5; ++i) CHECK(g.row(i).sum() == doctest::Approx(0.0).epsilon(1e-12));
    // Beyond the cutoff only the boundary row's constant rates survive.
    const auto far = qk.generator(Point{10.0});
    for (int i = 0; i < 4; ++i) CHECK(far.row(i).cwiseAbs().sum() == 0.0);
    CHECK(far(4, 3) == 1.0);
    CHECK(far(4, 4) == -1.0);
    CHECK_THROWS_AS(truncate_q(birth_death(), 0), InvalidArgument);
  }

  TEST_CASE("truncation coincides with the original rates inside the ball (property)") {
    const auto rates = RandomBandedRates::draw(17, 4);
    const auto q = rates.spec();
    for (int K : {2, 5, 8}) {
      const auto qk = truncate_q(q, K);
      Point x(static_cast<std::size_t>(rates.dim), 0.9 * K / std::sqrt(static_cast<double>(rates.dim)));
      for (int i = 1; i <= K; ++i) {
        for (int j = 1; j <= K; ++j) {
          if (i != j) CHECK(qk.at(x, i, j) == q.at(x, i, j));
        }
      }
      const auto g = qk.generator(x);
      for (int i = 0; i < g.rows(); ++i) CHECK(std::abs(g.row(i).sum()) < 1e-12);
    }
  }

  TEST_CASE("finite chain truncated beyond its support") {
    const auto q = three_state();
    const auto qk = truncate_q(q, 5);
    for (int i = 1; i <= 3; ++i) {
      for (int j = 1; j <= 3; ++j) {
        if (i != j) CHECK(qk.at(Point{0.0}, i, j) == q.at(Point{0.0}, i, j));
      }
    }
  }

  TEST_CASE("auxiliary dominating chain generator") {
    const auto g = xi_generator({2, 1.0, 1}, 6);
    CHECK(g(0, 1) == 2.0);
    CHECK(g(0, 0) == -2.0);
    CHECK(g(2, 1) == 2.0);
    CHECK(g(2, 3) == 2.0);
    CHECK(g(2, 2) == -4.0);
    CHECK(xi_generator({2, 0.0, 1}, 6).isZero());
    const XiChainSpec spec{4, 0.5, 2};
    CHECK(spec.exit_rate(1) == doctest::Approx(4.0));
    CHECK(spec.exit_rate(5) == doctest::Approx(8.0));
  }

  TEST_CASE("two-state transition matrix") {
    Eigen::MatrixXd q(2, 2);
    q << -1, 1, 1, -1;
    const auto p = transition_matrix(q, 1.0);
    CHECK(p(0, 0) == doctest::Approx((1 + std::exp(-2.0)) / 2).epsilon(1e-12));
    CHECK(p(0, 0) == doctest::Approx(0.5676676).epsilon(1e-7));
    CHECK(transition_matrix(q, 0.0).isIdentity());
    CHECK_THROWS_AS(transition_matrix(q, -1.0), InvalidArgument);
    CHECK_THROWS(transition_matrix(Eigen::MatrixXd::Zero(600, 600), 1.0));
  }

  TEST_CASE("short-time decay of the dominating chain") {
    const XiChainSpec spec{3, 1.5, 2};
    const auto g = xi_generator(spec, 20);
    const double t = 1e-4;
    const auto p = transition_matrix(g, t);
    const int i = 6;  // interior: i > kappa and far from the matrix edge
    const double rate = std::log(p(i - 1, i - 1)) / t;
    CHECK(rate == doctest::Approx(-2.0 * spec.kappa * spec.alpha * spec.K).epsilon(0.01));
  }

  TEST_CASE("transition matrices form a semigroup (property)") {
    const auto rates = RandomBandedRates::draw(3, 1);
    const auto g = truncate_q(rates.spec(), 6).generator(Point(static_cast<std::size_t>(rates.dim), 0.0));
    for (double s : {0.1, 0.7}) {
      for (double t : {0.2, 1.3}) {
        const Eigen::MatrixXd lhs = transition_matrix(g, s + t);
        const Eigen::MatrixXd rhs = transition_matrix(g, s) * transition_matrix(g, t);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
        for (int r = 0; r < lhs.rows(); ++r) CHECK(std::abs(lhs.row(r).sum() - 1.0) < 1e-10);
      }
    }
  }

  TEST_CASE("destination sampling follows the row layout") {
    const auto q = three_state();
    CHECK(sample_destination(q, Point{0.0}, 1, 0.1).first == 2);
    CHECK(sample_destination(q, Point{0.0}, 1, 0.5).first == 3);
    CHECK(sample_destination(q, Point{0.0}, 3, 0.9).first == 2);
    QMatrixSpec zero;
    zero.max_state = 2;
    zero.rate = [](PointView, int, int) { return 0.0; };
    CHECK(sample_destination(zero, Point{0.0}, 1, 0.3).first == 0);
  }
}
