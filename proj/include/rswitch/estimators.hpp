#pragma once

// Monte Carlo functionals and the verification checkers built on them.
//
// Replica r of every estimator reads its noise at replica address r of the
// stream seeded by SimConfig::seed, so estimates are reproducible and
// independent of the thread count. Aborted replicas (numerical blowup) are
// excluded from the mean and counted.

#include "rswitch/engine.hpp"
#include "rswitch/models.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rswitch {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n = 0;          // replicas attempted
  std::int64_t n_aborted = 0;  // replicas lost to numerical blowup

  /// More than 0.1% of replicas aborted.
  bool flagged() const noexcept { return n > 0 && n_aborted * 1000 > n; }

  /// Mean and standard error of `values` (sample sd / sqrt(count)).
  static McEstimate from_values(std::span<const double> values, std::int64_t aborted = 0);
};

/// Bounded (or explicitly unbounded) test function f(x, k) with a JSON form.
struct TestFunction {
  nlohmann::json spec;
  std::function<double(PointView x, int k)> eval;
  double bound = 0.0;  // sup |f|; infinity when unbounded

  double operator()(PointView x, int k) const { return eval(x, k); }

  static TestFunction constant(double c);
  static TestFunction regime();                                  // f = k
  static TestFunction coordinate(int index);                     // f = x_index (0-based)
  static TestFunction indicator(int index, double threshold);    // 1{x_index > threshold}
  static TestFunction gaussian(double scale, double floor);      // max(exp(-|x|^2/scale), floor)
  /// 1 + amplitude sin(<w, x> + phase + regime_shift k), amplitude < 1.
  static TestFunction wave(std::vector<double> w, double phase, double regime_shift, double amplitude);

  /// Parses {"kind": ..., ...}; unknown kinds or keys raise ConfigError.
  static TestFunction from_json(const nlohmann::json& j);
};

struct BoundReport {
  std::string checker;
  std::string model;
  nlohmann::json params = nlohmann::json::object();
  McEstimate lhs;
  double rhs = 0.0;
  double rhs_stderr = 0.0;
  double margin = 0.0;
  bool pass = false;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

McEstimate semigroup_estimate(const ModelSpec& m, const TestFunction& f, double t, PointView x, int i,
                              std::int64_t n, const SimConfig& cfg);

struct FirstJumpEstimate {
  McEstimate total;  // estimate of P_t f(x, i)
  McEstimate stay;   // e^{-q t} P^{(i)}_t f(x)
  McEstimate jump;   // (1 - e^{-q t}) E[continuation | eta < t]
};

/// P_t f(x,i) by conditioning on the first switch of a state-independent model.
FirstJumpEstimate first_jump_estimate(const ModelSpec& m, const TestFunction& f, double t, PointView x,
                                      int i, std::int64_t n, const SimConfig& cfg);

/// Upper bound on E[sup|X|^2 + sup L^2] over [0, T]; `bdg` is the L1
/// Burkholder-Davis-Gundy constant.
double moment_bound_rhs(const ModelSpec& m, PointView x, int i, double T, double bdg = 3.0);

BoundReport moment_bound_check(const ModelSpec& m, PointView x, int i, double T, std::int64_t n,
                               const SimConfig& cfg, double bdg = 3.0);

/// Wilson score lower bound at z standard deviations.
double wilson_lower(std::int64_t successes, std::int64_t n, double z = 3.0);

/// exp(-(min(kappa, k-1) + kappa) alpha K t).
double holding_bound(int k, int K, double alpha, int kappa, double t);

std::vector<BoundReport> holding_time_check(const ModelSpec& m, PointView x, int k, int K,
                                            std::span<const double> times, std::int64_t n,
                                            const SimConfig& cfg);

/// C phi(|x-y|^2) / (lambda (1 - exp(-2 C T / gamma))).
double harnack_cost(const ModelSpec& m, int regime, double T, double dist2);

BoundReport harnack_check(const ModelSpec& m, const TestFunction& f, PointView x, PointView y, int i,
                          double T, std::int64_t n, const SimConfig& cfg, double f_floor = 1e-6);

/// One case of the randomized Harnack sweep on switching_ou.
struct HarnackCase {
  int dim = 1;
  Point x, y;
  int regime = 1;
  double T = 1.0;
  TestFunction f;

  nlohmann::json to_json() const;
};

/// Deterministic case generator: dim in {1,2,3}, |x| <= 1.5, |x-y| in
/// [0.05, 1], T in [0.25, 1], f a floored Gaussian bump or a positive wave.
HarnackCase random_harnack_case(std::uint64_t seed, std::uint64_t index);

struct FellerPoint {
  double radius = 0.0;
  McEstimate gap;  // estimate of |P_t f(y) - P_t f(x)| (mean of CRN differences, absolute)
};

struct FellerReport {
  std::vector<FellerPoint> points;
  bool straddle = false;
  bool monotone_trend = true;       // every gap <= previous + 3 stderr
  bool discontinuity_witness = false;  // gap - 3 stderr > threshold at the smallest radius
  double witness_threshold = 0.05;

  std::vector<BoundReport> to_reports(const std::string& model) const;
};

/// Gaps at y = x + r e1 (or at x +- r/2 e1 when straddling), radii decreasing.
FellerReport feller_modulus(const ModelSpec& m, const TestFunction& f, double t, PointView x, int i,
                            std::span<const double> radii, std::int64_t n, const SimConfig& cfg,
                            bool straddle = false);

struct ChainMarginalReport {
  std::vector<BoundReport> entries;  // one per (t, j)
  std::int64_t passed = 0;
  double pass_fraction() const noexcept {
    return entries.empty() ? 1.0 : static_cast<double>(passed) / static_cast<double>(entries.size());
  }
};

/// Empirical P(L_t = j | L_0 = i0) against the uniformization oracle, for a
/// finite state-independent model.
ChainMarginalReport chain_marginal_check(const ModelSpec& m, PointView x, int i0,
                                         std::span<const double> times, std::int64_t n,
                                         const SimConfig& cfg);

/// Empirical P(tau_K <= t) against B(t)/K with B the moment bound.
std::vector<BoundReport> truncation_exit_check(const ModelSpec& m, PointView x, int i,
                                               std::span<const int> levels, double t, std::int64_t n,
                                               const SimConfig& cfg, double bdg = 3.0);

/// Truncated and untruncated paths (same noise) coincide strictly before
/// tau_K, and their states agree at tau_K.
bool agree_until_exit(const Trajectory& full, const Trajectory& truncated);

// ---------------------------------------------------------------------------
// Jump-function Lipschitz sweep

/// q_ij(x) = a_ij + b_ij |sin(<w_ij, x> + theta_ij)| on a band, with the
/// certified Lipschitz constant max b_ij |w_ij|.
struct RandomBandedRates {
  int dim = 1;
  int bandwidth = 1;
  int rows = 20;  // rows above `rows` repeat the coefficients of row `rows`
  std::vector<double> base, amplitude, phase;  // per (row, offset) entry
  std::vector<double> direction;               // per entry, dim values
  double lipschitz = 0.0;

  static RandomBandedRates draw(std::uint64_t seed, std::uint64_t index, int rows = 20);
  QMatrixSpec spec() const;
};

BoundReport lipschitz_sweep_case(std::uint64_t seed, std::uint64_t index, int max_regime = 20);

std::vector<BoundReport> lipschitz_sweep(std::uint64_t seed, std::int64_t cases, int max_regime,
                                         int threads);

}  // namespace rswitch
