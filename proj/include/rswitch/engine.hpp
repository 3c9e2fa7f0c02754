#pragma once

// Path simulation of (X_t, L_t).
//
// Two schemes share one noise layout:
//   frozen_rate         Euler-Maruyama cells with switching rates frozen at the
//                       start of each cell; at most one switch per cell.
//   event_driven_exact  for state-independent switching: the jump skeleton is
//                       drawn first from competing exponential clocks, then the
//                       frozen-regime SDE is integrated between events.
// Within a cell the Gaussian increment is always drawn for the whole cell and
// split by Brownian-bridge refinement at event times, so a path's Brownian
// motion does not depend on whether (or where) the regime switches.

#include "rswitch/models.hpp"
#include "rswitch/noise.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rswitch {

enum class Scheme { FrozenRate, EventDrivenExact };

std::string_view to_string(Scheme s) noexcept;
Scheme parse_scheme(std::string_view name);

struct SimConfig {
  double T = 1.0;
  double dt = 1e-3;
  std::optional<int> K;  // exit level for tau_K; truncation level for simulate_truncated
  std::uint64_t seed = kDefaultSeed;
  Scheme scheme = Scheme::FrozenRate;
  int threads = 0;  // 0 = hardware concurrency

  /// Throws InvalidArgument on dt <= 0, T < 0 or non-finite values.
  void validate() const;
  /// Number of Euler cells covering [0, T] (last one may be shorter).
  std::int64_t cells() const;
};

inline constexpr double kNever = std::numeric_limits<double>::infinity();

/// Row flags of a Trajectory.
enum EventFlag : std::uint8_t {
  kGridPoint = 0,
  kSwitch = 1,  // regime changed at this time (row holds the new regime)
  kExit = 2,    // first time with |X| + L > K
};

struct JumpRecord {
  double time = 0.0;
  int from = 0;
  int to = 0;
  double mark = 0.0;  // the z value that selected the destination interval

  bool operator==(const JumpRecord&) const = default;
};

struct Trajectory {
  int dim = 1;
  std::vector<double> times;
  std::vector<double> xs;  // row-major, times.size() x dim
  std::vector<int> regimes;
  std::vector<std::uint8_t> flags;
  std::vector<JumpRecord> jumps;
  double eta = kNever;              // first switch time
  std::optional<double> tau_K;      // first exit time, if K was set and reached
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::int64_t rate_warnings = 0;   // cells with dt * q_i(x) > 0.1

  std::size_t size() const noexcept { return times.size(); }
  PointView x(std::size_t row) const {
    return PointView(xs).subspan(row * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
  }
  /// X at time t by linear interpolation; L at t (right-continuous).
  Point state_at(double t) const;
  int regime_at(double t) const;

  void write_csv(std::ostream& os) const;
  void write_binary(std::ostream& os) const;
  static Trajectory read_binary(std::istream& is);

  bool operator==(const Trajectory&) const = default;
};

/// Per-path results that estimators read without keeping a full trajectory.
struct PathSummary {
  Point x;
  int regime = 1;
  double time = 0.0;  // time at which the path stopped
  double eta = kNever;
  std::optional<double> tau_K;
  double sup_x2 = 0.0;       // running max of |X|^2 over grid and event times
  double sup_regime2 = 0.0;  // running max of L^2
  std::int64_t rate_warnings = 0;
};

struct PathOptions {
  double t0 = 0.0;
  bool frozen_regime = false;         // ignore switching entirely
  bool stop_at_first_switch = false;  // stop at eta (state is post-switch)
  bool stop_at_exit = false;          // stop at tau_K
  Trajectory* record = nullptr;
};

/// x + b(t,x,i) dt + sigma(t,x,i) dW. Throws NumericalBlowup on a non-finite result.
Point step_euler(const ModelSpec& m, double t, PointView x, int i, double dt, PointView dW);

/// Simulates one replica on [opts.t0, cfg.T] with the scheme in cfg.
PathSummary run_path(const ModelSpec& m, PointView x0, int i0, const SimConfig& cfg,
                     const NoiseStream& noise, std::uint64_t replica, const PathOptions& opts = {});

Trajectory simulate_path(const ModelSpec& m, PointView x0, int i0, const SimConfig& cfg,
                         const NoiseStream& noise, std::uint64_t replica = 0);

Trajectory simulate_state_independent(const ModelSpec& m, PointView x0, int i0, const SimConfig& cfg,
                                      const NoiseStream& noise, std::uint64_t replica = 0);

/// Jump skeleton of a state-independent chain on [t0, T]: the jump log only.
/// Identical to the skeleton used by the event-driven scheme. Rates are read
/// at `where` (any point; state-independent rates ignore it).
std::vector<JumpRecord> simulate_chain_skeleton(const QMatrixSpec& q, PointView where, int i0,
                                                double t0, double T,
                                                const NoiseStream& noise, std::uint64_t replica,
                                                std::size_t max_events = 0);

/// The K-truncated model: b phi^K, sigma sqrt(phi^K) and the truncated Q-matrix.
ModelSpec truncated_model(const ModelSpec& m, int K);

/// Frozen-rate simulation of the K-truncated process (requires |x0| + i0 < K).
Trajectory simulate_truncated(const ModelSpec& m, PointView x0, int i0, int K, const SimConfig& cfg,
                              const NoiseStream& noise, std::uint64_t replica = 0);

struct CoupledResult {
  Trajectory first;
  Trajectory second;
  double zeta = kNever;  // first time the regimes differ
};

/// Both paths consume the identical noise (same replica address).
CoupledResult coupled_simulate(const ModelSpec& m, PointView x0, int i0, PointView y0, int j0,
                               const SimConfig& cfg, const NoiseStream& noise,
                               std::uint64_t replica = 0);

/// First time the two regime paths differ (kNever if never).
double separation_time(const Trajectory& a, const Trajectory& b);

}  // namespace rswitch
