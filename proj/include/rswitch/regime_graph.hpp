#pragma once

// Q-matrix algebra for countable, banded regime spaces.
//
// Regimes are 1-based integers. A QMatrixSpec is a black-box rate callback
// plus the structural metadata (bandwidth, Lipschitz and linear-growth
// constants) that the simulation and verification layers rely on. Nothing in
// this header enumerates an infinite state space: rows are materialized on
// demand, and only within the band |j - i| <= bandwidth.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace rswitch {

using Point = std::vector<double>;
using PointView = std::span<const double>;

/// q_ij(x) for i != j. Must be pure and safe to call concurrently.
using RateFn = std::function<double(PointView x, int i, int j)>;

struct QMatrixSpec {
  RateFn rate;
  int bandwidth = 1;
  /// Largest regime; 0 means the regime space is {1, 2, ...}.
  int max_state = 0;
  double lipschitz_cq = 0.0;
  double linear_bound_alpha = std::numeric_limits<double>::quiet_NaN();
  double linear_bound_beta = std::numeric_limits<double>::quiet_NaN();
  bool state_independent = false;

  bool finite() const noexcept { return max_state > 0; }
  bool contains(int i) const noexcept { return i >= 1 && (max_state == 0 || i <= max_state); }
  int lowest_neighbour(int i) const noexcept { return i - bandwidth < 1 ? 1 : i - bandwidth; }
  int highest_neighbour(int i) const noexcept {
    return (max_state > 0 && i + bandwidth > max_state) ? max_state : i + bandwidth;
  }

  /// Validated rate: 0 outside the band, on the diagonal, or outside the
  /// regime space; throws InvalidModel on a negative or non-finite value.
  double at(PointView x, int i, int j) const;

  /// q_i(x) = sum_{j != i} q_ij(x), accumulated in increasing j.
  double exit_rate(PointView x, int i) const;

  /// Dense generator of a finite spec evaluated at x (diagonal = -row sum).
  Eigen::MatrixXd generator(PointView x) const;
};

/// One non-empty Gamma_ij(x) = [left, right).
struct Interval {
  int from = 0;
  int to = 0;
  double left = 0.0;
  double right = 0.0;

  double length() const noexcept { return right - left; }
  int displacement() const noexcept { return to - from; }
};

/// The disjoint half-open intervals Gamma_ij(x) for the rows of one window.
/// Row i starts at sum_{k<i} q_k(x); inside a row, entries follow increasing j.
class IntervalPartition {
 public:
  IntervalPartition() = default;
  IntervalPartition(int first_row, std::vector<double> row_starts, std::vector<Interval> entries);

  std::span<const Interval> entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  int first_row() const noexcept { return first_row_; }
  int last_row() const noexcept { return first_row_ + static_cast<int>(row_starts_.size()) - 2; }

  double row_start(int i) const;
  double row_end(int i) const;
  double row_length(int i) const { return row_end(i) - row_start(i); }
  /// Sum of all interval lengths in the window.
  double total_length() const noexcept;

  /// Interval containing z, or nullptr. O(log #entries).
  const Interval* find(double z) const noexcept;

 private:
  int first_row_ = 1;
  std::vector<double> row_starts_;  // row_starts_[k] = start of row first_row_ + k; last = end
  std::vector<Interval> entries_;
};

/// Materializes rows 1..rows of the partition at x.
IntervalPartition build_partition(const QMatrixSpec& q, PointView x, int rows);

/// Materializes only rows first_row..last_row; the offset of first_row is
/// still the exact prefix sum of the exit rates of the rows below it.
IntervalPartition build_partition_window(const QMatrixSpec& q, PointView x, int first_row,
                                         int last_row);

/// The jump function h(x, i, z): j - i if z lies in Gamma_ij(x), else 0.
int h_eval(const IntervalPartition& partition, int i, double z) noexcept;

/// Destination of a switch out of row i at x, for u uniform on (0, 1): the
/// mark z = row_start + u q_i(x) is looked up in the partition. Returns
/// {destination, z}, or {0, 0} when row i is empty at x.
std::pair<int, double> sample_destination(const QMatrixSpec& q, PointView x, int i, double u);

/// Exact value of the integral of |h(x,i,z) - h(y,i,z)|^p dz over the real
/// line, computed by sweeping the merged endpoints of both row-i layouts.
double h_lp_distance(const QMatrixSpec& q, PointView x, PointView y, int i, double p);

/// 2 kappa^{p+1} (kappa + 2i) c_q dist: the Lipschitz-type bound on the jump
/// function's Lp distance under band and rate-Lipschitz conditions.
double h_lp_bound(const QMatrixSpec& q, int i, double p, double dist);

/// Smooth monotone step: 1 for s <= 0, 0 for s >= 1, C-infinity in between.
double smooth_step_down(double s) noexcept;

/// Cutoff phi^K(x) = smooth_step_down(|x| - K).
double cutoff(PointView x, int K) noexcept;

/// K-truncated Q-matrix on {1, ..., K + kappa + 1}. Rates are scaled by the
/// cutoff, mass beyond K + kappa is folded into the boundary state, and the
/// boundary state returns to K+1..K+kappa at rate 1 + q_ij phi^K.
QMatrixSpec truncate_q(const QMatrixSpec& q, int K);

/// Parameters of the dominating chain used in holding-time bounds.
struct XiChainSpec {
  int K = 1;
  double alpha = 0.0;
  int kappa = 1;

  /// Exit rate from i in the infinite chain: (min(kappa, i-1) + kappa) alpha K.
  double exit_rate(int i) const noexcept;
};

/// M x M generator of the dominating chain. Rows within kappa of M lose the
/// transitions that would leave {1..M}; their diagonal is the negated
/// in-matrix row sum, so every row is conservative. Entries with
/// i <= M - kappa coincide with the infinite chain.
Eigen::MatrixXd xi_generator(const XiChainSpec& spec, int M);

inline constexpr int kDefaultTransitionDimensionCap = 512;

/// exp(tQ) by uniformization, entries accurate to 1e-12 absolute.
Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& generator, double t,
                                  int dimension_cap = kDefaultTransitionDimensionCap);

}  // namespace rswitch
