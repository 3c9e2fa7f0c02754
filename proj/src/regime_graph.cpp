#include "rswitch/regime_graph.hpp"

#include "rswitch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rswitch {

namespace {

std::string describe_point(PointView x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ')';
  return os.str();
}

double norm(PointView x) noexcept {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

double QMatrixSpec::at(PointView x, int i, int j) const {
  if (i == j || !contains(i) || !contains(j) || std::abs(j - i) > bandwidth) return 0.0;
  const double r = rate(x, i, j);
  if (!(r >= 0.0) || !std::isfinite(r)) {
    std::ostringstream os;
    os << "invalid rate q_" << i << ',' << j << " = " << r << " at x = " << describe_point(x);
    throw InvalidModel(os.str());
  }
  return r;
}

double QMatrixSpec::exit_rate(PointView x, int i) const {
  double total = 0.0;
  const int hi = highest_neighbour(i);
  for (int j = lowest_neighbour(i); j <= hi; ++j) {
    if (j != i) total += at(x, i, j);
  }
  if (!std::isfinite(total)) {
    throw InvalidModel("unbounded exit rate in row " + std::to_string(i) + " at x = " +
                       describe_point(x));
  }
  return total;
}

Eigen::MatrixXd QMatrixSpec::generator(PointView x) const {
  if (!finite()) throw InvalidArgument("generator(): regime space is infinite");
  const int n = max_state;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i <= n; ++i) {
    double total = 0.0;
    for (int j = lowest_neighbour(i); j <= highest_neighbour(i); ++j) {
      if (j == i) continue;
      const double r = at(x, i, j);
      g(i - 1, j - 1) = r;
      total += r;
    }
    g(i - 1, i - 1) = -total;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Interval partition

IntervalPartition::IntervalPartition(int first_row, std::vector<double> row_starts,
                                     std::vector<Interval> entries)
    : first_row_(first_row), row_starts_(std::move(row_starts)), entries_(std::move(entries)) {}

double IntervalPartition::row_start(int i) const {
  if (i < first_row_ || i > last_row()) throw InvalidArgument("row outside partition window");
  return row_starts_[static_cast<std::size_t>(i - first_row_)];
}

double IntervalPartition::row_end(int i) const {
  if (i < first_row_ || i > last_row()) throw InvalidArgument("row outside partition window");
  return row_starts_[static_cast<std::size_t>(i - first_row_) + 1];
}

double IntervalPartition::total_length() const noexcept {
  double total = 0.0;
  for (const auto& e : entries_) total += e.length();
  return total;
}

const Interval* IntervalPartition::find(double z) const noexcept {
  auto it = std::upper_bound(entries_.begin(), entries_.end(), z,
                             [](double v, const Interval& e) { return v < e.left; });
  if (it == entries_.begin()) return nullptr;
  --it;
  return z < it->right ? &*it : nullptr;
}

IntervalPartition build_partition_window(const QMatrixSpec& q, PointView x, int first_row,
                                         int last_row) {
  if (first_row < 1 || last_row < first_row - 1) {
    throw InvalidArgument("build_partition: invalid row window");
  }
  double start = 0.0;
  for (int k = 1; k < first_row; ++k) start += q.exit_rate(x, k);

  std::vector<double> starts;
  std::vector<Interval> entries;
  starts.reserve(static_cast<std::size_t>(last_row - first_row + 2));
  for (int i = first_row; i <= last_row; ++i) {
    starts.push_back(start);
    double within = 0.0;
    if (q.contains(i)) {
      for (int j = q.lowest_neighbour(i); j <= q.highest_neighbour(i); ++j) {
        if (j == i) continue;
        const double r = q.at(x, i, j);
        if (r == 0.0) continue;
        const double left = start + within;
        within += r;
        entries.push_back(Interval{i, j, left, start + within});
      }
    }
    start += within;
  }
  starts.push_back(start);
  return IntervalPartition(first_row, std::move(starts), std::move(entries));
}

IntervalPartition build_partition(const QMatrixSpec& q, PointView x, int rows) {
  if (rows < 1) throw InvalidArgument("build_partition: need at least one row");
  return build_partition_window(q, x, 1, rows);
}

int h_eval(const IntervalPartition& partition, int i, double z) noexcept {
  const Interval* e = partition.find(z);
  return (e != nullptr && e->from == i) ? e->displacement() : 0;
}

std::pair<int, double> sample_destination(const QMatrixSpec& q, PointView x, int i, double u) {
  const auto part = build_partition_window(q, x, i, i);
  const double len = part.row_length(i);
  if (!(len > 0.0) || part.empty()) return {0, 0.0};
  const double z = part.row_start(i) + u * len;
  int disp = h_eval(part, i, z);
  // z can round onto the right end of the row; that point belongs to the last entry.
  if (disp == 0) disp = part.entries().back().displacement();
  return {i + disp, z};
}

double h_lp_distance(const QMatrixSpec& q, PointView x, PointView y, int i, double p) {
  if (!(p > 0.0)) throw InvalidArgument("h_lp_distance: p must be positive");
  const auto px = build_partition_window(q, x, i, i);
  const auto py = build_partition_window(q, y, i, i);

  std::vector<double> cuts;
  cuts.reserve(2 * (px.entries().size() + py.entries().size()));
  for (const auto* part : {&px, &py}) {
    for (const auto& e : part->entries()) {
      cuts.push_back(e.left);
      cuts.push_back(e.right);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    const double mid = a + 0.5 * (b - a);
    const int dx = h_eval(px, i, mid);
    const int dy = h_eval(py, i, mid);
    if (dx != dy) total += std::pow(std::abs(dx - dy), p) * (b - a);
  }
  return total;
}

double h_lp_bound(const QMatrixSpec& q, int i, double p, double dist) {
  const double kappa = q.bandwidth;
  return 2.0 * std::pow(kappa, p + 1.0) * (kappa + 2.0 * i) * q.lipschitz_cq * dist;
}

// ---------------------------------------------------------------------------
// Truncation

double smooth_step_down(double s) noexcept {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / (1.0 - s));
  const double b = std::exp(-1.0 / s);
  return a / (a + b);
}

double cutoff(PointView x, int K) noexcept { return smooth_step_down(norm(x) - K); }

QMatrixSpec truncate_q(const QMatrixSpec& q, int K) {
  if (K < 1) throw InvalidArgument("truncate_q: K must be at least 1");
  const int kappa = q.bandwidth;
  const int boundary = K + kappa + 1;

  QMatrixSpec out;
  out.bandwidth = kappa;
  out.max_state = boundary;
  out.lipschitz_cq = std::numeric_limits<double>::quiet_NaN();
  out.state_independent = false;
  out.rate = [q, K, kappa, boundary](PointView x, int i, int j) -> double {
    const double phi = cutoff(x, K);
    if (i < boundary) {
      if (j < boundary) return q.at(x, i, j) * phi;
      double folded = 0.0;
      for (int jj = boundary; jj <= i + kappa; ++jj) folded += q.at(x, i, jj) * phi;
      return folded;
    }
    if (j >= K + 1 && j <= K + kappa) return 1.0 + q.at(x, i, j) * phi;
    return 0.0;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Dominating chain and uniformization

double XiChainSpec::exit_rate(int i) const noexcept {
  return (std::min(kappa, i - 1) + kappa) * alpha * K;
}

Eigen::MatrixXd xi_generator(const XiChainSpec& spec, int M) {
  if (M < spec.kappa + 1) throw InvalidArgument("xi_generator: M must be at least kappa + 1");
  const double r = spec.alpha * spec.K;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(M, M);
  if (r == 0.0) return g;
  for (int i = 1; i <= M; ++i) {
    double total = 0.0;
    for (int j = std::max(1, i - spec.kappa); j <= std::min(M, i + spec.kappa); ++j) {
      if (j == i) continue;
      g(i - 1, j - 1) = r;
      total += r;
    }
    g(i - 1, i - 1) = -total;
  }
  return g;
}

namespace {

// exp(tQ) for Lambda*t of moderate size.
Eigen::MatrixXd uniformized(const Eigen::MatrixXd& kernel, double lambda_t) {
  const Eigen::Index n = kernel.rows();
  Eigen::MatrixXd result = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  double weight = std::exp(-lambda_t);
  double accumulated = 0.0;
  constexpr double kTail = 1e-15;
  for (int k = 0;; ++k) {
    result.noalias() += weight * power;
    accumulated += weight;
    if (1.0 - accumulated < kTail && k > lambda_t) break;
    if (k > 10000) break;
    power = power * kernel;
    weight *= lambda_t / (k + 1);
  }
  return result;
}

}  // namespace

Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& generator, double t, int dimension_cap) {
  const Eigen::Index n = generator.rows();
  if (n != generator.cols()) throw InvalidArgument("transition_matrix: generator must be square");
  if (n > dimension_cap) {
    throw InvalidArgument("transition_matrix: dimension " + std::to_string(n) +
                          " exceeds cap " + std::to_string(dimension_cap));
  }
  if (!(t >= 0.0)) throw InvalidArgument("transition_matrix: t must be nonnegative");

  double lambda = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && generator(i, j) < 0.0) {
        throw InvalidArgument("transition_matrix: negative off-diagonal rate");
      }
      row += generator(i, j);
    }
    lambda = std::max(lambda, -generator(i, i));
    if (std::abs(row) > 1e-9 * (1.0 + std::abs(generator(i, i)))) {
      throw InvalidArgument("transition_matrix: generator is not conservative");
    }
  }
  if (lambda == 0.0 || t == 0.0) return Eigen::MatrixXd::Identity(n, n);

  const Eigen::MatrixXd kernel = Eigen::MatrixXd::Identity(n, n) + generator / lambda;
  constexpr double kChunk = 16.0;
  const double lambda_t = lambda * t;
  if (lambda_t <= kChunk) return uniformized(kernel, lambda_t);

  auto pieces = static_cast<long long>(std::ceil(lambda_t / kChunk));
  Eigen::MatrixXd base = uniformized(kernel, lambda_t / static_cast<double>(pieces));
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  while (pieces > 0) {
    if (pieces & 1) result = result * base;
    pieces >>= 1;
    if (pieces > 0) base = base * base;
  }
  return result;
}

}  // namespace rswitch
