#include "rswitch/engine.hpp"

#include "rswitch/errors.hpp"
#include "rswitch/format.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace rswitch {

std::string_view to_string(Scheme s) noexcept {
  return s == Scheme::FrozenRate ? "frozen_rate" : "event_driven_exact";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "frozen_rate") return Scheme::FrozenRate;
  if (name == "event_driven_exact") return Scheme::EventDrivenExact;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive and finite");
  if (!(T >= 0.0) || !std::isfinite(T)) throw InvalidArgument("T must be nonnegative and finite");
  if (K && *K < 1) throw InvalidArgument("K must be at least 1");
  if (threads < 0) throw InvalidArgument("threads must be nonnegative");
}

namespace {

std::int64_t cells_between(double t0, double T, double dt) {
  if (T <= t0) return 0;
  // Tolerate T/dt landing a hair above an integer.
  return static_cast<std::int64_t>(std::ceil((T - t0) / dt - 1e-9));
}

double norm2(PointView x) noexcept {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

}  // namespace

std::int64_t SimConfig::cells() const { return cells_between(0.0, T, dt); }

// ---------------------------------------------------------------------------
// Trajectory

Point Trajectory::state_at(double t) const {
  if (times.empty()) throw InvalidArgument("state_at: empty trajectory");
  const auto d = static_cast<std::size_t>(dim);
  if (t <= times.front()) return Point(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(d));
  if (t >= times.back()) return Point(xs.end() - static_cast<std::ptrdiff_t>(d), xs.end());
  const auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  Point out(d);
  for (std::size_t k = 0; k < d; ++k) out[k] = xs[lo * d + k] + w * (xs[hi * d + k] - xs[lo * d + k]);
  return out;
}

int Trajectory::regime_at(double t) const {
  if (times.empty()) throw InvalidArgument("regime_at: empty trajectory");
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return regimes.front();
  return regimes[static_cast<std::size_t>(it - times.begin()) - 1];
}

void Trajectory::write_csv(std::ostream& os) const {
  os << "time,regime";
  for (int k = 1; k <= dim; ++k) os << ",x" << k;
  os << ",event\n";
  for (std::size_t r = 0; r < times.size(); ++r) {
    os << format_double(times[r]) << ',' << regimes[r];
    for (double v : x(r)) os << ',' << format_double(v);
    os << ',' << static_cast<int>(flags[r]) << '\n';
  }
}

namespace {

constexpr char kMagic[8] = {'R', 'S', 'W', 'T', 'R', 'A', 'J', '1'};
constexpr std::uint32_t kBinaryVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  char buf[sizeof(U)];
  for (std::size_t k = 0; k < sizeof(U); ++k) buf[k] = static_cast<char>((bits >> (8 * k)) & 0xFFu);
  os.write(buf, sizeof buf);
}

template <typename T>
T get(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof buf)) {
    throw InvalidArgument("truncated trajectory file");
  }
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) bits |= static_cast<U>(U{buf[k]} << (8 * k));
  return std::bit_cast<T>(bits);
}

}  // namespace

void Trajectory::write_binary(std::ostream& os) const {
  os.write(kMagic, sizeof kMagic);
  put(os, kBinaryVersion);
  put(os, seed);
  put(os, config_hash);
  put(os, static_cast<std::uint32_t>(dim));
  put(os, static_cast<std::uint64_t>(times.size()));
  const auto record_bytes = static_cast<std::uint32_t>(8 + 4 + 1 + 8 * dim);
  for (std::size_t r = 0; r < times.size(); ++r) {
    put(os, record_bytes);
    put(os, times[r]);
    put(os, static_cast<std::int32_t>(regimes[r]));
    put(os, flags[r]);
    for (double v : x(r)) put(os, v);
  }
  put(os, static_cast<std::uint64_t>(jumps.size()));
  for (const auto& j : jumps) {
    put(os, j.time);
    put(os, static_cast<std::int32_t>(j.from));
    put(os, static_cast<std::int32_t>(j.to));
    put(os, j.mark);
  }
  put(os, eta);
  put(os, tau_K ? *tau_K : std::numeric_limits<double>::quiet_NaN());
  put(os, rate_warnings);
}

Trajectory Trajectory::read_binary(std::istream& is) {
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw InvalidArgument("not a trajectory file (bad magic)");
  }
  if (get<std::uint32_t>(is) != kBinaryVersion) throw InvalidArgument("unsupported trajectory version");
  Trajectory tr;
  tr.seed = get<std::uint64_t>(is);
  tr.config_hash = get<std::uint64_t>(is);
  tr.dim = static_cast<int>(get<std::uint32_t>(is));
  const auto count = get<std::uint64_t>(is);
  const auto expected = static_cast<std::uint32_t>(8 + 4 + 1 + 8 * tr.dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    if (get<std::uint32_t>(is) != expected) throw InvalidArgument("corrupt trajectory record length");
    tr.times.push_back(get<double>(is));
    tr.regimes.push_back(get<std::int32_t>(is));
    tr.flags.push_back(get<std::uint8_t>(is));
    for (int k = 0; k < tr.dim; ++k) tr.xs.push_back(get<double>(is));
  }
  const auto jumps = get<std::uint64_t>(is);
  for (std::uint64_t r = 0; r < jumps; ++r) {
    JumpRecord j;
    j.time = get<double>(is);
    j.from = get<std::int32_t>(is);
    j.to = get<std::int32_t>(is);
    j.mark = get<double>(is);
    tr.jumps.push_back(j);
  }
  tr.eta = get<double>(is);
  const double tau = get<double>(is);
  if (!std::isnan(tau)) tr.tau_K = tau;
  tr.rate_warnings = get<std::int64_t>(is);
  return tr;
}

// ---------------------------------------------------------------------------
// Euler stepping

namespace {

/// In-place Euler stepper with scratch buffers (no allocation per step).
class Stepper {
 public:
  explicit Stepper(const ModelSpec& m)
      : m_(m), d_(static_cast<std::size_t>(m.dim)), drift_(d_), sigma_(d_ * d_), next_(d_) {}

  void advance(double t, std::span<double> x, int i, double h, PointView dW) {
    m_.drift(t, x, i, drift_);
    m_.diffusion(t, x, i, sigma_);
    bool finite = true;
    for (std::size_t a = 0; a < d_; ++a) {
      double v = x[a] + drift_[a] * h;
      const double* row = sigma_.data() + a * d_;
      for (std::size_t b = 0; b < d_; ++b) v += row[b] * dW[b];
      next_[a] = v;
      finite = finite && std::isfinite(v);
    }
    if (!finite) throw NumericalBlowup(t, Point(x.begin(), x.end()), i);
    std::copy(next_.begin(), next_.end(), x.begin());
  }

 private:
  const ModelSpec& m_;
  std::size_t d_;
  std::vector<double> drift_, sigma_, next_;
};

/// Bridge point: given W(a) = 0 and W(end) = total over [a, end], draws W(s)
/// for a <= s <= end using normals at (Bridge, replica, cell, slot block k).
void bridge_split(const NoiseStream& noise, std::uint64_t replica, std::int64_t cell, int k,
                  double a, double s, double end, PointView total, std::span<double> first) {
  const double span_len = end - a;
  const double theta = span_len > 0.0 ? (s - a) / span_len : 0.0;
  const double sd = std::sqrt(std::max(0.0, theta * (1.0 - theta) * span_len));
  const std::size_t d = total.size();
  const auto block = static_cast<std::uint32_t>(k) * static_cast<std::uint32_t>((d + 1) / 2);
  for (std::size_t c = 0; c < d; c += 2) {
    const auto z = noise.normals(Channel::Bridge, replica, static_cast<std::uint64_t>(cell),
                                 block + static_cast<std::uint32_t>(c / 2));
    first[c] = theta * total[c] + sd * z[0];
    if (c + 1 < d) first[c + 1] = theta * total[c + 1] + sd * z[1];
  }
}

/// The Brownian stream of one replica: normal number L (cell n, component k
/// gives L = n d + k) is half of the Box-Muller pair in block L / 2. Both
/// halves are used, so odd dimensions waste no draws.
class BrownianDraws {
 public:
  BrownianDraws(const NoiseStream& noise, std::uint64_t replica) : noise_(noise), replica_(replica) {}

  void cell(std::int64_t n, double h, std::span<double> out) {
    const double scale = std::sqrt(h);
    const std::uint64_t base = static_cast<std::uint64_t>(n) * out.size();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = scale * normal(base + k);
  }

 private:
  double normal(std::uint64_t index) {
    const std::uint64_t block = index >> 1;
    if (block != cached_block_) {
      pair_ = noise_.normals(Channel::Brownian, replica_, block & 0xFFFFFFFFu,
                             static_cast<std::uint32_t>(block >> 32));
      cached_block_ = block;
    }
    return pair_[index & 1];
  }

  const NoiseStream& noise_;
  std::uint64_t replica_;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::array<double, 2> pair_{};
};

class PathRunner {
 public:
  PathRunner(const ModelSpec& m, const SimConfig& cfg, const NoiseStream& noise,
             std::uint64_t replica, const PathOptions& opts)
      : m_(m), cfg_(cfg), noise_(noise), replica_(replica), opts_(opts), stepper_(m),
        d_(static_cast<std::size_t>(m.dim)), brownian_(noise, replica), dW_(d_), dW1_(d_) {}

  PathSummary run(PointView x0, int i0) {
    if (x0.size() != d_) throw InvalidArgument("initial state has wrong dimension");
    if (!m_.q.contains(i0)) throw InvalidArgument("initial regime outside the regime space");
    cfg_.validate();
    sum_.x.assign(x0.begin(), x0.end());
    sum_.regime = i0;
    sum_.time = opts_.t0;
    if (opts_.record) {
      auto& tr = *opts_.record;
      tr = Trajectory{};
      tr.dim = m_.dim;
      tr.seed = noise_.seed();
    }
    if (observe(opts_.t0, kGridPoint)) return finish();
    if (cfg_.scheme == Scheme::FrozenRate || opts_.frozen_regime) {
      run_frozen_rate();
    } else {
      if (!m_.q.state_independent) {
        throw Unsupported("event_driven_exact requires state-independent switching rates");
      }
      run_event_driven();
    }
    return finish();
  }

 private:
  PathSummary finish() {
    if (opts_.record) {
      opts_.record->eta = sum_.eta;
      opts_.record->tau_K = sum_.tau_K;
      opts_.record->rate_warnings = sum_.rate_warnings;
    }
    return sum_;
  }

  double cell_end(std::int64_t n, std::int64_t cells) const {
    return n + 1 == cells ? cfg_.T : opts_.t0 + static_cast<double>(n + 1) * cfg_.dt;
  }

  // Records the current state; returns true if the path should stop here.
  bool observe(double t, std::uint8_t flag) {
    sum_.time = t;
    const double r2 = norm2(sum_.x);
    sum_.sup_x2 = std::max(sum_.sup_x2, r2);
    sum_.sup_regime2 = std::max(sum_.sup_regime2, static_cast<double>(sum_.regime) * sum_.regime);
    if (cfg_.K && !sum_.tau_K && std::sqrt(r2) + sum_.regime > *cfg_.K) {
      sum_.tau_K = t;
      flag |= kExit;
    }
    if (opts_.record) {
      auto& tr = *opts_.record;
      tr.times.push_back(t);
      tr.xs.insert(tr.xs.end(), sum_.x.begin(), sum_.x.end());
      tr.regimes.push_back(sum_.regime);
      tr.flags.push_back(flag);
    }
    return opts_.stop_at_exit && (flag & kExit) != 0;
  }

  // Applies a switch to `to` at time s; returns true if the path should stop.
  bool switch_to(double s, int to, double mark) {
    if (opts_.record) opts_.record->jumps.push_back(JumpRecord{s, sum_.regime, to, mark});
    sum_.regime = to;
    if (sum_.eta == kNever) sum_.eta = s;
    const bool exited = observe(s, kSwitch);
    return exited || opts_.stop_at_first_switch;
  }

  void run_frozen_rate() {
    const std::int64_t cells = cells_between(opts_.t0, cfg_.T, cfg_.dt);
    for (std::int64_t n = 0; n < cells; ++n) {
      const double t = opts_.t0 + static_cast<double>(n) * cfg_.dt;
      const double t_next = cell_end(n, cells);
      const double h = t_next - t;
      brownian_.cell(n, h, dW_);

      bool stepped = false;
      if (!opts_.frozen_regime) {
        const int i = sum_.regime;
        const double rate = m_.q.exit_rate(sum_.x, i);
        if (h * rate > 0.1) ++sum_.rate_warnings;
        if (rate > 0.0) {
          const auto u = noise_.uniforms(Channel::StepEvents, replica_, static_cast<std::uint64_t>(n), 0);
          const double s = t + (-std::log(u[0]) / rate);
          if (s < t_next) {
            bridge_split(noise_, replica_, n, 0, t, s, t_next, dW_, dW1_);
            Point x_cell_start = sum_.x;
            stepper_.advance(t, sum_.x, i, s - t, dW1_);
            const auto [to, mark] = sample_destination(m_.q, sum_.x, i, u[1]);
            if (to != 0) {
              if (switch_to(s, to, mark)) return;
              for (std::size_t k = 0; k < d_; ++k) dW1_[k] = dW_[k] - dW1_[k];
              stepper_.advance(s, sum_.x, to, t_next - s, dW1_);
              stepped = true;
            } else {
              // All rates vanished at the switch point: no jump in this cell.
              sum_.x = std::move(x_cell_start);
            }
          }
        }
      }
      if (!stepped) stepper_.advance(t, sum_.x, sum_.regime, h, dW_);
      if (observe(t_next, kGridPoint)) return;
    }
  }

  void run_event_driven() {
    const auto skeleton = simulate_chain_skeleton(m_.q, sum_.x, sum_.regime, opts_.t0, cfg_.T, noise_,
                                                  replica_, opts_.stop_at_first_switch ? 1 : 0);
    std::size_t next_event = 0;
    const std::int64_t cells = cells_between(opts_.t0, cfg_.T, cfg_.dt);
    for (std::int64_t n = 0; n < cells; ++n) {
      const double t = opts_.t0 + static_cast<double>(n) * cfg_.dt;
      const double t_next = cell_end(n, cells);
      const double h = t_next - t;
      brownian_.cell(n, h, dW_);

      // dW_ holds the increment still to be spent over [a, t_next).
      double a = t;
      int k = 0;
      while (next_event < skeleton.size() && skeleton[next_event].time < t_next) {
        const auto& ev = skeleton[next_event++];
        bridge_split(noise_, replica_, n, k++, a, ev.time, t_next, dW_, dW1_);
        stepper_.advance(a, sum_.x, sum_.regime, ev.time - a, dW1_);
        for (std::size_t c = 0; c < d_; ++c) dW_[c] -= dW1_[c];
        a = ev.time;
        if (switch_to(ev.time, ev.to, ev.mark)) return;
      }
      stepper_.advance(a, sum_.x, sum_.regime, t_next - a, dW_);
      if (observe(t_next, kGridPoint)) return;
    }
  }

  const ModelSpec& m_;
  SimConfig cfg_;
  const NoiseStream& noise_;
  std::uint64_t replica_;
  PathOptions opts_;
  Stepper stepper_;
  std::size_t d_;
  BrownianDraws brownian_;
  std::vector<double> dW_, dW1_;
  PathSummary sum_;
};

}  // namespace

Point step_euler(const ModelSpec& m, double t, PointView x, int i, double dt, PointView dW) {
  if (x.size() != static_cast<std::size_t>(m.dim) || dW.size() != x.size()) {
    throw InvalidArgument("step_euler: dimension mismatch");
  }
  Point out(x.begin(), x.end());
  Stepper(m).advance(t, out, i, dt, dW);
  return out;
}

PathSummary run_path(const ModelSpec& m, PointView x0, int i0, const SimConfig& cfg,
                     const NoiseStream& noise, std::uint64_t replica, const PathOptions& opts) {
  return PathRunner(m, cfg, noise, replica, opts).run(x0, i0);
}

Trajectory simulate_path(const ModelSpec& m, PointView x0, int i0, const SimConfig& cfg,
                         const NoiseStream& noise, std::uint64_t replica) {
  SimConfig frozen = cfg;
  frozen.scheme = Scheme::FrozenRate;
  Trajectory tr;
  PathOptions opts;
  opts.record = &tr;
  run_path(m, x0, i0, frozen, noise, replica, opts);
  return tr;
}

Trajectory simulate_state_independent(const ModelSpec& m, PointView x0, int i0, const SimConfig& cfg,
                                      const NoiseStream& noise, std::uint64_t replica) {
  SimConfig exact = cfg;
  exact.scheme = Scheme::EventDrivenExact;
  Trajectory tr;
  PathOptions opts;
  opts.record = &tr;
  run_path(m, x0, i0, exact, noise, replica, opts);
  return tr;
}

std::vector<JumpRecord> simulate_chain_skeleton(const QMatrixSpec& q, PointView where, int i0,
                                                double t0, double T, const NoiseStream& noise,
                                                std::uint64_t replica, std::size_t max_events) {
  std::vector<JumpRecord> events;
  double t = t0;
  int i = i0;
  for (std::uint64_t k = 0; max_events == 0 || events.size() < max_events; ++k) {
    const double rate = q.exit_rate(where, i);
    if (!(rate > 0.0)) break;
    const auto u = noise.uniforms(Channel::Skeleton, replica, k, 0);
    t += -std::log(u[0]) / rate;
    if (!(t < T)) break;
    const auto [to, mark] = sample_destination(q, where, i, u[1]);
    if (to == 0) break;
    events.push_back(JumpRecord{t, i, to, mark});
    i = to;
  }
  return events;
}

ModelSpec truncated_model(const ModelSpec& m, int K) {
  ModelSpec out = m;
  out.id = m.id + "@K" + std::to_string(K);
  out.q = truncate_q(m.q, K);
  out.drift = [drift = m.drift, K](double t, PointView x, int i, std::span<double> o) {
    drift(t, x, i, o);
    const double phi = cutoff(x, K);
    if (phi != 1.0) {
      for (double& v : o) v *= phi;
    }
  };
  out.diffusion = [diffusion = m.diffusion, K](double t, PointView x, int i, std::span<double> o) {
    diffusion(t, x, i, o);
    const double phi = cutoff(x, K);
    if (phi != 1.0) {
      const double root = std::sqrt(phi);
      for (double& v : o) v *= root;
    }
  };
  out.advertised = {Assumption::Conservative, Assumption::BandLimited, Assumption::LinearGrowth};
  return out;
}

Trajectory simulate_truncated(const ModelSpec& m, PointView x0, int i0, int K, const SimConfig& cfg,
                              const NoiseStream& noise, std::uint64_t replica) {
  if (K < 1) throw InvalidArgument("simulate_truncated: K must be at least 1");
  if (std::sqrt(norm2(x0)) + i0 >= K) {
    throw InvalidArgument("simulate_truncated: requires |x0| + i0 < K");
  }
  const ModelSpec truncated = truncated_model(m, K);
  SimConfig c = cfg;
  c.K = K;
  return simulate_path(truncated, x0, i0, c, noise, replica);
}

double separation_time(const Trajectory& a, const Trajectory& b) {
  if (a.times.empty() || b.times.empty()) return kNever;
  std::vector<double> candidates{std::min(a.times.front(), b.times.front())};
  for (const auto* tr : {&a, &b}) {
    for (const auto& j : tr->jumps) candidates.push_back(j.time);
  }
  std::sort(candidates.begin(), candidates.end());
  for (double t : candidates) {
    if (a.regime_at(t) != b.regime_at(t)) return t;
  }
  return kNever;
}

CoupledResult coupled_simulate(const ModelSpec& m, PointView x0, int i0, PointView y0, int j0,
                               const SimConfig& cfg, const NoiseStream& noise, std::uint64_t replica) {
  CoupledResult out;
  PathOptions opts;
  opts.record = &out.first;
  run_path(m, x0, i0, cfg, noise, replica, opts);
  opts.record = &out.second;
  run_path(m, y0, j0, cfg, noise, replica, opts);
  out.zeta = separation_time(out.first, out.second);
  return out;
}

}  // namespace rswitch
