#include "rswitch/models.hpp"

#include "rswitch/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

namespace rswitch {

// ---------------------------------------------------------------------------
// Modulus functions

double UClassFn::phi(double s) const {
  if (s <= 0.0) return 0.0;
  if (phi_closed_form) return phi_closed_form(s);
  return phi_quadrature(s);
}

double UClassFn::phi_quadrature(double s) const {
  if (s <= 0.0) return 0.0;
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [this](double r) { return u(r); };
  // u may have a kink at 1 (log+), so integrate the two pieces separately.
  if (s <= 1.0) return integrator.integrate(f, 0.0, s);
  return integrator.integrate(f, 0.0, 1.0) +
         boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 1.0, s, 15, 1e-14);
}

UClassFn u_class(std::string_view id) {
  UClassFn u;
  u.id = std::string(id);
  if (id == "one") {
    u.raw = [](double) { return 1.0; };
    u.phi_closed_form = [](double s) { return s; };
    u.gamma = 1.0;
    u.decreasing = true;
    return u;
  }
  if (id == "log") {
    u.raw = [](double s) { return s < 1.0 ? 1.0 + std::log(1.0 / s) : 1.0; };
    // int_0^s (1 + log(1/r)) dr = s (2 - log s) for s <= 1; linear beyond.
    u.phi_closed_form = [](double s) { return s <= 1.0 ? s * (2.0 - std::log(s)) : s + 1.0; };
    // (2 + L)/(1 + L)^2 <= 2 with L = log(1/s) >= 0, and (s + 1)/s <= 2 for s >= 1.
    u.gamma = 2.0;
    u.decreasing = true;
    return u;
  }
  throw InvalidArgument("unknown modulus function '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------
// Assumption names

namespace {

constexpr std::array<Assumption, 14> kAllAssumptions = {
    Assumption::Conservative,     Assumption::BandLimited,        Assumption::StateIndependence,
    Assumption::RateLipschitz,    Assumption::LinearGrowth,       Assumption::RateLinearBound,
    Assumption::RateSupLinear,    Assumption::MonotoneModulus,    Assumption::HarnackModulus,
    Assumption::UniformEllipticity, Assumption::BoundedAtOrigin,  Assumption::BoundedConstants,
    Assumption::UClass,           Assumption::PhiDomination};

}  // namespace

std::string_view to_string(Assumption a) noexcept {
  switch (a) {
    case Assumption::Conservative: return "conservative";
    case Assumption::BandLimited: return "band_limited";
    case Assumption::StateIndependence: return "state_independence";
    case Assumption::RateLipschitz: return "rate_lipschitz";
    case Assumption::LinearGrowth: return "linear_growth";
    case Assumption::RateLinearBound: return "rate_linear_bound";
    case Assumption::RateSupLinear: return "rate_sup_linear";
    case Assumption::MonotoneModulus: return "monotone_modulus";
    case Assumption::HarnackModulus: return "harnack_modulus";
    case Assumption::UniformEllipticity: return "uniform_ellipticity";
    case Assumption::BoundedAtOrigin: return "bounded_at_origin";
    case Assumption::BoundedConstants: return "bounded_constants";
    case Assumption::UClass: return "u_class";
    case Assumption::PhiDomination: return "phi_domination";
  }
  return "unknown";
}

std::optional<Assumption> parse_assumption(std::string_view name) noexcept {
  for (auto a : kAllAssumptions) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

std::span<const Assumption> all_assumptions() noexcept { return kAllAssumptions; }

double ModelSpec::integrated_growth(double T) const {
  if (growth_integral) return growth_integral(T);
  if (!growth) throw MissingMetadata("model '" + id + "' has no growth envelope c(t)");
  if (T <= 0.0) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(growth, 0.0, T, 15, 1e-12);
}

// ---------------------------------------------------------------------------
// Assumption checking

const AssumptionResult& AssumptionReport::get(Assumption a) const {
  for (const auto& r : results) {
    if (r.which == a) return r;
  }
  throw InvalidArgument("assumption not in report");
}

bool AssumptionReport::passes(std::span<const Assumption> subset) const {
  return std::all_of(subset.begin(), subset.end(), [this](Assumption a) { return get(a).pass; });
}

bool AssumptionReport::all_pass() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
}

nlohmann::json AssumptionReport::to_json() const {
  auto out = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json item{{"assumption", to_string(r.which)},
                        {"pass", r.pass},
                        {"max_violation", r.max_violation}};
    if (r.witness) {
      item["witness"] = {{"t", r.witness->t}, {"x", r.witness->x}, {"y", r.witness->y},
                         {"i", r.witness->i}, {"j", r.witness->j}};
    }
    if (!r.note.empty()) item["note"] = r.note;
    out.push_back(std::move(item));
  }
  return out;
}

namespace {

constexpr double kRelTol = 1e-9;

class Tracker {
 public:
  explicit Tracker(Assumption a) { result_.which = a; }

  // Records lhs - rhs; a violation beyond the relative tolerance fails.
  void observe(double lhs, double rhs, const Witness& w) {
    const double v = lhs - rhs;
    if (std::isnan(v)) {
      fail(std::numeric_limits<double>::infinity(), w, "non-finite evaluation");
      return;
    }
    result_.max_violation = std::max(result_.max_violation, v);
    if (v > kRelTol * (1.0 + std::abs(rhs))) fail(v, w, {});
  }

  void fail(double v, const Witness& w, std::string note) {
    result_.max_violation = std::max(result_.max_violation, v);
    if (result_.pass) {
      result_.pass = false;
      result_.witness = w;
      if (!note.empty()) result_.note = std::move(note);
    }
    failing_.insert(w.i);
  }

  void missing(std::string what) {
    result_.pass = false;
    result_.note = "missing metadata: " + std::move(what);
  }

  void note(std::string text) {
    if (result_.note.empty()) result_.note = std::move(text);
  }

  void set_sup(double value) { result_.max_violation = std::max(result_.max_violation, value); }

  AssumptionResult finish() {
    if (!failing_.empty() && failing_.size() > 1) {
      std::string regs;
      for (int i : failing_) regs += (regs.empty() ? "" : ",") + std::to_string(i);
      if (result_.note.empty()) result_.note = "failing regimes: " + regs;
    } else if (!failing_.empty() && result_.note.empty()) {
      result_.note = "failing regimes: " + std::to_string(*failing_.begin());
    }
    return result_;
  }

 private:
  AssumptionResult result_;
  std::set<int> failing_;
};

double dot(PointView a, PointView b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm2(PointView a) { return dot(a, a); }

double frob2(std::span<const double> m) {
  double s = 0.0;
  for (double v : m) s += v * v;
  return s;
}

double smallest_singular_value(std::span<const double> m, int d) {
  if (d == 1) return std::abs(m[0]);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mat(
      m.data(), d, d);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
  return svd.singularValues()(d - 1);
}

void sample_ball(const NoiseStream& noise, std::uint64_t index, std::uint32_t slot, double radius,
                 std::span<double> out) {
  const int d = static_cast<int>(out.size());
  double n2 = 0.0;
  for (int k = 0; k < d; k += 2) {
    const auto z = noise.normals(Channel::Auxiliary, index, slot, static_cast<std::uint32_t>(k / 2));
    out[k] = z[0];
    if (k + 1 < d) out[k + 1] = z[1];
  }
  for (double v : out) n2 += v * v;
  const double u = noise.uniforms(Channel::Auxiliary, index, slot, 1000u)[0];
  const double r = radius * std::pow(u, 1.0 / d) / std::sqrt(std::max(n2, 1e-300));
  for (double& v : out) v *= r;
}

void check_u_class(const UClassFn& u, const std::string& label, Tracker& tracker) {
  if (!u.raw) {
    tracker.missing(label);
    return;
  }
  Witness w;
  // liminf_{r -> 0} (u + r u') > 0, probed by central differences.
  double worst = std::numeric_limits<double>::infinity();
  for (int e = 1; e <= 12; ++e) {
    const double r = std::pow(10.0, -e);
    const double h = r * 1e-4;
    const double du = (u.u(r + h) - u.u(r - h)) / (2.0 * h);
    worst = std::min(worst, u.u(r) + r * du);
  }
  w.t = worst;
  tracker.observe(0.0, worst, w);
  // Divergence of int_0^1 ds / (s u(s)): after s = exp(-v) this is
  // int_0^V dv / u(exp(-v)); V = 690 reaches s ~ 1e-300. A convergent
  // integrand stays O(1) there, log-type divergence already exceeds 3.
  auto integrand = [&u](double v) { return 1.0 / u.u(std::exp(-v)); };
  const double partial =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, 690.0, 20, 1e-10);
  if (partial < 3.0) {
    tracker.fail(3.0 - partial, w, label + ": int ds/(s u(s)) shows no divergence on sampled range");
  }
}

}  // namespace

AssumptionReport check_assumptions(const ModelSpec& m, const SamplingPlan& plan) {
  const int d = m.dim;
  const QMatrixSpec& q = m.q;
  const int kappa = q.bandwidth;
  const int max_regime = q.finite() ? std::min(plan.max_regime, q.max_state) : plan.max_regime;
  const std::array<double, 3> times{0.0, 0.5 * plan.horizon, plan.horizon};
  const NoiseStream noise(plan.seed);

  Tracker conservative(Assumption::Conservative), band(Assumption::BandLimited),
      independence(Assumption::StateIndependence), lipschitz(Assumption::RateLipschitz),
      growth(Assumption::LinearGrowth), linear(Assumption::RateLinearBound),
      sup_linear(Assumption::RateSupLinear), monotone(Assumption::MonotoneModulus),
      harnack(Assumption::HarnackModulus), elliptic(Assumption::UniformEllipticity),
      origin(Assumption::BoundedAtOrigin), constants(Assumption::BoundedConstants),
      uclass(Assumption::UClass), domination(Assumption::PhiDomination);

  const bool have_growth = static_cast<bool>(m.growth);
  const bool have_modulus = static_cast<bool>(m.modulus) && static_cast<bool>(m.u.raw);
  const bool have_sigma_modulus = static_cast<bool>(m.sigma_modulus) && static_cast<bool>(m.u_sigma.raw);
  const bool have_lambda = static_cast<bool>(m.ellipticity);
  if (!have_growth) growth.missing("growth envelope c(t)");
  if (!have_modulus) monotone.missing("C_i(t) and u");
  if (!have_modulus || !have_sigma_modulus) harnack.missing("C_i(t), tilde C_i(t), u, tilde u");
  if (!have_lambda) elliptic.missing("ellipticity lambda(t)");
  if (!m.modulus) constants.missing("C_i(t)");
  if (std::isnan(q.lipschitz_cq)) lipschitz.missing("c_q");
  if (std::isnan(q.linear_bound_alpha) || std::isnan(q.linear_bound_beta)) {
    linear.missing("alpha, beta");
  }
  if (std::isnan(q.linear_bound_alpha)) sup_linear.missing("alpha");
  if (!q.state_independent) independence.note("not declared state-independent");
  if (have_modulus && !m.u.decreasing) {
    harnack.fail(std::numeric_limits<double>::infinity(), Witness{}, "u is not declared decreasing");
  }

  Point x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d)), diff(static_cast<std::size_t>(d));
  std::vector<double> bx(d), by(d), sx(d * d), sy(d * d), sdiff(d * d);

  const int total_pairs = plan.pairs + plan.local_pairs;
  for (int pair = 0; pair < total_pairs; ++pair) {
    sample_ball(noise, static_cast<std::uint64_t>(pair), 0u, plan.radius, x);
    if (pair < plan.pairs) {
      sample_ball(noise, static_cast<std::uint64_t>(pair), 1u, plan.radius, y);
    } else {
      sample_ball(noise, static_cast<std::uint64_t>(pair), 1u, 1.0, diff);
      const double nd = std::sqrt(std::max(norm2(diff), 1e-300));
      const double sep = std::pow(10.0, -8.0 + 8.0 * noise.uniforms(Channel::Auxiliary, pair, 2u, 0u)[0]);
      for (int k = 0; k < d; ++k) y[k] = x[k] + sep * diff[k] / nd;
    }
    for (int k = 0; k < d; ++k) diff[k] = x[k] - y[k];
    const double dist2 = norm2(diff);
    const double dist = std::sqrt(dist2);
    const double nx = std::sqrt(norm2(x));

    for (int i = 1; i <= max_regime; ++i) {
      Witness w{0.0, x, y, i, 0};
      // Rates.
      double qx = 0.0, qy = 0.0;
      bool rates_ok = true;
      for (int j = std::max(1, i - kappa - 3); j <= i + kappa + 3; ++j) {
        if (j == i || (q.finite() && j > q.max_state)) continue;
        w.j = j;
        double rx = 0.0, ry = 0.0;
        try {
          rx = q.rate(x, i, j);
          ry = q.rate(y, i, j);
        } catch (const std::exception& ex) {
          conservative.fail(std::numeric_limits<double>::infinity(), w, ex.what());
          rates_ok = false;
          continue;
        }
        if (std::abs(j - i) > kappa) {
          band.observe(std::max(std::abs(rx), std::abs(ry)), 0.0, w);
          continue;
        }
        if (!std::isfinite(rx) || !std::isfinite(ry)) {
          conservative.fail(std::numeric_limits<double>::infinity(), w, "non-finite rate");
          rates_ok = false;
          continue;
        }
        conservative.observe(-std::min(rx, ry), 0.0, w);
        qx += rx;
        qy += ry;
        if (q.state_independent) independence.observe(std::abs(rx - ry), 0.0, w);
        if (!std::isnan(q.lipschitz_cq)) lipschitz.observe(std::abs(rx - ry), q.lipschitz_cq * dist, w);
      }
      w.j = 0;
      if (rates_ok) {
        if (!std::isnan(q.linear_bound_alpha) && !std::isnan(q.linear_bound_beta)) {
          linear.observe(qx, q.linear_bound_alpha * i + q.linear_bound_beta * nx, w);
        }
        if (!std::isnan(q.linear_bound_alpha)) {
          sup_linear.observe(std::max(qx, qy), q.linear_bound_alpha * i, w);
        }
      }

      // Coefficients.
      for (double t : times) {
        w.t = t;
        m.drift(t, x, i, bx);
        m.drift(t, y, i, by);
        m.diffusion(t, x, i, sx);
        m.diffusion(t, y, i, sy);
        for (std::size_t k = 0; k < sdiff.size(); ++k) sdiff[k] = sx[k] - sy[k];
        const double sdiff2 = frob2(sdiff);
        double inner = 0.0;
        for (int k = 0; k < d; ++k) inner += diff[k] * (bx[k] - by[k]);

        if (have_growth) {
          const double env = m.growth(t) * (1.0 + norm2(x));
          growth.observe(dot(x, bx), env, w);
          growth.observe(frob2(sx), env, w);
        }
        if (have_modulus) {
          const double rhs = m.modulus(i, t) * dist2 * m.u.u(dist2);
          monotone.observe(inner + 0.5 * sdiff2, rhs, w);
          if (have_sigma_modulus) {
            harnack.observe(inner + 0.5 * sdiff2, rhs, w);
            const double us = m.u_sigma.u(dist);
            harnack.observe(sdiff2, m.sigma_modulus(i, t) * dist2 * us * us, w);
          }
        }
        if (have_lambda) {
          elliptic.observe(m.ellipticity(t), smallest_singular_value(sx, d), w);
        }
      }
    }
  }

  // Boundedness at the origin and of the modulus constants.
  {
    const Point zero(static_cast<std::size_t>(d), 0.0);
    for (double t : times) {
      for (int i = 1; i <= max_regime; ++i) {
        Witness w{t, zero, zero, i, 0};
        m.drift(t, zero, i, bx);
        m.diffusion(t, zero, i, sx);
        const double v = std::sqrt(norm2(bx)) + std::sqrt(frob2(sx));
        if (!std::isfinite(v)) origin.fail(v, w, "non-finite coefficient at the origin");
        origin.set_sup(v);
        if (m.modulus && t > 0.0) {
          const double c = m.modulus(i, t);
          if (!(c > 0.0) || !std::isfinite(c)) {
            constants.fail(std::isfinite(c) ? -c : c, w, "C_i(t) not in (0, inf)");
          }
          constants.set_sup(c);
        }
      }
    }
  }

  // Modulus function class and the phi domination.
  if (have_modulus) {
    check_u_class(m.u, "u", uclass);
    if (m.u_sigma.raw) check_u_class(m.u_sigma, "tilde u", uclass);
    if (m.u.decreasing) {
      double prev = m.u.u(1e-12);
      for (int k = 1; k <= 90; ++k) {
        const double s = std::pow(10.0, -12.0 + 18.0 * k / 90.0);
        const double cur = m.u.u(s);
        Witness w;
        w.t = s;
        harnack.observe(cur, prev, w);
        prev = cur;
      }
    }
    for (int k = 0; k <= 90; ++k) {
      const double s = std::pow(10.0, -12.0 + 18.0 * k / 90.0);
      Witness w;
      w.t = s;
      const double us = m.u.u(s);
      domination.observe(m.u.phi(s), m.u.gamma * s * us * us, w);
    }
  } else {
    uclass.missing("u");
    domination.missing("u");
  }

  AssumptionReport report;
  for (Tracker* t : {&conservative, &band, &independence, &lipschitz, &growth, &linear, &sup_linear,
                     &monotone, &harnack, &elliptic, &origin, &constants, &uclass, &domination}) {
    report.results.push_back(t->finish());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Zoo

namespace {

constexpr std::array<std::string_view, 4> kZooNames = {"switching_ou", "degenerate_regime",
                                                        "birth_death_switch", "nonlipschitz_log"};
constexpr std::array<std::string_view, 8> kOuKeys = {"dim",    "beta",        "offset",
                                                      "sigma",  "switch_rate", "rate_modulation",
                                                      "rates",  "modulus_floor"};
constexpr std::array<std::string_view, 3> kDegenerateKeys = {"dim", "switch_rate", "modulus_floor"};
constexpr std::array<std::string_view, 3> kBirthDeathKeys = {"dim", "sigma", "modulus_floor"};
constexpr std::array<std::string_view, 4> kLogKeys = {"strength", "sigma", "switch_rate",
                                                       "modulus_floor"};

void require_keys(std::string_view model, const nlohmann::json& params,
                  std::span<const std::string_view> allowed) {
  if (params.is_null()) return;
  if (!params.is_object()) throw ConfigError("parameters of '" + std::string(model) + "' must be an object");
  for (const auto& [key, value] : params.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown parameter '" + key + "' for model '" + std::string(model) + "'");
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& params, const char* key, T fallback) {
  if (params.is_null() || !params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("parameter '") + key + "': " + e.what());
  }
}

std::vector<double> broadcast(std::vector<double> v, std::size_t n, const char* key) {
  if (v.size() == n) return v;
  if (v.size() == 1) return std::vector<double>(n, v[0]);
  throw ConfigError(std::string("parameter '") + key + "' must have one entry per regime");
}

std::vector<Assumption> standard_advertised(bool state_independent, bool elliptic) {
  std::vector<Assumption> a{Assumption::Conservative,    Assumption::BandLimited,
                            Assumption::RateLipschitz,   Assumption::LinearGrowth,
                            Assumption::RateLinearBound, Assumption::RateSupLinear,
                            Assumption::MonotoneModulus, Assumption::HarnackModulus,
                            Assumption::BoundedAtOrigin, Assumption::BoundedConstants,
                            Assumption::UClass,          Assumption::PhiDomination};
  if (state_independent) a.push_back(Assumption::StateIndependence);
  if (elliptic) a.push_back(Assumption::UniformEllipticity);
  return a;
}

double point_norm(PointView x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

ModelSpec make_switching_ou(const nlohmann::json& p) {
  const int dim = get_or<int>(p, "dim", 1);
  if (dim < 1) throw ConfigError("switching_ou: dim must be positive");
  const auto beta = get_or<std::vector<double>>(p, "beta", {1.0, 2.0});
  if (beta.empty()) throw ConfigError("switching_ou: beta must be non-empty");
  const std::size_t n = beta.size();
  const auto offset = broadcast(get_or<std::vector<double>>(p, "offset", {0.0}), n, "offset");
  const auto sigma = broadcast(get_or<std::vector<double>>(p, "sigma", {1.0}), n, "sigma");
  const double switch_rate = get_or<double>(p, "switch_rate", 1.0);
  const double modulation = get_or<double>(p, "rate_modulation", 0.0);
  const double floor = get_or<double>(p, "modulus_floor", 0.1);
  if (switch_rate < 0.0 || modulation < 0.0 || floor <= 0.0) {
    throw ConfigError("switching_ou: switch_rate, rate_modulation must be >= 0 and modulus_floor > 0");
  }

  // Base (x-independent) rate table.
  std::vector<std::vector<double>> base(n, std::vector<double>(n, 0.0));
  if (p.is_object() && p.contains("rates")) {
    base = get_or<std::vector<std::vector<double>>>(p, "rates", {});
    if (base.size() != n) throw ConfigError("switching_ou: rates must be an n x n matrix");
    for (std::size_t i = 0; i < n; ++i) {
      if (base[i].size() != n) throw ConfigError("switching_ou: rates must be an n x n matrix");
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && base[i][j] < 0.0) throw ConfigError("switching_ou: negative rate");
      }
    }
  } else {
    for (std::size_t i = 0; i + 1 < n; ++i) base[i][i + 1] = base[i + 1][i] = switch_rate;
  }
  int bandwidth = 1;
  double max_rate = 0.0;
  double alpha = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || base[i][j] == 0.0) continue;
      bandwidth = std::max(bandwidth, static_cast<int>(i > j ? i - j : j - i));
      max_rate = std::max(max_rate, base[i][j]);
      row += base[i][j];
    }
    alpha = std::max(alpha, row * (1.0 + modulation) / static_cast<double>(i + 1));
  }

  ModelSpec m;
  m.id = "switching_ou";
  m.dim = dim;
  m.drift = [beta, offset](double, PointView x, int i, std::span<double> out) {
    const double b = beta[i - 1], a = offset[i - 1];
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = -b * x[k] + a;
  };
  m.diffusion = [sigma, dim](double, PointView, int i, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int k = 0; k < dim; ++k) out[k * dim + k] = sigma[i - 1];
  };
  m.q.bandwidth = bandwidth;
  m.q.max_state = static_cast<int>(n);
  m.q.lipschitz_cq = max_rate * modulation;
  m.q.linear_bound_alpha = alpha;
  m.q.linear_bound_beta = 0.0;
  m.q.state_independent = modulation == 0.0;
  if (modulation == 0.0) {
    m.q.rate = [base](PointView, int i, int j) {
      if (i < 1 || j < 1 || i > static_cast<int>(base.size()) || j > static_cast<int>(base.size())) return 0.0;
      return i == j ? 0.0 : base[i - 1][j - 1];
    };
  } else {
    m.q.rate = [base, modulation](PointView x, int i, int j) {
      if (i < 1 || j < 1 || i > static_cast<int>(base.size()) || j > static_cast<int>(base.size())) return 0.0;
      if (i == j) return 0.0;
      const double r = point_norm(x);
      return base[i - 1][j - 1] * (1.0 + modulation * r / (1.0 + r));
    };
  }

  double c = 0.0, lambda = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    c = std::max(c, sigma[i] * sigma[i] * dim);
    c = std::max(c, std::max(0.0, -beta[i]) + std::abs(offset[i]) * std::sqrt(static_cast<double>(dim)));
    lambda = std::min(lambda, std::abs(sigma[i]));
  }
  c = std::max(c, 1e-12);
  m.growth = [c](double) { return c; };
  m.growth_integral = [c](double T) { return c * T; };
  m.modulus = [beta, floor](int i, double) { return std::max(-beta[i - 1], floor); };
  m.sigma_modulus = [floor](int, double) { return floor; };
  m.ellipticity = [lambda](double) { return lambda; };
  m.u = u_class("one");
  m.u_sigma = u_class("one");
  m.advertised = standard_advertised(m.q.state_independent, lambda > 0.0);
  return m;
}

ModelSpec make_degenerate_regime(const nlohmann::json& p) {
  const int dim = get_or<int>(p, "dim", 1);
  const double r = get_or<double>(p, "switch_rate", 1.0);
  const double floor = get_or<double>(p, "modulus_floor", 0.1);
  if (dim < 1 || r < 0.0 || floor <= 0.0) throw ConfigError("degenerate_regime: invalid parameters");

  ModelSpec m;
  m.id = "degenerate_regime";
  m.dim = dim;
  m.drift = [](double, PointView, int, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  m.diffusion = [dim](double, PointView, int i, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    if (i == 2) {
      for (int k = 0; k < dim; ++k) out[k * dim + k] = 1.0;
    }
  };
  m.q.bandwidth = 1;
  m.q.max_state = 2;
  m.q.lipschitz_cq = 0.0;
  m.q.linear_bound_alpha = r;
  m.q.linear_bound_beta = 0.0;
  m.q.state_independent = true;
  m.q.rate = [r](PointView, int i, int j) {
    return ((i == 1 && j == 2) || (i == 2 && j == 1)) ? r : 0.0;
  };
  const double c = static_cast<double>(dim);
  m.growth = [c](double) { return c; };
  m.growth_integral = [c](double T) { return c * T; };
  m.modulus = [floor](int, double) { return floor; };
  m.sigma_modulus = [floor](int, double) { return floor; };
  // The elliptic regime satisfies lambda = 1; the frozen regime cannot.
  m.ellipticity = [](double) { return 1.0; };
  m.u = u_class("one");
  m.u_sigma = u_class("one");
  m.advertised = standard_advertised(true, false);
  return m;
}

ModelSpec make_birth_death_switch(const nlohmann::json& p) {
  const int dim = get_or<int>(p, "dim", 1);
  const double s = get_or<double>(p, "sigma", 1.0);
  const double floor = get_or<double>(p, "modulus_floor", 0.1);
  if (dim < 1 || floor <= 0.0) throw ConfigError("birth_death_switch: invalid parameters");

  ModelSpec m;
  m.id = "birth_death_switch";
  m.dim = dim;
  m.drift = [](double, PointView x, int i, std::span<double> out) {
    const double b = 1.0 / i;
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = -b * x[k];
  };
  m.diffusion = [s, dim](double, PointView, int, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int k = 0; k < dim; ++k) out[k * dim + k] = s;
  };
  m.q.bandwidth = 1;
  m.q.max_state = 0;
  m.q.lipschitz_cq = 0.0;
  m.q.linear_bound_alpha = 2.0;  // q_i = 2i - 1
  m.q.linear_bound_beta = 0.0;
  m.q.state_independent = true;
  m.q.rate = [](PointView, int i, int j) {
    if (j == i + 1) return static_cast<double>(i);
    if (j == i - 1) return static_cast<double>(i - 1);
    return 0.0;
  };
  const double c = std::max(s * s * dim, 1e-12);
  m.growth = [c](double) { return c; };
  m.growth_integral = [c](double T) { return c * T; };
  m.modulus = [floor](int, double) { return floor; };
  m.sigma_modulus = [floor](int, double) { return floor; };
  const double lambda = std::abs(s);
  m.ellipticity = [lambda](double) { return lambda; };
  m.u = u_class("one");
  m.u_sigma = u_class("one");
  m.advertised = standard_advertised(true, lambda > 0.0);
  return m;
}

ModelSpec make_nonlipschitz_log(const nlohmann::json& p) {
  const auto strength = get_or<std::vector<double>>(p, "strength", {1.0, 0.5});
  const double s = get_or<double>(p, "sigma", 1.0);
  const double r = get_or<double>(p, "switch_rate", 1.0);
  const double floor = get_or<double>(p, "modulus_floor", 0.1);
  if (strength.empty() || r < 0.0 || floor <= 0.0) {
    throw ConfigError("nonlipschitz_log: invalid parameters");
  }
  const int n = static_cast<int>(strength.size());

  ModelSpec m;
  m.id = "nonlipschitz_log";
  m.dim = 1;
  m.drift = [strength](double, PointView x, int i, std::span<double> out) {
    out[0] = strength[i - 1] * log_lipschitz_profile(x[0]);
  };
  m.diffusion = [s](double, PointView, int, std::span<double> out) { out[0] = s; };
  m.q.bandwidth = 1;
  m.q.max_state = n;
  m.q.lipschitz_cq = 0.0;
  m.q.linear_bound_alpha = r;  // q_1 <= r and q_i <= 2r <= r i for i >= 2
  m.q.linear_bound_beta = 0.0;
  m.q.state_independent = true;
  m.q.rate = [r, n](PointView, int i, int j) {
    if (i < 1 || i > n || j < 1 || j > n) return 0.0;
    return std::abs(i - j) == 1 ? r : 0.0;
  };
  double smax = 0.0;
  for (double v : strength) smax = std::max(smax, std::abs(v));
  const double c = std::max({s * s, smax / std::numbers::e, 1e-12});
  m.growth = [c](double) { return c; };
  m.growth_integral = [c](double T) { return c * T; };
  m.modulus = [strength, floor](int i, double) { return std::max(std::abs(strength[i - 1]), floor); };
  m.sigma_modulus = [floor](int, double) { return floor; };
  const double lambda = std::abs(s);
  m.ellipticity = [lambda](double) { return lambda; };
  m.u = u_class("log");
  m.u_sigma = u_class("one");
  m.advertised = standard_advertised(true, lambda > 0.0);
  return m;
}

}  // namespace

double log_lipschitz_profile(double x) noexcept {
  const double ax = std::abs(x);
  if (ax == 0.0) return 0.0;
  const double v = ax <= 1.0 / std::numbers::e ? ax * std::log(1.0 / ax) : 1.0 / std::numbers::e;
  return x < 0.0 ? -v : v;
}

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix square_matrix(const nlohmann::json& j, const char* key, std::size_t n, const std::string& where) {
  Matrix m;
  try {
    m = j.get<Matrix>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
  if (m.size() != n) throw ConfigError(where + "." + key + " must be " + std::to_string(n) + " x " + std::to_string(n));
  for (const auto& row : m) {
    if (row.size() != n) {
      throw ConfigError(where + "." + key + " must be " + std::to_string(n) + " x " + std::to_string(n));
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw ConfigError(where + "." + key + " has a non-finite entry");
    }
  }
  return m;
}

}  // namespace

ModelSpec affine_table_model(const nlohmann::json& table) {
  if (!table.is_object()) throw ConfigError("model.table must be an object");
  for (const auto& [key, value] : table.items()) {
    if (key != "dim" && key != "regimes" && key != "rates" && key != "modulus_floor") {
      throw ConfigError("unknown key '" + key + "' in model.table");
    }
  }
  const int dim = get_or<int>(table, "dim", 1);
  const double floor = get_or<double>(table, "modulus_floor", 0.1);
  if (dim < 1 || !(floor > 0.0)) throw ConfigError("model.table: dim and modulus_floor must be positive");
  if (!table.contains("regimes") || !table.at("regimes").is_array() || table.at("regimes").empty()) {
    throw ConfigError("model.table.regimes must be a non-empty array");
  }
  const auto d = static_cast<std::size_t>(dim);
  const std::size_t n = table.at("regimes").size();

  struct Regime {
    std::vector<double> a;       // d x d row-major
    std::vector<double> offset;  // d
    std::vector<double> s;       // d x d row-major
  };
  std::vector<Regime> regimes(n);
  double c = 1e-12, lambda = std::numeric_limits<double>::infinity();
  std::vector<double> modulus(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& e = table.at("regimes")[r];
    const std::string where = "model.table.regimes[" + std::to_string(r) + "]";
    if (!e.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : e.items()) {
      if (key != "drift_matrix" && key != "drift_offset" && key != "diffusion") {
        throw ConfigError("unknown key '" + key + "' in " + where);
      }
    }
    Matrix a(d, std::vector<double>(d, 0.0)), s(d, std::vector<double>(d, 0.0));
    for (std::size_t k = 0; k < d; ++k) s[k][k] = 1.0;
    if (e.contains("drift_matrix")) a = square_matrix(e.at("drift_matrix"), "drift_matrix", d, where);
    if (e.contains("diffusion")) s = square_matrix(e.at("diffusion"), "diffusion", d, where);
    std::vector<double> offset(d, 0.0);
    if (e.contains("drift_offset")) {
      offset = get_or<std::vector<double>>(e, "drift_offset", offset);
      if (offset.size() != d) throw ConfigError(where + ".drift_offset must have " + std::to_string(d) + " entries");
    }

    Eigen::MatrixXd am(dim, dim), sm(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        am(i, j) = a[i][j];
        sm(i, j) = s[i][j];
      }
    }
    const Eigen::MatrixXd sym = 0.5 * (am + am.transpose());
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().maxCoeff();
    const double smin = Eigen::JacobiSVD<Eigen::MatrixXd>(sm).singularValues().minCoeff();
    // <x, A x + a> <= (top+ + |a|)(1 + |x|^2) and ||S||^2 is constant.
    c = std::max({c, sm.squaredNorm(), std::max(0.0, top) + point_norm(offset)});
    lambda = std::min(lambda, smin);
    modulus[r] = std::max(top, floor);

    Regime& reg = regimes[r];
    reg.offset = offset;
    for (std::size_t i = 0; i < d; ++i) {
      reg.a.insert(reg.a.end(), a[i].begin(), a[i].end());
      reg.s.insert(reg.s.end(), s[i].begin(), s[i].end());
    }
  }

  Matrix rates(n, std::vector<double>(n, 0.0));
  if (table.contains("rates")) rates = square_matrix(table.at("rates"), "rates", n, "model.table");
  int bandwidth = 1;
  double alpha = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rates[i][j] < 0.0) throw ConfigError("model.table.rates has a negative off-diagonal entry");
      if (rates[i][j] == 0.0) continue;
      bandwidth = std::max(bandwidth, static_cast<int>(i > j ? i - j : j - i));
      row += rates[i][j];
    }
    alpha = std::max(alpha, row / static_cast<double>(i + 1));
  }

  ModelSpec m;
  m.id = "affine_table";
  m.dim = dim;
  m.drift = [regimes, d](double, PointView x, int i, std::span<double> out) {
    const Regime& reg = regimes[static_cast<std::size_t>(i - 1)];
    for (std::size_t k = 0; k < d; ++k) {
      double v = reg.offset[k];
      for (std::size_t l = 0; l < d; ++l) v += reg.a[k * d + l] * x[l];
      out[k] = v;
    }
  };
  m.diffusion = [regimes](double, PointView, int i, std::span<double> out) {
    const auto& s = regimes[static_cast<std::size_t>(i - 1)].s;
    std::copy(s.begin(), s.end(), out.begin());
  };
  m.q.bandwidth = bandwidth;
  m.q.max_state = static_cast<int>(n);
  m.q.lipschitz_cq = 0.0;
  m.q.linear_bound_alpha = alpha;
  m.q.linear_bound_beta = 0.0;
  m.q.state_independent = true;
  m.q.rate = [rates](PointView, int i, int j) {
    const int n = static_cast<int>(rates.size());
    if (i < 1 || j < 1 || i > n || j > n || i == j) return 0.0;
    return rates[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
  };
  m.growth = [c](double) { return c; };
  m.growth_integral = [c](double T) { return c * T; };
  m.modulus = [modulus](int i, double) { return modulus[static_cast<std::size_t>(i - 1)]; };
  m.sigma_modulus = [floor](int, double) { return floor; };
  m.ellipticity = [lambda](double) { return lambda; };
  m.u = u_class("one");
  m.u_sigma = u_class("one");
  m.advertised = standard_advertised(true, lambda > 0.0);
  return m;
}

std::span<const std::string_view> zoo_names() noexcept { return kZooNames; }

std::span<const std::string_view> zoo_param_keys(std::string_view name) {
  if (name == "switching_ou") return kOuKeys;
  if (name == "degenerate_regime") return kDegenerateKeys;
  if (name == "birth_death_switch") return kBirthDeathKeys;
  if (name == "nonlipschitz_log") return kLogKeys;
  throw ConfigError("unknown zoo model '" + std::string(name) + "'");
}

ModelSpec zoo(std::string_view name, const nlohmann::json& params) {
  require_keys(name, params, zoo_param_keys(name));
  if (name == "switching_ou") return make_switching_ou(params);
  if (name == "degenerate_regime") return make_degenerate_regime(params);
  if (name == "birth_death_switch") return make_birth_death_switch(params);
  return make_nonlipschitz_log(params);
}

}  // namespace rswitch
