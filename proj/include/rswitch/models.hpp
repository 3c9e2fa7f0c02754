#pragma once

// Model specification for regime-switching diffusions
//
//   dX_t = b(t, X_t, L_t) dt + sigma(t, X_t, L_t) dW_t,
//   P(L_{t+d} = j | L_t = i, X_t = x) = q_ij(x) d + o(d),
//
// together with the regularity metadata that the verification layer reads
// (growth envelope c(t), per-regime modulus constants C_i(t), ellipticity
// lambda(t), and the modulus function u).

#include "rswitch/noise.hpp"
#include "rswitch/regime_graph.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rswitch {

/// Writes b(t, x, i) into `out` (length d).
using DriftFn = std::function<void(double t, PointView x, int i, std::span<double> out)>;
/// Writes sigma(t, x, i) into `out` (d x d, row-major).
using DiffusionFn = std::function<void(double t, PointView x, int i, std::span<double> out)>;
using TimeFn = std::function<double(double t)>;
using RegimeTimeFn = std::function<double(int i, double t)>;

/// A modulus function u: [0, inf) -> [1, inf) with phi(s) = int_0^s u(r) dr.
struct UClassFn {
  std::string id;
  std::function<double(double)> raw;
  /// Optional closed form of phi; quadrature is used when empty.
  std::function<double(double)> phi_closed_form;
  /// Smallest gamma with phi(s) <= gamma s u(s)^2 known for this u.
  double gamma = 1.0;
  /// Declared u' <= 0.
  bool decreasing = false;

  /// max(u(s), 1).
  double u(double s) const { return std::max(raw(s), 1.0); }
  double phi(double s) const;
  double phi_quadrature(double s) const;
};

/// Registry of modulus functions: "one" (u = 1) and "log" (u = 1 + log+(1/s)).
UClassFn u_class(std::string_view id);

enum class Assumption {
  Conservative,        // nonnegative finite rates, finite exit rates
  BandLimited,         // q_ij = 0 for |j - i| > kappa
  StateIndependence,   // declared state independence is consistent
  RateLipschitz,       // |q_ij(x) - q_ij(y)| <= c_q |x - y|
  LinearGrowth,        // <x, b> and ||sigma||^2 bounded by c(t)(1 + |x|^2)
  RateLinearBound,     // q_i(x) <= alpha i + beta |x|
  RateSupLinear,       // sup_x q_i(x) <= alpha i
  MonotoneModulus,     // <x-y, b-b> + |sigma-sigma|^2/2 <= C_i(t)|x-y|^2 u(|x-y|^2)
  HarnackModulus,      // MonotoneModulus with u' <= 0, plus the sigma modulus
  UniformEllipticity,  // |sigma y| >= lambda(t) |y|
  BoundedAtOrigin,     // sup_{t,i} |b(t,0,i)| + ||sigma(t,0,i)|| < inf
  BoundedConstants,    // 0 < inf_i C_i(t) <= sup_i C_i(t) < inf
  UClass,              // u >= 1, liminf (u + r u') > 0, int ds/(s u) diverges
  PhiDomination,       // phi(s) <= gamma s u(s)^2
};

std::string_view to_string(Assumption a) noexcept;
std::optional<Assumption> parse_assumption(std::string_view name) noexcept;
std::span<const Assumption> all_assumptions() noexcept;

struct ModelSpec {
  std::string id;
  int dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  QMatrixSpec q;

  TimeFn growth;           // c(t)
  TimeFn growth_integral;  // optional closed form of int_0^T c(s) ds
  RegimeTimeFn modulus;        // C_i(t)
  RegimeTimeFn sigma_modulus;  // tilde C_i(t)
  TimeFn ellipticity;          // lambda(t)
  UClassFn u;
  UClassFn u_sigma;

  std::vector<Assumption> advertised;

  /// Number of regimes, 0 when countably infinite.
  int regimes() const noexcept { return q.max_state; }
  /// int_0^T c(s) ds (closed form when available, Gauss-Kronrod otherwise).
  double integrated_growth(double T) const;
};

/// Falsification sampling plan. Checks are necessary conditions evaluated on
/// samples, never proofs.
struct SamplingPlan {
  int pairs = 10000;        // uniform pairs in the ball |x| <= radius
  int local_pairs = 10000;  // pairs at log-uniform separations in [1e-8, 1]
  double radius = 10.0;
  double horizon = 1.0;     // times {0, T/2, T}
  int max_regime = 20;
  std::uint64_t seed = kDefaultSeed;
};

struct Witness {
  double t = 0.0;
  Point x;
  Point y;
  int i = 0;
  int j = 0;
};

struct AssumptionResult {
  Assumption which{};
  bool pass = true;
  /// Largest sampled lhs - rhs (nonpositive when the condition held), or the
  /// sampled supremum for the boundedness checks.
  double max_violation = -std::numeric_limits<double>::infinity();
  std::optional<Witness> witness;
  std::string note;
};

struct AssumptionReport {
  std::vector<AssumptionResult> results;

  const AssumptionResult& get(Assumption a) const;
  bool passes(std::span<const Assumption> subset) const;
  bool all_pass() const;
  nlohmann::json to_json() const;
};

AssumptionReport check_assumptions(const ModelSpec& model, const SamplingPlan& plan = {});

// ---------------------------------------------------------------------------
// Model zoo

/// Builds a named model. `params` is a JSON object whose keys must belong to
/// the documented key set of that model; unknown keys raise ConfigError.
///
///   switching_ou       dim, beta[], offset[], sigma[], switch_rate,
///                      rate_modulation, rates[][], modulus_floor
///   degenerate_regime  dim, switch_rate, modulus_floor
///   birth_death_switch dim, sigma, modulus_floor
///   nonlipschitz_log   strength[], sigma, switch_rate, modulus_floor
ModelSpec zoo(std::string_view name, const nlohmann::json& params = nlohmann::json::object());

std::span<const std::string_view> zoo_names() noexcept;

/// Documented parameter keys of a zoo model.
std::span<const std::string_view> zoo_param_keys(std::string_view name);

/// Model read from an external coefficient table:
///   {"dim": d,
///    "regimes": [{"drift_matrix": [[..]], "drift_offset": [..], "diffusion": [[..]]}, ...],
///    "rates": n x n off-diagonal switching rates,
///    "modulus_floor": 0.1}
/// Drift A_i x + a_i, constant diffusion S_i, state-independent switching.
/// Omitted drift entries default to zero and an omitted diffusion to the identity.
ModelSpec affine_table_model(const nlohmann::json& table);

/// The modulus drift of the nonlipschitz_log model: x log(1/|x|) on
/// |x| <= 1/e, continued by the constant sign(x)/e.
double log_lipschitz_profile(double x) noexcept;

}  // namespace rswitch
