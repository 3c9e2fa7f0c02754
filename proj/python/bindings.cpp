// Thin Python bindings. Structured values (model parameters, test functions,
// reports) cross the boundary as JSON text; the Python package converts them
// to and from dicts.

#include "rswitch/cli.hpp"
#include "rswitch/engine.hpp"
#include "rswitch/errors.hpp"
#include "rswitch/estimators.hpp"
#include "rswitch/regime_graph.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace rswitch;

namespace {

SimConfig make_sim(double T, double dt, std::uint64_t seed, const std::string& scheme, int threads) {
  SimConfig c;
  c.T = T;
  c.dt = dt;
  c.seed = seed;
  c.scheme = parse_scheme(scheme);
  c.threads = threads;
  c.validate();
  return c;
}

py::dict trajectory_dict(const Trajectory& tr) {
  const auto rows = static_cast<py::ssize_t>(tr.size());
  py::array_t<double> xs({rows, static_cast<py::ssize_t>(tr.dim)});
  std::copy(tr.xs.begin(), tr.xs.end(), xs.mutable_data());
  py::list jumps;
  for (const auto& j : tr.jumps) jumps.append(py::make_tuple(j.time, j.from, j.to, j.mark));
  py::dict d;
  d["times"] = py::array_t<double>(rows, tr.times.data());
  d["x"] = xs;
  d["regimes"] = py::array_t<int>(rows, tr.regimes.data());
  d["flags"] = py::array_t<std::uint8_t>(rows, tr.flags.data());
  d["jumps"] = jumps;
  d["eta"] = tr.eta;
  d["tau_K"] = tr.tau_K ? py::cast(*tr.tau_K) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Regime-switching diffusion simulator (compiled core)";

  // Base first: translators are tried most-recent first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvalidModel>(m, "InvalidModel", PyExc_ValueError);
  py::register_exception<Unsupported>(m, "Unsupported", PyExc_NotImplementedError);
  py::register_exception<NumericalBlowup>(m, "NumericalBlowup", PyExc_ArithmeticError);

  py::class_<ModelSpec>(m, "Model")
      .def_readonly("id", &ModelSpec::id)
      .def_readonly("dim", &ModelSpec::dim)
      .def_property_readonly("regimes", &ModelSpec::regimes)
      .def_property_readonly("bandwidth", [](const ModelSpec& s) { return s.q.bandwidth; })
      .def_property_readonly("state_independent", [](const ModelSpec& s) { return s.q.state_independent; })
      .def("rate", [](const ModelSpec& s, const Point& x, int i, int j) { return s.q.at(x, i, j); })
      .def("generator", [](const ModelSpec& s, const Point& x) { return s.q.generator(x); })
      .def("__repr__", [](const ModelSpec& s) { return "<Model " + s.id + " dim=" + std::to_string(s.dim) + ">"; });

  m.def("zoo_names", [] {
    std::vector<std::string> out;
    for (auto n : zoo_names()) out.emplace_back(n);
    return out;
  });
  m.def("_zoo", [](const std::string& name, const std::string& params) {
    return zoo(name, nlohmann::json::parse(params));
  });
  m.def("_table_model", [](const std::string& table) { return affine_table_model(nlohmann::json::parse(table)); });
  m.def("_check_assumptions", [](const ModelSpec& model, int pairs, int max_regime, double horizon) {
    SamplingPlan plan;
    plan.pairs = pairs;
    plan.local_pairs = pairs;
    plan.max_regime = max_regime;
    plan.horizon = horizon;
    return check_assumptions(model, plan).to_json().dump();
  });

  m.def(
      "simulate_path",
      [](const ModelSpec& model, const Point& x0, int i0, double T, double dt, std::uint64_t seed,
         const std::string& scheme, std::uint64_t replica) {
        const SimConfig c = make_sim(T, dt, seed, scheme, 1);
        Trajectory tr;
        {
          py::gil_scoped_release release;
          PathOptions opts;
          opts.record = &tr;
          run_path(model, x0, i0, c, NoiseStream(seed), replica, opts);
        }
        return trajectory_dict(tr);
      },
      py::arg("model"), py::arg("x0"), py::arg("i0") = 1, py::arg("T") = 1.0, py::arg("dt") = 1e-3,
      py::arg("seed") = kDefaultSeed, py::arg("scheme") = "frozen_rate", py::arg("replica") = 0);

  m.def(
      "_semigroup_estimate",
      [](const ModelSpec& model, const std::string& f, double t, const Point& x, int i, std::int64_t n, double dt,
         std::uint64_t seed, const std::string& scheme, int threads) {
        const auto fn = TestFunction::from_json(nlohmann::json::parse(f));
        const SimConfig c = make_sim(t, dt, seed, scheme, threads);
        py::gil_scoped_release release;
        const auto e = semigroup_estimate(model, fn, t, x, i, n, c);
        return std::make_tuple(e.mean, e.std_error, e.n, e.n_aborted);
      });

  m.def("transition_matrix", [](const Eigen::MatrixXd& q, double t) { return transition_matrix(q, t); },
        py::arg("generator"), py::arg("t"));
  m.def("xi_generator", [](int K, double alpha, int kappa, int size) { return xi_generator({K, alpha, kappa}, size); },
        py::arg("K"), py::arg("alpha"), py::arg("kappa"), py::arg("size"));
  m.def("cutoff", [](const Point& x, int K) { return cutoff(x, K); });

  m.def("_lipschitz_sweep", [](std::uint64_t seed, std::int64_t cases, int max_regime) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : lipschitz_sweep(seed, cases, max_regime, 0)) out.push_back(r.to_json());
    return out.dump();
  });

  m.def(
      "run_cli",
      [](const std::string& subcommand, const std::string& config_path) {
        std::ostringstream err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run_file(subcommand, config_path, cli::Overrides{}, err);
        }
        return std::make_tuple(code, err.str());
      },
      py::arg("subcommand"), py::arg("config_path"));
  m.attr("DEFAULT_SEED") = kDefaultSeed;
}
