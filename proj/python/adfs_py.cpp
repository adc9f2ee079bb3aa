#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "adfs/adfs.hpp"
#include "adfs/baselines.hpp"
#include "adfs/experiment.hpp"

namespace py = pybind11;
using namespace adfs;

namespace {

ExperimentConfig to_config(const std::map<std::string, std::string>& entries) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : entries) set_config_value(cfg, key, value);
  cfg.validate();
  return cfg;
}

py::dict trace_to_dict(const std::vector<TracePoint>& trace) {
  std::vector<std::size_t> it;
  std::vector<double> time, subopt;
  for (const TracePoint& p : trace) {
    it.push_back(p.iteration);
    time.push_back(p.idealized_time);
    subopt.push_back(p.primal_subopt);
  }
  py::dict d;
  d["iteration"] = it;
  d["idealized_time"] = time;
  d["primal_subopt"] = subopt;
  return d;
}

}  // namespace

PYBIND11_MODULE(adfs, m) {
  m.doc() = "Decentralized accelerated stochastic optimization on augmented graphs.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<InvalidState>(m, "InvalidState", PyExc_RuntimeError);

  py::class_<ComponentFunction>(m, "ComponentFunction")
      .def_static("quadratic", &ComponentFunction::quadratic, py::arg("smoothness"), py::arg("center"))
      .def_static("least_squares", &ComponentFunction::least_squares, py::arg("x"), py::arg("target"))
      .def_static("logistic", &ComponentFunction::logistic, py::arg("x"), py::arg("label"))
      .def_property_readonly("smoothness", &ComponentFunction::smoothness)
      .def_property_readonly("data", &ComponentFunction::data)
      .def("value", &ComponentFunction::value)
      .def("gradient", &ComponentFunction::gradient)
      .def("conjugate", &ComponentFunction::conjugate)
      .def("prox", [](const ComponentFunction& f, double eta, const Vector& x) { return f.prox(eta, x); })
      .def("prox_conjugate",
           [](const ComponentFunction& f, double eta, const Vector& u) { return f.prox_conjugate(eta, u); })
      .def("prox_conjugate_tilde",
           [](const ComponentFunction& f, double eta, const Vector& z) { return f.prox_conjugate_tilde(eta, z); });

  py::class_<ProblemInstance>(m, "ProblemInstance")
      .def_property_readonly("num_nodes", &ProblemInstance::num_nodes)
      .def_property_readonly("num_components", &ProblemInstance::num_components)
      .def_readonly("dim", &ProblemInstance::dim)
      .def("value", &ProblemInstance::value)
      .def("gradient", &ProblemInstance::gradient);

  m.def("generate_synthetic", &generate_synthetic, py::arg("n"), py::arg("m"), py::arg("d"), py::arg("sigma"),
        py::arg("seed"));
  m.def(
      "reference_minimizer",
      [](const ProblemInstance& p) {
        const ReferenceSolution r = reference_minimizer(p);
        return py::make_tuple(r.theta, r.value);
      },
      py::arg("problem"), "Returns (theta_star, F_star).");

  m.def(
      "run_experiment",
      [](const std::map<std::string, std::string>& config) {
        const ExperimentResult r = run_experiment(to_config(config));
        py::list runs;
        for (const RunRecord& rec : r.runs) {
          py::dict d = trace_to_dict(rec.trace);
          d["algorithm"] = algorithm_name(rec.algorithm);
          d["seed"] = rec.seed;
          d["reached_target"] = rec.reached_target;
          runs.append(d);
        }
        py::dict out;
        out["runs"] = runs;
        out["summary"] = r.summary;
        out["F_star"] = r.scenario.reference.value;
        out["rho"] = r.scenario.params.rho;
        out["nu"] = r.nu;
        return out;
      },
      py::arg("config"), "Runs the configured experiment; keys are the configuration file keys.");

  m.def(
      "dump_parameters", [](const std::map<std::string, std::string>& config) {
        return dump_parameters(to_config(config));
      },
      py::arg("config"));

  m.def(
      "check_theorem4",
      [](const std::map<std::string, std::string>& config) {
        const Theorem4Report r = run_theorem4_check(to_config(config));
        py::dict d;
        d["nu"] = r.nu;
        d["exceed_count"] = r.exceed_count;
        d["trials"] = r.trials;
        d["C_hat"] = r.C_hat;
        d["in_scope"] = r.in_scope;
        return d;
      },
      py::arg("config"));
}
