// Python bindings for the nvrot core.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nvrot/bath.hpp"
#include "nvrot/dynamics.hpp"
#include "nvrot/errors.hpp"
#include "nvrot/experiment.hpp"
#include "nvrot/fitting.hpp"
#include "nvrot/oracle.hpp"

namespace py = pybind11;
using namespace nvrot;

PYBIND11_MODULE(_nvrot, m) {
  m.doc() = "NV spin-echo simulation in a rotating diamond";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ResourceError>(m, "ResourceError", PyExc_MemoryError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.attr("GAMMA_C13") = units::kGammaC13;
  m.attr("GAMMA_ELECTRON") = units::kGammaElectron;
  m.attr("NATURAL_ABUNDANCE") = units::kNaturalAbundance;

  py::class_<LatticeSpec>(m, "LatticeSpec")
      .def(py::init([](double a, double r, double rex) { return LatticeSpec{a, r, rex}; }),
           py::arg("lattice_constant") = 0.3567, py::arg("bath_radius") = 3.0,
           py::arg("exclusion_radius") = 0.5)
      .def_readwrite("lattice_constant", &LatticeSpec::lattice_constant)
      .def_readwrite("bath_radius", &LatticeSpec::bath_radius)
      .def_readwrite("exclusion_radius", &LatticeSpec::exclusion_radius)
      .def("validate", &LatticeSpec::validate);

  py::class_<NuclearSite>(m, "NuclearSite")
      .def_readonly("position", &NuclearSite::position)
      .def_readonly("a_par", &NuclearSite::a_par)
      .def_readonly("a_perp", &NuclearSite::a_perp)
      .def("hyperfine", &NuclearSite::hyperfine);

  py::class_<BathRealization>(m, "BathRealization")
      .def(py::init<>())
      .def_readwrite("sites", &BathRealization::sites)
      .def_readonly("seed", &BathRealization::seed)
      .def_readonly("abundance", &BathRealization::abundance)
      .def("__len__", [](const BathRealization& b) { return b.sites.size(); });

  py::class_<FieldConfig>(m, "FieldConfig")
      .def(py::init([](double b0_z, double f_rot, double theta_b, double theta_nv) {
             FieldConfig c;
             c.b0_z = b0_z;
             c.f_rot = f_rot;
             c.theta_b = theta_b;
             c.theta_nv = theta_nv;
             return c;
           }),
           py::arg("b0_z") = 37.0, py::arg("f_rot") = 0.0, py::arg("theta_b") = 0.0,
           py::arg("theta_nv") = 0.0)
      .def_readwrite("b0_z", &FieldConfig::b0_z)
      .def_readwrite("f_rot", &FieldConfig::f_rot)
      .def_readwrite("theta_b", &FieldConfig::theta_b)
      .def_readwrite("theta_nv", &FieldConfig::theta_nv)
      .def_readwrite("gamma_n", &FieldConfig::gamma_n)
      .def_readwrite("gamma_e", &FieldConfig::gamma_e);

  py::class_<EffectiveFields>(m, "EffectiveFields")
      .def_readonly("f_n0", &EffectiveFields::f_n0)
      .def_readonly("f_e", &EffectiveFields::f_e)
      .def_readonly("b_pseudo_n", &EffectiveFields::b_pseudo_n)
      .def_readonly("b_pseudo_e", &EffectiveFields::b_pseudo_e);

  py::class_<EchoCurve>(m, "EchoCurve")
      .def(py::init([](std::vector<double> t, std::vector<double> s) {
             EchoCurve c{std::move(t), std::move(s), ""};
             c.validate();
             return c;
           }),
           py::arg("times"), py::arg("values"))
      .def_readonly("times", &EchoCurve::times)
      .def_readonly("values", &EchoCurve::values)
      .def_readonly("metadata", &EchoCurve::metadata);

  py::class_<fit::FitResult>(m, "FitResult")
      .def_readonly("model", &fit::FitResult::model)
      .def_readonly("names", &fit::FitResult::names)
      .def_readonly("params", &fit::FitResult::params)
      .def_readonly("std_errors", &fit::FitResult::std_errors)
      .def_readonly("residual_norm", &fit::FitResult::residual_norm)
      .def_readonly("converged", &fit::FitResult::converged)
      .def_readonly("iterations", &fit::FitResult::iterations)
      .def_readonly("warnings", &fit::FitResult::warnings)
      .def("param", &fit::FitResult::param)
      .def("std_error", &fit::FitResult::std_error);

  m.def("pseudo_field", &pseudo_field, py::arg("f_rot"), py::arg("gamma"));
  m.def("effective_fields", &effective_fields);
  m.def("revival_time_prediction", &revival_time_prediction);
  m.def("generate_lattice_sites", &generate_lattice_sites, py::arg("spec") = LatticeSpec{});
  m.def("generate_bath", &generate_bath, py::arg("spec"), py::arg("abundance"), py::arg("seed"));
  m.def("hyperfine_vector", [](const Vec3& r) {
    const auto h = hyperfine_vector(r);
    return py::make_tuple(h.a_par, h.a_perp);
  });
  m.def("flip_flop_coupling", &flip_flop_coupling);
  m.def("uniform_grid", &uniform_grid);
  m.def("echo_signal", [](const BathRealization& b, const FieldConfig& c,
                          const std::vector<double>& t) { return echo_signal(b, c, t); });
  m.def(
      "cce2_echo",
      [](const BathRealization& b, const FieldConfig& c, const std::vector<double>& t,
         double cutoff) {
        CceOptions o;
        o.pair_cutoff = cutoff;
        return cce2_echo(b, c, t, o);
      },
      py::arg("bath"), py::arg("field"), py::arg("times"), py::arg("pair_cutoff") = 1.5);
  m.def(
      "ensemble_echo",
      [](const LatticeSpec& spec, const FieldConfig& cfg, const std::vector<double>& t,
         std::size_t n_real, std::uint64_t base_seed, const std::string& method, unsigned jobs) {
        EnsembleOptions o;
        o.n_real = n_real;
        o.base_seed = base_seed;
        o.method = parse_method(method);
        o.jobs = jobs;
        py::gil_scoped_release release;
        return ensemble_echo(spec, cfg, t, o);
      },
      py::arg("spec"), py::arg("field"), py::arg("times"), py::arg("n_real") = 1,
      py::arg("base_seed") = 0, py::arg("method") = "product", py::arg("jobs") = 1);
  m.def(
      "misalignment_attenuation",
      [](const FieldConfig& cfg, double total_time, std::optional<double> phase) {
        return misalignment_attenuation(cfg, PulseSequence{total_time, 0.5, phase});
      },
      py::arg("field"), py::arg("total_time"), py::arg("rotation_phase") = py::none());
  m.def(
      "exact_echo",
      [](const BathRealization& b, double f_n0, const std::vector<double>& t) {
        oracle::ExactSystem sys;
        sys.sites = b.sites;
        sys.f_n0 = f_n0;
        return oracle::exact_echo(sys, t);
      },
      py::arg("bath"), py::arg("f_n0"), py::arg("times"));

  m.def("fit_gaussian_revival", [](const EchoCurve& c, double lo, double hi) {
    return fit::fit_gaussian_revival(c, {lo, hi});
  });
  m.def("fit_collapse", [](const EchoCurve& c, double lo, double hi) {
    return fit::fit_collapse(c, {lo, hi});
  });
  m.def("fit_power_law", [](const std::vector<double>& b, const std::vector<double>& tau) {
    return fit::fit_power_law(b, tau);
  });
  m.def("extract_larmor", [](const fit::FitResult& r) {
    const auto e = fit::extract_larmor(r);
    return py::make_tuple(e.frequency, e.error);
  });
}
