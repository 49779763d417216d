#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "polysrc/config.hpp"
#include "polysrc/errors.hpp"
#include "polysrc/experiment.hpp"
#include "polysrc/fields.hpp"
#include "polysrc/kernel.hpp"
#include "polysrc/parallel.hpp"
#include "polysrc/probes.hpp"
#include "polysrc/quadrature.hpp"
#include "polysrc/recon.hpp"
#include "polysrc/selftest.hpp"

namespace py = pybind11;
using namespace polysrc;

namespace {

ExperimentConfig config_from(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(e.what());
  }
  return ExperimentConfig::from_json(j);
}

experiment::CommandOptions command_options(const std::string& out, int threads,
                                           const std::string& archive = {}) {
  experiment::CommandOptions o;
  o.out_dir = out;
  o.threads = threads > 0 ? threads : default_threads();
  o.archive = archive;
  return o;
}

fields::ProfileSpec profile(const std::string& kind, double amplitude, double radius) {
  fields::ProfileSpec p;
  p.kind = kind;
  p.amplitude = amplitude;
  p.radius = radius;
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_polysrc, m) {
  m.doc() = "Stochastic polyharmonic source simulation and reconstruction";
  m.attr("__version__") = POLYSRC_VERSION;

  auto base = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  py::class_<kernel::ModelParams>(m, "ModelParams")
      .def(py::init([](int n, double k, double R) {
             kernel::ModelParams p{n, k, R};
             p.validate();
             return p;
           }),
           py::arg("n") = 2, py::arg("k") = 4.0, py::arg("R") = 1.2)
      .def_readonly("n", &kernel::ModelParams::n)
      .def_readonly("k", &kernel::ModelParams::k)
      .def_readonly("R", &kernel::ModelParams::R);

  m.def("split_roots", &kernel::split_roots, py::arg("params"));
  m.def("helmholtz_green", &kernel::helmholtz_green, py::arg("x"), py::arg("y"), py::arg("kappa"));
  m.def("poly_green", &kernel::poly_green, py::arg("x"), py::arg("y"), py::arg("params"));
  m.def("poly_green_laplacian", &kernel::poly_green_laplacian, py::arg("x"), py::arg("y"),
        py::arg("params"), py::arg("m"));
  m.def("poly_green_normal_derivative", &kernel::poly_green_normal_derivative, py::arg("x"),
        py::arg("y"), py::arg("params"), py::arg("m"), py::arg("nu"));

  m.def(
      "sample_strength",
      [](const std::string& kind, double amplitude, double radius, double extent, int N) {
        const auto s = fields::sample_strength(profile(kind, amplitude, radius),
                                               fields::make_grid(extent, N));
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(s.values.data(),
                                                              static_cast<Eigen::Index>(s.values.size()));
        return py::make_tuple(v, s.integral(), s.grid.cell_volume);
      },
      py::arg("kind") = "smooth_bump", py::arg("amplitude") = 1.0, py::arg("radius") = 0.8,
      py::arg("extent") = 1.0, py::arg("N") = 32,
      "Returns (values, integral, cell_volume) of a profile sampled at cell centres.");

  m.def(
      "sphere_quadrature",
      [](double R, int n_theta, int n_phi) {
        const auto q = build_sphere_quadrature(R, n_theta, n_phi);
        Eigen::MatrixXd nodes(static_cast<Eigen::Index>(q.size()), 3);
        for (size_t p = 0; p < q.size(); ++p) nodes.row(static_cast<Eigen::Index>(p)) = q.nodes[p];
        return py::make_tuple(nodes, q.weights);
      },
      py::arg("R"), py::arg("n_theta"), py::arg("n_phi"));

  m.def(
      "plane_wave_pair",
      [](const Vec3& gamma, const kernel::ModelParams& p) {
        const auto pr = probes::plane_wave_pair(gamma, p);
        return py::make_tuple(CVec3(pr.xi1), CVec3(pr.xi2));
      },
      py::arg("gamma"), py::arg("params"));
  m.def(
      "cgo_pair",
      [](const Vec3& gamma, double t, const kernel::ModelParams& p) {
        const auto pr = probes::cgo_pair(gamma, t, p);
        return py::make_tuple(CVec3(pr.xi1), CVec3(pr.xi2));
      },
      py::arg("gamma"), py::arg("t"), py::arg("params"));

  m.def(
      "fourier_transform",
      [](const std::string& kind, double amplitude, double radius, int N, const Vec3& gamma) {
        const auto s = fields::sample_strength(profile(kind, amplitude, radius),
                                               fields::make_grid(1.0, N));
        return recon::fourier_transform(s, gamma);
      },
      py::arg("kind"), py::arg("amplitude"), py::arg("radius"), py::arg("N"), py::arg("gamma"),
      "(2 pi)^-3 int sigma e^{-i gamma x} dx by midpoint quadrature.");

  m.def("frequency_ball", &recon::frequency_ball, py::arg("zeta"), py::arg("dgamma"));

  m.def(
      "config_hash", [](const std::string& text) { return config_from(text).hash(); },
      py::arg("config_json"));
  m.def(
      "normalize_config", [](const std::string& text) { return config_from(text).to_json().dump(); },
      py::arg("config_json"), "Config with every default filled in, as JSON text.");

  m.def(
      "selftest",
      [](bool inject) {
        selftest::Options o;
        o.inject_kernel_sign_flip = inject;
        return selftest::to_json(selftest::run(o)).dump();
      },
      py::arg("inject_kernel_fault") = false, py::call_guard<py::gil_scoped_release>());

  m.def(
      "cmd_direct",
      [](const std::string& cfg, const std::string& out, int threads) {
        return experiment::cmd_direct(config_from(cfg), command_options(out, threads)).dump();
      },
      py::arg("config_json"), py::arg("out"), py::arg("threads") = 0,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "cmd_reconstruct",
      [](const std::string& cfg, const std::string& out, int threads, const std::string& archive) {
        return experiment::cmd_reconstruct(config_from(cfg), command_options(out, threads, archive))
            .dump();
      },
      py::arg("config_json"), py::arg("out"), py::arg("threads") = 0, py::arg("archive") = "",
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "cmd_sweep",
      [](const std::string& cfg, const std::string& out, int threads) {
        return experiment::cmd_sweep(config_from(cfg), command_options(out, threads)).dump();
      },
      py::arg("config_json"), py::arg("out"), py::arg("threads") = 0,
      py::call_guard<py::gil_scoped_release>());
  (void)base;
}
