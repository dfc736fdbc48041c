#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "actherm/constitutive.hpp"
#include "actherm/diagnostics.hpp"
#include "actherm/errors.hpp"
#include "actherm/grid.hpp"
#include "actherm/io.hpp"
#include "actherm/state.hpp"
#include "actherm/stepper.hpp"
#include "actherm/verification.hpp"

namespace py = pybind11;
using namespace actherm;

namespace {

py::array_t<double> field_to_numpy(const Field& f) {
  const Grid& g = f.grid();
  std::vector<py::ssize_t> shape;
  for (int a = 0; a < g.dim(); ++a) shape.push_back(g.cells(a));
  py::array_t<double> out(shape);
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

Field field_from_numpy(const Grid& g, py::array_t<double, py::array::c_style |
                                                             py::array::forcecast>
                                          values) {
  if (values.size() != g.cell_count())
    throw ValidationError("field values do not match the grid size");
  std::vector<double> v(values.data(), values.data() + values.size());
  return Field(g, std::move(v));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Finite-volume solver for the coupled phase-field / temperature / "
            "nutrient system";

  py::register_exception<ValidationError>(m, "ValidationError",
                                          PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<StepSizeError>(m, "StepSizeError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // constitutive
  m.def("double_well", &double_well, py::arg("phi"));
  m.def("double_well_prime", &double_well_prime, py::arg("phi"));
  m.def("regulator_h", &regulator_h, py::arg("r"));
  m.def("regulator_h_prime", &regulator_h_prime, py::arg("r"));
  m.def("conductivity", &conductivity, py::arg("theta"), py::arg("q"));
  m.def("kirchhoff", &kirchhoff, py::arg("theta"), py::arg("q"));
  m.def("kirchhoff_inverse", &kirchhoff_inverse, py::arg("u"), py::arg("q"),
        py::arg("tol") = 1e-12);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("proliferation", &ModelParams::proliferation)
      .def_readwrite("apoptosis", &ModelParams::apoptosis)
      .def_readwrite("consumption", &ModelParams::consumption)
      .def_readwrite("transfer", &ModelParams::transfer)
      .def_readwrite("vascular_nutrient", &ModelParams::vascular_nutrient)
      .def_readwrite("relaxation", &ModelParams::relaxation)
      .def_readwrite("specific_heat", &ModelParams::specific_heat)
      .def_readwrite("interface", &ModelParams::interface)
      .def_readwrite("conductivity_exponent",
                     &ModelParams::conductivity_exponent)
      .def("validate", &ModelParams::validate);

  // grid
  py::class_<Grid>(m, "Grid")
      .def(py::init<std::vector<int>, std::vector<double>>(), py::arg("cells"),
           py::arg("extent"))
      .def_property_readonly("dim", &Grid::dim)
      .def("cells", &Grid::cells, py::arg("axis"))
      .def("extent", &Grid::extent, py::arg("axis"))
      .def("spacing", &Grid::spacing, py::arg("axis"))
      .def_property_readonly("cell_count", &Grid::cell_count)
      .def_property_readonly("cell_volume", &Grid::cell_volume)
      .def("__eq__", [](const Grid& a, const Grid& b) { return a == b; });

  py::class_<Field>(m, "Field")
      .def(py::init<const Grid&, double>(), py::arg("grid"),
           py::arg("fill") = 0.0)
      .def(py::init(&field_from_numpy), py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", &Field::grid)
      .def("numpy", &field_to_numpy)
      .def("min", &Field::min)
      .def("max", &Field::max);

  m.def("laplacian", py::overload_cast<const Field&>(&laplacian),
        py::arg("u"));
  m.def("integrate", &integrate, py::arg("u"));
  m.def("l2_norm", &l2_norm, py::arg("u"));
  m.def("h1_seminorm", &h1_seminorm, py::arg("u"));
  m.def("helmholtz_inverse", &helmholtz_inverse, py::arg("f"),
        py::arg("tol") = 1e-10);
  m.def("dual_norm", &dual_norm, py::arg("u"), py::arg("tol") = 1e-10);

  // stepper
  py::class_<State>(m, "State")
      .def(py::init<Field, Field, Field, double>(), py::arg("phi"),
           py::arg("theta"), py::arg("sigma"), py::arg("time") = 0.0)
      .def_readwrite("phi", &State::phi)
      .def_readwrite("theta", &State::theta)
      .def_readwrite("sigma", &State::sigma)
      .def_readwrite("time", &State::time)
      .def("admissible", &State::admissible, py::arg("slack") = 0.0);

  py::class_<StepControls>(m, "StepControls")
      .def(py::init<>())
      .def_readwrite("dt", &StepControls::dt)
      .def_readwrite("newton_tol", &StepControls::newton_tol)
      .def_readwrite("newton_max", &StepControls::newton_max)
      .def_readwrite("picard_enabled", &StepControls::picard_enabled)
      .def_readwrite("picard_tol", &StepControls::picard_tol)
      .def_readwrite("picard_max", &StepControls::picard_max)
      .def_readwrite("linear_tol", &StepControls::linear_tol)
      .def("validate", &StepControls::validate);

  py::class_<StepReport>(m, "StepReport")
      .def_readonly("newton_iters_phi", &StepReport::newton_iters_phi)
      .def_readonly("newton_iters_theta", &StepReport::newton_iters_theta)
      .def_readonly("picard_iters", &StepReport::picard_iters)
      .def_readonly("picard_contraction", &StepReport::picard_contraction)
      .def_readonly("min_theta", &StepReport::min_theta)
      .def_readonly("min_phi", &StepReport::min_phi)
      .def_readonly("min_sigma", &StepReport::min_sigma)
      .def_readonly("max_sigma", &StepReport::max_sigma)
      .def_readonly("energy_residual", &StepReport::energy_residual)
      .def_readonly("entropy_increment", &StepReport::entropy_increment)
      .def_readonly("stability_functional", &StepReport::stability_functional)
      .def_readonly("dt_used", &StepReport::dt_used);

  m.def(
      "step_phase",
      [](const State& s, const Field& theta_used, const Field& sigma_used,
         const StepControls& c, const ModelParams& p) {
        PhaseStepResult r = step_phase(s, theta_used, sigma_used, c, p);
        return py::make_tuple(r.phi, r.newton_iters);
      },
      py::arg("state"), py::arg("theta_used"), py::arg("sigma_used"),
      py::arg("controls"), py::arg("params"));
  m.def(
      "step_nutrient",
      [](const State& s, const Field& phi_used, const StepControls& c,
         const ModelParams& p) { return step_nutrient(s, phi_used, c, p); },
      py::arg("state"), py::arg("phi_used"), py::arg("controls"),
      py::arg("params"));
  m.def(
      "step_temperature",
      [](const State& s, const Field& m_field, const StepControls& c,
         const ModelParams& p) {
        TemperatureStepResult r = step_temperature(s, m_field, c, p);
        return py::make_tuple(r.theta, r.newton_iters);
      },
      py::arg("state"), py::arg("m"), py::arg("controls"), py::arg("params"));
  m.def(
      "advance",
      [](const State& s, const StepControls& c, const ModelParams& p) {
        AdvanceResult r = advance(s, c, p);
        return py::make_tuple(r.state, r.report);
      },
      py::arg("state"), py::arg("controls"), py::arg("params"));
  m.def(
      "run",
      [](const State& initial, double t_final, const StepControls& c,
         const ModelParams& p, const StepSink& sink) {
        return run(initial, t_final, c, p, sink);
      },
      py::arg("initial"), py::arg("t_final"), py::arg("controls"),
      py::arg("params"), py::arg("sink") = StepSink{});

  // diagnostics
  m.def("internal_energy", &internal_energy, py::arg("state"),
        py::arg("params"));
  m.def("energy_balance_residual", &energy_balance_residual, py::arg("before"),
        py::arg("after"), py::arg("params"), py::arg("dt"));
  m.def("total_entropy", &total_entropy, py::arg("state"), py::arg("params"));
  m.def("entropy_increment", &entropy_increment, py::arg("before"),
        py::arg("after"), py::arg("params"));
  m.def("stability_functional", &stability_functional, py::arg("a"),
        py::arg("b"), py::arg("tol") = 1e-10);

  py::class_<DependenceResult>(m, "DependenceResult")
      .def_readonly("times", &DependenceResult::times)
      .def_readonly("functional", &DependenceResult::functional)
      .def_readonly("exponent", &DependenceResult::exponent)
      .def_readonly("ratio_final", &DependenceResult::ratio_final);
  m.def("continuous_dependence_test", &continuous_dependence_test,
        py::arg("initial"), py::arg("perturbation_scale"), py::arg("t_final"),
        py::arg("controls"), py::arg("params"), py::arg("fit_tolerance") = 0.2);

  // verification
  py::class_<verify::ConvergenceReport>(m, "ConvergenceReport")
      .def_readonly("resolutions", &verify::ConvergenceReport::resolutions)
      .def_readonly("errors", &verify::ConvergenceReport::errors)
      .def_readonly("step_orders", &verify::ConvergenceReport::step_orders)
      .def_readonly("fitted_orders", &verify::ConvergenceReport::fitted_orders)
      .def_readonly("pass_flags", &verify::ConvergenceReport::pass);
  m.def(
      "run_mms_default",
      [](const ModelParams& p, int dim, const std::vector<int>& resolutions,
         const StepControls& c, double t_final) {
        verify::ManufacturedCase mc = verify::manufactured_case_default(p, dim);
        auto dt_rule = [](int n) { return 1.0 / (static_cast<double>(n) * n); };
        return verify::run_mms(mc, resolutions, dt_rule, c, p, t_final);
      },
      py::arg("params"), py::arg("dim"), py::arg("resolutions"),
      py::arg("controls"), py::arg("t_final") = 0.5);
  m.def(
      "manufactured_initial_state",
      [](const ModelParams& p, const Grid& g) {
        return verify::initial_state(
            verify::manufactured_case_default(p, g.dim()), g);
      },
      py::arg("params"), py::arg("grid"));
  m.def("explicit_reference",
        [](const State& initial, double t_final, double dt_tiny,
           const ModelParams& p) {
          return verify::explicit_reference(initial, t_final, dt_tiny, p);
        },
        py::arg("initial"), py::arg("t_final"), py::arg("dt_tiny"),
        py::arg("params"));
  m.def("random_admissible_state",
        [](const Grid& g, std::uint64_t seed, double theta_floor) {
          return verify::random_admissible_state(g, seed, {theta_floor});
        },
        py::arg("grid"), py::arg("seed"), py::arg("theta_floor") = 0.0);

  // io
  m.def("write_snapshot", &io::write_snapshot, py::arg("state"),
        py::arg("path"));
  m.def("read_snapshot", &io::read_snapshot, py::arg("path"));
  m.def(
      "load_config",
      [](const std::filesystem::path& p) { return io::save_config(io::load_config(p)); },
      py::arg("path"),
      "Loads and validates a config, returning its canonical text form");
}
