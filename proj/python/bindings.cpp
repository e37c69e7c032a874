#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "optospike/cli.hpp"
#include "optospike/diagnostics.hpp"
#include "optospike/io.hpp"
#include "optospike/optimize.hpp"
#include "optospike/presets.hpp"

namespace py = pybind11;
using namespace optospike;

namespace {

std::vector<double> to_list(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec from_list(const std::vector<double>& v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<Eigen::Index>(i)] = v[i];
  return x;
}

// Coupled system plus the run defaults of its neuron preset.
struct System {
  ControlledSystem sys;
  double v_s;
  double h;
};

System make_system(const std::string& model, const std::string& channel, std::optional<double> u_max,
                   const std::map<std::string, double>& overrides, const std::string& preset_file) {
  PresetRegistry reg;
  if (!preset_file.empty()) reg.load_file(preset_file);
  NeuronPreset n = reg.neuron(model);
  ChannelParams c = channel_for(n, reg.channel(channel));
  for (const auto& [k, v] : overrides) apply_override(n, c, k, v);
  return {couple(n.model(), c, u_max.value_or(n.u_max)), n.v_s, n.h};
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Minimal-time optogenetic spike control";

  // Translators run newest first, so the base class goes first.
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<UnreachableError>(m, "UnreachableError", base.ptr());

  py::class_<System>(m, "System")
      .def(py::init(&make_system), py::arg("model"), py::arg("channel") = "chr2-3", py::arg("u_max") = py::none(),
           py::arg("overrides") = std::map<std::string, double>{}, py::arg("preset_file") = "")
      .def_property_readonly("dim", [](const System& s) { return s.sys.dim(); })
      .def_property_readonly("u_max", [](const System& s) { return s.sys.u_max(); })
      .def_property_readonly("v_s", [](const System& s) { return s.v_s; })
      .def_property_readonly("h", [](const System& s) { return s.h; })
      .def_property_readonly("state_names", [](const System& s) { return s.sys.state_names(); })
      .def("dark_rest", [](const System& s) { return to_list(s.sys.dark_rest()); })
      .def("eval", [](const System& s, const std::vector<double>& x, double u) { return to_list(s.sys.eval(from_list(x), u)); },
           py::arg("x"), py::arg("u"));

  py::class_<BangResult>(m, "BangResult")
      .def_property_readonly("switches", [](const BangResult& r) { return r.schedule.switches; })
      .def_property_readonly("start_on", [](const BangResult& r) { return r.schedule.start_on; })
      .def_property_readonly("k", [](const BangResult& r) { return r.schedule.k(); })
      .def_readonly("t_f", &BangResult::t_f)
      .def_readonly("light_on", &BangResult::light_on)
      .def_readonly("t_constant", &BangResult::t_constant)
      .def_readonly("evaluations", &BangResult::evaluations);

  py::class_<DirectSolution>(m, "DirectSolution")
      .def_readonly("N", &DirectSolution::N)
      .def_readonly("t", &DirectSolution::t)
      .def_readonly("u", &DirectSolution::u)
      .def_property_readonly("x",
                             [](const DirectSolution& s) {
                               std::vector<std::vector<double>> out;
                               for (const Vec& x : s.x) out.push_back(to_list(x));
                               return out;
                             })
      .def_readonly("t_f", &DirectSolution::t_f)
      .def_readonly("defect_max", &DirectSolution::defect_max)
      .def_readonly("kkt", &DirectSolution::kkt)
      .def_readonly("converged", &DirectSolution::converged)
      .def_property_readonly("plateau_fraction", [](const DirectSolution& s) { return interior_plateau_fraction(s); });

  m.def(
      "solve_bangbang",
      [](const System& s, std::optional<double> v_s, int k_max, double t_max) {
        BangOptions o;
        o.k_max = k_max;
        o.t_max = t_max;
        o.h = s.h;
        py::gil_scoped_release release;
        return solve_bangbang(s.sys, v_s.value_or(s.v_s), o);
      },
      py::arg("system"), py::arg("v_s") = py::none(), py::arg("k_max") = 4, py::arg("t_max") = 300.0,
      "Minimum-time bang-bang schedule");

  m.def(
      "verify_extremal",
      [](const System& s, const std::vector<double>& switches, std::optional<double> v_s, bool start_on) {
        VerifyOptions o;
        o.h = s.h;
        ExtremalReport r = verify_extremal(s.sys, BangBangSchedule{s.sys.u_max(), switches, start_on},
                                           v_s.value_or(s.v_s), o);
        return json_to_py(to_json(r));
      },
      py::arg("system"), py::arg("switches"), py::arg("v_s") = py::none(), py::arg("start_on") = true,
      "Maximum-principle report for a schedule, as a dict");

  m.def(
      "solve_direct",
      [](const System& s, std::optional<double> v_s, int nodes) {
        DirectOptions o;
        o.h = s.h;
        py::gil_scoped_release release;
        return solve_direct(s.sys, v_s.value_or(s.v_s), nodes, o);
      },
      py::arg("system"), py::arg("v_s") = py::none(), py::arg("nodes") = 400, "Direct transcription solution");

  m.def("neuron_presets", [] { return PresetRegistry().neuron_names(); });
  m.def("channel_presets", [] { return PresetRegistry().channel_names(); });
  m.def("physiological_umax", &physiological_umax, py::arg("eps"), py::arg("sigma_ret_um2"), py::arg("flux_ph_um2_s"),
        py::arg("w_loss"));

  m.def(
      "diagnostics",
      [](const std::map<std::string, double>& overrides, int samples) {
        DiagnosticsOptions o;
        o.samples = samples;
        for (const auto& kv : overrides) o.overrides.emplace_back(kv);
        DiagnosticsReport r = run_diagnostics(PresetRegistry(), o);
        return json_to_py(r.to_json());
      },
      py::arg("overrides") = std::map<std::string, double>{}, py::arg("samples") = 100);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "optospike");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in-process; returns (exit code, stdout, stderr)");
}
