#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "slide/config.hpp"
#include "slide/ddpg.hpp"
#include "slide/estimation.hpp"
#include "slide/harness.hpp"
#include "slide/lstm.hpp"
#include "slide/optimal.hpp"

namespace py = pybind11;
using namespace slide;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ManeuverAction make_action(double a_i, double a_m, double t_m) { return validate_action({a_i, a_m, t_m}); }

py::dict trace_dict(const RelativeTrace& tr) {
  py::dict d;
  d["t"] = to_array(tr.t);
  d["plat_accel"] = to_array(tr.plat_accel);
  d["plat_vel"] = to_array(tr.plat_vel);
  d["x_rel"] = to_array(tr.x_rel);
  d["v_rel"] = to_array(tr.v_rel);
  d["dissipated"] = to_array(tr.dissipated);
  return d;
}

class Policy {
 public:
  explicit Policy(const std::string& path) : actor_(load_actor(path)) {}

  /// history: most recent first, entries (a_i, a_m, t_m, displacement).
  std::tuple<double, double, double> act(double d_remaining, double mu_e,
                                         const std::vector<std::array<double, 4>>& history) const {
    EnvState s;
    s.d_remaining = d_remaining;
    s.mu_e = mu_e;
    for (auto it = history.rbegin(); it != history.rend(); ++it) s.push({{(*it)[0], (*it)[1], (*it)[2]}, (*it)[3]});
    const RawAction a = policy_act(actor_, s);
    return {a.a_i, a.a_m, a.t_m};
  }

 private:
  Mlp actor_;
};

class LstmEstimator {
 public:
  explicit LstmEstimator(const std::string& path) : net_(LstmNetwork::load(path)) {}

  double estimate(const SlideResult& r) const {
    return estimate_lstm(net_, make_estimate_input(r, net_.shape().rate, net_.shape().window).series);
  }
  int length() const { return net_.length(); }

 private:
  LstmNetwork net_;
};

}  // namespace

PYBIND11_MODULE(_slide, m) {
  m.doc() = "Core simulation, estimation and policy bindings";

  static py::exception<SlideError> error(m, "SlideError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SlideError& e) {
      py::object exc = py::handle(error.ptr())(std::string(to_string(e.code())) + ": " + e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<ManeuverAction>(m, "ManeuverAction")
      .def_property_readonly("a_i", &ManeuverAction::a_i)
      .def_property_readonly("a_m", &ManeuverAction::a_m)
      .def_property_readonly("t_m", &ManeuverAction::t_m)
      .def_property_readonly("t_i", &ManeuverAction::t_i)
      .def_property_readonly("duration", &ManeuverAction::duration)
      .def("__repr__", [](const ManeuverAction& a) {
        return "ManeuverAction(a_i=" + std::to_string(a.a_i()) + ", a_m=" + std::to_string(a.a_m()) +
               ", t_m=" + std::to_string(a.t_m()) + ")";
      });

  m.def("validate_action", &make_action, py::arg("a_i"), py::arg("a_m"), py::arg("t_m"));
  m.def("range_of_motion", [](double a_i, double a_m, double t_m) { return range_of_motion(make_action(a_i, a_m, t_m)); },
        py::arg("a_i"), py::arg("a_m"), py::arg("t_m"));

  py::class_<SlideResult>(m, "SlideResult")
      .def_readonly("delta_x_rel", &SlideResult::delta_x_rel)
      .def_readonly("rom", &SlideResult::rom)
      .def_readonly("duration", &SlideResult::duration)
      .def_property_readonly("action", &SlideResult::action)
      .def_property_readonly("trace", [](const SlideResult& r) { return trace_dict(r.trace); })
      .def_property_readonly("events", [](const SlideResult& r) {
        py::list out;
        for (const auto& e : r.events) out.append(py::make_tuple(std::string(to_string(e.kind)), e.t));
        return out;
      });

  m.def(
      "simulate",
      [](double a_i, double a_m, double t_m, double mu, double static_ratio, const std::string& method, double dt,
         double trace_rate) {
        const VelocityProfile p = build_velocity_profile(make_action(a_i, a_m, t_m));
        const FrictionModel f = FrictionModel::coulomb(mu, static_ratio);
        if (method == "closed_form") return simulate_closed_form(p, f, trace_rate);
        if (method == "numeric") return simulate_numeric(p, f, dt, trace_rate);
        throw SlideError(ErrorCode::InvalidArgument, "method must be closed_form or numeric");
      },
      py::arg("a_i"), py::arg("a_m"), py::arg("t_m"), py::arg("mu"), py::arg("static_ratio") = 1.0,
      py::arg("method") = "closed_form", py::arg("dt") = 1e-5, py::arg("trace_rate") = kDefaultTraceRate);

  m.def(
      "optimal_action",
      [](double d_des, double mu, double rom_max) {
        const OptimalSolution s = optimal_action(d_des, FrictionModel::coulomb(mu), rom_max);
        return py::make_tuple(s.action, s.achieved, s.rom);
      },
      py::arg("d_des"), py::arg("mu"), py::arg("rom_max") = kDefaultRomMax,
      "Returns (action, achieved displacement, range of motion).");

  m.def(
      "estimate_analytical",
      [](const SlideResult& r) {
        const AnalyticalEstimate e = estimate_analytical(make_estimate_input(r));
        return py::make_tuple(e.mu, std::string(to_string(e.branch)));
      },
      py::arg("result"), "Returns (mu estimate, branch name).");

  m.def("correction_metric", &correction_metric, py::arg("mu_k"), py::arg("mu_e"), py::arg("mu_e_prime"));

  py::class_<Policy>(m, "Policy")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("act", &Policy::act, py::arg("d_remaining"), py::arg("mu_e"),
           py::arg("history") = std::vector<std::array<double, 4>>{});

  py::class_<LstmEstimator>(m, "LstmEstimator")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("estimate", &LstmEstimator::estimate, py::arg("result"))
      .def_property_readonly("length", &LstmEstimator::length);

  m.def("default_config", [] { return to_python(to_json(RunConfig{})); });
  m.def("resolve_config", [](const py::object& overrides) { return to_python(to_json(config_from_json(from_python(overrides)))); },
        py::arg("overrides"), "Validates overrides and returns the full resolved config.");
}
