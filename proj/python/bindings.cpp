#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evnet/cli.hpp"
#include "evnet/dynamics.hpp"
#include "evnet/error.hpp"
#include "evnet/estimator.hpp"
#include "evnet/manifest.hpp"
#include "evnet/modelspec.hpp"
#include "evnet/panel.hpp"
#include "evnet/policy.hpp"
#include "evnet/synth.hpp"

namespace py = pybind11;
using namespace evnet;

namespace {

Panel panel_from_csv(const std::string& csv, double delta, bool lenient) {
  std::istringstream in(csv);
  return load_panel(in, Schema::canonical(), PanelOptions{delta, PanelOptions{}.saturation_epsilon, lenient});
}

BurdenForm burden(const std::string& text) {
  if (text == "linear") return BurdenForm::Linear;
  if (text == "log") return BurdenForm::Log;
  throw Error(ErrorCode::Usage, "burden form must be 'linear' or 'log'", {{"burden", text}});
}

std::string estimate_json(const std::string& csv, const std::string& method, const std::string& burden_form,
                          double delta, bool lenient) {
  const Panel panel = panel_from_csv(csv, delta, lenient);
  ModelOptions opts;
  opts.burden_form = burden(burden_form);
  const auto kind = parse_estimator(method);
  nlohmann::ordered_json j;
  j["demand"] = to_json(estimate_demand(panel, kind, opts), 0);
  j["supply"] = to_json(estimate_supply(panel, kind, opts), 0);
  return j.dump();
}

std::string synth_csv(std::uint64_t seed, int n_zips, int n_years, double rho, double noise_sd, bool full_precision) {
  SynthConfig c;
  c.seed = seed;
  c.n_zips = n_zips;
  c.n_years = n_years;
  c.endogeneity_rho = rho;
  c.noise_sd = noise_sd;
  std::ostringstream out;
  write_panel_csv(out, generate_panel(c).records(), full_precision ? 0 : 6);
  return out.str();
}

std::vector<py::dict> reduced_form(double c, double k, double delta, int year, double sales, double ev_stock, int years) {
  DynamicsParams p{c, k, delta};
  std::vector<py::dict> out;
  for (const auto& s : simulate_reduced_form(p, {year, sales, ev_stock, 0.0}, years))
    out.push_back(py::dict(py::arg("year") = s.year, py::arg("sales") = s.sales, py::arg("ev_stock") = s.ev_stock));
  return out;
}

std::string forecast_json(const std::string& county, const std::string& coefficients,
                          const std::vector<std::string>& scenarios, int horizon_end, double fleet_vehicles) {
  const auto fixture = CountyFixture::from_json(nlohmann::json::parse(county));
  const auto coefs = nlohmann::ordered_json::parse(coefficients);
  ForecastOptions opts;
  if (fixture.delta) opts.delta = *fixture.delta;
  if (fixture.burden_form) opts.burden_form = *fixture.burden_form;
  const auto setup = calibrate_forecast(fixture, estimation_from_json(coefs.at("demand")),
                                        estimation_from_json(coefs.at("supply")), opts);
  const auto fleet = constant_fleet(fleet_vehicles, setup.seed.year, horizon_end);
  std::vector<Trajectory> trajectories;
  if (scenarios.empty()) trajectories.push_back(forecast_scenario(Scenario{}, setup, fleet, horizon_end));
  for (const auto& s : scenarios)
    trajectories.push_back(forecast_scenario(Scenario::from_json(nlohmann::json::parse(s)), setup, fleet, horizon_end));
  return compare_scenarios(trajectories).to_json(0).dump();
}

py::tuple cli(const std::vector<std::string>& args, const std::string& stdin_text) {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  std::vector<std::string> full{"evnet"};
  full.insert(full.end(), args.begin(), args.end());
  const int code = run_cli(full, in, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_evnet, m) {
  m.doc() = "EV and charging-station market toolkit";
  static py::exception<Error> error_type(m, "EvnetError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("context") = e.context().dump();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("__version__") = tool_version();
  m.def("estimate", &estimate_json, py::arg("csv"), py::arg("method") = "gmm", py::arg("burden") = "linear",
        py::arg("delta") = 0.95, py::arg("lenient") = false, "Estimate both equations; returns a JSON string.");
  m.def("synth", &synth_csv, py::arg("seed") = 7, py::arg("n_zips") = 50, py::arg("n_years") = 6,
        py::arg("rho") = -0.5, py::arg("noise_sd") = 0.5, py::arg("full_precision") = false,
        "Synthetic panel as CSV text.");
  m.def(
      "solve_annual_fixed_point",
      [](double c, double k, double delta, double prev_stock) {
        return solve_annual_fixed_point(DynamicsParams{c, k, delta}, prev_stock).sales;
      },
      py::arg("c"), py::arg("k"), py::arg("delta"), py::arg("prev_stock"));
  m.def("calibrate_constant", &calibrate_constant, py::arg("sales"), py::arg("prev_stock"), py::arg("k"),
        py::arg("delta"));
  m.def("simulate_reduced_form", &reduced_form, py::arg("c"), py::arg("k"), py::arg("delta"), py::arg("year"),
        py::arg("sales"), py::arg("ev_stock"), py::arg("years"));
  m.def("forecast", &forecast_json, py::arg("county"), py::arg("coefficients"), py::arg("scenarios"),
        py::arg("horizon_end") = 2045, py::arg("fleet_vehicles") = kDefaultFleet2045,
        "Scenario comparison from JSON texts; returns a JSON string.");
  m.def(
      "describe", [](const std::string& b) { return describe(ModelOptions{burden(b), {}, 2}).dump(); },
      py::arg("burden") = "linear");
  m.def("run_cli", &cli, py::arg("args"), py::arg("stdin") = "", "Runs the command line; returns (code, stdout, stderr).");
}
