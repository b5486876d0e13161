// Structured values cross the boundary as JSON text; driftwatch/__init__.py
// does the dict conversion.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

#include "driftwatch/config.hpp"
#include "driftwatch/detect.hpp"
#include "driftwatch/errors.hpp"
#include "driftwatch/fleet_sim.hpp"
#include "driftwatch/rca.hpp"
#include "driftwatch/serialization.hpp"

namespace py = pybind11;
using namespace driftwatch;

namespace {

std::string analyze_json(const std::string& entries_json, const std::string& thresholds_json, bool set_reduction,
                         bool counterfactual) {
  const auto j = nlohmann::json::parse(entries_json);
  if (!j.is_array()) throw InvalidInput("entries must be a list");
  LogWindow w;
  for (const auto& e : j) w.entries.push_back(e.get<DriftLogEntry>());
  if (!w.entries.empty()) {
    w.start = w.entries.front().timestamp;
    w.end = w.start + 1;
    for (const auto& e : w.entries) {
      w.start = std::min(w.start, e.timestamp);
      w.end = std::max(w.end, e.timestamp + 1);
    }
  }
  const auto t = config::thresholds_from_json(nlohmann::json::parse(thresholds_json));
  return rca::to_json(rca::analyze(w, t, {set_reduction, counterfactual})).dump();
}

std::pair<std::string, std::string> simulate_json(const std::string& config_json, const std::string& strategy) {
  const auto c = sim::SimConfig::from_json(nlohmann::json::parse(config_json));
  const auto r = sim::run(c, sim::strategy_from_string(strategy));
  auto j = sim::to_json(r);
  j["hash"] = sim::report_hash(r);
  return {j.dump(), sim::summary_table(r)};
}

}  // namespace

PYBIND11_MODULE(_driftwatch, m) {
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);

  m.def("softmax", [](std::vector<double> z) { return detect::softmax(z); });
  m.def("msp_score", [](std::vector<double> z) { return detect::msp_score(z); });
  m.def(
      "detect_msp",
      [](std::vector<double> z, double threshold) { return detect::detect_msp(z, threshold).drift; },
      py::arg("logits"), py::arg("threshold") = 0.9);
  m.def("ks_statistic", [](std::vector<double> a, std::vector<double> b) { return detect::ks_statistic(a, b); });
  m.def("f1", [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    return detect::f1({tp, fp, fn, tn});
  });
  m.def("fms", [](std::vector<int> a, std::vector<int> b) { return rca::fms(a, b); });
  m.def("_analyze", &analyze_json);
  m.def("_simulate", &simulate_json, py::call_guard<py::gil_scoped_release>());
}
