#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "risee/baselines.hpp"
#include "risee/errors.hpp"
#include "risee/model.hpp"
#include "risee/multi_user.hpp"
#include "risee/numerics.hpp"
#include "risee/oracles.hpp"
#include "risee/scenario.hpp"
#include "risee/single_user.hpp"

namespace py = pybind11;
using namespace risee;

namespace {

py::dict row_to_dict(const cli::ResultRow& r) {
  py::dict d;
  d["scenario"] = r.scenario;
  d["preset"] = r.preset;
  d["seed"] = r.seed;
  d["scheme"] = r.scheme;
  d["sweep_variable"] = r.sweep_variable;
  d["sweep_value"] = r.sweep_value;
  d["K"] = r.users;
  d["M"] = r.antennas;
  d["L"] = r.ris_count;
  d["N_total"] = r.elements_total;
  d["p_max_dbm"] = r.p_max_dbm;
  d["min_rate_bps"] = r.min_rate_bps;
  d["ee_bits_per_joule"] = r.ee_bits_per_joule;
  d["sum_rate_bps"] = r.sum_rate_bps;
  d["total_power_w"] = r.total_power_w;
  d["active_ris_count"] = r.active_ris_count;
  d["outer_iterations"] = r.outer_iterations;
  d["feasible"] = r.feasible;
  d["runtime_ms"] = r.runtime_ms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_risee, m) {
  m.doc() = "Energy-efficiency optimization for multi-RIS MISO downlinks";

  py::register_exception<InfeasibleError>(m, "InfeasibleError");
  py::register_exception<ConfigError>(m, "ConfigError");

  // numerics
  m.def("lambert_w0", &numerics::lambert_w0, py::arg("x"),
        "Principal-branch Lambert W (w e^w = x, w >= -1).");
  m.def("dbm_to_watts", &numerics::dbm_to_watts, py::arg("dbm"));
  m.def("watts_to_dbm", &numerics::watts_to_dbm, py::arg("watts"));

  py::class_<numerics::SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("tolerance", &numerics::SolverOptions::tolerance)
      .def_readwrite("max_iterations", &numerics::SolverOptions::max_iterations)
      .def_readwrite("step_size_initial", &numerics::SolverOptions::step_size_initial)
      .def_readwrite("kkt_tolerance", &numerics::SolverOptions::kkt_tolerance);

  // model
  py::class_<SystemParams>(m, "SystemParams")
      .def(py::init<>())
      .def_static("defaults", &SystemParams::defaults)
      .def_static("defaults_with", &SystemParams::defaults_with, py::arg("users"),
                  py::arg("antennas"), py::arg("ris_count"), py::arg("elements_each"))
      .def_readwrite("bandwidth_hz", &SystemParams::bandwidth_hz)
      .def_readwrite("noise_w", &SystemParams::noise_w)
      .def_readwrite("p_max_w", &SystemParams::p_max_w)
      .def_readwrite("amplifier_inefficiency", &SystemParams::amplifier_inefficiency)
      .def_readwrite("p_bs_w", &SystemParams::p_bs_w)
      .def_readwrite("p_user_w", &SystemParams::p_user_w)
      .def_readwrite("p_ris_element_w", &SystemParams::p_ris_element_w)
      .def_readwrite("num_antennas", &SystemParams::num_antennas)
      .def_readwrite("num_ris", &SystemParams::num_ris)
      .def_readwrite("elements_per_ris", &SystemParams::elements_per_ris)
      .def_readwrite("num_users", &SystemParams::num_users)
      .def_readwrite("min_rates_bps", &SystemParams::min_rates_bps)
      .def_readwrite("penalty_c", &SystemParams::penalty_c)
      .def_readwrite("relay_power_w", &SystemParams::relay_power_w)
      .def_readwrite("relay_antenna_circuit_w", &SystemParams::relay_antenna_circuit_w)
      .def("total_elements", &SystemParams::total_elements)
      .def("validate", &SystemParams::validate);

  py::class_<Vec2>(m, "Vec2")
      .def(py::init<>())
      .def(py::init([](double x, double y) { return Vec2{x, y}; }))
      .def_readwrite("x", &Vec2::x)
      .def_readwrite("y", &Vec2::y);

  py::class_<Topology>(m, "Topology")
      .def(py::init<>())
      .def_readwrite("bs", &Topology::bs)
      .def_readwrite("users", &Topology::users)
      .def_readwrite("ris", &Topology::ris);

  py::class_<ChannelSet>(m, "ChannelSet")
      .def(py::init<>())
      .def_readwrite("g", &ChannelSet::g)
      .def_readwrite("bs_ris", &ChannelSet::bs_ris)
      .def_readwrite("h", &ChannelSet::h);

  py::class_<PhaseConfig>(m, "PhaseConfig")
      .def(py::init<>())
      .def_static("zeros", &PhaseConfig::zeros)
      .def("theta", &PhaseConfig::theta, py::return_value_policy::copy)
      .def("coefficients", &PhaseConfig::coefficients)
      .def("total_elements", &PhaseConfig::total_elements);

  py::class_<OnOffVector>(m, "OnOffVector")
      .def(py::init<>())
      .def_static("all_on", &OnOffVector::all_on)
      .def_static("all_off", &OnOffVector::all_off)
      .def_readwrite("x", &OnOffVector::x)
      .def("active_count", &OnOffVector::active_count);

  py::class_<Beamformers>(m, "Beamformers")
      .def(py::init<>())
      .def_readwrite("w", &Beamformers::w)
      .def("transmit_power", &Beamformers::transmit_power);

  py::class_<OperatingPoint>(m, "OperatingPoint")
      .def_readonly("phases", &OperatingPoint::phases)
      .def_readonly("onoff", &OperatingPoint::onoff)
      .def_readonly("beams", &OperatingPoint::beams)
      .def_readonly("sinr", &OperatingPoint::sinr)
      .def_readonly("rates_bps", &OperatingPoint::rates_bps)
      .def_readonly("sum_rate_bps", &OperatingPoint::sum_rate_bps)
      .def_readonly("total_power_w", &OperatingPoint::total_power_w)
      .def_readonly("energy_efficiency", &OperatingPoint::energy_efficiency);

  m.def("generate_topology", &generate_topology, py::arg("params"),
        py::arg("region_side_m"), py::arg("ris_radius_m"), py::arg("seed"));
  m.def("path_loss", &path_loss, py::arg("distance_m"));
  m.def("generate_channels", &generate_channels, py::arg("topology"),
        py::arg("params"), py::arg("seed"));
  m.def("effective_channel", &effective_channel, py::arg("channels"),
        py::arg("phases"), py::arg("onoff"), py::arg("user"));
  m.def("evaluate_operating_point", &evaluate_operating_point, py::arg("params"),
        py::arg("channels"), py::arg("phases"), py::arg("onoff"), py::arg("beams"));
  m.def(
      "check_feasibility",
      [](const SystemParams& params, const OperatingPoint& point) {
        std::vector<std::string> out;
        for (const auto& v : check_feasibility(params, point)) {
          out.push_back(v.describe());
        }
        return out;
      },
      py::arg("params"), py::arg("point"));

  // solvers
  py::class_<baselines::SolveSummary>(m, "SolveSummary")
      .def_readonly("point", &baselines::SolveSummary::point)
      .def_readonly("outer_iterations", &baselines::SolveSummary::outer_iterations)
      .def_readonly("converged", &baselines::SolveSummary::converged);

  m.def(
      "optimize_single_user",
      [](const ChannelSet& channels, const SystemParams& params,
         const numerics::SolverOptions& options) {
        auto result = single_user::optimize_single_user(channels, params, options);
        baselines::SolveSummary summary;
        summary.point = std::move(result.point);
        summary.outer_iterations = result.outer_iterations;
        summary.converged = result.converged;
        return summary;
      },
      py::arg("channels"), py::arg("params"),
      py::arg("options") = numerics::SolverOptions{});
  m.def(
      "optimize_multi_user",
      [](const ChannelSet& channels, const SystemParams& params,
         const numerics::SolverOptions& options) {
        auto result = multi_user::optimize_multi_user(channels, params, options);
        baselines::SolveSummary summary;
        summary.point = std::move(result.point);
        summary.outer_iterations = result.outer_iterations;
        summary.converged = result.converged;
        return summary;
      },
      py::arg("channels"), py::arg("params"),
      py::arg("options") = numerics::SolverOptions{});

  py::class_<baselines::BaselineConfig>(m, "BaselineConfig")
      .def(py::init<>())
      .def_readwrite("cris_position", &baselines::BaselineConfig::cris_position)
      .def_readwrite("exh_starts", &baselines::BaselineConfig::exh_starts)
      .def_readwrite("afr_prelog", &baselines::BaselineConfig::afr_prelog)
      .def_readwrite("afr_charge_idle_relays",
                     &baselines::BaselineConfig::afr_charge_idle_relays);

  m.def("cris_params", &baselines::cris_params, py::arg("params"));
  m.def("cris_topology", &baselines::cris_topology, py::arg("topology"),
        py::arg("position"));
  m.def("solve_cris", &baselines::solve_cris, py::arg("channels"), py::arg("params"),
        py::arg("options") = numerics::SolverOptions{});
  m.def("solve_afr", &baselines::solve_afr, py::arg("topology"), py::arg("params"),
        py::arg("config"), py::arg("seed"));
  m.def("solve_exhaustive_dris", &baselines::solve_exhaustive_dris,
        py::arg("channels"), py::arg("params"),
        py::arg("options") = numerics::SolverOptions{}, py::arg("starts") = 100,
        py::arg("seed") = 1);

  // oracles
  m.def(
      "exhaustive_onoff",
      [](const std::function<std::optional<double>(const OnOffVector&)>& evaluate,
         int ris_count) {
        const auto result = oracles::exhaustive_onoff(evaluate, ris_count);
        return py::make_tuple(result.x, result.value, result.any_feasible);
      },
      py::arg("evaluate"), py::arg("ris_count"));
  m.def(
      "grid_power",
      [](const std::function<double(double)>& ee, double p_min, double p_max,
         int points) {
        const auto result = oracles::grid_power(ee, p_min, p_max, points);
        return py::make_tuple(result.p, result.value);
      },
      py::arg("ee_of_power"), py::arg("p_min"), py::arg("p_max"), py::arg("points"));

  // scenario runner
  m.def(
      "run_preset",
      [](const std::string& name, int trials, std::uint64_t seed, int jobs) {
        cli::Scenario scenario = cli::preset_scenario(name);
        if (trials > 0) scenario.trials = trials;
        scenario.root_seed = seed;
        const auto rows = cli::run_scenario(scenario, jobs, false);
        py::list out;
        for (const auto& row : rows) out.append(row_to_dict(row));
        return out;
      },
      py::arg("name"), py::arg("trials") = 0, py::arg("seed") = 1, py::arg("jobs") = 1);
  m.def(
      "run_config",
      [](const std::string& text, int jobs) {
        const auto rows = cli::run_scenario(cli::parse_config(text), jobs, false);
        py::list out;
        for (const auto& row : rows) out.append(row_to_dict(row));
        return out;
      },
      py::arg("config_text"), py::arg("jobs") = 1);
  m.def("preset_names", &cli::preset_names);

  m.attr("__version__") = "0.1.0";
}
