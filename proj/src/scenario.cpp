#include "risee/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "risee/errors.hpp"
#include "risee/oracles.hpp"
#include "risee/rng.hpp"
#include "risee/single_user.hpp"
#include "risee/multi_user.hpp"

namespace risee::cli {

std::string sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::PMaxDbm: return "p_max_dbm";
    case SweepVariable::MinRateBps: return "min_rate_bps";
    case SweepVariable::ElementsN: return "elements_n";
    case SweepVariable::RisCountL: return "ris_count_l";
    case SweepVariable::AntennasM: return "antennas_m";
    case SweepVariable::UsersK: return "users_k";
  }
  return "?";
}

SweepVariable sweep_variable_from_name(const std::string& name) {
  if (name == "p_max_dbm") return SweepVariable::PMaxDbm;
  if (name == "min_rate_bps") return SweepVariable::MinRateBps;
  if (name == "elements_n") return SweepVariable::ElementsN;
  if (name == "ris_count_l") return SweepVariable::RisCountL;
  if (name == "antennas_m") return SweepVariable::AntennasM;
  if (name == "users_k") return SweepVariable::UsersK;
  throw ConfigError("unknown sweep variable: " + name);
}

void Scenario::validate() const {
  std::vector<std::string> problems;
  if (name.empty()) problems.push_back("scenario name is empty");
  if (sweep_values.empty()) {
    problems.push_back("sweep values are empty");
  } else if (sweep_values.size() > 1) {
    bool increasing = true;
    bool decreasing = true;
    for (size_t i = 1; i < sweep_values.size(); ++i) {
      if (!(sweep_values[i] > sweep_values[i - 1])) increasing = false;
      if (!(sweep_values[i] < sweep_values[i - 1])) decreasing = false;
    }
    if (!increasing && !decreasing) {
      problems.push_back("sweep values must be strictly monotone");
    }
  }
  if (schemes.empty()) problems.push_back("no schemes selected");
  if (trials < 1) problems.push_back("trials must be >= 1");
  if (baseline_config.exh_starts < 1) problems.push_back("exh_starts must be >= 1");
  if (baseline_config.afr_prelog != 0.5 && baseline_config.afr_prelog != 1.0) {
    problems.push_back("afr_prelog must be 0.5 or 1.0");
  }
  if (!(region_side_m > 0)) problems.push_back("region_side_m must be positive");
  if (!(ris_radius_m > 0)) problems.push_back("ris_radius_m must be positive");

  const bool integer_sweep = sweep_variable == SweepVariable::ElementsN ||
                             sweep_variable == SweepVariable::RisCountL ||
                             sweep_variable == SweepVariable::AntennasM ||
                             sweep_variable == SweepVariable::UsersK;
  if (integer_sweep) {
    for (double v : sweep_values) {
      if (v < 1 || v != std::floor(v)) {
        problems.push_back("sweep values for " + sweep_variable_name(sweep_variable) +
                           " must be positive integers");
        break;
      }
    }
  }
  if (sweep_variable == SweepVariable::MinRateBps) {
    for (double v : sweep_values) {
      if (v < 0) {
        problems.push_back("min rate sweep values must be nonnegative");
        break;
      }
    }
  }
  try {
    base_params.validate();
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& value, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": not a number: '" + value + "'");
  }
}

int parse_int(const std::string& value, int line) {
  const double v = parse_number(value, line);
  if (v != std::floor(v)) {
    throw ConfigError("line " + std::to_string(line) + ": expected an integer: '" +
                      value + "'");
  }
  return static_cast<int>(v);
}

bool parse_bool(const std::string& value, int line) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("line " + std::to_string(line) + ": expected a boolean: '" +
                    value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

Scenario parse_config(const std::string& text) {
  Scenario scenario;
  scenario.base_params = SystemParams::defaults();

  std::set<std::string> seen;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int line = 0;

  auto key_error = [](int ln, const std::string& msg) {
    throw ConfigError("line " + std::to_string(ln) + ": " + msg);
  };

  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;

    if (s.front() == '[') {
      if (s.back() != ']') key_error(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "sweep" && section != "schemes" && section != "params" &&
          section != "run") {
        key_error(line, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = s.find('=');
    if (eq == std::string::npos) key_error(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) key_error(line, "empty key");

    const std::string qualified = section + "." + key;
    if (!seen.insert(qualified).second) {
      key_error(line, "duplicate key '" + key + "'" +
                          (section.empty() ? "" : " in section [" + section + "]"));
    }

    SystemParams& p = scenario.base_params;
    if (section.empty()) {
      if (key == "name") {
        scenario.name = value;
      } else {
        key_error(line, "unknown key '" + key + "' outside any section");
      }
    } else if (section == "sweep") {
      if (key == "variable") {
        try {
          scenario.sweep_variable = sweep_variable_from_name(value);
        } catch (const ConfigError& e) {
          key_error(line, e.what());
        }
      } else if (key == "values") {
        scenario.sweep_values.clear();
        for (const auto& item : split_list(value)) {
          scenario.sweep_values.push_back(parse_number(item, line));
        }
      } else {
        key_error(line, "unknown key '" + key + "' in [sweep]");
      }
    } else if (section == "schemes") {
      if (key == "use") {
        scenario.schemes.clear();
        for (const auto& item : split_list(value)) {
          try {
            scenario.schemes.push_back(baselines::scheme_from_name(item));
          } catch (const std::exception& e) {
            key_error(line, e.what());
          }
        }
      } else if (key == "exh_starts") {
        scenario.baseline_config.exh_starts = parse_int(value, line);
      } else if (key == "afr_prelog") {
        scenario.baseline_config.afr_prelog = parse_number(value, line);
      } else if (key == "afr_charge_idle_relays") {
        scenario.baseline_config.afr_charge_idle_relays = parse_bool(value, line);
      } else if (key == "cris_position") {
        const auto items = split_list(value);
        if (items.size() != 2) key_error(line, "cris_position needs two coordinates");
        scenario.baseline_config.cris_position = {parse_number(items[0], line),
                                                  parse_number(items[1], line)};
      } else {
        key_error(line, "unknown key '" + key + "' in [schemes]");
      }
    } else if (section == "params") {
      if (key == "bandwidth_hz") {
        p.bandwidth_hz = parse_number(value, line);
      } else if (key == "noise_dbm") {
        p.noise_w = numerics::dbm_to_watts(parse_number(value, line));
      } else if (key == "p_max_dbm") {
        p.p_max_w = numerics::dbm_to_watts(parse_number(value, line));
      } else if (key == "p_bs_dbm") {
        p.p_bs_w = numerics::dbm_to_watts(parse_number(value, line));
      } else if (key == "p_user_dbm") {
        p.p_user_w.assign(p.num_users, numerics::dbm_to_watts(parse_number(value, line)));
      } else if (key == "p_ris_element_dbm") {
        p.p_ris_element_w = numerics::dbm_to_watts(parse_number(value, line));
      } else if (key == "relay_power_dbm") {
        p.relay_power_w = numerics::dbm_to_watts(parse_number(value, line));
      } else if (key == "relay_antenna_circuit_dbm") {
        p.relay_antenna_circuit_w = numerics::dbm_to_watts(parse_number(value, line));
      } else if (key == "amplifier_efficiency") {
        const double nu = parse_number(value, line);
        if (!(nu > 0) || nu > 1) key_error(line, "amplifier_efficiency must be in (0,1]");
        p.amplifier_inefficiency = 1.0 / nu;
      } else if (key == "num_antennas") {
        p.num_antennas = parse_int(value, line);
      } else if (key == "num_ris") {
        const int l = parse_int(value, line);
        const int n = p.elements_per_ris.empty() ? 4 : p.elements_per_ris[0];
        p.num_ris = l;
        p.elements_per_ris.assign(l, n);
      } else if (key == "elements_per_ris") {
        const int n = parse_int(value, line);
        p.elements_per_ris.assign(p.num_ris, n);
      } else if (key == "num_users") {
        const int k = parse_int(value, line);
        const double pu = p.p_user_w.empty() ? 0.01 : p.p_user_w[0];
        const double r = p.min_rates_bps.empty() ? 1e6 : p.min_rates_bps[0];
        p.num_users = k;
        p.p_user_w.assign(k, pu);
        p.min_rates_bps.assign(k, r);
      } else if (key == "min_rate_bps") {
        p.min_rates_bps.assign(p.num_users, parse_number(value, line));
      } else if (key == "penalty_c") {
        p.penalty_c = parse_number(value, line);
      } else if (key == "region_side_m") {
        scenario.region_side_m = parse_number(value, line);
      } else if (key == "ris_radius_m") {
        scenario.ris_radius_m = parse_number(value, line);
      } else {
        key_error(line, "unknown key '" + key + "' in [params]");
      }
    } else if (section == "run") {
      if (key == "trials") {
        scenario.trials = parse_int(value, line);
      } else if (key == "seed") {
        try {
          size_t pos = 0;
          scenario.root_seed = std::stoull(value, &pos);
          if (pos != value.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
          key_error(line, "seed must be an unsigned integer: '" + value + "'");
        }
      } else if (key == "tolerance") {
        scenario.solver.tolerance = parse_number(value, line);
      } else {
        key_error(line, "unknown key '" + key + "' in [run]");
      }
    }
  }

  if (scenario.schemes.empty()) scenario.schemes = {baselines::Scheme::DRIS};
  scenario.validate();
  return scenario;
}

namespace {

Scenario base_preset(const std::string& name) {
  Scenario s;
  s.name = name;
  s.preset = name;
  s.base_params = SystemParams::defaults();
  s.trials = 50;
  s.root_seed = 1;
  s.baseline_config.exh_starts = 100;
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"};
}

Scenario preset_scenario(const std::string& name) {
  using baselines::Scheme;
  Scenario s = base_preset(name);
  if (name == "fig2") {
    // Energy efficiency vs BS transmit power budget.
    s.sweep_variable = SweepVariable::PMaxDbm;
    s.sweep_values = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    s.schemes = {Scheme::DRIS, Scheme::CRIS, Scheme::AFR, Scheme::EXH_DRIS};
  } else if (name == "fig3") {
    // Sum-rate vs power budget with no rate demand.
    s.sweep_variable = SweepVariable::PMaxDbm;
    s.sweep_values = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    s.schemes = {Scheme::DRIS, Scheme::CRIS, Scheme::AFR};
    s.base_params.min_rates_bps.assign(s.base_params.num_users, 0.0);
  } else if (name == "fig4") {
    // Energy efficiency vs minimum rate demand; the top of the sweep pushes
    // past the unconstrained-optimal rate so the EE decline is visible.
    s.sweep_variable = SweepVariable::MinRateBps;
    s.sweep_values = {2e5, 1e6, 2e6, 4e6, 8e6, 1.2e7, 1.6e7, 2e7};
    s.schemes = {Scheme::DRIS, Scheme::CRIS, Scheme::AFR};
  } else if (name == "fig5") {
    // Energy efficiency vs elements per RIS (L = 4, 25 dBm budget).
    s.sweep_variable = SweepVariable::ElementsN;
    s.sweep_values = {2, 4, 8, 12};
    s.schemes = {Scheme::DRIS};
    s.base_params.num_ris = 4;
    s.base_params.elements_per_ris.assign(4, 4);
    s.base_params.p_max_w = numerics::dbm_to_watts(25);
  } else if (name == "fig6") {
    // Energy efficiency vs number of RISs (N = 4, 25 dBm budget).
    s.sweep_variable = SweepVariable::RisCountL;
    s.sweep_values = {2, 4, 8, 12};
    s.schemes = {Scheme::DRIS};
    s.base_params.p_max_w = numerics::dbm_to_watts(25);
  } else if (name == "fig7") {
    s.sweep_variable = SweepVariable::AntennasM;
    s.sweep_values = {2, 4, 6, 8, 10, 12};
    s.schemes = {Scheme::DRIS};
  } else if (name == "fig8") {
    s.sweep_variable = SweepVariable::UsersK;
    s.sweep_values = {1, 2, 3, 4};
    s.schemes = {Scheme::DRIS, Scheme::CRIS, Scheme::AFR};
  } else if (name == "fig9") {
    // Antenna sweep at the reduced 25 dBm budget.
    s.sweep_variable = SweepVariable::AntennasM;
    s.sweep_values = {2, 4, 6, 8, 10, 12};
    s.schemes = {Scheme::DRIS};
    s.base_params.p_max_w = numerics::dbm_to_watts(25);
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  s.validate();
  return s;
}

namespace {

SystemParams apply_sweep(const SystemParams& base, SweepVariable variable,
                         double value) {
  SystemParams p = base;
  switch (variable) {
    case SweepVariable::PMaxDbm:
      p.p_max_w = numerics::dbm_to_watts(value);
      break;
    case SweepVariable::MinRateBps:
      p.min_rates_bps.assign(p.num_users, value);
      break;
    case SweepVariable::ElementsN:
      p.elements_per_ris.assign(p.num_ris, static_cast<int>(value));
      break;
    case SweepVariable::RisCountL: {
      const int n = p.elements_per_ris.empty() ? 4 : p.elements_per_ris[0];
      p.num_ris = static_cast<int>(value);
      p.elements_per_ris.assign(p.num_ris, n);
      break;
    }
    case SweepVariable::AntennasM:
      p.num_antennas = static_cast<int>(value);
      break;
    case SweepVariable::UsersK: {
      const int k = static_cast<int>(value);
      const double pu = p.p_user_w.empty() ? 0.01 : p.p_user_w[0];
      const double r = p.min_rates_bps.empty() ? 1e6 : p.min_rates_bps[0];
      p.num_users = k;
      p.p_user_w.assign(k, pu);
      p.min_rates_bps.assign(k, r);
      break;
    }
  }
  return p;
}

ResultRow solve_row(const Scenario& scenario, int value_index, int scheme_index,
                    int trial, bool timing) {
  const double value = scenario.sweep_values[value_index];
  const baselines::Scheme scheme = scenario.schemes[scheme_index];
  SystemParams params = apply_sweep(scenario.base_params, scenario.sweep_variable, value);
  params.validate();

  const std::uint64_t seed =
      rng::mix({scenario.root_seed,
                static_cast<std::uint64_t>(rng::StreamTag::kTrial),
                static_cast<std::uint64_t>(trial)});

  ResultRow row;
  row.scenario = scenario.name;
  row.preset = scenario.preset;
  row.seed = seed;
  row.scheme = baselines::scheme_name(scheme);
  row.sweep_variable = sweep_variable_name(scenario.sweep_variable);
  row.sweep_value = value;
  row.users = params.num_users;
  row.antennas = params.num_antennas;
  row.ris_count = params.num_ris;
  row.elements_total = params.total_elements();
  row.p_max_dbm = numerics::watts_to_dbm(params.p_max_w);
  row.min_rate_bps = params.min_rates_bps[0];

  const auto begin = std::chrono::steady_clock::now();
  try {
    const Topology topology = generate_topology(params, scenario.region_side_m,
                                                scenario.ris_radius_m, seed);
    baselines::SolveSummary summary;
    switch (scheme) {
      case baselines::Scheme::DRIS: {
        const ChannelSet channels = generate_channels(topology, params, seed);
        summary = baselines::solve_dris(channels, params, scenario.solver);
        break;
      }
      case baselines::Scheme::EXH_DRIS: {
        const ChannelSet channels = generate_channels(topology, params, seed);
        summary = baselines::solve_exhaustive_dris(
            channels, params, scenario.solver, scenario.baseline_config.exh_starts,
            seed);
        break;
      }
      case baselines::Scheme::CRIS: {
        const SystemParams cp = baselines::cris_params(params);
        const Topology ct = baselines::cris_topology(
            topology, scenario.baseline_config.cris_position);
        const ChannelSet channels = generate_channels(ct, cp, seed);
        summary = baselines::solve_cris(channels, cp, scenario.solver);
        row.ris_count = cp.num_ris;
        break;
      }
      case baselines::Scheme::AFR: {
        summary = baselines::solve_afr(topology, params, scenario.baseline_config, seed);
        break;
      }
    }
    row.feasible = true;
    row.ee_bits_per_joule = summary.point.energy_efficiency;
    row.sum_rate_bps = summary.point.sum_rate_bps;
    row.total_power_w = summary.point.total_power_w;
    row.active_ris_count = summary.point.onoff.active_count();
    row.outer_iterations = summary.outer_iterations;
  } catch (const InfeasibleError&) {
    row.feasible = false;
  }
  if (timing) {
    row.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - begin)
                         .count();
  }
  return row;
}

}  // namespace

std::vector<ResultRow> run_scenario(const Scenario& scenario, int jobs, bool timing) {
  scenario.validate();
  const int values = static_cast<int>(scenario.sweep_values.size());
  const int schemes = static_cast<int>(scenario.schemes.size());
  const int trials = scenario.trials;
  const int total = values * schemes * trials;

  std::vector<ResultRow> rows(total);
  std::atomic<int> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    while (true) {
      const int task = cursor.fetch_add(1);
      if (task >= total) break;
      const int value_index = task / (schemes * trials);
      const int scheme_index = (task / trials) % schemes;
      const int trial = task % trials;
      try {
        rows[task] = solve_row(scenario, value_index, scheme_index, trial, timing);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int workers = std::max(1, std::min(jobs, total));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

namespace {

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.9g", v);
  return buffer;
}

}  // namespace

std::string csv_header() {
  return "scenario,preset,seed,scheme,sweep_variable,sweep_value,K,M,L,N_total,"
         "p_max_dbm,min_rate_bps,ee_bits_per_joule,sum_rate_bps,total_power_w,"
         "active_ris_count,outer_iterations,feasible,runtime_ms";
}

std::string format_row(const ResultRow& r) {
  std::ostringstream os;
  os << r.scenario << ',' << r.preset << ',' << r.seed << ',' << r.scheme << ','
     << r.sweep_variable << ',' << format_double(r.sweep_value) << ',' << r.users
     << ',' << r.antennas << ',' << r.ris_count << ',' << r.elements_total << ','
     << format_double(r.p_max_dbm) << ',' << format_double(r.min_rate_bps) << ','
     << format_double(r.ee_bits_per_joule) << ',' << format_double(r.sum_rate_bps)
     << ',' << format_double(r.total_power_w) << ',' << r.active_ris_count << ','
     << r.outer_iterations << ',' << (r.feasible ? 1 : 0) << ',' << r.runtime_ms;
  return os.str();
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  out << csv_header() << '\n';
  for (const auto& row : rows) {
    out << format_row(row) << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("emit_csv: write failed for " + path);
}

// ---------------------------------------------------------------------------
// verify subcommand
// ---------------------------------------------------------------------------

namespace {

struct CheckReporter {
  std::ostream& out;
  bool all_passed = true;

  void report(const std::string& name, bool passed, const std::string& detail) {
    out << (passed ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) out << ": " << detail;
    out << '\n';
    all_passed = all_passed && passed;
  }
};

/// Unit-scale K=1 instance with the on-off tradeoff active: synthetic
/// channels, phases aligned by the SCA stage, quadratic from the cascade.
struct OnOffInstance {
  SystemParams params;
  single_user::OnOffQuadratic quad;
  double p1 = 0.0;
};

OnOffInstance synthetic_onoff_instance(int ris_count, rng::Stream& stream,
                                       const numerics::SolverOptions& options) {
  OnOffInstance inst;
  const int antennas = 4;
  const int elements = 2;
  inst.params = SystemParams::defaults_with(1, antennas, ris_count, elements);
  inst.params.bandwidth_hz = 1.0;
  inst.params.noise_w = 1.0;
  inst.params.p_max_w = 10.0;
  inst.params.p_bs_w = stream.uniform(1.0, 4.0);
  inst.params.p_user_w = {stream.uniform(0.05, 0.3)};
  inst.params.p_ris_element_w = stream.uniform(0.02, 0.3);
  inst.params.min_rates_bps = {stream.uniform(0.0, 0.5)};

  ChannelSet ch;
  ch.g.resize(1);
  ch.bs_ris.resize(ris_count);
  ch.h.assign(1, std::vector<Eigen::VectorXcd>(ris_count));
  ch.g[0].resize(antennas);
  for (int m = 0; m < antennas; ++m) ch.g[0][m] = stream.cnormal();
  for (int l = 0; l < ris_count; ++l) {
    const double scale =
        stream.uniform(0.1, 0.8) / std::sqrt(static_cast<double>(ris_count * elements));
    ch.bs_ris[l].resize(elements, antennas);
    ch.h[0][l].resize(elements);
    for (int r = 0; r < elements; ++r) {
      ch.h[0][l][r] = stream.cnormal();
      for (int c = 0; c < antennas; ++c) ch.bs_ris[l](r, c) = scale * stream.cnormal();
    }
  }

  const OnOffVector all_on = OnOffVector::all_on(ris_count);
  const auto cascade = build_cascade_matrix(ch, all_on, 0);
  const auto aligned = single_user::optimize_phases(
      ch.g[0], cascade, Eigen::VectorXcd::Ones(ris_count * elements), options);
  const auto phases =
      PhaseConfig::from_conj_stack(aligned.v, inst.params.elements_per_ris);
  inst.quad = single_user::build_onoff_quadratic(ch, phases);
  inst.p1 = stream.uniform(0.2, inst.params.p_max_w);
  return inst;
}

}  // namespace

bool run_verification(bool quick, std::ostream& out) {
  CheckReporter reporter{out};
  numerics::SolverOptions options;

  {  // Lambert-W residual over an offset log-spaced grid.
    const int samples = quick ? 10000 : 100000;
    const double lo = 1e-9;
    const double hi = 1e9 + 1.0 / M_E;
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double u =
          lo * std::pow(hi / lo, static_cast<double>(i) / (samples - 1));
      const double x = u - 1.0 / M_E;
      const double w = numerics::lambert_w0(x);
      worst = std::max(worst, std::abs(w * std::exp(w) - x) / std::max(1.0, std::abs(x)));
    }
    reporter.report("lambert_w0 residual", worst <= 1e-12,
                    "max scaled residual " + format_double(worst));
  }

  {  // Closed-form power vs grid oracle.
    auto stream = rng::substream(20240, rng::StreamTag::kTrial);
    const int instances = quick ? 20 : 50;
    const int points = quick ? 100000 : 1000000;
    bool ok = true;
    double worst_gap = 0.0;
    for (int i = 0; i < instances && ok; ++i) {
      single_user::PowerProblem problem;
      problem.gbar = std::pow(10.0, stream.uniform(-1.0, 4.0));
      problem.p_static = stream.uniform(0.5, 10.0);
      problem.mu = stream.uniform(1.0, 2.0);
      problem.p_min = 0.0;
      problem.p_max = stream.uniform(1.0, 50.0);
      problem.bandwidth_hz = 1.0;
      auto ee = [&](double p) {
        return std::log2(1.0 + problem.gbar * p) /
               (problem.mu * p + problem.p_static);
      };
      const double p_star = single_user::optimal_power(problem);
      const auto grid = oracles::grid_power(ee, problem.p_min, problem.p_max, points);
      const double gap = grid.value - ee(p_star);
      worst_gap = std::max(worst_gap, gap);
      ok = gap <= 1e-9;
    }
    reporter.report("optimal_power vs grid oracle", ok,
                    "worst EE gap " + format_double(worst_gap));
  }

  {  // Phase SCA monotonicity.
    auto stream = rng::substream(20241, rng::StreamTag::kTrial);
    const int instances = quick ? 50 : 200;
    bool ok = true;
    for (int i = 0; i < instances && ok; ++i) {
      const int q = 2 + static_cast<int>(stream.uniform(0.0, 15.0));
      const int m = 1 + static_cast<int>(stream.uniform(0.0, 4.0));
      Eigen::VectorXcd g(m);
      for (int j = 0; j < m; ++j) g[j] = stream.cnormal();
      Eigen::MatrixXcd u(q, m);
      for (int r = 0; r < q; ++r) {
        for (int c = 0; c < m; ++c) u(r, c) = stream.cnormal();
      }
      Eigen::VectorXcd v0(q);
      for (int r = 0; r < q; ++r) v0[r] = std::polar(1.0, stream.uniform(0.0, 2 * M_PI));
      const auto result = single_user::optimize_phases(g, u, v0, options);
      for (size_t j = 1; j < result.gains.size(); ++j) {
        if (result.gains[j] < result.gains[j - 1] * (1.0 - 1e-12)) ok = false;
      }
    }
    reporter.report("phase SCA monotone gain", ok, "");
  }

  {  // Dual + Dinkelbach on-off vs exhaustive.
    auto stream = rng::substream(20242, rng::StreamTag::kTrial);
    const int seeds = quick ? 15 : 40;
    bool ok = true;
    int fallbacks = 0;
    double worst = 0.0;
    for (int i = 0; i < seeds && ok; ++i) {
      const int ris_count = 4;
      const auto inst = synthetic_onoff_instance(ris_count, stream, options);
      const SystemParams& params = inst.params;
      const auto solved =
          single_user::dinkelbach_onoff(inst.quad, inst.p1, params, options);
      if (solved.used_fallback) ++fallbacks;
      auto evaluate = [&](const OnOffVector& x) -> std::optional<double> {
        const double floor_gain =
            (std::exp2(params.min_rates_bps[0] / params.bandwidth_hz) - 1.0) *
            params.noise_w / inst.p1;
        if (inst.quad.evaluate(x) < floor_gain * (1.0 - 1e-9)) return std::nullopt;
        const double rate = params.bandwidth_hz *
                            std::log2(1.0 + inst.p1 * inst.quad.evaluate(x) /
                                                params.noise_w);
        double power = params.amplifier_inefficiency * inst.p1 +
                       params.p_user_w[0] + params.p_bs_w;
        for (int l = 0; l < ris_count; ++l) {
          if (x.x[l]) power += params.elements_per_ris[l] * params.p_ris_element_w;
        }
        return rate / power;
      };
      const auto oracle = oracles::exhaustive_onoff(evaluate, ris_count);
      const double got = evaluate(solved.x).value_or(0.0);
      const double rel = std::abs(got - oracle.value) / std::max(oracle.value, 1e-12);
      worst = std::max(worst, rel);
      ok = rel <= 1e-6;
    }
    reporter.report("on-off dual vs exhaustive", ok,
                    "worst rel gap " + format_double(worst) + ", fallbacks " +
                        std::to_string(fallbacks) + "/" + std::to_string(seeds));
  }

  {  // Greedy never beats exhaustive, usually matches.
    const int seeds = quick ? 10 : 25;
    bool ok = true;
    for (int i = 0; i < seeds && ok; ++i) {
      SystemParams params = SystemParams::defaults_with(2, 2, 4, 2);
      params.min_rates_bps.assign(2, 1e5);
      const Topology topology = generate_topology(params, 300.0, 100.0, 777 + i);
      const ChannelSet channels = generate_channels(topology, params, 777 + i);
      const PhaseConfig phases = PhaseConfig::zeros(params.elements_per_ris);
      const OnOffVector all_on = OnOffVector::all_on(params.num_ris);
      Beamformers beams;
      try {
        beams = multi_user::initial_beamformers(channels, phases, all_on, params);
      } catch (const InfeasibleError&) {
        continue;
      }
      OnOffVector greedy;
      try {
        greedy = multi_user::greedy_onoff(channels, phases, beams, params);
      } catch (const InfeasibleError&) {
        continue;
      }
      auto evaluate = [&](const OnOffVector& x) -> std::optional<double> {
        const OperatingPoint point =
            evaluate_operating_point(params, channels, phases, x, beams);
        for (int k = 0; k < params.num_users; ++k) {
          if (point.rates_bps[k] <
              params.min_rates_bps[k] * (1.0 - 1e-6)) {
            return std::nullopt;
          }
        }
        return point.energy_efficiency;
      };
      const auto oracle = oracles::exhaustive_onoff(evaluate, params.num_ris);
      const double got = evaluate(greedy).value_or(0.0);
      if (got > oracle.value * (1.0 + 1e-12)) ok = false;
    }
    reporter.report("greedy on-off below exhaustive bound", ok, "");
  }

  {  // Interior-point KKT audit on random concave quadratics.
    auto stream = rng::substream(20244, rng::StreamTag::kTrial);
    const int instances = quick ? 10 : 25;
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < instances && ok; ++i) {
      const int n = 2 + static_cast<int>(stream.uniform(0.0, 4.0));
      Eigen::MatrixXd a(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) a(r, c) = stream.normal();
      }
      const Eigen::MatrixXd h = a * a.transpose() + Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd target(n);
      for (int r = 0; r < n; ++r) target[r] = stream.uniform(-2.0, 2.0);

      auto problem = numerics::ConvexSubproblem::unbounded(n);
      problem.lower.setConstant(-1.0);
      problem.upper.setConstant(1.0);
      problem.objective.value = [h, target](const Eigen::VectorXd& x) {
        const Eigen::VectorXd d = x - target;
        return -0.5 * d.dot(h * d);
      };
      problem.objective.gradient = [h, target](const Eigen::VectorXd& x) {
        return (-h * (x - target)).eval();
      };
      const auto solution =
          numerics::solve_convex(problem, Eigen::VectorXd::Zero(n), options);
      const double residual = oracles::kkt_residual(problem, solution.point,
                                                    options.kkt_tolerance * 100);
      worst = std::max(worst, residual);
      ok = residual <= options.kkt_tolerance * 100;
    }
    reporter.report("interior point KKT audit", ok,
                    "worst residual " + format_double(worst));
  }

  return reporter.all_passed;
}

}  // namespace risee::cli
