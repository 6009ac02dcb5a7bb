#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "risee/baselines.hpp"
#include "risee/errors.hpp"
#include "risee/model.hpp"
#include "risee/numerics.hpp"

namespace risee::cli {

enum class SweepVariable {
  PMaxDbm,
  MinRateBps,
  ElementsN,
  RisCountL,
  AntennasM,
  UsersK,
};

std::string sweep_variable_name(SweepVariable v);
SweepVariable sweep_variable_from_name(const std::string& name);

struct Scenario {
  std::string name;
  std::string preset;  // empty unless built from a preset
  SweepVariable sweep_variable = SweepVariable::PMaxDbm;
  std::vector<double> sweep_values;  // strictly monotone
  std::vector<baselines::Scheme> schemes;
  int trials = 1;
  std::uint64_t root_seed = 1;
  SystemParams base_params;
  double region_side_m = 300.0;
  double ris_radius_m = 100.0;
  baselines::BaselineConfig baseline_config;
  numerics::SolverOptions solver;

  void validate() const;  // throws ConfigError listing violated invariants
};

/// Parse the INI-style scenario text (sections [sweep], [schemes], [params],
/// [run]). Unknown or duplicate keys are errors with line diagnostics; powers
/// are accepted in dBm and converted.
Scenario parse_config(const std::string& text);

/// Built-in desk-scale presets fig2..fig9 (50 trials, 100 EXH starts).
Scenario preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

struct ResultRow {
  std::string scenario;
  std::string preset;
  std::uint64_t seed = 0;  // per-trial substream seed
  std::string scheme;
  std::string sweep_variable;
  double sweep_value = 0.0;
  int users = 0;
  int antennas = 0;
  int ris_count = 0;
  int elements_total = 0;
  double p_max_dbm = 0.0;
  double min_rate_bps = 0.0;
  double ee_bits_per_joule = 0.0;
  double sum_rate_bps = 0.0;
  double total_power_w = 0.0;
  int active_ris_count = 0;
  int outer_iterations = 0;
  bool feasible = false;
  std::int64_t runtime_ms = 0;
};

/// Runs sweep x scheme x trial, rows in canonical order regardless of the
/// worker count. Per-row infeasibility is recorded, not thrown. Timing stays
/// zero unless `timing` is set so default outputs are byte-reproducible.
std::vector<ResultRow> run_scenario(const Scenario& scenario, int jobs = 1,
                                    bool timing = false);

std::string csv_header();
std::string format_row(const ResultRow& row);

/// Header + rows, 9 significant digits, UTF-8, LF line endings.
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);

/// Oracle-equivalence self check (the `verify` subcommand); prints one
/// pass/fail line per check and returns true iff all pass.
bool run_verification(bool quick, std::ostream& out);

}  // namespace risee::cli
