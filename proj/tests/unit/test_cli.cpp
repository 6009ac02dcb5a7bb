#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "risee/errors.hpp"
#include "risee/scenario.hpp"

using namespace risee;
using doctest::Approx;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* kMinimalConfig =
    "name = smoke\n"
    "[sweep]\n"
    "variable = p_max_dbm\n"
    "values = 10, 25, 50\n";

}  // namespace

TEST_CASE("minimal config applies the standard defaults") {
  const cli::Scenario s = cli::parse_config(kMinimalConfig);
  CHECK(s.name == "smoke");
  CHECK(s.base_params.num_antennas == 8);
  CHECK(s.base_params.num_ris == 8);
  CHECK(s.base_params.elements_per_ris == std::vector<int>(8, 4));
  CHECK(s.base_params.num_users == 1);
  CHECK(s.base_params.min_rates_bps[0] == Approx(1e6));
  CHECK(s.base_params.p_max_w == Approx(100.0).epsilon(1e-12));  // 50 dBm
  CHECK(s.base_params.bandwidth_hz == Approx(1e6));
  CHECK(s.schemes == std::vector<baselines::Scheme>{baselines::Scheme::DRIS});
  CHECK(s.trials == 1);
}

TEST_CASE("config errors carry line/key diagnostics") {
  SUBCASE("duplicate key") {
    const std::string text = std::string(kMinimalConfig) + "[run]\ntrials = 2\ntrials = 3\n";
    CHECK_THROWS_WITH_AS(cli::parse_config(text),
                         doctest::Contains("duplicate key 'trials'"), ConfigError);
  }
  SUBCASE("unknown key") {
    const std::string text = std::string(kMinimalConfig) + "[params]\nnum_cats = 3\n";
    CHECK_THROWS_WITH_AS(cli::parse_config(text),
                         doctest::Contains("unknown key 'num_cats'"), ConfigError);
  }
  SUBCASE("sweep values out of order") {
    const std::string text =
        "name = bad\n[sweep]\nvariable = p_max_dbm\nvalues = 10, 5, 50\n";
    CHECK_THROWS_WITH_AS(cli::parse_config(text),
                         doctest::Contains("strictly monotone"), ConfigError);
  }
  SUBCASE("unknown sweep variable") {
    const std::string text = "name = bad\n[sweep]\nvariable = banana\nvalues = 1\n";
    CHECK_THROWS_AS(cli::parse_config(text), ConfigError);
  }
  SUBCASE("dBm conversion happens at parse time") {
    const std::string text =
        std::string(kMinimalConfig) + "[params]\nnoise_dbm = -104\np_bs_dbm = 39\n";
    const cli::Scenario s = cli::parse_config(text);
    CHECK(s.base_params.noise_w == Approx(3.981071706e-14).epsilon(1e-9));
    CHECK(s.base_params.p_bs_w == Approx(7.943282347).epsilon(1e-9));
  }
}

TEST_CASE("run_scenario row accounting and determinism") {
  // Tiny desk instance so the whole sweep runs in well under a second.
  const std::string text =
      "name = tiny\n"
      "[sweep]\n"
      "variable = p_max_dbm\n"
      "values = 10, 25, 50\n"
      "[schemes]\n"
      "use = DRIS\n"
      "[params]\n"
      "num_antennas = 2\n"
      "num_ris = 2\n"
      "elements_per_ris = 2\n"
      "min_rate_bps = 1e5\n"
      "[run]\n"
      "trials = 2\n"
      "seed = 9\n";
  const cli::Scenario scenario = cli::parse_config(text);

  const auto rows = cli::run_scenario(scenario, 1, false);
  CHECK(rows.size() == 6);  // 3 values x 1 scheme x 2 trials

  SUBCASE("rows are canonical and parallel execution matches serial") {
    const auto parallel = cli::run_scenario(scenario, 4, false);
    REQUIRE(parallel.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      CHECK(cli::format_row(parallel[i]) == cli::format_row(rows[i]));
    }
  }

  SUBCASE("CSV output is byte-identical across reruns") {
    const std::string path_a = "test_cli_out_a.csv";
    const std::string path_b = "test_cli_out_b.csv";
    cli::emit_csv(rows, path_a);
    cli::emit_csv(cli::run_scenario(scenario, 2, false), path_b);
    const std::string a = slurp(path_a);
    const std::string b = slurp(path_b);
    CHECK(a == b);
    CHECK(a.find('\r') == std::string::npos);  // LF endings only
    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
  }

  SUBCASE("CSV round-trips to 9 significant digits") {
    const std::string line = cli::format_row(rows[0]);
    std::istringstream is(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(is, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 19);
    const double ee = std::stod(fields[12]);
    const double rel = std::abs(ee - rows[0].ee_bits_per_joule) /
                       std::max(1e-300, rows[0].ee_bits_per_joule);
    CHECK(rel < 1e-8);
  }
}

TEST_CASE("infeasible rows are flagged, not fatal") {
  const std::string text =
      "name = hopeless\n"
      "[sweep]\n"
      "variable = p_max_dbm\n"
      "values = -40, 50\n"
      "[params]\n"
      "num_antennas = 2\n"
      "num_ris = 2\n"
      "elements_per_ris = 2\n"
      "min_rate_bps = 2e7\n"  // 20 bps/Hz: unreachable at -40 dBm
      "[run]\n"
      "trials = 1\n";
  const cli::Scenario scenario = cli::parse_config(text);
  const auto rows = cli::run_scenario(scenario, 1, false);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].feasible);
  CHECK(rows[0].ee_bits_per_joule == 0.0);
}

TEST_CASE("CSV header and empty table") {
  const std::string path = "test_cli_empty.csv";
  cli::emit_csv({}, path);
  const std::string content = slurp(path);
  CHECK(content == cli::csv_header() + "\n");
  std::remove(path.c_str());
  CHECK(cli::csv_header().rfind("scenario,preset,seed,scheme", 0) == 0);
}

TEST_CASE("presets exist and validate") {
  for (const auto& name : cli::preset_names()) {
    const cli::Scenario s = cli::preset_scenario(name);
    CHECK(s.preset == name);
    CHECK(s.trials == 50);
    CHECK_NOTHROW(s.validate());
  }
  CHECK_THROWS_AS(cli::preset_scenario("fig99"), ConfigError);
}
