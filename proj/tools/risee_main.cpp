#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "risee/errors.hpp"
#include "risee/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw risee::ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-efficiency simulator for multi-RIS MISO downlinks"};
  app.require_subcommand(1);

  // risee run
  auto* run = app.add_subcommand("run", "Run a scenario sweep and write a CSV");
  std::string config_path;
  std::string preset;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  int jobs = 1;
  bool timing = false;
  run->add_option("--config", config_path, "Scenario config file");
  run->add_option("--preset", preset, "Built-in preset (fig2..fig9)");
  run->add_option("--out", out_path, "Output CSV path")->required();
  run->add_option("--seed", seed, "Override the root seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });
  run->add_option("--trials", trials, "Override the trial count");
  run->add_option("--jobs", jobs, "Worker threads (rows stay in canonical order)");
  run->add_flag("--timing", timing,
                "Record wall-clock runtime_ms per row (off by default so "
                "outputs are byte-reproducible)");

  // risee verify
  auto* verify = app.add_subcommand("verify", "Run the oracle-equivalence checks");
  bool quick = false;
  verify->add_flag("--quick", quick, "Smaller sample counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) {
      risee::cli::Scenario scenario;
      try {
        if (!preset.empty() && !config_path.empty()) {
          throw risee::ConfigError("pass either --config or --preset, not both");
        }
        if (!preset.empty()) {
          scenario = risee::cli::preset_scenario(preset);
        } else if (!config_path.empty()) {
          scenario = risee::cli::parse_config(read_file(config_path));
        } else {
          throw risee::ConfigError("one of --config or --preset is required");
        }
        if (seed_set) scenario.root_seed = seed;
        if (trials > 0) scenario.trials = trials;
        scenario.validate();
      } catch (const risee::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
      }
      const auto rows = risee::cli::run_scenario(scenario, jobs, timing);
      risee::cli::emit_csv(rows, out_path);
      std::cout << "wrote " << rows.size() << " rows to " << out_path << '\n';
      return kExitOk;
    }
    if (verify->parsed()) {
      const bool ok = risee::cli::run_verification(quick, std::cout);
      return ok ? kExitOk : kExitRuntimeError;
    }
  } catch (const risee::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitOk;
}
