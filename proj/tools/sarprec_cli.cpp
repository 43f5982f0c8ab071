#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sarprec/errors.hpp"
#include "sarprec/experiments.hpp"

namespace ex = sarprec::experiments;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitFailedRows = 2;

ex::ScenarioConfig load(const std::string& path) {
  auto cfg = ex::load_scenario(path);
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-efficient uplink precoding under SAR constraints"};
  app.require_subcommand(1);

  std::string config;
  std::string out;

  auto* run = app.add_subcommand("run", "Sweep P_max or the SAR limit and write a CSV of all schemes");
  std::string sweep;
  std::string grid;
  std::string schemes = "proposed,semax,backoff-worst,backoff-adaptive";
  std::optional<std::uint64_t> seed;
  std::optional<int> mc_samples;
  std::optional<double> pmax_dbm;
  int threads = 1;
  bool no_timing = false;
  run->add_option("--config", config, "Scenario JSON file")->required();
  run->add_option("--sweep", sweep, "Sweep variable")->required()->check(CLI::IsMember({"pmax", "sar"}));
  run->add_option("--grid", grid, "start:stop:step (dBm for pmax, W/kg for sar)");
  run->add_option("--schemes", schemes, "Comma-separated list of schemes");
  run->add_option("--out", out, "Output CSV path")->required();
  run->add_option("--seed", seed, "Master seed (overrides the scenario)");
  run->add_option("--mc-samples", mc_samples, "Monte-Carlo samples per row")->check(CLI::PositiveNumber);
  run->add_option("--pmax-dbm", pmax_dbm, "Power budget for SAR sweeps (overrides the scenario)");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--no-timing", no_timing, "Write wall_ms as 0 so repeated runs are byte-identical");

  auto* de = app.add_subcommand("validate-de", "Compare asymptotic and Monte-Carlo SE on random covariances");
  int num_q = 20;
  int de_samples = 10000;
  de->add_option("--config", config, "Scenario JSON file")->required();
  de->add_option("--out", out, "Output CSV path")->required();
  de->add_option("--count", num_q, "Number of random covariances")->check(CLI::PositiveNumber);
  de->add_option("--mc-samples", de_samples, "Monte-Carlo samples per covariance")->check(CLI::PositiveNumber);
  de->add_option("--seed", seed, "Seed (defaults to the scenario's master seed)");
  de->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* show = app.add_subcommand("describe", "Print the resolved scenario with defaults filled in");
  show->add_option("--config", config, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*show) {
      std::cout << ex::describe_scenario(load(config)) << '\n';
      return kExitOk;
    }
    if (*de) {
      const auto cfg = load(config);
      ex::DeValidationOptions opts;
      opts.num_covariances = num_q;
      opts.mc_samples = de_samples;
      opts.seed = seed.value_or(cfg.master_seed);
      opts.threads = threads;
      const auto report = ex::validate_de(cfg, opts);
      ex::write_de_csv(report, out);
      std::printf("max relative error %.4e, mean %.4e over %zu covariances\n", report.max_relative_error,
                  report.mean_relative_error, report.rows.size());
      return kExitOk;
    }

    ex::ScenarioConfig cfg;
    ex::SweepOptions opts;
    try {
      cfg = load(config);
      opts.variable = ex::parse_sweep_variable(sweep);
      opts.grid = grid.empty() ? ex::default_grid(opts.variable) : ex::parse_grid(grid);
      opts.schemes = ex::parse_schemes(schemes);
    } catch (const sarprec::ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitConfig;
    }
    opts.master_seed = seed;
    opts.mc_samples = mc_samples;
    opts.max_power_dbm = pmax_dbm;
    opts.threads = threads;
    opts.record_timing = !no_timing;
    const auto result = ex::run_sweep(cfg, opts);
    ex::write_csv(result, out);
    const auto failed = result.failed_rows();
    for (const auto& r : result.rows) {
      if (!r.ok()) std::cerr << "failed row: " << r.scheme << " at " << r.sweep_value << ": " << r.status << '\n';
    }
    std::printf("%zu rows written to %s (%zu failed)\n", result.rows.size(), out.c_str(), failed);
    return failed == 0 ? kExitOk : kExitFailedRows;
  } catch (const sarprec::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
