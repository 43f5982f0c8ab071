#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "sarprec/errors.hpp"
#include "sarprec/experiments.hpp"

using namespace sarprec;
using namespace sarprec::experiments;

namespace {

const char* kSmall = R"({
  "receive_antennas": 4,
  "transmit_antennas": [2, 2],
  "bandwidth_hz": 1e7,
  "noise_power_dbm": -96,
  "path_loss_db": -120,
  "amplifier_inefficiency": 5,
  "static_user_power_dbm": 30,
  "static_bs_power_dbm": 40,
  "max_power_dbm": 20,
  "sar": {"matrices": [{"name": "A", "limit_w_per_kg": 0.5, "entries": [[[2, 0], [0, -1]], [[0, 1], [1, 0]]]}]},
  "channel": {"decay": 1.0, "seed": 3},
  "monte_carlo_samples": 200,
  "master_seed": 5
})";

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sarprec_test_" + name);
}

}  // namespace

TEST_CASE("the shipped handset scenario loads") {
  const auto cfg = load_scenario(fixtures::scenario_path());
  CHECK(cfg.num_receive == 8);
  CHECK(cfg.num_users() == 4);
  CHECK(cfg.bandwidth == 1e7);
  CHECK(cfg.static_bs_power == doctest::Approx(10.0));
  CHECK(cfg.max_power[0] == doctest::Approx(0.1));
  REQUIRE(cfg.sar.users[3].size() == 2);
  CHECK(cfg.sar.users[3][0].matrix == fixtures::r1());
  CHECK(cfg.sar.users[3][1].matrix == fixtures::r2());
  CHECK(cfg.sar.users[0][1].limit == 0.8);
  const auto stats = cfg.statistics();
  for (const auto& u : stats.users) CHECK(u.coupling.sum() == doctest::Approx(32e-12));
}

TEST_CASE("scenario without SAR block is valid") {
  auto text = std::string(kSmall);
  const auto start = text.find("\"sar\"");
  const auto end = text.find("\"channel\"");
  text.erase(start, end - start);
  const auto cfg = parse_scenario(text);
  CHECK(cfg.sar.total_constraints() == 0);
  CHECK(cfg.sar.num_users() == 2);
}

TEST_CASE("validation errors name every offending field") {
  const auto msg = error_of(replace(replace(kSmall, "\"bandwidth_hz\": 1e7", "\"bandwidth_hz\": -1"),
                                    "\"limit_w_per_kg\": 0.5", "\"limit_w_per_kg\": 0"));
  CHECK(msg.find("bandwidth_hz") != std::string::npos);
  CHECK(msg.find("limit_w_per_kg") != std::string::npos);
  CHECK(error_of(replace(kSmall, "[[0, 1], [1, 0]]", "[[0, 2], [1, 0]]")).find("sar") != std::string::npos);
  CHECK(error_of(replace(kSmall, "\"transmit_antennas\": [2, 2]", "\"transmit_antennas\": [2, 0]"))
            .find("transmit_antennas") != std::string::npos);
}

TEST_CASE("parse errors report line and column") {
  const auto msg = error_of("{\n  \"receive_antennas\": 4,\n  oops\n}");
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("column") != std::string::npos);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("describe echoes powers in dBm") {
  const auto text = describe_scenario(parse_scenario(kSmall));
  CHECK(text.find("max_power_dbm") != std::string::npos);
  CHECK(parse_scenario(text).max_power == parse_scenario(kSmall).max_power);
}

TEST_CASE("statistics files round-trip") {
  const auto cfg = parse_scenario(kSmall);
  const auto stats = cfg.statistics();
  const auto path = temp_file("stats.json");
  save_statistics(stats, path);
  const auto back = load_statistics(path);
  REQUIRE(back.num_users() == stats.num_users());
  for (std::size_t k = 0; k < stats.num_users(); ++k) {
    CHECK(back.users[k].coupling == stats.users[k].coupling);
    CHECK(back.users[k].transmit_basis == stats.users[k].transmit_basis);
    CHECK(back.users[k].receive_basis == stats.users[k].receive_basis);
  }
  std::filesystem::remove(path);
}

TEST_CASE("grid and scheme parsing") {
  CHECK(parse_grid("10:40:5") == std::vector<double>{10, 15, 20, 25, 30, 35, 40});
  CHECK(parse_grid("0.1:2.0:0.1").size() == 20);
  CHECK(parse_grid("3:3:1") == std::vector<double>{3});
  CHECK_THROWS_AS(parse_grid("1:2"), ConfigError);
  CHECK_THROWS_AS(parse_grid("2:1:1"), ConfigError);
  CHECK_THROWS_AS(parse_grid("1:2:0"), ConfigError);
  CHECK_THROWS_AS(parse_grid("a:2:1"), ConfigError);
  CHECK(parse_schemes("proposed,semax").size() == 2);
  CHECK_THROWS_AS(parse_schemes("proposed,bogus"), ConfigError);
  CHECK(to_string(parse_scheme("backoff-adaptive")) == "backoff-adaptive");
}

TEST_CASE("CSV formatting") {
  SweepResult empty;
  CHECK(format_csv(empty) == std::string(kCsvHeader) + "\n");

  SweepResult one;
  SweepRow r;
  r.sweep_var = "pmax";
  r.sweep_value = 20.0;
  r.scheme = "proposed";
  r.ee_asymptotic = 1.0 / 3.0;
  r.ee_mc = 6.25e6;
  r.ee_mc_stderr = 1e-300;
  r.se_asymptotic = 0.1;
  r.tx_power = 0.4;
  r.alpha = 0.5;
  r.outer_iters = 4;
  r.dual_iters = 12;
  r.ao_iters = 100;
  r.status = "failed: a, b";
  one.rows.push_back(r);
  const auto text = format_csv(one);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  const auto line = text.substr(text.find('\n') + 1);
  CHECK(std::count(line.begin(), line.end(), ',') == 13);

  const auto path = temp_file("row.csv");
  write_csv(one, path);
  const auto back = read_csv(path);
  REQUIRE(back.rows.size() == 1);
  const auto& b = back.rows[0];
  CHECK(b.ee_asymptotic == r.ee_asymptotic);
  CHECK(b.ee_mc_stderr == r.ee_mc_stderr);
  CHECK(b.alpha == r.alpha);
  CHECK(b.ao_iters == 100);
  CHECK(b.status == "failed: a; b");
  CHECK(format_csv(back) == text);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(write_csv(one, "/nonexistent/dir/out.csv"), std::runtime_error);
}

TEST_CASE("format_csv refuses an ok row that violates its constraints") {
  SweepResult res;
  SweepRow r;
  r.sweep_var = "pmax";
  r.scheme = "proposed";
  auto ctx = std::make_shared<PointContext>();
  ctx->sar = sar::SarConstraintSet::none(1);
  ctx->power_budget = {0.1};
  r.context = ctx;
  TransmitCovariance q;
  q.users.push_back(Matrix::Identity(2, 2));
  r.q = q;
  res.rows.push_back(r);
  CHECK_THROWS_AS(format_csv(res), NumericConsistency);
}

TEST_CASE("sweeps are deterministic and thread-count independent") {
  const auto cfg = parse_scenario(kSmall);
  SweepOptions opts;
  opts.grid = parse_grid("10:20:10");
  opts.schemes = parse_schemes("proposed,semax,backoff-worst,backoff-adaptive");
  opts.record_timing = false;
  const auto a = run_sweep(cfg, opts);
  const auto b = run_sweep(cfg, opts);
  opts.threads = 3;
  const auto c = run_sweep(cfg, opts);
  CHECK(a.failed_rows() == 0);
  CHECK(a.rows.size() == 8);
  CHECK(format_csv(a) == format_csv(b));
  CHECK(format_csv(a) == format_csv(c));
  CHECK(a.rows[2].alpha.has_value());
  CHECK_FALSE(a.rows[0].alpha.has_value());

  opts.master_seed = 6;
  CHECK(format_csv(run_sweep(cfg, opts)) != format_csv(a));
}

TEST_CASE("SAR sweeps need SAR constraints") {
  auto text = std::string(kSmall);
  const auto start = text.find("\"sar\"");
  text.erase(start, text.find("\"channel\"") - start);
  SweepOptions opts;
  opts.variable = SweepVariable::kSarLimit;
  CHECK_THROWS_AS(run_sweep(parse_scenario(text), opts), ConfigError);
}

TEST_CASE("DE validation on the small scenario") {
  const auto cfg = parse_scenario(kSmall);
  DeValidationOptions opts;
  opts.num_covariances = 4;
  opts.mc_samples = 2000;
  opts.seed = 1;
  const auto rep = validate_de(cfg, opts);
  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.rows[0].se_asymptotic == 0.0);
  CHECK(rep.rows[0].se_mc == 0.0);
  CHECK(rep.rows[0].relative_error == 0.0);
  for (const auto& r : rep.rows) CHECK(r.tx_power <= 0.2 * (1 + 1e-9));
  CHECK(rep.max_relative_error < 0.05);
}

TEST_CASE("random feasible covariances respect budgets and SAR limits") {
  const auto cfg = load_scenario(fixtures::scenario_path());
  channel::Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto q = random_feasible_covariance(cfg.num_transmit, cfg.max_power, cfg.sar, rng);
    CHECK(sar::check_constraints(q, cfg.sar, cfg.max_power, 1e-9).pass);
  }
}

TEST_CASE("unknown keys are reported as warnings") {
  auto text = replace(kSmall, "\"master_seed\": 5", "\"master_seed\": 5, \"bandwith_hz\": 2");
  const auto cfg = parse_scenario(text);
  REQUIRE(cfg.warnings.size() == 1);
  CHECK(cfg.warnings[0].find("bandwith_hz") != std::string::npos);
}

TEST_CASE("describe output is itself a loadable scenario") {
  const auto cfg = load_scenario(fixtures::scenario_path());
  const auto back = parse_scenario(describe_scenario(cfg));
  CHECK(back.warnings.empty());
  CHECK(back.num_transmit == cfg.num_transmit);
  CHECK(back.sar.users[2][1].matrix == cfg.sar.users[2][1].matrix);
  CHECK(back.sar.users[2][1].limit == cfg.sar.users[2][1].limit);
  CHECK(back.solver.dual_tol == cfg.solver.dual_tol);
  CHECK(describe_scenario(back) == describe_scenario(cfg));
}
