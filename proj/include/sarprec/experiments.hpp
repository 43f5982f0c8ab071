#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sarprec/baselines.hpp"
#include "sarprec/channel.hpp"
#include "sarprec/optimizer.hpp"

namespace sarprec::experiments {

struct ChannelProfile {
  double decay = 1.0;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> statistics_file;  // overrides decay/seed when set
};

/// A fully resolved scenario. Every power is in watts; dB quantities have
/// been converted to linear scale at load time.
struct ScenarioConfig {
  Eigen::Index num_receive = 0;
  std::vector<Eigen::Index> num_transmit;
  double bandwidth = 0.0;        // Hz
  double noise_power = 0.0;      // W
  double path_loss_db = 0.0;     // kept in dB; folded into the coupling normalization
  std::vector<double> amplifier_inefficiency;
  std::vector<double> static_user_power;  // W
  double static_bs_power = 0.0;           // W
  std::vector<double> max_power;          // W
  sar::SarConstraintSet sar;
  ChannelProfile channel;
  optimizer::Options solver;
  int monte_carlo_samples = 10000;
  std::uint64_t master_seed = 0;
  std::vector<std::string> warnings;

  std::size_t num_users() const { return num_transmit.size(); }

  metrics::PowerModel power_model() const;
  /// Power model with every user's budget set to `max_power_w`.
  metrics::PowerModel power_model(double max_power_w) const;

  /// Synthesized (or loaded) channel statistics; deterministic.
  channel::ChannelStatistics statistics() const;
};

/// Reads and validates a JSON scenario. Parse errors carry line and column;
/// validation errors list every offending field. Both throw ConfigError.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Same as load_scenario, from text. Relative file references resolve against `base_dir`.
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".");

/// JSON echo of the resolved configuration (powers reported in dBm again).
std::string describe_scenario(const ScenarioConfig& cfg);

/// Statistics file I/O: {"receive_antennas": M, "users": [{"receive_basis", "transmit_basis", "coupling"}]},
/// complex matrices as nested arrays of [re, im] pairs.
channel::ChannelStatistics load_statistics(const std::filesystem::path& path);
void save_statistics(const channel::ChannelStatistics& stats, const std::filesystem::path& path);

enum class SweepVariable { kPmax, kSarLimit };
enum class Scheme { kProposed, kSeMax, kBackoffWorst, kBackoffAdaptive };

std::string to_string(SweepVariable v);
std::string to_string(Scheme s);
SweepVariable parse_sweep_variable(const std::string& s);
Scheme parse_scheme(const std::string& s);
std::vector<Scheme> parse_schemes(const std::string& comma_list);
/// "a:b:step" inclusive of b (within half a step).
std::vector<double> parse_grid(const std::string& text);
std::vector<double> default_grid(SweepVariable v);

struct SweepOptions {
  SweepVariable variable = SweepVariable::kPmax;
  std::vector<double> grid;  // dBm for pmax sweeps, W/kg for SAR sweeps
  std::vector<Scheme> schemes{Scheme::kProposed, Scheme::kSeMax, Scheme::kBackoffWorst, Scheme::kBackoffAdaptive};
  std::optional<std::uint64_t> master_seed;   // overrides the scenario's
  std::optional<int> mc_samples;              // overrides the scenario's
  std::optional<double> max_power_dbm;        // SAR sweeps: overrides the scenario budget
  int threads = 1;
  bool record_timing = true;  // false writes wall_ms = 0 so output bytes are reproducible
};

/// What a row's covariance must satisfy; kept so rows can be rechecked later.
struct PointContext {
  sar::SarConstraintSet sar;
  std::vector<double> power_budget;
};

struct SweepRow {
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string scheme;
  double ee_asymptotic = 0.0;  // bits/J
  double ee_mc = 0.0;          // bits/J
  double ee_mc_stderr = 0.0;
  double se_asymptotic = 0.0;  // bits/s/Hz
  double tx_power = 0.0;       // W, summed over users
  std::optional<double> alpha;
  int outer_iters = 0;
  int dual_iters = 0;
  int ao_iters = 0;
  double wall_ms = 0.0;
  std::string status = "ok";

  // In-memory diagnostics; not written to CSV.
  std::optional<TransmitCovariance> q;
  std::vector<double> eta_history;
  std::shared_ptr<const PointContext> context;

  bool ok() const { return status == "ok"; }
};

struct SweepResult {
  std::vector<SweepRow> rows;

  std::size_t failed_rows() const;
};

/// Runs every (grid point, scheme) pair. Solver failures become failed rows.
/// Rows come back in grid-major, scheme-minor order regardless of threading.
SweepResult run_sweep(const ScenarioConfig& cfg, const SweepOptions& opts);

struct DeValidationRow {
  int index = 0;
  double se_asymptotic = 0.0;
  double se_mc = 0.0;
  double se_mc_stderr = 0.0;
  double relative_error = 0.0;
  double tx_power = 0.0;
};

struct DeValidationReport {
  std::vector<DeValidationRow> rows;
  double max_relative_error = 0.0;
  double mean_relative_error = 0.0;
};

struct DeValidationOptions {
  int num_covariances = 20;
  int mc_samples = 10000;
  std::uint64_t seed = 0;
  bool include_zero = true;  // row 0 is Q = 0
  int threads = 1;
};

/// Compares the asymptotic SE with Monte-Carlo ergodic SE on random feasible
/// covariances of the scenario (budget = the scenario's max_power).
DeValidationReport validate_de(const ScenarioConfig& cfg, const DeValidationOptions& opts);

/// Random PSD covariances scaled to meet the power budgets and SAR limits.
TransmitCovariance random_feasible_covariance(std::span<const Eigen::Index> dims, std::span<const double> budget,
                                              const sar::SarConstraintSet& cons, channel::Rng& rng);

inline const char* kCsvHeader =
    "sweep_var,sweep_value,scheme,ee_asymptotic_bits_per_joule,ee_mc_bits_per_joule,ee_mc_stderr,"
    "se_asymptotic_bits_s_hz,tx_power_w,alpha,outer_iters,dual_iters,ao_iters,wall_ms,status";

/// Header plus one line per row. Rows marked ok are rechecked against their
/// constraints first; a violation throws NumericConsistency. I/O errors throw
/// std::runtime_error naming the path.
void write_csv(const SweepResult& result, const std::filesystem::path& path);
std::string format_csv(const SweepResult& result);
SweepResult read_csv(const std::filesystem::path& path);

void write_de_csv(const DeValidationReport& report, const std::filesystem::path& path);

}  // namespace sarprec::experiments
