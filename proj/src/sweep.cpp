#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "parallel.hpp"
#include "sarprec/errors.hpp"
#include "sarprec/experiments.hpp"

namespace sarprec::experiments {

namespace {

constexpr double kFeasibilityTol = 1e-6;

// FNV-1a over the scheme name; stable across platforms and builds.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct SchemeOutcome {
  TransmitCovariance q;
  std::optional<double> alpha;
  int outer = 0;
  int dual = 0;
  int ao = 0;
  std::vector<double> eta_history;
};

SchemeOutcome from_solution(optimizer::Solution&& s) {
  SchemeOutcome out;
  out.q = std::move(s.q);
  out.outer = s.state.outer_iterations;
  out.dual = s.state.dual_iterations;
  out.ao = s.state.ao_iterations;
  out.eta_history = std::move(s.state.eta_history);
  return out;
}

SchemeOutcome from_backoff(baselines::BackoffResult&& b) {
  SchemeOutcome out = from_solution(std::move(b.inner));
  out.q = std::move(b.q);
  out.alpha = b.alpha;
  return out;
}

SchemeOutcome run_scheme(Scheme scheme, const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                         const sar::SarConstraintSet& cons, const optimizer::Options& solver) {
  switch (scheme) {
    case Scheme::kProposed:
      return from_solution(optimizer::dinkelbach(stats, pm, cons, solver));
    case Scheme::kSeMax:
      return from_solution(optimizer::se_max(stats, pm, cons, solver));
    case Scheme::kBackoffWorst:
      return from_backoff(baselines::worst_case_backoff(stats, pm, cons, solver));
    case Scheme::kBackoffAdaptive:
      return from_backoff(baselines::adaptive_backoff(stats, pm, cons, solver));
  }
  throw InvalidInput("unknown scheme");
}

std::string describe_violation(const sar::ConstraintReport& report) {
  for (const auto& m : report.power) {
    if (!m.ok) return "power budget of user " + std::to_string(m.user + 1) + " exceeded";
  }
  for (const auto& m : report.sar) {
    if (!m.ok) return "SAR limit " + std::to_string(m.index + 1) + " of user " + std::to_string(m.user + 1) + " exceeded";
  }
  return "covariance not positive semidefinite";
}

}  // namespace

std::string to_string(SweepVariable v) { return v == SweepVariable::kPmax ? "pmax" : "sar"; }

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kProposed:
      return "proposed";
    case Scheme::kSeMax:
      return "semax";
    case Scheme::kBackoffWorst:
      return "backoff-worst";
    case Scheme::kBackoffAdaptive:
      return "backoff-adaptive";
  }
  return "unknown";
}

SweepVariable parse_sweep_variable(const std::string& s) {
  if (s == "pmax") return SweepVariable::kPmax;
  if (s == "sar") return SweepVariable::kSarLimit;
  throw ConfigError("unknown sweep variable '" + s + "' (expected pmax or sar)");
}

Scheme parse_scheme(const std::string& s) {
  for (const auto scheme : {Scheme::kProposed, Scheme::kSeMax, Scheme::kBackoffWorst, Scheme::kBackoffAdaptive}) {
    if (to_string(scheme) == s) return scheme;
  }
  throw ConfigError("unknown scheme '" + s + "'");
}

std::vector<Scheme> parse_schemes(const std::string& comma_list) {
  std::vector<Scheme> out;
  std::size_t start = 0;
  while (start <= comma_list.size()) {
    const auto end = std::min(comma_list.find(',', start), comma_list.size());
    const auto item = comma_list.substr(start, end - start);
    if (!item.empty()) out.push_back(parse_scheme(item));
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("no schemes given");
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ConfigError("grid must look like start:stop:step, got '" + text + "'");
  double a = 0.0;
  double b = 0.0;
  double step = 0.0;
  try {
    a = std::stod(text.substr(0, c1));
    b = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    step = std::stod(text.substr(c2 + 1));
  } catch (const std::exception&) {
    throw ConfigError("grid must look like start:stop:step, got '" + text + "'");
  }
  if (!(step > 0.0) || !(b >= a) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ConfigError("grid needs step > 0 and stop >= start, got '" + text + "'");
  }
  std::vector<double> grid;
  const auto count = static_cast<long long>(std::floor((b - a) / step + 0.5));
  for (long long i = 0; i <= count; ++i) grid.push_back(a + static_cast<double>(i) * step);
  return grid;
}

std::vector<double> default_grid(SweepVariable v) {
  return v == SweepVariable::kPmax ? parse_grid("10:40:5") : parse_grid("0.1:2.0:0.1");
}

std::size_t SweepResult::failed_rows() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.ok(); }));
}

SweepResult run_sweep(const ScenarioConfig& cfg, const SweepOptions& opts) {
  const auto grid = opts.grid.empty() ? default_grid(opts.variable) : opts.grid;
  if (opts.schemes.empty()) throw ConfigError("no schemes given");
  if (opts.variable == SweepVariable::kSarLimit && cfg.sar.total_constraints() == 0) {
    throw ConfigError("a SAR sweep needs SAR constraints in the scenario");
  }
  const auto stats = cfg.statistics();
  const std::uint64_t master = opts.master_seed.value_or(cfg.master_seed);
  const int mc_samples = opts.mc_samples.value_or(cfg.monte_carlo_samples);

  std::vector<std::shared_ptr<const PointContext>> contexts;
  for (const double v : grid) {
    auto ctx = std::make_shared<PointContext>();
    if (opts.variable == SweepVariable::kPmax) {
      ctx->sar = cfg.sar;
      ctx->power_budget.assign(cfg.num_users(), metrics::dbm_to_watts(v));
    } else {
      ctx->sar = cfg.sar.with_uniform_limit(v);
      ctx->power_budget = opts.max_power_dbm
                              ? std::vector<double>(cfg.num_users(), metrics::dbm_to_watts(*opts.max_power_dbm))
                              : cfg.max_power;
    }
    contexts.push_back(std::move(ctx));
  }

  SweepResult result;
  result.rows.resize(grid.size() * opts.schemes.size());
  detail::parallel_for(result.rows.size(), opts.threads, [&](std::size_t idx) {
    const std::size_t point = idx / opts.schemes.size();
    const Scheme scheme = opts.schemes[idx % opts.schemes.size()];
    SweepRow& row = result.rows[idx];
    row.sweep_var = to_string(opts.variable);
    row.sweep_value = grid[point];
    row.scheme = to_string(scheme);
    row.context = contexts[point];

    metrics::PowerModel pm = cfg.power_model();
    pm.power_budget = contexts[point]->power_budget;
    const auto seed = metrics::mix_seed(metrics::mix_seed(master, point), stable_hash(row.scheme));

    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto outcome = run_scheme(scheme, stats, pm, contexts[point]->sar, cfg.solver);
      row.alpha = outcome.alpha;
      row.outer_iters = outcome.outer;
      row.dual_iters = outcome.dual;
      row.ao_iters = outcome.ao;
      row.eta_history = std::move(outcome.eta_history);
      row.tx_power = outcome.q.total_power();

      const auto report = sar::check_constraints(outcome.q, contexts[point]->sar, pm.power_budget, kFeasibilityTol);
      if (!report.pass) {
        row.status = "failed: " + describe_violation(report);
      } else {
        const auto fp = de::fixed_point(stats, outcome.q, pm.noise_power, cfg.solver.fixed_point);
        row.se_asymptotic = de::asymptotic_se(stats, outcome.q, fp, pm.noise_power);
        row.ee_asymptotic = de::asymptotic_ee(stats, outcome.q, pm, fp);
        const auto mc = metrics::ergodic_ee_mc(stats, outcome.q, pm, mc_samples, seed, 1);
        row.ee_mc = mc.mean;
        row.ee_mc_stderr = mc.std_error;
        row.q = std::move(outcome.q);
      }
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_ms = opts.record_timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
  });
  return result;
}

TransmitCovariance random_feasible_covariance(std::span<const Eigen::Index> dims, std::span<const double> budget,
                                              const sar::SarConstraintSet& cons, channel::Rng& rng) {
  if (dims.size() != budget.size()) throw InvalidInput("random_feasible_covariance: budget size mismatch");
  std::uniform_real_distribution<double> fraction(0.05, 1.0);
  TransmitCovariance q;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const Matrix g = channel::complex_gaussian(dims[k], dims[k], rng);
    Matrix qk = g * g.adjoint();
    qk *= fraction(rng) * budget[k] / qk.trace().real();
    q.users.push_back(psdlin::hermitian_part(qk));
  }
  optimizer::restore_feasibility(q, cons, budget);
  return q;
}

DeValidationReport validate_de(const ScenarioConfig& cfg, const DeValidationOptions& opts) {
  if (opts.num_covariances < 1) throw InvalidInput("validate_de: need at least one covariance");
  const auto stats = cfg.statistics();
  const auto dims = stats.transmit_dims();
  channel::Rng rng(metrics::mix_seed(opts.seed, 0x5eed));

  std::vector<TransmitCovariance> covariances;
  for (int i = 0; i < opts.num_covariances; ++i) {
    covariances.push_back(i == 0 && opts.include_zero ? TransmitCovariance::zeros(dims)
                                                       : random_feasible_covariance(dims, cfg.max_power, cfg.sar, rng));
  }

  DeValidationReport report;
  report.rows.resize(covariances.size());
  detail::parallel_for(covariances.size(), opts.threads, [&](std::size_t i) {
    const auto& q = covariances[i];
    auto& row = report.rows[i];
    row.index = static_cast<int>(i);
    row.tx_power = q.total_power();
    row.se_asymptotic = de::asymptotic_se(stats, q, cfg.noise_power, cfg.solver.fixed_point);
    const auto mc = metrics::ergodic_se_mc(stats, q, cfg.noise_power, opts.mc_samples,
                                           metrics::mix_seed(opts.seed, i + 1), 1);
    row.se_mc = mc.mean;
    row.se_mc_stderr = mc.std_error;
    row.relative_error = row.se_mc > 0.0 ? std::abs(row.se_asymptotic - row.se_mc) / row.se_mc
                                         : std::abs(row.se_asymptotic);
  });

  double sum = 0.0;
  for (const auto& row : report.rows) {
    report.max_relative_error = std::max(report.max_relative_error, row.relative_error);
    sum += row.relative_error;
  }
  report.mean_relative_error = sum / static_cast<double>(report.rows.size());
  return report;
}

}  // namespace sarprec::experiments
