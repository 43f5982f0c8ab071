#include "sarprec/metrics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "parallel.hpp"
#include "sarprec/errors.hpp"

namespace sarprec::metrics {

namespace {

constexpr int kBlockSize = 256;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput("power model: " + what);
}

}  // namespace

void PowerModel::validate() const {
  const std::size_t k = power_budget.size();
  require(k > 0, "no users");
  require(amplifier_inefficiency.size() == k, "amplifier_inefficiency has wrong length");
  require(static_user_power.size() == k, "static_user_power has wrong length");
  for (std::size_t i = 0; i < k; ++i) {
    require(std::isfinite(amplifier_inefficiency[i]) && amplifier_inefficiency[i] >= 0.0,
            "amplifier_inefficiency must be >= 0");
    require(std::isfinite(static_user_power[i]) && static_user_power[i] > 0.0, "static_user_power must be > 0");
    require(std::isfinite(power_budget[i]) && power_budget[i] > 0.0, "power_budget must be > 0");
  }
  require(std::isfinite(static_bs_power) && static_bs_power > 0.0, "static_bs_power must be > 0");
  require(std::isfinite(bandwidth) && bandwidth > 0.0, "bandwidth must be > 0");
  require(std::isfinite(noise_power) && noise_power > 0.0, "noise_power must be > 0");
}

PowerModel PowerModel::without_amplifier_cost() const {
  PowerModel out = *this;
  std::fill(out.amplifier_inefficiency.begin(), out.amplifier_inefficiency.end(), 0.0);
  return out;
}

bool PowerModel::amplifier_cost_free() const {
  for (const double xi : amplifier_inefficiency) {
    if (xi != 0.0) return false;
  }
  return true;
}

double power_consumption(const TransmitCovariance& q, const PowerModel& pm) {
  if (q.size() != pm.num_users()) throw InvalidInput("power_consumption: user count mismatch");
  double total = pm.static_bs_power;
  for (std::size_t k = 0; k < q.size(); ++k) {
    total += pm.amplifier_inefficiency[k] * q.trace(k) + pm.static_user_power[k];
  }
  return total;
}

double instantaneous_se(const channel::ChannelRealization& h, const TransmitCovariance& q, double noise_power) {
  const Eigen::Index m = h.user_channels.front().rows();
  Matrix a = Matrix::Identity(m, m);
  for (std::size_t k = 0; k < q.size(); ++k) {
    a.noalias() += (h.user_channels[k] * q[k] * h.user_channels[k].adjoint()) / noise_power;
  }
  return psdlin::logdet_hpd(a) / std::numbers::ln2;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (const double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

McEstimate ergodic_se_mc(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                         double noise_power, int num_samples, std::uint64_t seed, int threads) {
  if (num_samples < 1) throw InvalidInput("ergodic_se_mc: need at least one sample");
  if (q.size() != stats.num_users()) throw InvalidInput("ergodic_se_mc: user count mismatch");
  if (!(noise_power > 0.0)) throw InvalidInput("ergodic_se_mc: noise power must be > 0");

  std::vector<double> values(static_cast<std::size_t>(num_samples));
  const std::size_t blocks = (values.size() + kBlockSize - 1) / kBlockSize;
  detail::parallel_for(blocks, threads, [&](std::size_t b) {
    channel::Rng rng(mix_seed(seed, b));
    const std::size_t begin = b * kBlockSize;
    const std::size_t end = std::min(values.size(), begin + kBlockSize);
    for (std::size_t i = begin; i < end; ++i) {
      values[i] = instantaneous_se(channel::sample_channel(stats, rng), q, noise_power);
    }
  });

  McEstimate est;
  est.samples = num_samples;
  est.mean = pairwise_sum(values) / num_samples;
  if (num_samples > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - est.mean) * (values[i] - est.mean);
    const double var = pairwise_sum(sq) / (num_samples - 1);
    est.std_error = std::sqrt(var / num_samples);
  }
  return est;
}

McEstimate ergodic_ee_mc(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                         const PowerModel& pm, int num_samples, std::uint64_t seed, int threads) {
  const McEstimate se = ergodic_se_mc(stats, q, pm.noise_power, num_samples, seed, threads);
  const double scale = pm.bandwidth / power_consumption(q, pm);
  return {se.mean * scale, se.std_error * scale, se.samples};
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace sarprec::metrics
