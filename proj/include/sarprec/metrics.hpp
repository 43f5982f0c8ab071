#pragma once

#include <cstdint>
#include <vector>

#include "sarprec/channel.hpp"
#include "sarprec/covariance.hpp"

namespace sarprec::metrics {

/// Power consumption model P(Q) = sum_k (xi_k tr Q_k + P_c,k) + P_BS.
/// All values in linear units (watts, hertz).
struct PowerModel {
  std::vector<double> amplifier_inefficiency;  // xi_k >= 0; 0 turns EE into SE maximization
  std::vector<double> static_user_power;       // P_c,k > 0
  double static_bs_power = 0.0;                // P_BS > 0
  double bandwidth = 0.0;                      // W > 0
  double noise_power = 0.0;                    // sigma^2 > 0
  std::vector<double> power_budget;            // P_max,k > 0

  std::size_t num_users() const { return power_budget.size(); }

  /// Throws InvalidInput naming the first offending field.
  void validate() const;

  /// Same model with xi_k = 0 for every user.
  PowerModel without_amplifier_cost() const;

  bool amplifier_cost_free() const;
};

double power_consumption(const TransmitCovariance& q, const PowerModel& pm);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

/// log2 det(I + (1/sigma^2) sum_k H_k Q_k H_k^H) for a single realization.
double instantaneous_se(const channel::ChannelRealization& h, const TransmitCovariance& q, double noise_power);

/// Monte-Carlo ergodic SE in bits/s/Hz with the standard error of the mean.
///
/// Samples are drawn in fixed blocks, each block from its own stream derived
/// from `seed`, so the estimate is bit-identical for any `threads` value and
/// the same seed yields the same channel draws regardless of Q (paired samples).
McEstimate ergodic_se_mc(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                         double noise_power, int num_samples, std::uint64_t seed, int threads = 1);

/// W * ergodic SE / P(Q), in bits/joule. The standard error is scaled the same way.
McEstimate ergodic_ee_mc(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                         const PowerModel& pm, int num_samples, std::uint64_t seed, int threads = 1);

/// Stable 64-bit mixing used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> values);

double dbm_to_watts(double dbm);
double db_to_linear(double db);

}  // namespace sarprec::metrics
