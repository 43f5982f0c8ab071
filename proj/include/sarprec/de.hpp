#pragma once

#include <vector>

#include "sarprec/channel.hpp"
#include "sarprec/covariance.hpp"
#include "sarprec/metrics.hpp"

/// Deterministic equivalent of the ergodic sum rate under the Weichselberger
/// model: a coupled (gamma, psi) fixed point and the closed-form SE built on it.
namespace sarprec::de {

struct FixedPointOptions {
  double tol = 1e-10;  // on max |change| of gamma and Omega * psi
  int max_iter = 1000;
  bool damping_fallback = true;  // switch to 0.5 damping when the residual oscillates
};

struct FixedPointState {
  std::vector<RealVector> gamma;  // per user, length M
  std::vector<RealVector> psi;    // per user, length N_k
  std::vector<Matrix> big_gamma;  // Gamma_k = V_k diag(Omega_k^T gamma_k) V_k^H
  std::vector<Matrix> big_psi;    // Psi_k = U_k diag(Omega_k psi_k) U_k^H
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool damped = false;
  std::vector<double> residual_history;
};

/// Iterates gamma_{k,m} = u_{k,m}^H (I + sum_j Psi_j)^{-1} u_{k,m} and
/// psi_{k,n} = v_{k,n}^H Q_k (sigma^2 I + Gamma_k Q_k)^{-1} v_{k,n} from psi = 0
/// (or from `warm_start`) until the largest change of gamma and of Omega_k psi_k
/// is at most opts.tol. Throws NonConvergence after opts.max_iter sweeps.
FixedPointState fixed_point(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                            double noise_power, const FixedPointOptions& opts = {},
                            const FixedPointState* warm_start = nullptr);

/// Asymptotic SE in bits/s/Hz:
///   sum_k log2 det(I + Gamma_k Q_k / sigma^2) + log2 det(I + sum_k Psi_k)
///     - (1/ln 2) sum_k gamma_k^T Omega_k psi_k.
/// Throws InvalidState if `fp` did not converge.
double asymptotic_se(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                     const FixedPointState& fp, double noise_power);

/// Runs the fixed point and evaluates asymptotic_se.
double asymptotic_se(const channel::ChannelStatistics& stats, const TransmitCovariance& q, double noise_power,
                     const FixedPointOptions& opts = {});

/// W * asymptotic SE / P(Q), in bits/joule.
double asymptotic_ee(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                     const metrics::PowerModel& pm, const FixedPointState& fp);

/// ln det(I + Gamma Q / sigma^2) in nats, evaluated through the Hermitian form
/// Gamma^{1/2} Q Gamma^{1/2}.
double user_logdet(const Matrix& big_gamma, const Matrix& q, double noise_power);

/// d/dQ_k of the asymptotic SE, (1/ln 2)(sigma^2 I + Gamma_k Q_k)^{-1} Gamma_k.
/// The directional derivative along a Hermitian D is Re tr(G D).
Matrix se_gradient(const Matrix& big_gamma, const Matrix& q, double noise_power);

}  // namespace sarprec::de
