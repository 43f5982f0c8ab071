#include "sarprec/de.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "sarprec/errors.hpp"

namespace sarprec::de {

namespace {

Matrix rotate_diag(const Matrix& basis, const RealVector& diag) {
  return basis * diag.cast<Complex>().asDiagonal() * basis.adjoint();
}

// Fills gamma and Gamma from the current psi.
void update_gamma(const channel::ChannelStatistics& stats, FixedPointState& s) {
  const Eigen::Index m = stats.num_receive;
  Matrix a = Matrix::Identity(m, m);
  for (std::size_t k = 0; k < stats.users.size(); ++k) {
    const auto& u = stats.users[k];
    s.big_psi[k] = rotate_diag(u.receive_basis, u.coupling * s.psi[k]);
    a += s.big_psi[k];
  }
  const Eigen::LLT<Matrix> llt(psdlin::hermitian_part(a));
  if (llt.info() != Eigen::Success) throw NumericConsistency("fixed_point: I + Psi not positive definite");
  const Matrix a_inv = llt.solve(Matrix::Identity(m, m));
  for (std::size_t k = 0; k < stats.users.size(); ++k) {
    const auto& u = stats.users[k];
    const Matrix proj = u.receive_basis.adjoint() * a_inv * u.receive_basis;
    s.gamma[k] = proj.diagonal().real().cwiseMax(0.0);
    s.big_gamma[k] = rotate_diag(u.transmit_basis, u.coupling.transpose() * s.gamma[k]);
  }
}

RealVector psi_update(const channel::UserStatistics& u, const Matrix& q, const Matrix& big_gamma,
                      double noise_power) {
  const Eigen::Index n = q.rows();
  // Q (sigma^2 I + Gamma Q)^{-1} = (sigma^2 I + Q Gamma)^{-1} Q
  Matrix lhs = q * big_gamma;
  lhs.diagonal().array() += noise_power;
  const Matrix x = lhs.partialPivLu().solve(q);
  const Matrix proj = u.transmit_basis.adjoint() * x * u.transmit_basis;
  RealVector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = std::max(proj(i, i).real(), 0.0);
  return out;
}

}  // namespace

FixedPointState fixed_point(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                            double noise_power, const FixedPointOptions& opts,
                            const FixedPointState* warm_start) {
  const std::size_t k_users = stats.users.size();
  if (q.size() != k_users) throw InvalidInput("fixed_point: user count mismatch");
  if (!(noise_power > 0.0)) throw InvalidInput("fixed_point: noise power must be > 0");
  for (std::size_t k = 0; k < k_users; ++k) {
    if (q[k].rows() != stats.users[k].num_transmit() || q[k].cols() != q[k].rows()) {
      throw InvalidInput("fixed_point: covariance " + std::to_string(k) + " has wrong dimensions");
    }
  }

  FixedPointState s;
  s.gamma.resize(k_users);
  s.psi.resize(k_users);
  s.big_gamma.resize(k_users);
  s.big_psi.resize(k_users);
  bool warm = warm_start != nullptr && warm_start->psi.size() == k_users;
  for (std::size_t k = 0; k < k_users && warm; ++k) {
    warm = warm_start->psi[k].size() == stats.users[k].num_transmit();
  }
  for (std::size_t k = 0; k < k_users; ++k) {
    s.psi[k] = warm ? warm_start->psi[k] : RealVector::Zero(stats.users[k].num_transmit());
  }

  std::vector<RealVector> prev_gamma;
  double damping = 1.0;
  int rising = 0;
  double prev_residual = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= opts.max_iter; ++it) {
    update_gamma(stats, s);
    double change = 0.0;
    if (prev_gamma.empty()) {
      change = std::numeric_limits<double>::infinity();
    } else {
      for (std::size_t k = 0; k < k_users; ++k) {
        change = std::max(change, (s.gamma[k] - prev_gamma[k]).cwiseAbs().maxCoeff());
      }
    }
    for (std::size_t k = 0; k < k_users; ++k) {
      const auto& u = stats.users[k];
      RealVector next = psi_update(u, q[k], s.big_gamma[k], noise_power);
      if (damping != 1.0) next = damping * next + (1.0 - damping) * s.psi[k];
      change = std::max(change, (u.coupling * (next - s.psi[k])).cwiseAbs().maxCoeff());
      s.psi[k] = std::move(next);
    }
    prev_gamma = s.gamma;
    s.iterations = it;
    s.residual = change;
    s.residual_history.push_back(change);

    if (change <= opts.tol) {
      update_gamma(stats, s);
      s.converged = true;
      return s;
    }
    if (opts.damping_fallback && damping == 1.0 && std::isfinite(prev_residual)) {
      rising = change > prev_residual ? rising + 1 : 0;
      if (rising >= 3) {
        damping = 0.5;
        s.damped = true;
      }
    }
    prev_residual = change;
  }
  char msg[128];
  std::snprintf(msg, sizeof msg, "fixed_point: no convergence after %d iterations (residual %.3e)", opts.max_iter,
                s.residual);
  throw NonConvergence(msg, s.residual);
}

double user_logdet(const Matrix& big_gamma, const Matrix& q, double noise_power) {
  const Matrix root = psdlin::sqrt_psd(big_gamma);
  Matrix a = root * q * root / noise_power;
  a.diagonal().array() += 1.0;
  return psdlin::logdet_hpd(a);
}

double asymptotic_se(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                     const FixedPointState& fp, double noise_power) {
  if (!fp.converged) throw InvalidState("asymptotic_se: fixed point did not converge");
  if (fp.gamma.size() != stats.users.size() || q.size() != stats.users.size()) {
    throw InvalidState("asymptotic_se: fixed point does not match the statistics");
  }
  const Eigen::Index m = stats.num_receive;
  double first = 0.0;
  double coupling = 0.0;
  Matrix a = Matrix::Identity(m, m);
  for (std::size_t k = 0; k < stats.users.size(); ++k) {
    first += user_logdet(fp.big_gamma[k], q[k], noise_power);
    a += fp.big_psi[k];
    coupling += fp.gamma[k].dot(stats.users[k].coupling * fp.psi[k]);
  }
  const double nats = first + psdlin::logdet_hpd(a) - coupling;
  double bits = nats / std::numbers::ln2;
  if (bits < 0.0) {
    if (bits < -1e-9) {
      throw NumericConsistency("asymptotic_se: negative value " + std::to_string(bits));
    }
    bits = 0.0;
  }
  return bits;
}

double asymptotic_se(const channel::ChannelStatistics& stats, const TransmitCovariance& q, double noise_power,
                     const FixedPointOptions& opts) {
  const auto fp = fixed_point(stats, q, noise_power, opts);
  return asymptotic_se(stats, q, fp, noise_power);
}

double asymptotic_ee(const channel::ChannelStatistics& stats, const TransmitCovariance& q,
                     const metrics::PowerModel& pm, const FixedPointState& fp) {
  return pm.bandwidth * asymptotic_se(stats, q, fp, pm.noise_power) / metrics::power_consumption(q, pm);
}

Matrix se_gradient(const Matrix& big_gamma, const Matrix& q, double noise_power) {
  Matrix lhs = big_gamma * q;
  lhs.diagonal().array() += noise_power;
  return lhs.partialPivLu().solve(big_gamma) / std::numbers::ln2;
}

}  // namespace sarprec::de
