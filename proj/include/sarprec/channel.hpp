#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sarprec/psdlin.hpp"

/// Statistical CSI under the Weichselberger model, H = U (sqrt(Omega) .* W) V^H.
namespace sarprec::channel {

using Rng = std::mt19937_64;

struct UserStatistics {
  Matrix receive_basis;   // U_k, M x M unitary
  Matrix transmit_basis;  // V_k, N_k x N_k unitary
  RealMatrix coupling;    // Omega_k, M x N_k, nonnegative

  Eigen::Index num_transmit() const { return transmit_basis.rows(); }
};

struct ChannelStatistics {
  Eigen::Index num_receive = 0;
  std::vector<UserStatistics> users;

  std::size_t num_users() const { return users.size(); }
  std::vector<Eigen::Index> transmit_dims() const;

  /// Throws InvalidInput on non-unitary bases, negative couplings or
  /// inconsistent dimensions.
  void validate(double unitary_tol = 1e-10) const;
};

struct ChannelRealization {
  std::vector<Matrix> user_channels;  // H_k, M x N_k
};

/// Seeded synthetic statistics: Haar-like bases and an exponential coupling
/// profile exp(-decay (m/M + n/N_k)), normalized so that the entries of each
/// Omega_k sum to M * N_k * 10^(path_loss_db / 10). decay == 0 gives a flat profile.
ChannelStatistics make_statistics(Eigen::Index num_receive, std::span<const Eigen::Index> num_transmit,
                                  double path_loss_db, double decay, std::uint64_t seed);

/// Draws one realization of every user's channel.
ChannelRealization sample_channel(const ChannelStatistics& stats, Rng& rng);

/// Elementwise mean of |U^H H V|^2 over the samples of one user's channel.
RealMatrix estimate_coupling(const Matrix& receive_basis, const Matrix& transmit_basis,
                             std::span<const Matrix> samples);

/// A unitary matrix from the QR factorization of a complex Gaussian matrix,
/// with the phase ambiguity of R's diagonal removed.
Matrix random_unitary(Eigen::Index n, Rng& rng);

/// Standard circularly-symmetric complex Gaussian matrix (unit variance entries).
Matrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace sarprec::channel
