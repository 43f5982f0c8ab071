#include "sarprec/channel.hpp"

#include <cmath>
#include <string>

#include "sarprec/errors.hpp"

namespace sarprec::channel {

std::vector<Eigen::Index> ChannelStatistics::transmit_dims() const {
  std::vector<Eigen::Index> dims;
  dims.reserve(users.size());
  for (const auto& u : users) dims.push_back(u.num_transmit());
  return dims;
}

void ChannelStatistics::validate(double unitary_tol) const {
  if (num_receive < 1) throw InvalidInput("channel statistics: M must be >= 1");
  if (users.empty()) throw InvalidInput("channel statistics: no users");
  for (std::size_t k = 0; k < users.size(); ++k) {
    const auto& u = users[k];
    const std::string who = "channel statistics user " + std::to_string(k) + ": ";
    const Eigen::Index n = u.num_transmit();
    if (u.receive_basis.rows() != num_receive || u.receive_basis.cols() != num_receive) {
      throw InvalidInput(who + "receive basis must be M x M");
    }
    if (n < 1 || u.transmit_basis.cols() != n) throw InvalidInput(who + "transmit basis must be square");
    if (u.coupling.rows() != num_receive || u.coupling.cols() != n) {
      throw InvalidInput(who + "coupling must be M x N_k");
    }
    if ((u.receive_basis.adjoint() * u.receive_basis - Matrix::Identity(num_receive, num_receive))
            .cwiseAbs()
            .maxCoeff() > unitary_tol) {
      throw InvalidInput(who + "receive basis is not unitary");
    }
    if ((u.transmit_basis.adjoint() * u.transmit_basis - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() >
        unitary_tol) {
      throw InvalidInput(who + "transmit basis is not unitary");
    }
    if ((u.coupling.array() < 0.0).any() || !u.coupling.allFinite()) {
      throw InvalidInput(who + "coupling entries must be finite and nonnegative");
    }
  }
}

Matrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix w(rows, cols);
  // Column-major fill keeps the draw order stable.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      w(i, j) = Complex(re, im);
    }
  }
  return w;
}

Matrix random_unitary(Eigen::Index n, Rng& rng) {
  const Matrix g = complex_gaussian(n, n, rng);
  const Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = std::abs(r(i, i));
    if (mag > 0.0) q.col(i) *= r(i, i) / mag;
  }
  return q;
}

ChannelStatistics make_statistics(Eigen::Index num_receive, std::span<const Eigen::Index> num_transmit,
                                  double path_loss_db, double decay, std::uint64_t seed) {
  if (num_receive < 1) throw InvalidInput("make_statistics: M must be >= 1");
  if (num_transmit.empty()) throw InvalidInput("make_statistics: at least one user required");
  if (!(decay >= 0.0) || !std::isfinite(decay)) throw InvalidInput("make_statistics: decay must be >= 0");
  if (!std::isfinite(path_loss_db)) throw InvalidInput("make_statistics: path loss must be finite");

  const double gain = std::pow(10.0, path_loss_db / 10.0);
  Rng rng(seed);
  ChannelStatistics stats;
  stats.num_receive = num_receive;
  for (const Eigen::Index n : num_transmit) {
    if (n < 1) throw InvalidInput("make_statistics: N_k must be >= 1");
    UserStatistics u;
    u.receive_basis = random_unitary(num_receive, rng);
    u.transmit_basis = random_unitary(n, rng);
    u.coupling.resize(num_receive, n);
    for (Eigen::Index m = 0; m < num_receive; ++m) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double x = static_cast<double>(m) / static_cast<double>(num_receive) +
                         static_cast<double>(j) / static_cast<double>(n);
        u.coupling(m, j) = std::exp(-decay * x);
      }
    }
    u.coupling *= static_cast<double>(num_receive * n) * gain / u.coupling.sum();
    stats.users.push_back(std::move(u));
  }
  return stats;
}

ChannelRealization sample_channel(const ChannelStatistics& stats, Rng& rng) {
  ChannelRealization out;
  out.user_channels.reserve(stats.users.size());
  for (const auto& u : stats.users) {
    const Matrix w = complex_gaussian(stats.num_receive, u.num_transmit(), rng);
    const Matrix core = (u.coupling.cwiseSqrt().cast<Complex>().array() * w.array()).matrix();
    out.user_channels.push_back(u.receive_basis * core * u.transmit_basis.adjoint());
  }
  return out;
}

RealMatrix estimate_coupling(const Matrix& receive_basis, const Matrix& transmit_basis,
                             std::span<const Matrix> samples) {
  if (samples.empty()) throw InvalidInput("estimate_coupling: need at least one sample");
  const Eigen::Index m = receive_basis.rows();
  const Eigen::Index n = transmit_basis.rows();
  if (receive_basis.cols() != m || transmit_basis.cols() != n) {
    throw InvalidInput("estimate_coupling: bases must be square");
  }
  RealMatrix acc = RealMatrix::Zero(m, n);
  for (const auto& h : samples) {
    if (h.rows() != m || h.cols() != n) throw InvalidInput("estimate_coupling: sample dimension mismatch");
    acc += (receive_basis.adjoint() * h * transmit_basis).cwiseAbs2();
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace sarprec::channel
