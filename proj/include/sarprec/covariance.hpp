#pragma once

#include <span>
#include <vector>

#include "sarprec/psdlin.hpp"

namespace sarprec {

/// Per-user transmit covariance matrices Q_k, in watts.
struct TransmitCovariance {
  std::vector<Matrix> users;

  static TransmitCovariance zeros(std::span<const Eigen::Index> dims) {
    TransmitCovariance q;
    for (const auto n : dims) q.users.push_back(Matrix::Zero(n, n));
    return q;
  }

  std::size_t size() const { return users.size(); }
  Matrix& operator[](std::size_t k) { return users[k]; }
  const Matrix& operator[](std::size_t k) const { return users[k]; }

  double trace(std::size_t k) const { return users[k].trace().real(); }

  double total_power() const {
    double sum = 0.0;
    for (const auto& q : users) sum += q.trace().real();
    return sum;
  }
};

}  // namespace sarprec
