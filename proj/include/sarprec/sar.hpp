#pragma once

#include <span>
#include <string>
#include <vector>

#include "sarprec/covariance.hpp"

/// Specific-absorption-rate constraints tr(R_{k,i} Q_k) <= limit_{k,i}.
namespace sarprec::sar {

struct SarConstraint {
  Matrix matrix;       // R_{k,i}, Hermitian, W/kg per watt
  double limit = 0.0;  // W/kg, > 0
  std::string name;
};

struct SarConstraintSet {
  std::vector<std::vector<SarConstraint>> users;

  /// K users, no SAR constraints.
  static SarConstraintSet none(std::size_t num_users) {
    SarConstraintSet s;
    s.users.resize(num_users);
    return s;
  }

  /// The same constraint list applied to every user.
  static SarConstraintSet shared(std::size_t num_users, const std::vector<SarConstraint>& list) {
    SarConstraintSet s;
    s.users.assign(num_users, list);
    return s;
  }

  std::size_t num_users() const { return users.size(); }
  std::size_t total_constraints() const;

  /// Copy with every limit replaced by `limit`.
  SarConstraintSet with_uniform_limit(double limit) const;

  /// Throws InvalidInput if a matrix is non-Hermitian, mis-sized or a limit is
  /// not positive. Returns human-readable warnings for indefinite matrices.
  std::vector<std::string> validate(std::span<const Eigen::Index> transmit_dims) const;
};

/// Re tr(R Q). Throws NumericConsistency if the imaginary part of the trace is
/// not negligible (relative 1e-9).
double sar_value(const Matrix& r, const Matrix& q);

struct Margin {
  std::size_t user = 0;
  std::size_t index = 0;  // SAR constraint index; unused for power margins
  double value = 0.0;     // achieved trace / SAR
  double limit = 0.0;
  double margin = 0.0;    // limit - value
  bool ok = true;
};

struct ConstraintReport {
  std::vector<Margin> power;
  std::vector<Margin> sar;
  std::vector<double> min_eigenvalue;  // per user
  std::vector<bool> psd_ok;
  bool pass = true;

  /// Largest violation relative to its limit (<= 0 when everything holds).
  double worst_relative_violation() const;
};

/// Checks power budgets, positive semidefiniteness and every SAR limit with a
/// relative tolerance. Failures are reported, never thrown.
ConstraintReport check_constraints(const TransmitCovariance& q, const SarConstraintSet& cons,
                                   std::span<const double> power_budget, double tol);

struct WorstCaseSar {
  double value = 0.0;  // pmax * max(lambda_max(R), 0)
  Vector direction;    // top eigenvector of R; the maximizer is pmax * d d^H
  bool clamped = false;
};

/// max over PSD Q with tr Q <= pmax of tr(R Q).
WorstCaseSar worst_case_sar(const Matrix& r, double pmax);

}  // namespace sarprec::sar
