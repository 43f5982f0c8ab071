#include "sarprec/sar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sarprec/errors.hpp"

namespace sarprec::sar {

std::size_t SarConstraintSet::total_constraints() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.size();
  return n;
}

SarConstraintSet SarConstraintSet::with_uniform_limit(double limit) const {
  SarConstraintSet out = *this;
  for (auto& u : out.users) {
    for (auto& c : u) c.limit = limit;
  }
  return out;
}

std::vector<std::string> SarConstraintSet::validate(std::span<const Eigen::Index> transmit_dims) const {
  if (transmit_dims.size() != users.size()) {
    throw InvalidInput("SAR constraint set: user count mismatch");
  }
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < users.size(); ++k) {
    for (std::size_t i = 0; i < users[k].size(); ++i) {
      const auto& c = users[k][i];
      const std::string who = "SAR constraint (" + std::to_string(k) + "," + std::to_string(i) + ")";
      if (c.matrix.rows() != transmit_dims[k] || c.matrix.cols() != transmit_dims[k]) {
        throw InvalidInput(who + ": matrix must be N_k x N_k");
      }
      if (!psdlin::is_hermitian(c.matrix, 1e-9)) throw InvalidInput(who + ": matrix is not Hermitian");
      if (!(c.limit > 0.0) || !std::isfinite(c.limit)) throw InvalidInput(who + ": limit must be > 0");
      const double lmin = psdlin::min_eigenvalue(c.matrix);
      if (lmin < 0.0) {
        warnings.push_back(who + ": matrix is indefinite (min eigenvalue " + std::to_string(lmin) + ")");
      }
    }
  }
  return warnings;
}

double sar_value(const Matrix& r, const Matrix& q) {
  if (r.rows() != q.rows() || r.cols() != q.cols() || r.rows() != r.cols()) {
    throw InvalidInput("sar_value: dimension mismatch");
  }
  const Complex t = (r.array() * q.transpose().array()).sum();
  const double scale = r.cwiseAbs().maxCoeff() * q.cwiseAbs().sum();
  if (std::abs(t.imag()) > 1e-9 * std::max(std::abs(t.real()), scale)) {
    throw NumericConsistency("sar_value: trace has non-negligible imaginary part");
  }
  return t.real();
}

double ConstraintReport::worst_relative_violation() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& m : power) worst = std::max(worst, -m.margin / m.limit);
  for (const auto& m : sar) worst = std::max(worst, -m.margin / m.limit);
  return worst;
}

ConstraintReport check_constraints(const TransmitCovariance& q, const SarConstraintSet& cons,
                                   std::span<const double> power_budget, double tol) {
  if (q.size() != cons.num_users() || q.size() != power_budget.size()) {
    throw InvalidInput("check_constraints: user count mismatch");
  }
  ConstraintReport rep;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double tr = q.trace(k);
    Margin pm{k, 0, tr, power_budget[k], power_budget[k] - tr, tr <= power_budget[k] * (1.0 + tol)};
    rep.pass = rep.pass && pm.ok;
    rep.power.push_back(pm);

    const double lmin = psdlin::min_eigenvalue(q[k]);
    const bool psd = lmin >= -tol * std::max(tr, 0.0);
    rep.min_eigenvalue.push_back(lmin);
    rep.psd_ok.push_back(psd);
    rep.pass = rep.pass && psd;

    for (std::size_t i = 0; i < cons.users[k].size(); ++i) {
      const auto& c = cons.users[k][i];
      const double s = sar_value(c.matrix, q[k]);
      Margin m{k, i, s, c.limit, c.limit - s, s <= c.limit * (1.0 + tol)};
      rep.pass = rep.pass && m.ok;
      rep.sar.push_back(m);
    }
  }
  return rep;
}

WorstCaseSar worst_case_sar(const Matrix& r, double pmax) {
  if (!(pmax > 0.0)) throw InvalidInput("worst_case_sar: pmax must be > 0");
  const auto eig = psdlin::hermitian_eig(r);
  WorstCaseSar out;
  out.direction = eig.vectors.col(0);
  out.clamped = eig.values(0) < 0.0;
  out.value = pmax * std::max(eig.values(0), 0.0);
  return out;
}

}  // namespace sarprec::sar
