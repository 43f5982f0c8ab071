#include "sarprec/psdlin.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sarprec/errors.hpp"

namespace sarprec::psdlin {

namespace {

void require_square(const Matrix& a, const char* op) {
  if (a.rows() != a.cols()) {
    throw InvalidInput(std::string(op) + ": matrix is " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + ", expected square");
  }
}

}  // namespace

bool is_hermitian(const Matrix& a, double tol) {
  require_square(a, "is_hermitian");
  if (a.size() == 0) return true;
  const double scale = a.cwiseAbs().maxCoeff();
  const double skew = (a - a.adjoint()).cwiseAbs().maxCoeff();
  return skew <= tol * scale;
}

Matrix hermitian_part(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

EigenDecomposition hermitian_eig(const Matrix& a) {
  if (!is_hermitian(a, kHermitianTol)) {
    throw InvalidInput("hermitian_eig: input is not Hermitian within tolerance");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(a));
  if (solver.info() != Eigen::Success) {
    throw NumericConsistency("hermitian_eig: eigen solver failed");
  }
  // Eigen returns ascending order.
  EigenDecomposition out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Matrix inv_sqrt_hpd(const Matrix& a, const InvSqrtOptions& opts) {
  const auto eig = hermitian_eig(a);
  const Eigen::Index n = eig.values.size();
  if (n == 0) return Matrix(0, 0);
  const double lambda_max = eig.values(0);
  if (!(lambda_max > 0.0)) {
    throw SingularMatrix("inv_sqrt_hpd: matrix has no positive eigenvalue");
  }
  const double floor = opts.relative_floor * lambda_max;
  RealVector scaled(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double lambda = eig.values(i);
    if (lambda < floor) {
      if (!opts.flooring) {
        throw SingularMatrix("inv_sqrt_hpd: eigenvalue " + std::to_string(lambda) +
                             " below floor " + std::to_string(floor));
      }
      lambda = floor;
    }
    scaled(i) = 1.0 / std::sqrt(lambda);
  }
  return eig.vectors * scaled.asDiagonal() * eig.vectors.adjoint();
}

Matrix sqrt_psd(const Matrix& a) {
  const auto eig = hermitian_eig(a);
  const RealVector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * roots.asDiagonal() * eig.vectors.adjoint();
}

Matrix project_psd(const Matrix& a) {
  const auto eig = hermitian_eig(hermitian_part(a));
  const RealVector clipped = eig.values.cwiseMax(0.0);
  return hermitian_part(eig.vectors * clipped.asDiagonal() * eig.vectors.adjoint());
}

double logdet_hpd(const Matrix& a) {
  require_square(a, "logdet_hpd");
  const Eigen::LLT<Matrix> llt(hermitian_part(a));
  if (llt.info() != Eigen::Success) {
    throw DomainError("logdet_hpd: matrix is not positive definite");
  }
  const auto& l = llt.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i).real());
  return 2.0 * sum;
}

double trace_product_real(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols()) {
    throw InvalidInput("trace_product_real: dimension mismatch");
  }
  // tr(AB) = sum_ij A_ij B_ji
  return (a.array() * b.transpose().array()).sum().real();
}

double min_eigenvalue(const Matrix& a) {
  require_square(a, "min_eigenvalue");
  if (a.size() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(a), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

}  // namespace sarprec::psdlin
