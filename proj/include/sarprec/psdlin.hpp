#pragma once

#include <complex>

#include <Eigen/Dense>

namespace sarprec {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

}  // namespace sarprec

/// Dense complex Hermitian helpers. Everything here is a pure function.
namespace sarprec::psdlin {

/// Default tolerance used when an operation validates Hermitian input.
inline constexpr double kHermitianTol = 1e-10;

struct EigenDecomposition {
  RealVector values;  // descending
  Matrix vectors;     // columns matched to values
};

/// True iff max |A - A^H| <= tol * max |A|. Throws InvalidInput when A is not square.
bool is_hermitian(const Matrix& a, double tol);

/// (A + A^H) / 2.
Matrix hermitian_part(const Matrix& a);

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Throws InvalidInput for non-Hermitian input.
EigenDecomposition hermitian_eig(const Matrix& a);

struct InvSqrtOptions {
  double relative_floor = 1e-12;  // eigenvalues floored at relative_floor * lambda_max
  bool flooring = true;
};

/// A^{-1/2} for Hermitian positive definite A.
///
/// With flooring enabled, eigenvalues below relative_floor * lambda_max are
/// raised to that floor before inversion. With flooring disabled such an
/// eigenvalue raises SingularMatrix. A matrix whose largest eigenvalue is not
/// positive is always singular.
Matrix inv_sqrt_hpd(const Matrix& a, const InvSqrtOptions& opts = {});

/// Principal square root of a Hermitian PSD matrix; negative eigenvalues are clamped to zero.
Matrix sqrt_psd(const Matrix& a);

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to zero.
Matrix project_psd(const Matrix& a);

/// ln det(A) in nats via Cholesky. Throws DomainError if A is not positive definite.
double logdet_hpd(const Matrix& a);

/// Re tr(A B) without forming the product.
double trace_product_real(const Matrix& a, const Matrix& b);

/// Smallest eigenvalue of a Hermitian matrix.
double min_eigenvalue(const Matrix& a);

}  // namespace sarprec::psdlin
