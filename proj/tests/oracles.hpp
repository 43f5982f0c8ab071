#pragma once

// Reference implementations used only by the tests. They deliberately avoid
// the library's numerical kernels (and Eigen's solvers) so that agreement is
// meaningful.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sarprec/psdlin.hpp"

namespace oracle {

using sarprec::Complex;
using sarprec::Matrix;
using sarprec::RealMatrix;
using sarprec::RealVector;

struct SymEig {
  std::vector<double> values;  // descending
  RealMatrix vectors;          // columns match values
};

// Cyclic Jacobi on a real symmetric matrix.
inline SymEig jacobi_symmetric(RealMatrix a) {
  const Eigen::Index n = a.rows();
  RealMatrix v = RealMatrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  SymEig out;
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values.push_back(a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]));
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

// [[Re, -Im], [Im, Re]]: each eigenvalue of a Hermitian matrix appears twice.
inline RealMatrix real_embedding(const Matrix& a) {
  const Eigen::Index n = a.rows();
  RealMatrix e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = a.real();
  e.topRightCorner(n, n) = -a.imag();
  e.bottomLeftCorner(n, n) = a.imag();
  e.bottomRightCorner(n, n) = a.real();
  return e;
}

inline Matrix from_embedding(const RealMatrix& e) {
  const Eigen::Index n = e.rows() / 2;
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(e(i, j), e(i + n, j));
  return a;
}

// Eigenvalues of a Hermitian matrix, descending.
inline std::vector<double> hermitian_eigenvalues(const Matrix& a) {
  const auto eig = jacobi_symmetric(real_embedding(a));
  std::vector<double> out;
  for (std::size_t i = 0; i < eig.values.size(); i += 2) out.push_back(eig.values[i]);
  return out;
}

// f(A) = U f(Lambda) U^H for a Hermitian A, through the real embedding.
inline Matrix hermitian_function(const Matrix& a, const std::function<double(double)>& f) {
  const auto eig = jacobi_symmetric(real_embedding(a));
  RealMatrix e = RealMatrix::Zero(eig.vectors.rows(), eig.vectors.cols());
  for (std::size_t i = 0; i < eig.values.size(); ++i) {
    const auto c = eig.vectors.col(static_cast<Eigen::Index>(i));
    e += f(eig.values[i]) * c * c.transpose();
  }
  return from_embedding(e);
}

// Powers p_i = (nu - noise / g_i)^+ with sum p_i = budget, by bisection on nu.
inline std::vector<double> waterfill_powers(const std::vector<double>& gains, double noise, double budget) {
  auto total = [&](double nu) {
    double s = 0.0;
    for (const double g : gains)
      if (g > 0.0) s += std::max(nu - noise / g, 0.0);
    return s;
  };
  double lo = 0.0;
  double hi = budget;
  for (const double g : gains)
    if (g > 0.0) hi = std::max(hi, budget + noise / g);
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < budget ? lo : hi) = mid;
  }
  const double nu = 0.5 * (lo + hi);
  std::vector<double> p;
  for (const double g : gains) p.push_back(g > 0.0 ? std::max(nu - noise / g, 0.0) : 0.0);
  return p;
}

// Capacity water-filling covariance for log det(I + Gamma Q / noise), tr Q = budget.
inline Matrix waterfill_covariance(const Matrix& gamma, double noise, double budget) {
  const auto eig = jacobi_symmetric(real_embedding(gamma));
  std::vector<double> gains(eig.values);  // every gain twice
  const auto p = waterfill_powers(gains, noise, 2.0 * budget);
  RealMatrix e = RealMatrix::Zero(eig.vectors.rows(), eig.vectors.cols());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const auto c = eig.vectors.col(static_cast<Eigen::Index>(i));
    e += p[i] * c * c.transpose();
  }
  return from_embedding(e);
}

// Maximizes f over a box by a dense grid followed by successive zoomed grids
// around the incumbent; f must return -inf outside its domain.
struct GridResult {
  double value = -INFINITY;
  std::vector<double> arg;
};

inline GridResult refine_grid(const std::function<double(const std::vector<double>&)>& f, std::vector<double> lo,
                              std::vector<double> hi, int points, int rounds, double shrink) {
  GridResult best;
  const std::size_t d = lo.size();
  for (int r = 0; r < rounds; ++r) {
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    while (true) {
      for (std::size_t i = 0; i < d; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / (points - 1);
      const double v = f(x);
      if (v > best.value) {
        best.value = v;
        best.arg = x;
      }
      std::size_t i = 0;
      while (i < d && ++idx[i] == points) idx[i++] = 0;
      if (i == d) break;
    }
    for (std::size_t i = 0; i < d; ++i) {
      const double half = 0.5 * (hi[i] - lo[i]) * shrink;
      const double c = best.arg[i];
      lo[i] = c - half;
      hi[i] = c + half;
    }
  }
  return best;
}

}  // namespace oracle
