#pragma once

#include <string>

#include "sarprec/channel.hpp"
#include "sarprec/metrics.hpp"
#include "sarprec/sar.hpp"

namespace fixtures {

using sarprec::Complex;
using sarprec::Matrix;

inline Matrix r1() {
  const Complex j(0.0, 1.0);
  Matrix r(4, 4);
  r << 8.0, -6.0 * j, -2.1, 0.0,
       6.0 * j, 8.0, -6.0 * j, -2.1,
       -2.1, 6.0 * j, 8.0, -6.0 * j,
       0.0, -2.1, 6.0 * j, 8.0;
  return r;
}

inline Matrix r2() {
  using C = Complex;
  Matrix r(4, 4);
  r << C(3.94, 0), C(-2.65, -2.53), C(-0.01, 3.46), C(0.60, -0.10),
       C(-2.65, 2.53), C(4.57, 0), C(-2.30, -2.80), C(-0.99, -0.07),
       C(-0.01, -3.46), C(-2.30, 2.80), C(4.97, 0), C(-1.22, -2.04),
       C(0.60, 0.10), C(-0.99, 0.07), C(-1.22, 2.04), C(3.18, 0);
  return r;
}

// Eigenvalues of R1 and R2 (descending), computed offline with LAPACK.
inline constexpr double kR1Eigenvalues[] = {19.637708029332785, 9.920365840057016, 2.362291970667219,
                                            0.07963415994297994};
inline constexpr double kR2Eigenvalues[] = {12.132991311779435, 3.839835825707923, 0.5581550547872665,
                                            0.12901780772538526};

inline std::vector<sarprec::sar::SarConstraint> handset_constraints() {
  return {{r1(), 1.0, "R1"}, {r2(), 0.8, "R2"}};
}

// M = N = K = 1 with unit coupling.
inline sarprec::channel::ChannelStatistics scalar_statistics(double omega = 1.0) {
  sarprec::channel::ChannelStatistics s;
  s.num_receive = 1;
  sarprec::channel::UserStatistics u;
  u.receive_basis = Matrix::Identity(1, 1);
  u.transmit_basis = Matrix::Identity(1, 1);
  u.coupling = sarprec::RealMatrix::Constant(1, 1, omega);
  s.users.push_back(u);
  return s;
}

inline std::string scenario_path() { return std::string(SARPREC_SCENARIO_DIR) + "/handset_uplink.json"; }

}  // namespace fixtures
