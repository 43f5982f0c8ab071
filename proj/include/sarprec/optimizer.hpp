#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarprec/channel.hpp"
#include "sarprec/de.hpp"
#include "sarprec/metrics.hpp"
#include "sarprec/sar.hpp"

/// SAR-aware energy-efficiency maximization: a Dinkelbach outer loop over
/// eta, a dual loop over the power and SAR multipliers, and an alternating
/// inner loop between the deterministic-equivalent fixed point and the
/// whitened water-filling solution for each Q_k.
///
/// Internally the subproblem objective is measured in nats, so the price
/// matrix K_k = (eta xi_k + mu_k) I + sum_i beta_{k,i} R_{k,i} is expressed
/// per nat. The Dinkelbach parameter reported in OptimizerState is in
/// bits/(s Hz W); it is multiplied by ln 2 before it enters K_k.
namespace sarprec::optimizer {

struct DualVariables {
  std::vector<double> power;             // mu_k
  std::vector<std::vector<double>> sar;  // beta_{k,i}

  /// mu_k = 1 / P_max,k, beta = 0.
  static DualVariables initial(const metrics::PowerModel& pm, const sar::SarConstraintSet& cons);
};

enum class DualMethod {
  // Multipliers of each user minimize that user's dual function with Gamma_k
  // frozen at the current inner solution (projected Newton).
  kFrozenGammaNewton,
  // Projected sub-gradient with step s0 / sqrt(t).
  kProjectedSubgradient,
};

struct Options {
  double eta_tol = 1e-6;       // |eta^(l) - eta^(l-1)|, bits/(s Hz W)
  double dual_tol = 1e-8;         // KKT residual the dual loop aims for
  double dual_accept_tol = 1e-5;  // residual still accepted when the loop stalls above dual_tol
  double ao_tol = 1e-8;        // relative change of the reduced Lagrangian
  double ao_step_tol = 1e-9;   // relative Frobenius change of Q between AO passes
  int max_outer = 50;
  int max_dual = 500;
  int max_ao = 200;
  double price_floor = 1e-10;  // relative eigenvalue floor of K_k
  double subgradient_step = 0.0;  // s0; 0 selects 1 / (max P_max + max SAR limit)
  DualMethod dual_method = DualMethod::kFrozenGammaNewton;
  de::FixedPointOptions fixed_point;
};

/// K_k for every user. `eta_nats` is the Dinkelbach parameter per nat.
std::vector<Matrix> build_price_matrix(double eta_nats, const metrics::PowerModel& pm, const DualVariables& duals,
                                       const sar::SarConstraintSet& cons,
                                       std::span<const Eigen::Index> transmit_dims);

struct WaterfillDetail {
  Matrix q;
  RealVector whitened_gains;  // p_1 >= ... >= p_N, eigenvalues of K^{-1/2} Gamma K^{-1/2}
  RealVector allocation;      // (1 - sigma^2 / p_n)^+
  double logdet = 0.0;        // ln det(I + Gamma Q / sigma^2)
  double price = 0.0;         // tr(K Q)
};

/// Q = K^{-1/2} U Lambda U^H K^{-1/2} with K^{-1/2} Gamma K^{-1/2} = U diag(p) U^H
/// and Lambda = diag((1 - sigma^2/p_n)^+). Throws SingularMatrix if K has no
/// positive eigenvalue.
WaterfillDetail waterfill_detail(const Matrix& big_gamma, const Matrix& price, double noise_power,
                                 double price_floor = 1e-10);

Matrix waterfill_inner(const Matrix& big_gamma, const Matrix& price, double noise_power,
                       double price_floor = 1e-10);

struct InnerResult {
  TransmitCovariance q;
  de::FixedPointState fp;  // fixed point at q (ao_step: the state whose Gamma_k produced q)
  double lagrangian = 0.0;  // nats; ao_step reports the frozen-Gamma surrogate, ao_inner_max the asymptotic value
  int iterations = 0;
  std::vector<double> lagrangian_trace;
};

/// One alternating pass: refresh the fixed point at `q`, then water-fill every user.
InnerResult ao_step(const channel::ChannelStatistics& stats, const std::vector<Matrix>& prices,
                    const TransmitCovariance& q, double noise_power, const Options& opts,
                    const de::FixedPointState* warm_fp = nullptr);

/// Maximizes ln 2 * SE-bar(Q) - sum_k tr(K_k Q_k) for fixed multipliers by
/// alternating the fixed point and water-filling. Each water-filling output
/// is approached along a backtracking line search on the asymptotic
/// Lagrangian, so the iteration is monotone. Stops when the water-filling
/// step no longer moves Q (ao_step_tol) nor promises gain (ao_tol).
/// Starts from `start` (zero covariance when null).
/// Throws NonConvergence after opts.max_ao passes.
InnerResult ao_inner_max(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm, double eta_nats,
                         const DualVariables& duals, const sar::SarConstraintSet& cons, const Options& opts,
                         const TransmitCovariance* start = nullptr, const de::FixedPointState* warm_fp = nullptr);

struct KktEntry {
  std::size_t user = 0;
  std::optional<std::size_t> sar_index;  // empty for the power constraint
  double multiplier = 0.0;
  double value = 0.0;
  double limit = 0.0;
  double primal_violation = 0.0;  // max(0, value - limit) / limit
  double slackness = 0.0;         // |multiplier (value - limit)| / max(1, limit)
};

struct KktReport {
  std::vector<KktEntry> entries;
  double max_primal_violation = 0.0;
  double max_slackness = 0.0;

  bool satisfied(double tol) const { return max_primal_violation <= tol && max_slackness <= tol; }
};

KktReport kkt_report(const TransmitCovariance& q, const DualVariables& duals, const sar::SarConstraintSet& cons,
                     const metrics::PowerModel& pm);

struct DualResult {
  TransmitCovariance q;
  DualVariables duals;
  de::FixedPointState fp;
  KktReport kkt;
  int iterations = 0;
  int ao_iterations = 0;
  bool converged = false;  // false: best residual above dual_accept_tol
};

/// Solves the Dinkelbach subproblem max SE-bar - eta P s.t. power and SAR
/// limits through its dual. Stops once primal feasibility and complementary
/// slackness residuals are below opts.dual_tol, or (Newton method) after
/// five passes without a 10% reduction; the best iterate is returned and
/// counts as converged when its residual is within opts.dual_accept_tol. The
/// returned Q is scaled into the feasible set if it overshoots a limit by
/// rounding.
DualResult dual_solve(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm, double eta_nats,
                      const sar::SarConstraintSet& cons, const Options& opts,
                      const DualVariables* warm_duals = nullptr, const TransmitCovariance* warm_q = nullptr);

struct OptimizerState {
  double eta = 0.0;  // bits/(s Hz W)
  DualVariables duals;
  int outer_iterations = 0;
  int dual_iterations = 0;
  int ao_iterations = 0;
  std::vector<double> eta_history;  // starts with eta^(0) = 0
  std::vector<std::string> warnings;
};

struct Solution {
  TransmitCovariance q;
  double achieved_ee = 0.0;  // bits/J, asymptotic
  double achieved_se = 0.0;  // bits/s/Hz, asymptotic
  KktReport kkt;
  sar::ConstraintReport constraints;
  OptimizerState state;
  de::FixedPointState fp;
};

/// SAR-aware EE maximization (asymptotic objective).
Solution dinkelbach(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                    const sar::SarConstraintSet& cons, const Options& opts = {});

/// SE maximization: the same stack with xi_k = 0 and a single subproblem.
/// achieved_ee is evaluated under the original power model.
Solution se_max(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                const sar::SarConstraintSet& cons, const Options& opts = {});

/// Scales each Q_k by the largest factor <= 1 that meets its power and SAR limits.
void restore_feasibility(TransmitCovariance& q, const sar::SarConstraintSet& cons,
                         std::span<const double> power_budget);

}  // namespace sarprec::optimizer
