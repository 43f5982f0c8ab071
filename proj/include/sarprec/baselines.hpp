#pragma once

#include <optional>
#include <string>

#include "sarprec/optimizer.hpp"

/// Power back-off reference schemes: SAR compliance by a single scalar
/// reduction of transmit power instead of SAR-aware precoding.
namespace sarprec::baselines {

struct BindingConstraint {
  std::size_t user = 0;
  std::size_t index = 0;

  std::string label() const { return "(" + std::to_string(user + 1) + "," + std::to_string(index + 1) + ")"; }
};

struct BackoffResult {
  TransmitCovariance q;
  double alpha = 1.0;
  std::optional<BindingConstraint> binding;  // empty when alpha == 1
  double achieved_ee = 0.0;                  // bits/J, asymptotic
  double achieved_se = 0.0;                  // bits/s/Hz, asymptotic
  sar::ConstraintReport constraints;         // against the original SAR set and budgets
  optimizer::Solution inner;                 // the SAR-free EE maximization that was run
  std::vector<std::string> notes;
};

/// alpha_1 = min over (k,i) of min(1, limit_{k,i} / worst-case SAR at P_max,k),
/// then SAR-free EE maximization with budgets alpha_1 P_max,k.
BackoffResult worst_case_backoff(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                                 const sar::SarConstraintSet& cons, const optimizer::Options& opts = {});

/// SAR-free EE maximization at full budgets, then Q_k <- alpha_2 Q_k with
/// alpha_2 = min over (k,i) of min(1, limit_{k,i} / tr(R_{k,i} Q_k)).
/// Constraints with non-positive achieved SAR are vacuous and skipped.
BackoffResult adaptive_backoff(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                               const sar::SarConstraintSet& cons, const optimizer::Options& opts = {});

/// The min-ratio rule shared by both schemes. `values[k][i]` is the SAR the
/// ratio is taken against; entries <= 0 are skipped.
std::pair<double, std::optional<BindingConstraint>> backoff_factor(
    const sar::SarConstraintSet& cons, const std::vector<std::vector<double>>& values);

}  // namespace sarprec::baselines
