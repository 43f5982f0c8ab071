#include "sarprec/baselines.hpp"

#include "sarprec/errors.hpp"

namespace sarprec::baselines {

namespace {

void finish(BackoffResult& r, const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
            const sar::SarConstraintSet& cons, const optimizer::Options& opts) {
  const auto fp = de::fixed_point(stats, r.q, pm.noise_power, opts.fixed_point);
  r.achieved_se = de::asymptotic_se(stats, r.q, fp, pm.noise_power);
  r.achieved_ee = pm.bandwidth * r.achieved_se / metrics::power_consumption(r.q, pm);
  r.constraints = sar::check_constraints(r.q, cons, pm.power_budget, 1e-6);
  if (!r.constraints.pass) throw NumericConsistency("back-off result violates a constraint");
}

}  // namespace

std::pair<double, std::optional<BindingConstraint>> backoff_factor(
    const sar::SarConstraintSet& cons, const std::vector<std::vector<double>>& values) {
  double alpha = 1.0;
  std::optional<BindingConstraint> binding;
  for (std::size_t k = 0; k < cons.users.size(); ++k) {
    for (std::size_t i = 0; i < cons.users[k].size(); ++i) {
      const double v = values.at(k).at(i);
      if (!(v > 0.0)) continue;
      const double ratio = cons.users[k][i].limit / v;
      if (ratio < alpha) {
        alpha = ratio;
        binding = BindingConstraint{k, i};
      }
    }
  }
  return {alpha, binding};
}

BackoffResult worst_case_backoff(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                                 const sar::SarConstraintSet& cons, const optimizer::Options& opts) {
  std::vector<std::vector<double>> worst(cons.users.size());
  for (std::size_t k = 0; k < cons.users.size(); ++k) {
    for (const auto& c : cons.users[k]) worst[k].push_back(sar::worst_case_sar(c.matrix, pm.power_budget.at(k)).value);
  }
  BackoffResult r;
  std::tie(r.alpha, r.binding) = backoff_factor(cons, worst);

  metrics::PowerModel reduced = pm;
  for (auto& p : reduced.power_budget) p *= r.alpha;
  r.inner = optimizer::dinkelbach(stats, reduced, sar::SarConstraintSet::none(pm.num_users()), opts);
  r.q = r.inner.q;
  finish(r, stats, pm, cons, opts);
  return r;
}

BackoffResult adaptive_backoff(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                               const sar::SarConstraintSet& cons, const optimizer::Options& opts) {
  BackoffResult r;
  r.inner = optimizer::dinkelbach(stats, pm, sar::SarConstraintSet::none(pm.num_users()), opts);
  std::vector<std::vector<double>> achieved(cons.users.size());
  for (std::size_t k = 0; k < cons.users.size(); ++k) {
    for (std::size_t i = 0; i < cons.users[k].size(); ++i) {
      const double s = sar::sar_value(cons.users[k][i].matrix, r.inner.q[k]);
      if (!(s > 0.0)) {
        r.notes.push_back("constraint (" + std::to_string(k + 1) + "," + std::to_string(i + 1) +
                          ") has non-positive SAR and is skipped");
      }
      achieved[k].push_back(s);
    }
  }
  std::tie(r.alpha, r.binding) = backoff_factor(cons, achieved);
  r.q = r.inner.q;
  for (auto& qk : r.q.users) qk *= r.alpha;
  finish(r, stats, pm, cons, opts);
  return r;
}

}  // namespace sarprec::baselines
