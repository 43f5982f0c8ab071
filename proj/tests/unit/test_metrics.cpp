#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "sarprec/covariance.hpp"
#include "sarprec/errors.hpp"
#include "sarprec/metrics.hpp"

using namespace sarprec;
using namespace sarprec::metrics;

namespace {

PowerModel handset_model(double xi = 5.0) {
  PowerModel pm;
  pm.amplifier_inefficiency.assign(4, xi);
  pm.static_user_power.assign(4, dbm_to_watts(30.0));
  pm.static_bs_power = dbm_to_watts(40.0);
  pm.bandwidth = 1e7;
  pm.noise_power = dbm_to_watts(-96.0);
  pm.power_budget.assign(4, 1.0);
  return pm;
}

TransmitCovariance per_user_trace(double t) {
  TransmitCovariance q;
  for (int k = 0; k < 4; ++k) q.users.push_back(Matrix::Identity(4, 4) * (t / 4.0));
  return q;
}

}  // namespace

TEST_CASE("unit conversions") {
  CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0));
  CHECK(dbm_to_watts(40.0) == doctest::Approx(10.0));
  CHECK(dbm_to_watts(-96.0) == doctest::Approx(2.51188643150958e-13).epsilon(1e-12));
  CHECK(db_to_linear(-120.0) == doctest::Approx(1e-12));
}

TEST_CASE("power_consumption with handset constants") {
  const auto pm = handset_model();
  CHECK(power_consumption(per_user_trace(0.0), pm) == doctest::Approx(14.0));
  CHECK(power_consumption(per_user_trace(0.1), pm) == doctest::Approx(16.0));
  const auto free = pm.without_amplifier_cost();
  CHECK(free.amplifier_cost_free());
  CHECK(power_consumption(per_user_trace(0.7), free) == doctest::Approx(14.0));
}

TEST_CASE("power model validation") {
  auto pm = handset_model();
  CHECK_NOTHROW(pm.validate());
  pm.bandwidth = -1.0;
  CHECK_THROWS_AS(pm.validate(), InvalidInput);
  pm = handset_model();
  pm.static_user_power.pop_back();
  CHECK_THROWS_AS(pm.validate(), InvalidInput);
}

TEST_CASE("ergodic_se_mc of a zero covariance is exactly zero") {
  const auto stats = fixtures::scalar_statistics();
  const auto est = ergodic_se_mc(stats, TransmitCovariance::zeros(std::vector<Eigen::Index>{1}), 1.0, 1000, 1);
  CHECK(est.mean == 0.0);
  CHECK(est.std_error == 0.0);
}

TEST_CASE("scalar ergodic SE matches the exponential-integral value") {
  // E[log2(1 + |h|^2)] for h ~ CN(0, 1) is e E1(1) / ln 2.
  constexpr double kExact = 0.8603473822708868;
  const auto stats = fixtures::scalar_statistics();
  TransmitCovariance q;
  q.users.push_back(Matrix::Identity(1, 1));
  const auto est = ergodic_se_mc(stats, q, 1.0, 100000, 2024);
  CHECK(std::abs(est.mean - kExact) < 3.0 * est.std_error);
  CHECK(est.samples == 100000);
}

TEST_CASE("Monte-Carlo estimates are paired and thread-count independent") {
  const auto stats = channel::make_statistics(4, std::vector<Eigen::Index>{2}, 0.0, 1.0, 5);
  TransmitCovariance q;
  q.users.push_back(Matrix::Identity(2, 2) * 0.5);
  TransmitCovariance q2 = q;
  q2[0] *= 2.0;
  const auto a = ergodic_se_mc(stats, q, 1.0, 3000, 77, 1);
  const auto b = ergodic_se_mc(stats, q, 1.0, 3000, 77, 3);
  const auto c = ergodic_se_mc(stats, q2, 1.0, 3000, 77, 2);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(c.mean >= a.mean);
}

TEST_CASE("ergodic_ee_mc scales the SE by bandwidth over power") {
  auto pm = handset_model(0.0);
  pm.amplifier_inefficiency.assign(1, 0.0);
  pm.static_user_power.assign(1, 2.0);
  pm.static_bs_power = 14.0;
  pm.power_budget.assign(1, 1.0);
  pm.noise_power = 1.0;
  const auto stats = fixtures::scalar_statistics();
  TransmitCovariance q;
  q.users.push_back(Matrix::Identity(1, 1));
  const auto se = ergodic_se_mc(stats, q, 1.0, 500, 3);
  const auto ee = ergodic_ee_mc(stats, q, pm, 500, 3);
  CHECK(ee.mean == doctest::Approx(se.mean * 1e7 / 16.0));
  auto doubled = pm;
  doubled.static_user_power.assign(1, 4.0);
  doubled.static_bs_power = 28.0;
  CHECK(ergodic_ee_mc(stats, q, doubled, 500, 3).mean == doctest::Approx(ee.mean / 2.0));
}

TEST_CASE("pairwise_sum and mix_seed") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
