#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sarprec/errors.hpp"
#include "sarprec/experiments.hpp"
#include "sarprec/optimizer.hpp"

using namespace sarprec;
using namespace sarprec::optimizer;

namespace {

metrics::PowerModel simple_model(std::size_t users, double budget, double noise, double xi = 0.0) {
  metrics::PowerModel pm;
  pm.amplifier_inefficiency.assign(users, xi);
  pm.static_user_power.assign(users, 1.0);
  pm.static_bs_power = 10.0;
  pm.bandwidth = 1e7;
  pm.noise_power = noise;
  pm.power_budget.assign(users, budget);
  return pm;
}

Matrix r_small() {
  Matrix r(2, 2);
  r << Complex(2.0, 0.0), Complex(0.5, -0.5), Complex(0.5, 0.5), Complex(1.0, 0.0);
  return r;
}

double frob_rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

experiments::ScenarioConfig handset_scenario() { return experiments::load_scenario(fixtures::scenario_path()); }

}  // namespace

TEST_CASE("price matrix identities") {
  const std::vector<Eigen::Index> dims{4};
  auto pm = simple_model(1, 1.0, 1.0, 5.0);
  const auto none = sar::SarConstraintSet::none(1);

  DualVariables d;
  d.power = {1.0};
  d.sar = {{}};
  CHECK(build_price_matrix(0.0, pm, d, none, dims)[0].isApprox(Matrix::Identity(4, 4), 1e-15));

  d.power = {0.0};
  CHECK(build_price_matrix(0.2, pm, d, none, dims)[0].isApprox(Matrix::Identity(4, 4), 1e-15));

  const auto cons = sar::SarConstraintSet::shared(1, fixtures::handset_constraints());
  d.sar = {{0.5, 0.0}};
  const Matrix k = build_price_matrix(0.0, pm, d, cons, dims)[0];
  CHECK((k - 0.5 * fixtures::r1()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(oracle::hermitian_eigenvalues(k).back() == doctest::Approx(0.5 * fixtures::kR1Eigenvalues[3]));
}

TEST_CASE("initial duals") {
  auto pm = simple_model(2, 0.25, 1.0);
  const auto d = DualVariables::initial(pm, sar::SarConstraintSet::shared(2, fixtures::handset_constraints()));
  CHECK(d.power == std::vector<double>{4.0, 4.0});
  CHECK(d.sar == std::vector<std::vector<double>>{{0.0, 0.0}, {0.0, 0.0}});
}

TEST_CASE("water-filling closed forms") {
  const double s2 = 0.3;
  channel::Rng rng(1);
  const Matrix v = channel::random_unitary(2, rng);
  RealVector diag(2);
  diag << 4.0 * s2, s2 / 2.0;
  const Matrix gamma = v * diag.cast<Complex>().asDiagonal() * v.adjoint();
  const auto wf = waterfill_detail(gamma, Matrix::Identity(2, 2), s2);
  CHECK(wf.allocation(0) == doctest::Approx(0.75));
  CHECK(wf.allocation(1) == 0.0);
  CHECK((wf.q - 0.75 * v.col(0) * v.col(0).adjoint()).cwiseAbs().maxCoeff() < 1e-12);

  CHECK(waterfill_inner(Matrix::Zero(3, 3), Matrix::Identity(3, 3), s2).cwiseAbs().maxCoeff() == 0.0);

  const double p = 10.0;
  const Matrix q4 = waterfill_inner(p * Matrix::Identity(3, 3), 4.0 * Matrix::Identity(3, 3), s2);
  CHECK((q4 - 0.25 * (1.0 - 4.0 * s2 / p) * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(waterfill_inner(gamma, Matrix::Zero(2, 2), s2), SingularMatrix);
}

TEST_CASE("water-filling allocation is invariant to joint scaling of Gamma and noise") {
  channel::Rng rng(2);
  const Matrix g = channel::complex_gaussian(3, 3, rng);
  const Matrix gamma = g * g.adjoint();
  const Matrix h = channel::complex_gaussian(3, 3, rng);
  const Matrix k = h * h.adjoint() + Matrix::Identity(3, 3);
  const auto a = waterfill_detail(gamma, k, 0.7);
  const auto b = waterfill_detail(3.0 * gamma, k, 2.1);
  CHECK((a.allocation - b.allocation).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("water-filling matches the whitened eigen oracle") {
  channel::Rng rng(3);
  const Matrix g = channel::complex_gaussian(4, 4, rng);
  const Matrix gamma = g * g.adjoint();
  const Matrix h = channel::complex_gaussian(4, 4, rng);
  const Matrix k = h * h.adjoint() + 0.5 * Matrix::Identity(4, 4);
  const double s2 = 0.8;
  const Matrix kis = oracle::hermitian_function(k, [](double x) { return 1.0 / std::sqrt(x); });
  const Matrix w = oracle::hermitian_function(kis * gamma * kis, [&](double x) {
    return x > s2 ? 1.0 - s2 / x : 0.0;
  });
  CHECK(frob_rel(waterfill_inner(gamma, k, s2), kis * w * kis) < 1e-9);
}

TEST_CASE("a single AO pass reproduces water-filling at the refreshed Gamma") {
  const std::vector<Eigen::Index> dims{2, 3};
  const auto stats = channel::make_statistics(4, dims, 0.0, 1.0, 5);
  std::vector<Matrix> prices{Matrix::Identity(2, 2), 2.0 * Matrix::Identity(3, 3)};
  TransmitCovariance q0;
  q0.users = {Matrix::Identity(2, 2) * 0.3, Matrix::Identity(3, 3) * 0.2};
  const auto step = ao_step(stats, prices, q0, 0.2, Options{});
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(step.q[k] == waterfill_inner(step.fp.big_gamma[k], prices[k], 0.2));
  }
}

TEST_CASE("AO inner maximizer matches a dense grid search on a 2x2 instance") {
  const std::vector<Eigen::Index> dims{2};
  const auto stats = channel::make_statistics(2, dims, 0.0, 1.0, 11);
  const double noise = 0.1;
  auto pm = simple_model(1, 10.0, noise);
  const auto cons = sar::SarConstraintSet::shared(1, {{r_small(), 1.0, "R"}});
  DualVariables d;
  d.power = {0.5};
  d.sar = {{0.3}};
  const Matrix k = 0.5 * Matrix::Identity(2, 2) + 0.3 * r_small();

  auto lagrangian = [&](const Matrix& q) {
    TransmitCovariance tq;
    tq.users.push_back(q);
    return std::numbers::ln2 * de::asymptotic_se(stats, tq, noise) - (k * q).trace().real();
  };
  const auto result = ao_inner_max(stats, pm, 0.0, d, cons, Options{});
  const double achieved = lagrangian(result.q[0]);
  CHECK(result.lagrangian == doctest::Approx(achieved).epsilon(1e-9));

  const auto grid = oracle::refine_grid(
      [&](const std::vector<double>& x) {
        if (x[0] < 0.0 || x[1] < 0.0) return -std::numeric_limits<double>::infinity();
        Matrix v(2, 2);
        const double c = std::cos(x[2]);
        const double s = std::sin(x[2]);
        const Complex ph = std::polar(1.0, x[3]);
        v << c, -std::conj(ph) * s, ph * s, c;
        RealVector lam(2);
        lam << x[0], x[1];
        return lagrangian(v * lam.cast<Complex>().asDiagonal() * v.adjoint());
      },
      {0.0, 0.0, 0.0, 0.0}, {4.0, 4.0, std::numbers::pi / 2, 2.0 * std::numbers::pi}, 9, 8, 0.4);
  CHECK(achieved >= grid.value - 1e-3 * std::abs(grid.value));
  CHECK(achieved <= grid.value + 1e-3 * std::abs(grid.value) + 1e-6);
}

TEST_CASE("slack SAR constraints get zero multipliers") {
  const auto cfg = handset_scenario();
  const auto stats = cfg.statistics();
  auto pm = cfg.power_model(1e-3);
  const auto r = dual_solve(stats, pm, 0.0, cfg.sar, cfg.solver);
  CHECK(r.converged);
  for (const auto& user : r.duals.sar)
    for (const double b : user) CHECK(b == 0.0);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(r.duals.power[k] > 0.0);
    CHECK(r.q.trace(k) == doctest::Approx(1e-3).epsilon(1e-5));
  }
}

TEST_CASE("power-only single user recovers capacity water-filling") {
  const std::vector<Eigen::Index> dims{4};
  const auto stats = channel::make_statistics(4, dims, 0.0, 1.0, 3);
  const double noise = 1.0;
  const double budget = 2.0;
  auto pm = simple_model(1, budget, noise);
  const auto r = dual_solve(stats, pm, 0.0, sar::SarConstraintSet::none(1), Options{});
  REQUIRE(r.converged);
  CHECK(r.q.trace(0) == doctest::Approx(budget).epsilon(1e-6));
  const Matrix expected = oracle::waterfill_covariance(r.fp.big_gamma[0], noise, budget);
  CHECK(frob_rel(r.q[0], expected) < 1e-5);
  const Matrix comm = r.q[0] * r.fp.big_gamma[0] - r.fp.big_gamma[0] * r.q[0];
  CHECK(comm.norm() <= 1e-6 * r.q[0].norm() * r.fp.big_gamma[0].norm());
}

TEST_CASE("subgradient dual method reaches the same power-only optimum") {
  const std::vector<Eigen::Index> dims{2};
  const auto stats = channel::make_statistics(2, dims, 0.0, 1.0, 8);
  auto pm = simple_model(1, 1.0, 0.5);
  Options opts;
  opts.dual_method = DualMethod::kProjectedSubgradient;
  opts.max_dual = 5000;
  opts.dual_tol = 1e-6;
  const auto sub = dual_solve(stats, pm, 0.0, sar::SarConstraintSet::none(1), opts);
  const auto newton = dual_solve(stats, pm, 0.0, sar::SarConstraintSet::none(1), Options{});
  CHECK(frob_rel(sub.q[0], newton.q[0]) < 1e-3);
}

TEST_CASE("handset scenario at 20 dBm meets constraints and KKT conditions") {
  const auto cfg = handset_scenario();
  const auto stats = cfg.statistics();
  const auto pm = cfg.power_model(metrics::dbm_to_watts(20.0));
  const auto sol = dinkelbach(stats, pm, cfg.sar, cfg.solver);
  CHECK(sol.constraints.pass);
  CHECK(sol.kkt.satisfied(1e-5));
  for (std::size_t i = 1; i < sol.state.eta_history.size(); ++i) {
    CHECK(sol.state.eta_history[i] >= sol.state.eta_history[i - 1] - 1e-9);
  }
  for (const double mu : sol.state.duals.power) CHECK(mu >= 0.0);
}

TEST_CASE("without amplifier cost Dinkelbach collapses to SE maximization") {
  const auto cfg = handset_scenario();
  const auto stats = cfg.statistics();
  const auto pm = cfg.power_model(metrics::dbm_to_watts(20.0)).without_amplifier_cost();
  const auto ee = dinkelbach(stats, pm, cfg.sar, cfg.solver);
  const auto se = se_max(stats, pm, cfg.sar, cfg.solver);
  CHECK(ee.state.outer_iterations <= 2);
  CHECK(ee.achieved_se == doctest::Approx(se.achieved_se).epsilon(1e-6));
  for (std::size_t k = 0; k < 4; ++k) CHECK(frob_rel(ee.q[k], se.q[k]) < 1e-4);
}

TEST_CASE("vanishing power budget drives Q and EE to zero") {
  const auto cfg = handset_scenario();
  const auto stats = cfg.statistics();
  const auto tiny = dinkelbach(stats, cfg.power_model(1e-9), cfg.sar, cfg.solver);
  const auto ref = dinkelbach(stats, cfg.power_model(metrics::dbm_to_watts(10.0)), cfg.sar, cfg.solver);
  CHECK(tiny.q.total_power() <= 4e-9 * (1 + 1e-6));
  CHECK(tiny.achieved_ee < 1e-3 * ref.achieved_ee);
}

TEST_CASE("restore_feasibility scales each user independently") {
  const auto cons = sar::SarConstraintSet::shared(2, fixtures::handset_constraints());
  TransmitCovariance q;
  q.users = {Matrix::Identity(4, 4) * 0.05, Matrix::Identity(4, 4) * 0.01};
  const std::vector<double> budget{0.1, 0.1};
  restore_feasibility(q, cons, budget);
  CHECK(q.trace(0) == doctest::Approx(0.1));
  CHECK(q.trace(1) == doctest::Approx(0.04));
}
