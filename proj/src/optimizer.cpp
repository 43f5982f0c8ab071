#include "sarprec/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>

#include "sarprec/errors.hpp"

namespace sarprec::optimizer {

namespace {

constexpr double kLn2 = std::numbers::ln2;

void require_shapes(const metrics::PowerModel& pm, const sar::SarConstraintSet& cons, const DualVariables& duals) {
  const std::size_t k = pm.num_users();
  if (cons.num_users() != k || duals.power.size() != k || duals.sar.size() != k) {
    throw InvalidInput("optimizer: user count mismatch");
  }
  for (std::size_t u = 0; u < k; ++u) {
    if (duals.sar[u].size() != cons.users[u].size()) {
      throw InvalidInput("optimizer: SAR multiplier count mismatch for user " + std::to_string(u));
    }
  }
}

// The dual function of one user's subproblem with Gamma_k frozen:
//   h(l) = max_Q ln det(I + Gamma Q / s2) - tr(K(l) Q) + l_0 P + sum_i l_i q_i,
//   K(l) = (c + l_0) I + sum_i l_i R_i.
// Its gradient is (P - tr Q*, q_i - tr(R_i Q*)).
class UserDual {
 public:
  UserDual(const Matrix& big_gamma, double base_price, const std::vector<sar::SarConstraint>& sar, double pmax,
           double noise_power, double price_floor)
      : gamma_(big_gamma), base_(base_price), sar_(sar), pmax_(pmax), noise_(noise_power), floor_(price_floor) {}

  struct Eval {
    bool ok = false;
    double h = std::numeric_limits<double>::infinity();
    RealVector grad;
    Matrix q;
  };

  Eigen::Index dim() const { return static_cast<Eigen::Index>(sar_.size()) + 1; }

  double scale(Eigen::Index j) const { return j == 0 ? pmax_ : sar_[static_cast<std::size_t>(j - 1)].limit; }

  Matrix price(const RealVector& l) const {
    const Eigen::Index n = gamma_.rows();
    Matrix k = Matrix::Identity(n, n) * (base_ + l(0));
    for (std::size_t i = 0; i < sar_.size(); ++i) k += l(static_cast<Eigen::Index>(i) + 1) * sar_[i].matrix;
    return k;
  }

  Eval eval(const RealVector& l) const {
    Eval e;
    const Matrix k = price(l);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(psdlin::hermitian_part(k), Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (!(lmax > 0.0) || !(lmin > 1e-14 * lmax)) return e;
    const WaterfillDetail wf = waterfill_detail(gamma_, k, noise_, floor_);
    e.ok = true;
    e.q = wf.q;
    e.grad.resize(dim());
    e.grad(0) = pmax_ - wf.q.trace().real();
    double h = wf.logdet - wf.price + l(0) * pmax_;
    for (std::size_t i = 0; i < sar_.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(i) + 1;
      e.grad(j) = sar_[i].limit - psdlin::trace_product_real(sar_[i].matrix, wf.q);
      h += l(j) * sar_[i].limit;
    }
    e.h = h;
    return e;
  }

  bool satisfied(const RealVector& l, const Eval& e, double tol) const {
    for (Eigen::Index j = 0; j < dim(); ++j) {
      const double s = scale(j);
      if (e.grad(j) < -tol * s) return false;
      if (l(j) * std::abs(e.grad(j)) > tol * std::max(1.0, s)) return false;
    }
    return true;
  }

  // Multipliers of the power-only problem: beta = 0 and mu from the
  // classic water level so that tr Q = P (or mu = 0 if the base price
  // already keeps tr Q below P).
  RealVector power_only_start() const {
    RealVector l = RealVector::Zero(dim());
    const Eigen::SelfAdjointEigenSolver<Matrix> es(psdlin::hermitian_part(gamma_), Eigen::EigenvaluesOnly);
    std::vector<double> d(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(d.begin(), d.end(), std::greater<>());
    while (!d.empty() && !(d.back() > 0.0)) d.pop_back();
    if (d.empty()) {
      l(0) = base_ > 0.0 ? 0.0 : 1.0 / pmax_;
      return l;
    }
    auto trace_at_level = [&](double level) {
      double t = 0.0;
      for (const double g : d) t += std::max(level - noise_ / g, 0.0);
      return t;
    };
    if (base_ > 0.0 && trace_at_level(1.0 / base_) <= pmax_) return l;
    double level = 0.0;
    for (std::size_t active = d.size(); active >= 1; --active) {
      double inv_sum = 0.0;
      for (std::size_t i = 0; i < active; ++i) inv_sum += noise_ / d[i];
      level = (pmax_ + inv_sum) / static_cast<double>(active);
      if (level > noise_ / d[active - 1]) break;
    }
    l(0) = std::max(1.0 / level - base_, 0.0);
    return l;
  }

  RealMatrix hessian(const RealVector& l, const std::vector<Eigen::Index>& free, const Eval& at) const {
    const auto nf = static_cast<Eigen::Index>(free.size());
    RealMatrix h(nf, nf);
    const double ref = std::max(l.maxCoeff(), 1e-12);
    for (Eigen::Index a = 0; a < nf; ++a) {
      const Eigen::Index j = free[static_cast<std::size_t>(a)];
      const double step = 1e-6 * std::max(l(j), 1e-3 * ref);
      RealVector lp = l;
      lp(j) += step;
      const Eval ep = eval(lp);
      RealVector col;
      if (l(j) - step >= 0.0) {
        RealVector lm = l;
        lm(j) -= step;
        const Eval em = eval(lm);
        if (ep.ok && em.ok) {
          col = (ep.grad - em.grad) / (2.0 * step);
        } else if (ep.ok) {
          col = (ep.grad - at.grad) / step;
        } else if (em.ok) {
          col = (at.grad - em.grad) / step;
        }
      } else if (ep.ok) {
        col = (ep.grad - at.grad) / step;
      }
      if (col.size() == 0) col = RealVector::Zero(dim());
      for (Eigen::Index b = 0; b < nf; ++b) h(b, a) = col(free[static_cast<std::size_t>(b)]);
    }
    return 0.5 * (h + h.transpose());
  }

  struct Result {
    RealVector lambda;
    Matrix q;
    int iterations = 0;
    bool converged = false;
  };

  Result solve(const RealVector& start, double tol, int max_iter) const {
    RealVector l = start.cwiseMax(0.0);
    Eval e = eval(l);
    if (!e.ok) {
      l = power_only_start();
      e = eval(l);
    }
    if (!e.ok) throw SingularMatrix("user dual: no valid starting multipliers");

    Result r;
    for (int it = 0; it < max_iter; ++it) {
      r.iterations = it;
      if (satisfied(l, e, tol)) {
        r.converged = true;
        break;
      }
      std::vector<Eigen::Index> free;
      for (Eigen::Index j = 0; j < dim(); ++j) {
        if (l(j) > 0.0 || e.grad(j) < 0.0) free.push_back(j);
      }
      if (free.empty()) break;
      const auto nf = static_cast<Eigen::Index>(free.size());
      RealVector g(nf);
      for (Eigen::Index a = 0; a < nf; ++a) g(a) = e.grad(free[static_cast<std::size_t>(a)]);

      RealMatrix h = hessian(l, free, e);
      const double diag_max = h.diagonal().cwiseAbs().maxCoeff();
      RealVector d;
      if (diag_max > 0.0) {
        h.diagonal().array() += 1e-12 * diag_max;
        const Eigen::LDLT<RealMatrix> ldlt(h);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
          d = -ldlt.solve(g);
          if (!d.allFinite() || d.dot(g) >= 0.0) d.resize(0);
        }
        if (d.size() == 0) {
          d = RealVector(nf);
          for (Eigen::Index a = 0; a < nf; ++a) d(a) = -g(a) / std::max(std::abs(h(a, a)), 1e-12 * diag_max);
        }
      } else {
        const double ref = std::max(l.maxCoeff(), 1.0 / pmax_);
        d = -g * (ref / g.norm());
      }

      bool accepted = false;
      double alpha = 1.0;
      for (int ls = 0; ls < 60 && !accepted; ++ls, alpha *= 0.5) {
        RealVector trial = l;
        for (Eigen::Index a = 0; a < nf; ++a) {
          const Eigen::Index j = free[static_cast<std::size_t>(a)];
          trial(j) = std::max(0.0, l(j) + alpha * d(a));
        }
        const Eval et = eval(trial);
        if (!et.ok) continue;
        const double decrease = e.grad.dot(trial - l);
        if (et.h <= e.h + 1e-4 * decrease || (trial - l).cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, l.maxCoeff())) {
          accepted = true;
          l = trial;
          e = et;
        }
      }
      if (!accepted) break;
    }
    if (!r.converged) r.converged = satisfied(l, e, tol);
    r.lambda = l;
    r.q = e.q;
    return r;
  }

 private:
  const Matrix& gamma_;
  double base_;
  const std::vector<sar::SarConstraint>& sar_;
  double pmax_;
  double noise_;
  double floor_;
};

RealVector pack(const DualVariables& duals, std::size_t k) {
  RealVector l(static_cast<Eigen::Index>(duals.sar[k].size()) + 1);
  l(0) = duals.power[k];
  for (std::size_t i = 0; i < duals.sar[k].size(); ++i) l(static_cast<Eigen::Index>(i) + 1) = duals.sar[k][i];
  return l;
}

void unpack(const RealVector& l, DualVariables& duals, std::size_t k) {
  duals.power[k] = l(0);
  for (std::size_t i = 0; i < duals.sar[k].size(); ++i) duals.sar[k][i] = l(static_cast<Eigen::Index>(i) + 1);
}

RealVector pack_covariance(const TransmitCovariance& q) {
  Eigen::Index n = 0;
  for (const auto& qk : q.users) n += 2 * qk.size();
  RealVector v(n);
  Eigen::Index at = 0;
  for (const auto& qk : q.users) {
    for (Eigen::Index i = 0; i < qk.size(); ++i) {
      v(at++) = qk(i).real();
      v(at++) = qk(i).imag();
    }
  }
  return v;
}

TransmitCovariance unpack_covariance(const RealVector& v, std::span<const Eigen::Index> dims) {
  TransmitCovariance q;
  Eigen::Index at = 0;
  for (const auto n : dims) {
    Matrix qk(n, n);
    for (Eigen::Index i = 0; i < qk.size(); ++i, at += 2) qk(i) = Complex(v(at), v(at + 1));
    q.users.push_back(psdlin::hermitian_part(qk));
  }
  return q;
}

constexpr std::size_t kAndersonDepth = 5;

// Type-II Anderson mixing for x -> g(x) with a bounded history.
class Anderson {
 public:
  explicit Anderson(std::size_t depth) : depth_(depth) {}

  void push(RealVector x, RealVector g) {
    xs_.push_back(std::move(x));
    gs_.push_back(std::move(g));
    if (xs_.size() > depth_ + 1) {
      xs_.erase(xs_.begin());
      gs_.erase(gs_.begin());
    }
  }

  void clear() {
    xs_.erase(xs_.begin(), xs_.end() - 1);
    gs_.erase(gs_.begin(), gs_.end() - 1);
  }

  std::optional<RealVector> extrapolate() const {
    const std::size_t m = xs_.size() - 1;
    if (m == 0) return std::nullopt;
    const Eigen::Index n = xs_.back().size();
    RealMatrix df(n, static_cast<Eigen::Index>(m));
    RealMatrix dg(n, static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      df.col(c) = (gs_[j + 1] - xs_[j + 1]) - (gs_[j] - xs_[j]);
      dg.col(c) = gs_[j + 1] - gs_[j];
    }
    const RealVector f = gs_.back() - xs_.back();
    const RealVector gamma = df.colPivHouseholderQr().solve(f);
    if (!gamma.allFinite()) return std::nullopt;
    return RealVector(gs_.back() - dg * gamma);
  }

 private:
  std::size_t depth_;
  std::vector<RealVector> xs_;
  std::vector<RealVector> gs_;
};

double frobenius_change(const TransmitCovariance& a, const TransmitCovariance& b) {
  double change = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    change = std::max(change, (a[k] - b[k]).norm());
    scale = std::max(scale, b[k].norm());
  }
  return scale > 0.0 ? change / scale : change;
}

}  // namespace

DualVariables DualVariables::initial(const metrics::PowerModel& pm, const sar::SarConstraintSet& cons) {
  DualVariables d;
  for (std::size_t k = 0; k < pm.num_users(); ++k) {
    d.power.push_back(1.0 / pm.power_budget[k]);
    d.sar.emplace_back(cons.users.at(k).size(), 0.0);
  }
  return d;
}

std::vector<Matrix> build_price_matrix(double eta_nats, const metrics::PowerModel& pm, const DualVariables& duals,
                                       const sar::SarConstraintSet& cons,
                                       std::span<const Eigen::Index> transmit_dims) {
  require_shapes(pm, cons, duals);
  if (transmit_dims.size() != pm.num_users()) throw InvalidInput("build_price_matrix: user count mismatch");
  if (!(eta_nats >= 0.0)) throw InvalidInput("build_price_matrix: eta must be >= 0");
  std::vector<Matrix> prices;
  prices.reserve(pm.num_users());
  for (std::size_t k = 0; k < pm.num_users(); ++k) {
    if (!(duals.power[k] >= 0.0)) throw InvalidInput("build_price_matrix: negative power multiplier");
    const Eigen::Index n = transmit_dims[k];
    Matrix price = Matrix::Identity(n, n) * (eta_nats * pm.amplifier_inefficiency[k] + duals.power[k]);
    for (std::size_t i = 0; i < cons.users[k].size(); ++i) {
      const double beta = duals.sar[k][i];
      if (!(beta >= 0.0)) throw InvalidInput("build_price_matrix: negative SAR multiplier");
      if (beta != 0.0) price += beta * cons.users[k][i].matrix;
    }
    prices.push_back(std::move(price));
  }
  return prices;
}

WaterfillDetail waterfill_detail(const Matrix& big_gamma, const Matrix& price, double noise_power,
                                 double price_floor) {
  if (big_gamma.rows() != price.rows() || big_gamma.cols() != price.cols()) {
    throw InvalidInput("waterfill_inner: Gamma and K dimensions differ");
  }
  Matrix k_inv_sqrt;
  try {
    k_inv_sqrt = psdlin::inv_sqrt_hpd(price, {price_floor, true});
  } catch (const SingularMatrix& e) {
    throw SingularMatrix(std::string("waterfill_inner: singular price matrix: ") + e.what());
  }
  const Matrix whitened = psdlin::hermitian_part(k_inv_sqrt * big_gamma * k_inv_sqrt);
  const auto eig = psdlin::hermitian_eig(whitened);

  WaterfillDetail out;
  const Eigen::Index n = eig.values.size();
  out.whitened_gains = eig.values;
  out.allocation = RealVector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = eig.values(i);
    if (p > noise_power) {
      out.allocation(i) = 1.0 - noise_power / p;
      out.logdet += std::log(p / noise_power);
      out.price += out.allocation(i);
    }
  }
  const Matrix left = k_inv_sqrt * eig.vectors;
  out.q = psdlin::hermitian_part(left * out.allocation.cast<Complex>().asDiagonal() * left.adjoint());
  return out;
}

Matrix waterfill_inner(const Matrix& big_gamma, const Matrix& price, double noise_power, double price_floor) {
  return waterfill_detail(big_gamma, price, noise_power, price_floor).q;
}

InnerResult ao_step(const channel::ChannelStatistics& stats, const std::vector<Matrix>& prices,
                    const TransmitCovariance& q, double noise_power, const Options& opts,
                    const de::FixedPointState* warm_fp) {
  InnerResult r;
  r.fp = de::fixed_point(stats, q, noise_power, opts.fixed_point, warm_fp);
  r.q.users.reserve(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    const WaterfillDetail wf = waterfill_detail(r.fp.big_gamma[k], prices[k], noise_power, opts.price_floor);
    r.lagrangian += wf.logdet - wf.price;
    r.q.users.push_back(wf.q);
  }
  r.iterations = 1;
  r.lagrangian_trace.push_back(r.lagrangian);
  return r;
}

InnerResult ao_inner_max(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm, double eta_nats,
                         const DualVariables& duals, const sar::SarConstraintSet& cons, const Options& opts,
                         const TransmitCovariance* start, const de::FixedPointState* warm_fp) {
  const auto dims = stats.transmit_dims();
  const auto prices = build_price_matrix(eta_nats, pm, duals, cons, dims);
  const double s2 = pm.noise_power;

  // The asymptotic Lagrangian in nats at q with its fixed point.
  auto lagrangian = [&](const TransmitCovariance& q, const de::FixedPointState& fp) {
    double l = kLn2 * de::asymptotic_se(stats, q, fp, s2);
    for (std::size_t k = 0; k < q.size(); ++k) l -= psdlin::trace_product_real(prices[k], q[k]);
    return l;
  };

  InnerResult cur;
  cur.q = start != nullptr ? *start : TransmitCovariance::zeros(dims);
  cur.fp = de::fixed_point(stats, cur.q, s2, opts.fixed_point, warm_fp);
  cur.lagrangian = lagrangian(cur.q, cur.fp);
  cur.lagrangian_trace.push_back(cur.lagrangian);

  double last_change = std::numeric_limits<double>::infinity();
  Anderson anderson(kAndersonDepth);
  for (int it = 1; it <= opts.max_ao; ++it) {
    // Water-filling against the frozen Gamma_k. The surrogate shares the
    // Lagrangian's gradient at cur.q, so target - q is an ascent direction
    // and `gain` bounds the first-order improvement from below.
    TransmitCovariance target;
    double gain = 0.0;
    for (std::size_t k = 0; k < cur.q.size(); ++k) {
      const WaterfillDetail wf = waterfill_detail(cur.fp.big_gamma[k], prices[k], s2, opts.price_floor);
      gain += (wf.logdet - wf.price) -
              (de::user_logdet(cur.fp.big_gamma[k], cur.q[k], s2) - psdlin::trace_product_real(prices[k], cur.q[k]));
      target.users.push_back(wf.q);
    }
    gain = std::max(gain, 0.0);
    last_change = frobenius_change(target, cur.q);
    const double scale = std::max(1.0, std::abs(cur.lagrangian));
    if (gain <= opts.ao_tol * scale && last_change <= opts.ao_step_tol) {
      cur.iterations = it;
      return cur;
    }

    const TransmitCovariance base = cur.q;
    const de::FixedPointState base_fp = cur.fp;
    auto evaluate = [&](TransmitCovariance&& q, InnerResult& trial) {
      trial.q = std::move(q);
      try {
        trial.fp = de::fixed_point(stats, trial.q, s2, opts.fixed_point, &base_fp);
      } catch (const NonConvergence&) {
        return false;
      }
      trial.lagrangian = lagrangian(trial.q, trial.fp);
      return true;
    };

    // Plain step with backtracking from the full water-filling step.
    InnerResult plain;
    bool have_plain = false;
    constexpr double kMinStep = 1.0 / 1024.0;
    for (double t = 1.0; t >= kMinStep && !have_plain; t *= 0.5) {
      TransmitCovariance q;
      for (std::size_t k = 0; k < base.size(); ++k) {
        q.users.push_back(psdlin::hermitian_part(base[k] + t * (target[k] - base[k])));
      }
      InnerResult trial;
      if (evaluate(std::move(q), trial) &&
          (trial.lagrangian >= cur.lagrangian + 1e-4 * t * gain || t * 0.5 < kMinStep)) {
        plain = std::move(trial);
        have_plain = true;
      }
    }

    // Anderson extrapolation of the water-filling map, kept only when it
    // beats the plain step.
    anderson.push(pack_covariance(base), pack_covariance(target));
    InnerResult accel;
    bool use_accel = false;
    if (const auto x = anderson.extrapolate()) {
      TransmitCovariance q = unpack_covariance(*x, dims);
      for (auto& qk : q.users) qk = psdlin::project_psd(qk);
      use_accel = evaluate(std::move(q), accel) && (!have_plain || accel.lagrangian > plain.lagrangian) &&
                  accel.lagrangian > cur.lagrangian;
    }
    if (!use_accel && !have_plain) {
      throw NonConvergence("ao_inner_max: line search failed", last_change);
    }
    InnerResult& chosen = use_accel ? accel : plain;
    if (!use_accel) anderson.clear();
    cur.q = std::move(chosen.q);
    cur.fp = std::move(chosen.fp);
    cur.lagrangian = chosen.lagrangian;
    cur.lagrangian_trace.push_back(cur.lagrangian);
  }
  throw NonConvergence("ao_inner_max: no convergence after " + std::to_string(opts.max_ao) +
                           " passes (last relative change " + std::to_string(last_change) + ")",
                       last_change);
}

KktReport kkt_report(const TransmitCovariance& q, const DualVariables& duals, const sar::SarConstraintSet& cons,
                     const metrics::PowerModel& pm) {
  require_shapes(pm, cons, duals);
  KktReport rep;
  auto add = [&rep](KktEntry e) {
    e.primal_violation = std::max(0.0, e.value - e.limit) / e.limit;
    e.slackness = std::abs(e.multiplier * (e.value - e.limit)) / std::max(1.0, e.limit);
    rep.max_primal_violation = std::max(rep.max_primal_violation, e.primal_violation);
    rep.max_slackness = std::max(rep.max_slackness, e.slackness);
    rep.entries.push_back(e);
  };
  for (std::size_t k = 0; k < q.size(); ++k) {
    add({k, std::nullopt, duals.power[k], q.trace(k), pm.power_budget[k], 0.0, 0.0});
    for (std::size_t i = 0; i < cons.users[k].size(); ++i) {
      add({k, i, duals.sar[k][i], sar::sar_value(cons.users[k][i].matrix, q[k]), cons.users[k][i].limit, 0.0, 0.0});
    }
  }
  return rep;
}

void restore_feasibility(TransmitCovariance& q, const sar::SarConstraintSet& cons,
                         std::span<const double> power_budget) {
  for (std::size_t k = 0; k < q.size(); ++k) {
    double factor = 1.0;
    const double tr = q.trace(k);
    if (tr > power_budget[k]) factor = std::min(factor, power_budget[k] / tr);
    for (const auto& c : cons.users[k]) {
      const double s = sar::sar_value(c.matrix, q[k]);
      if (s > c.limit) factor = std::min(factor, c.limit / s);
    }
    if (factor < 1.0) q[k] *= factor;
  }
}

DualResult dual_solve(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm, double eta_nats,
                      const sar::SarConstraintSet& cons, const Options& opts, const DualVariables* warm_duals,
                      const TransmitCovariance* warm_q) {
  if (!(eta_nats >= 0.0)) throw InvalidInput("dual_solve: eta must be >= 0");
  DualVariables duals = warm_duals != nullptr ? *warm_duals : DualVariables::initial(pm, cons);
  require_shapes(pm, cons, duals);
  const auto dims = stats.transmit_dims();
  TransmitCovariance q = warm_q != nullptr ? *warm_q : TransmitCovariance::zeros(dims);

  double s0 = opts.subgradient_step;
  if (s0 <= 0.0) {
    double pmax = 0.0;
    double lmax = 0.0;
    for (std::size_t k = 0; k < pm.num_users(); ++k) {
      pmax = std::max(pmax, pm.power_budget[k]);
      for (const auto& c : cons.users[k]) lmax = std::max(lmax, c.limit);
    }
    s0 = 1.0 / (pmax + lmax);
  }
  const double user_tol = std::min(1e-9, 0.01 * opts.dual_tol);

  DualResult best;
  bool have_best = false;
  double best_score = std::numeric_limits<double>::infinity();
  int ao_total = 0;
  de::FixedPointState fp;
  bool have_fp = false;
  int iterations = 0;
  int stalled = 0;
  constexpr int kStallLimit = 5;

  for (int t = 1; t <= opts.max_dual; ++t) {
    InnerResult inner = ao_inner_max(stats, pm, eta_nats, duals, cons, opts, &q, have_fp ? &fp : nullptr);
    ao_total += inner.iterations;
    q = inner.q;
    fp = inner.fp;
    have_fp = true;
    KktReport kkt = kkt_report(q, duals, cons, pm);

    const double score = std::max(kkt.max_primal_violation, kkt.max_slackness);
    iterations = t;
    if (score < 0.9 * best_score) {
      stalled = 0;
    } else {
      ++stalled;
    }
    if (score < best_score) {
      best_score = score;
      best = {q, duals, fp, kkt, t, 0, false};
      have_best = true;
    }
    if (kkt.satisfied(opts.dual_tol)) {
      best = {q, duals, fp, std::move(kkt), t, 0, true};
      break;
    }
    // Sub-gradient residuals are not monotone; only Newton stops on a stall.
    if (opts.dual_method == DualMethod::kFrozenGammaNewton && stalled >= kStallLimit) {
      best.converged = best_score <= opts.dual_accept_tol;
      break;
    }

    if (opts.dual_method == DualMethod::kFrozenGammaNewton) {
      for (std::size_t k = 0; k < q.size(); ++k) {
        const UserDual problem(fp.big_gamma[k], eta_nats * pm.amplifier_inefficiency[k], cons.users[k],
                               pm.power_budget[k], pm.noise_power, opts.price_floor);
        const auto r = problem.solve(pack(duals, k), user_tol, 200);
        unpack(r.lambda, duals, k);
      }
    } else {
      const double step = s0 / std::sqrt(static_cast<double>(t));
      for (std::size_t k = 0; k < q.size(); ++k) {
        duals.power[k] = std::max(0.0, duals.power[k] - step * (pm.power_budget[k] - q.trace(k)));
        for (std::size_t i = 0; i < cons.users[k].size(); ++i) {
          const auto& c = cons.users[k][i];
          duals.sar[k][i] = std::max(0.0, duals.sar[k][i] - step * (c.limit - sar::sar_value(c.matrix, q[k])));
        }
      }
    }
  }
  if (!have_best) throw InvalidState("dual_solve: no iterate produced");
  if (!best.converged && best_score <= opts.dual_accept_tol) best.converged = true;
  best.iterations = iterations;
  best.ao_iterations = ao_total;
  restore_feasibility(best.q, cons, pm.power_budget);
  return best;
}

Solution dinkelbach(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                    const sar::SarConstraintSet& cons, const Options& opts) {
  pm.validate();
  if (stats.num_users() != pm.num_users()) throw InvalidInput("dinkelbach: user count mismatch");
  const auto dims = stats.transmit_dims();
  (void)cons.validate(dims);

  Solution sol;
  OptimizerState& st = sol.state;
  st.eta = 0.0;
  st.eta_history.push_back(0.0);
  const bool single_pass = pm.amplifier_cost_free();

  DualVariables duals = DualVariables::initial(pm, cons);
  TransmitCovariance q = TransmitCovariance::zeros(dims);
  bool converged = false;
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    DualResult dr = dual_solve(stats, pm, st.eta * kLn2, cons, opts, &duals, &q);
    st.outer_iterations = outer;
    st.dual_iterations += dr.iterations;
    st.ao_iterations += dr.ao_iterations;
    if (!dr.converged) {
      st.warnings.push_back("outer iteration " + std::to_string(outer) +
                            ": dual loop stopped above the accept tolerance; best iterate used");
    }
    de::FixedPointState fp = de::fixed_point(stats, dr.q, pm.noise_power, opts.fixed_point, &dr.fp);
    const double se = de::asymptotic_se(stats, dr.q, fp, pm.noise_power);
    const double eta_next = se / metrics::power_consumption(dr.q, pm);
    if (outer > 1 && eta_next < st.eta) {
      // F(Q) - eta P(Q) < 0: the subproblem could not beat the current
      // iterate, so eta is optimal to within the inner accuracy. Keeping the
      // iterate repeats eta in the history.
      if (st.eta - eta_next > opts.eta_tol) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "outer iteration %d: subproblem value %.3e < 0; previous iterate kept", outer,
                      eta_next - st.eta);
        st.warnings.emplace_back(buf);
      }
      st.eta_history.push_back(st.eta);
      converged = true;
      break;
    }
    q = std::move(dr.q);
    duals = dr.duals;
    sol.kkt = std::move(dr.kkt);
    sol.fp = std::move(fp);
    sol.achieved_se = se;
    st.eta_history.push_back(eta_next);
    const double step = std::abs(eta_next - st.eta);
    st.eta = eta_next;
    if (single_pass || step <= opts.eta_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NonConvergence("dinkelbach: eta did not settle within " + std::to_string(opts.max_outer) + " iterations",
                         std::abs(st.eta_history.back() - st.eta_history[st.eta_history.size() - 2]));
  }
  st.duals = duals;
  sol.q = std::move(q);
  sol.achieved_ee = pm.bandwidth * sol.achieved_se / metrics::power_consumption(sol.q, pm);
  sol.constraints = sar::check_constraints(sol.q, cons, pm.power_budget, 1e-6);
  if (!sol.constraints.pass) throw NumericConsistency("dinkelbach: returned covariance violates a constraint");
  return sol;
}

Solution se_max(const channel::ChannelStatistics& stats, const metrics::PowerModel& pm,
                const sar::SarConstraintSet& cons, const Options& opts) {
  Solution sol = dinkelbach(stats, pm.without_amplifier_cost(), cons, opts);
  sol.achieved_ee = pm.bandwidth * sol.achieved_se / metrics::power_consumption(sol.q, pm);
  return sol;
}

}  // namespace sarprec::optimizer
