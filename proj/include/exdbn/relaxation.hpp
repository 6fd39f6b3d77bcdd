#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "exdbn/graph_core.hpp"
#include "exdbn/objective.hpp"

namespace exdbn {

enum class RelaxStatus { kOptimal, kIterationLimit, kInfeasible };

inline std::string to_string(RelaxStatus s) {
  switch (s) {
    case RelaxStatus::kOptimal:
      return "OPTIMAL";
    case RelaxStatus::kIterationLimit:
      return "ITERATION_LIMIT";
    case RelaxStatus::kInfeasible:
      return "INFEASIBLE";
  }
  return "?";
}

struct RelaxationOptions {
  double tol_feas = 1e-8;
  double tol_bound = 1e-7;        // relative primal/dual gap per column
  double max_iter_factor = 50.0;  // sweeps per column = factor * free variables
  double ridge_floor = 1e-10;
  int max_dual_rounds = 30;
};

// Continuous relaxation at one node. Indicators are relaxed to [0, 1]; free
// ones are eliminated analytically (e = |w| / c is optimal since the penalty
// increases in e and every constraint bounds e from above).
struct RelaxationResult {
  RelaxStatus status = RelaxStatus::kOptimal;
  Eigen::MatrixXd w;
  std::vector<Eigen::MatrixXd> a;
  std::vector<double> e;     // indexed by IndicatorLayout
  double lower_bound = 0.0;  // certified: from dual feasible points only
  double objective = 0.0;    // relaxed objective at (w, a, e)
  long sweeps = 0;
  bool coupled = false;  // some cut coupled columns; Lagrangian path used

  // Per-column state, reused by child nodes whose column did not change.
  Eigen::MatrixXd beta;  // (d + p d) x d, column j = regressors of x_j
  Fixings effective;     // node fixings plus those implied by cuts
  std::vector<double> column_primal;
  std::vector<double> column_gap;
  std::vector<double> column_dual;  // lower bound of each column's (Lagrangian) problem
  std::vector<char> column_converged;

  // Lagrangian state over the cut pool (by pool index) and the extra |w|
  // penalty it induces per indicator; lagrange_beta / column_lagrange_primal
  // are set only when the primal point had to be repaired.
  std::vector<double> multipliers;
  std::vector<double> extra;
  Eigen::MatrixXd lagrange_beta;
  std::vector<double> column_lagrange_primal;
};

namespace detail {

// Penalty structure of one column problem:
//   min_beta ||x_j - Z beta||^2 + sum_v (l1_v |beta_v| + rho_v beta_v^2) + constant
//   s.t. |beta_v| <= c, beta_v = 0 where fixed.
struct ColumnSpec {
  std::vector<char> zero;
  std::vector<double> l1;
  std::vector<double> rho;
  double constant = 0.0;
  int free_count = 0;
};

inline ColumnSpec column_spec(const MiqpInstance& inst, const Fixings& eff, int j, const std::vector<double>* extra_l1) {
  const IndicatorLayout lay = inst.layout();
  const int m = lay.d * (lay.p + 1);
  const double c = inst.c;
  ColumnSpec spec;
  spec.zero.assign(static_cast<std::size_t>(m), 0);
  spec.l1.assign(static_cast<std::size_t>(m), 0.0);
  spec.rho.assign(static_cast<std::size_t>(m), 0.0);
  for (int v = 0; v < m; ++v) {
    const auto vs = static_cast<std::size_t>(v);
    const int idx = lay.indicator_of(v, j);
    const Fix f = eff[static_cast<std::size_t>(idx)];
    if (v == j || f == Fix::kZero) {
      spec.zero[vs] = 1;
      continue;
    }
    ++spec.free_count;
    const bool intra = v < lay.d;
    if (intra || inst.reg.variant == RegVariant::kL1) {
      const double coef = intra ? inst.reg.lambda : inst.reg.eta;
      if (f == Fix::kOne) {
        spec.constant += coef;
      } else {
        spec.l1[vs] = coef / c;
        if (extra_l1) spec.l1[vs] += (*extra_l1)[static_cast<std::size_t>(idx)];
      }
    } else if (inst.reg.variant == RegVariant::kL2) {
      spec.rho[vs] = inst.reg.eta;
    } else {
      spec.l1[vs] = inst.reg.eta;
    }
  }
  return spec;
}

// Conjugate of h(t) = l1 |t| + rho t^2 restricted to |t| <= c.
inline double penalty_conjugate(double s, double l1, double rho, double c) {
  const double excess = std::abs(s) - l1;
  if (excess <= 0.0) return 0.0;
  const double t = rho > 0.0 ? std::min(excess / (2.0 * rho), c) : c;
  return excess * t - rho * t * t;
}

struct ColumnOutcome {
  double primal = 0.0;
  double gap = 0.0;
  long sweeps = 0;
  bool converged = false;
};

// Coordinate descent with periodic Newton polishing on the free support.
// Certificate: gap = sum_v [h_v(beta_v) + h_v*(2 g_v) - 2 g_v beta_v] with
// g = Z^T (x_j - Z beta); each term is a Fenchel-Young gap, so it is computed
// without cancellation and primal - gap is a valid lower bound.
inline ColumnOutcome solve_column(const Eigen::MatrixXd& gram, int j, double c, const ColumnSpec& spec,
                                  Eigen::Ref<Eigen::VectorXd> beta, const RelaxationOptions& opt) {
  const auto m = static_cast<int>(gram.rows());
  for (int v = 0; v < m; ++v) {
    if (spec.zero[static_cast<std::size_t>(v)]) beta(v) = 0.0;
    beta(v) = std::clamp(beta(v), -c, c);
  }
  Eigen::VectorXd g = gram.col(j) - gram * beta;

  auto evaluate = [&](double& primal, double& gap) {
    const double bb = gram.col(j).dot(beta);
    double pen = spec.constant;
    gap = 0.0;
    for (int v = 0; v < m; ++v) {
      const auto vs = static_cast<std::size_t>(v);
      if (spec.zero[vs]) continue;
      const double h = spec.l1[vs] * std::abs(beta(v)) + spec.rho[vs] * beta(v) * beta(v);
      pen += h;
      gap += std::max(0.0, h + penalty_conjugate(2.0 * g(v), spec.l1[vs], spec.rho[vs], c) - 2.0 * g(v) * beta(v));
    }
    const double fit = std::max(0.0, gram(j, j) - bb - beta.dot(g));
    primal = fit + pen;
    // Rounding slack of the Gram-based fit.
    gap += 8.0 * std::numeric_limits<double>::epsilon() * (gram(j, j) + std::abs(bb));
  };

  // Newton steps on the smooth piece (support fixed, signs fixed, interior
  // of the box); a blocked step drops the blocking variable to 0 or onto the
  // box and the step is retried on the smaller support.
  auto polish = [&]() {
    for (int round = 0; round <= 2 * m; ++round) {
      std::vector<int> act;
      for (int v = 0; v < m; ++v) {
        const auto vs = static_cast<std::size_t>(v);
        if (!spec.zero[vs] && beta(v) != 0.0 && std::abs(beta(v)) < c) act.push_back(v);
      }
      if (act.empty()) return;
      const auto k = static_cast<int>(act.size());
      Eigen::MatrixXd h(k, k);
      Eigen::VectorXd rhs(k);
      for (int a = 0; a < k; ++a) {
        const int va = act[static_cast<std::size_t>(a)];
        const auto vs = static_cast<std::size_t>(va);
        for (int b = 0; b < k; ++b) h(a, b) = gram(va, act[static_cast<std::size_t>(b)]);
        h(a, a) += spec.rho[vs] + opt.ridge_floor;
        rhs(a) = g(va) - 0.5 * spec.l1[vs] * (beta(va) > 0 ? 1.0 : -1.0) - spec.rho[vs] * beta(va);
      }
      const Eigen::VectorXd step = h.ldlt().solve(rhs);
      if (!step.allFinite()) return;
      double t = 1.0;
      int blocking = -1;
      bool to_box = false;
      for (int a = 0; a < k; ++a) {
        const double b0 = beta(act[static_cast<std::size_t>(a)]);
        const double b1 = b0 + step(a);
        if ((b0 > 0 && b1 < 0) || (b0 < 0 && b1 > 0)) {
          const double lim = b0 / (b0 - b1);
          if (lim < t) t = lim, blocking = a, to_box = false;
        }
        if (std::abs(b1) > c && std::signbit(b1) == std::signbit(b0)) {
          const double lim = (std::copysign(c, b0) - b0) / (b1 - b0);
          if (lim < t) t = lim, blocking = a, to_box = true;
        }
      }
      for (int a = 0; a < k; ++a) {
        const int va = act[static_cast<std::size_t>(a)];
        double nv = beta(va) + t * step(a);
        if (a == blocking) nv = to_box ? std::copysign(c, beta(va)) : 0.0;
        beta(va) = std::clamp(nv, -c, c);
      }
      g = gram.col(j) - gram * beta;
      if (blocking < 0) return;
    }
  };

  ColumnOutcome out;
  const long cap = static_cast<long>(opt.max_iter_factor * std::max(1, spec.free_count));
  double primal = 0.0, gap = 0.0;
  if (spec.free_count == 0) {
    evaluate(primal, gap);
    return {primal, gap, 0, true};
  }
  for (long sweep = 1; sweep <= cap; ++sweep) {
    double max_change = 0.0;
    for (int v = 0; v < m; ++v) {
      const auto vs = static_cast<std::size_t>(v);
      if (spec.zero[vs]) continue;
      const double old = beta(v);
      const double curv = gram(v, v) + spec.rho[vs] + opt.ridge_floor;
      const double z = g(v) + gram(v, v) * old;
      const double shrunk = std::max(std::abs(z) - 0.5 * spec.l1[vs], 0.0);
      const double nv = std::clamp(std::copysign(shrunk, z) / curv, -c, c);
      if (nv != old) {
        g.noalias() -= gram.col(v) * (nv - old);
        beta(v) = nv;
        max_change = std::max(max_change, std::abs(nv - old) * std::sqrt(curv));
      }
    }
    out.sweeps = sweep;
    {
      polish();
      evaluate(primal, gap);
      if (gap <= opt.tol_bound * std::max(1.0, std::abs(primal))) {
        out.converged = true;
        break;
      }
    }
  }
  out.primal = primal;
  out.gap = gap;
  return out;
}

struct CoupledCut {
  std::size_t pool = 0;
  std::vector<int> free_indicators;
  double capacity = 0.0;  // sum of e over the free edges may not exceed this
};

}  // namespace detail

// Node relaxation. `fixings` are the node's indicator fixings (merged with the
// instance's); `cuts` is the global pool of cycle-exclusion constraints.
// `warm`, when given, supplies starting points and lets unchanged columns be
// reused verbatim.
inline RelaxationResult solve_relaxation(const MiqpInstance& inst, const std::vector<Cycle>& cuts,
                                         const Fixings& fixings, const RelaxationOptions& opt,
                                         const RelaxationResult* warm = nullptr) {
  const IndicatorLayout lay = inst.layout();
  const int d = lay.d;
  const int m = d * (lay.p + 1);
  const double c = inst.c;
  const Eigen::MatrixXd& gram = *inst.gram;

  RelaxationResult res;
  if (static_cast<int>(fixings.size()) != lay.count()) throw std::invalid_argument("solve_relaxation: bad fixings size");
  res.effective = fixings;
  for (std::size_t k = 0; k < fixings.size(); ++k) {
    const Fix base = inst.fixings[k];
    if (base == Fix::kFree) continue;
    if (res.effective[k] != Fix::kFree && res.effective[k] != base) {
      res.status = RelaxStatus::kInfeasible;
      return res;
    }
    res.effective[k] = base;
  }

  // Cut implications: all edges fixed to 1 -> infeasible; all but one fixed
  // to 1 -> the last one is forced to 0; two or more free -> coupling.
  std::vector<detail::CoupledCut> coupled;
  {
    std::vector<std::tuple<std::size_t, const Cycle*, int>> pending;
    for (std::size_t q = 0; q < cuts.size(); ++q) {
      const Cycle& cyc = cuts[q];
      int ones = 0, zeros = 0, free_idx = -1;
      for (const auto& [i, j] : cyc.edges()) {
        const Fix f = res.effective[static_cast<std::size_t>(lay.intra(i, j))];
        if (f == Fix::kOne) ++ones;
        if (f == Fix::kZero) ++zeros;
        if (f == Fix::kFree) free_idx = lay.intra(i, j);
      }
      const auto k = static_cast<int>(cyc.length());
      if (zeros > 0) continue;
      if (ones == k) {
        res.status = RelaxStatus::kInfeasible;
        return res;
      }
      if (ones == k - 1) {
        res.effective[static_cast<std::size_t>(free_idx)] = Fix::kZero;
      } else {
        pending.emplace_back(q, &cyc, ones);
      }
    }
    for (const auto& [q, cyc, ones] : pending) {
      detail::CoupledCut cc;
      cc.pool = q;
      bool dead = false;
      for (const auto& [i, j] : cyc->edges()) {
        const int idx = lay.intra(i, j);
        const Fix f = res.effective[static_cast<std::size_t>(idx)];
        if (f == Fix::kZero) dead = true;
        if (f == Fix::kFree) cc.free_indicators.push_back(idx);
      }
      if (dead) continue;
      cc.capacity = static_cast<double>(cyc->length()) - 1.0 - ones;
      coupled.push_back(std::move(cc));
    }
  }

  const auto nind = static_cast<std::size_t>(lay.count());
  // Multipliers are indexed by pool position (the pool only grows), so a
  // child starts from its parent's dual point.
  res.multipliers.assign(cuts.size(), 0.0);
  std::vector<double>& mu = res.multipliers;
  if (warm != nullptr) {
    const std::size_t n = std::min(cuts.size(), warm->multipliers.size());
    for (const auto& cc : coupled) {
      if (cc.pool < n) mu[cc.pool] = warm->multipliers[cc.pool];
    }
  }
  res.extra.assign(nind, 0.0);
  auto rebuild_extra = [&]() {
    std::fill(res.extra.begin(), res.extra.end(), 0.0);
    for (const auto& cc : coupled) {
      for (int idx : cc.free_indicators) res.extra[static_cast<std::size_t>(idx)] += mu[cc.pool] / c;
    }
  };
  rebuild_extra();

  const bool has_warm = warm != nullptr && warm->beta.rows() == m && warm->effective.size() == nind &&
                        warm->extra.size() == nind && warm->column_dual.size() == static_cast<std::size_t>(d);
  const Eigen::MatrixXd* warm_beta = nullptr;
  if (has_warm) warm_beta = warm->lagrange_beta.size() > 0 ? &warm->lagrange_beta : &warm->beta;

  auto same_column = [&](int j) {
    for (int v = 0; v < m; ++v) {
      const auto idx = static_cast<std::size_t>(lay.indicator_of(v, j));
      if (warm->effective[idx] != res.effective[idx] || warm->extra[idx] != res.extra[idx]) return false;
    }
    return true;
  };

  res.beta = Eigen::MatrixXd::Zero(m, d);
  res.column_primal.assign(static_cast<std::size_t>(d), 0.0);
  res.column_gap.assign(static_cast<std::size_t>(d), 0.0);
  res.column_dual.assign(static_cast<std::size_t>(d), 0.0);
  res.column_converged.assign(static_cast<std::size_t>(d), 0);

  auto run_column = [&](int j) {
    const auto js = static_cast<std::size_t>(j);
    const auto spec = detail::column_spec(inst, res.effective, j, &res.extra);
    const auto out = detail::solve_column(gram, j, c, spec, res.beta.col(j), opt);
    res.sweeps += out.sweeps;
    res.column_primal[js] = out.primal;
    res.column_gap[js] = out.gap;
    res.column_dual[js] = out.primal - out.gap;
    res.column_converged[js] = out.converged ? 1 : 0;
  };

  for (int j = 0; j < d; ++j) {
    const auto js = static_cast<std::size_t>(j);
    if (has_warm && warm->column_converged[js] && same_column(j)) {
      res.beta.col(j) = warm_beta->col(j);
      res.column_primal[js] = warm->column_lagrange_primal.empty() ? warm->column_primal[js]
                                                                    : warm->column_lagrange_primal[js];
      res.column_dual[js] = warm->column_dual[js];
      res.column_gap[js] = res.column_primal[js] - res.column_dual[js];
      res.column_converged[js] = 1;
      continue;
    }
    if (warm_beta != nullptr) res.beta.col(j) = warm_beta->col(j);
    run_column(j);
  }

  auto beta_of = [&](int idx) { return res.beta(lay.regressor_of(idx), lay.to_of(idx)); };
  auto violation = [&](const detail::CoupledCut& cc) {
    double s = 0.0;
    for (int idx : cc.free_indicators) s += std::abs(beta_of(idx)) / c;
    return s - cc.capacity;
  };

  // Lagrangian dual over the coupled cuts: multiplier mu_C adds mu_C / c to
  // the per-unit |w| penalty of every free edge of C. Any mu >= 0 yields a
  // valid bound sum_j D_j(mu) - sum_C mu_C capacity_C. Coordinate ascent:
  // each multiplier is moved to a root of its (monotone) cut violation.
  const double slack_tol = 1e-7;
  const double scale = std::max({1.0, inst.reg.lambda, gram.diagonal().maxCoeff() * c});
  auto update = [&](const detail::CoupledCut& cc) {
    double& mq = mu[cc.pool];
    const double v0 = violation(cc);
    if (v0 <= opt.tol_feas && (mq == 0.0 || v0 >= -slack_tol)) return false;
    std::vector<int> cols;
    for (int idx : cc.free_indicators) cols.push_back(lay.to_of(idx));
    auto at = [&](double value) {
      mq = value;
      rebuild_extra();
      for (int j : cols) run_column(j);
      return violation(cc);
    };
    double lo = 0.0, hi = mq;
    if (v0 > opt.tol_feas) {
      lo = mq;
      hi = mq > 0.0 ? 2.0 * mq : 1e-6 * scale;
      double v = at(hi);
      for (int grow = 0; grow < 80 && v > opt.tol_feas; ++grow) {
        lo = hi;
        hi *= 4.0;
        v = at(hi);
      }
      if (v >= -slack_tol) return true;
    } else if (at(0.0) <= opt.tol_feas) {
      return true;
    }
    // violation(lo) > tol_feas, violation(hi) < -slack_tol
    double cur = lo;
    for (int it = 0; it < 60 && hi - lo > 1e-9 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double v = at(mid);
      cur = mid;
      if (v > opt.tol_feas) {
        lo = mid;
      } else {
        hi = mid;
        if (v >= -slack_tol) break;
      }
    }
    if (cur != hi) at(hi);
    return true;
  };
  if (!coupled.empty()) {
    for (int round = 0; round < opt.max_dual_rounds; ++round) {
      bool changed = false;
      for (const auto& cc : coupled) changed = update(cc) || changed;
      if (!changed) break;
    }
  }

  double lower = 0.0;
  for (double v : res.column_dual) lower += v;
  bool any_mu = false;
  for (const auto& cc : coupled) {
    lower -= mu[cc.pool] * cc.capacity;
    any_mu = any_mu || mu[cc.pool] > 0.0;
  }
  bool any_violated = false;
  for (const auto& cc : coupled) any_violated = any_violated || violation(cc) > 0.0;

  if (any_mu || any_violated) {
    // Keep the Lagrangian point for warm starts; restore primal feasibility
    // by shrinking the free edges of violated cuts and re-evaluate every
    // column under the true penalties.
    res.coupled = true;
    res.lagrange_beta = res.beta;
    res.column_lagrange_primal = res.column_primal;
    for (int pass = 0; pass < 100; ++pass) {
      bool any = false;
      for (const auto& cc : coupled) {
        const double v = violation(cc);
        if (v <= 0.0) continue;
        any = true;
        const double f = cc.capacity / (v + cc.capacity);
        for (int idx : cc.free_indicators) res.beta(lay.regressor_of(idx), lay.to_of(idx)) *= f;
      }
      if (!any) break;
    }
    for (int j = 0; j < d; ++j) {
      const auto js = static_cast<std::size_t>(j);
      const auto spec = detail::column_spec(inst, res.effective, j, nullptr);
      const Eigen::VectorXd b = res.beta.col(j);
      const Eigen::VectorXd g = gram.col(j) - gram * b;
      double pen = spec.constant;
      for (int v = 0; v < m; ++v) {
        const auto vs = static_cast<std::size_t>(v);
        if (!spec.zero[vs]) pen += spec.l1[vs] * std::abs(b(v)) + spec.rho[vs] * b(v) * b(v);
      }
      res.column_primal[js] = std::max(0.0, gram(j, j) - gram.col(j).dot(b) - b.dot(g)) + pen;
      res.column_gap[js] = res.column_primal[js] - res.column_dual[js];
    }
  }

  // Assemble (w, a, e).
  res.w = Eigen::MatrixXd::Zero(d, d);
  res.a.assign(static_cast<std::size_t>(lay.p), Eigen::MatrixXd::Zero(d, d));
  res.e.assign(static_cast<std::size_t>(lay.count()), 0.0);
  double objective = 0.0;
  for (int j = 0; j < d; ++j) objective += res.column_primal[static_cast<std::size_t>(j)];
  bool all_converged = true;
  for (char ok : res.column_converged) all_converged = all_converged && ok;
  for (int idx = 0; idx < lay.count(); ++idx) {
    const int s = lay.lag_of(idx);
    const int i = lay.from_of(idx);
    const int j = lay.to_of(idx);
    const double b = res.beta(lay.regressor_of(idx), j);
    if (s == 0) {
      if (i != j) res.w(i, j) = b;
    } else {
      res.a[static_cast<std::size_t>(s - 1)](i, j) = b;
    }
    const Fix f = res.effective[static_cast<std::size_t>(idx)];
    double e = 0.0;
    if (f == Fix::kOne) {
      e = 1.0;
    } else if (f == Fix::kFree && !(s == 0 && i == j)) {
      const bool priced = s == 0 || inst.reg.variant == RegVariant::kL1;
      e = priced ? std::min(1.0, std::abs(b) / c) : (b != 0.0 ? 1.0 : 0.0);
    }
    res.e[static_cast<std::size_t>(idx)] = e;
  }
  res.objective = objective;
  res.lower_bound = std::min(lower, objective);
  res.status = all_converged ? RelaxStatus::kOptimal : RelaxStatus::kIterationLimit;
  return res;
}

}  // namespace exdbn
