#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "exdbn/graph_core.hpp"
#include "exdbn/objective.hpp"

namespace exdbn {

struct OracleResult {
  DbnGraph best_graph;
  double best_objective = std::numeric_limits<double>::infinity();
  long supports_evaluated = 0;
};

// min x^T H x - 2 f^T x subject to lo <= x <= hi, H positive definite.
// Primal active-set method: exact up to linear-solve rounding, finite.
inline Eigen::VectorXd box_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& f, const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi) {
  const auto n = static_cast<int>(f.size());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n).cwiseMax(lo).cwiseMin(hi);
  // 0: free, -1: at lower bound, +1: at upper bound.
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  for (int v = 0; v < n; ++v) {
    if (lo(v) == hi(v)) state[static_cast<std::size_t>(v)] = -1;
  }
  for (int iter = 0; iter < 100 * (n + 1); ++iter) {
    std::vector<int> fr;
    for (int v = 0; v < n; ++v) {
      if (state[static_cast<std::size_t>(v)] == 0) fr.push_back(v);
    }
    Eigen::VectorXd target = x;
    if (!fr.empty()) {
      const auto k = static_cast<int>(fr.size());
      Eigen::MatrixXd hf(k, k);
      Eigen::VectorXd rhs(k);
      for (int a = 0; a < k; ++a) {
        const int va = fr[static_cast<std::size_t>(a)];
        rhs(a) = f(va);
        for (int v = 0; v < n; ++v) {
          if (state[static_cast<std::size_t>(v)] != 0) rhs(a) -= h(va, v) * x(v);
        }
        for (int b = 0; b < k; ++b) hf(a, b) = h(va, fr[static_cast<std::size_t>(b)]);
      }
      const Eigen::VectorXd sol = hf.llt().solve(rhs);
      for (int a = 0; a < k; ++a) target(fr[static_cast<std::size_t>(a)]) = sol(a);
    }
    // Longest feasible step toward the subspace minimizer.
    double t = 1.0;
    int block = -1;
    for (int v : fr) {
      const double dv = target(v) - x(v);
      if (target(v) > hi(v) && dv > 0) {
        const double lim = (hi(v) - x(v)) / dv;
        if (lim < t) t = lim, block = v;
      } else if (target(v) < lo(v) && dv < 0) {
        const double lim = (lo(v) - x(v)) / dv;
        if (lim < t) t = lim, block = v;
      }
    }
    for (int v : fr) x(v) += t * (target(v) - x(v));
    if (block >= 0) {
      const bool upper = target(block) > hi(block);
      x(block) = upper ? hi(block) : lo(block);
      state[static_cast<std::size_t>(block)] = upper ? 1 : -1;
      continue;
    }
    // Subspace optimum reached: release the bound with the worst multiplier.
    const Eigen::VectorXd grad = h * x - f;
    int release = -1;
    double worst = 0.0;
    for (int v = 0; v < n; ++v) {
      const int s = state[static_cast<std::size_t>(v)];
      if (s == 0 || lo(v) == hi(v)) continue;
      const double viol = s < 0 ? -grad(v) : grad(v);  // descent into the box
      if (viol > worst * (1 + 1e-12) + 1e-14 * (1.0 + std::abs(f(v)))) {
        worst = viol;
        release = v;
      }
    }
    if (release < 0) return x;
    state[static_cast<std::size_t>(release)] = 0;
  }
  throw std::runtime_error("box_qp: active-set iteration limit");
}

namespace detail {

// Minimum of ||x_j - Z beta||^2 + penalties over the regressors in `vars`
// (all others zero), with |beta| <= c. `l2` adds eta * beta^2 to inter
// regressors; `abs_sign` (+1/-1 per regressor, 0 for none) restricts an
// inter regressor to one orthant and charges eta * |beta| on it.
struct SubsetFit {
  double value = 0.0;
  Eigen::VectorXd beta;  // full length, zeros outside vars
};

inline SubsetFit subset_fit(const Eigen::MatrixXd& gram, int j, const std::vector<int>& vars, double c,
                            double ridge_floor, const std::vector<double>& l2, const std::vector<int>& abs_sign,
                            double eta) {
  const auto m = static_cast<int>(gram.rows());
  const auto k = static_cast<int>(vars.size());
  SubsetFit out;
  out.beta = Eigen::VectorXd::Zero(m);
  if (k == 0) {
    out.value = gram(j, j);
    return out;
  }
  Eigen::MatrixXd h(k, k);
  Eigen::VectorXd f(k), lo(k), hi(k);
  for (int a = 0; a < k; ++a) {
    const auto va = static_cast<std::size_t>(vars[static_cast<std::size_t>(a)]);
    for (int b = 0; b < k; ++b) h(a, b) = gram(static_cast<int>(va), vars[static_cast<std::size_t>(b)]);
    h(a, a) += ridge_floor + l2[va];
    f(a) = gram(static_cast<int>(va), j);
    lo(a) = -c;
    hi(a) = c;
    if (abs_sign[va] > 0) {
      lo(a) = 0.0;
      f(a) -= 0.5 * eta;
    } else if (abs_sign[va] < 0) {
      hi(a) = 0.0;
      f(a) += 0.5 * eta;
    }
  }
  const Eigen::VectorXd x = box_qp(h, f, lo, hi);
  // Value of the original (floor-free) objective at x.
  double fit = gram(j, j);
  double pen = 0.0;
  for (int a = 0; a < k; ++a) {
    const int va = vars[static_cast<std::size_t>(a)];
    fit -= 2.0 * gram(va, j) * x(a);
    for (int b = 0; b < k; ++b) fit += x(a) * gram(va, vars[static_cast<std::size_t>(b)]) * x(b);
    pen += l2[static_cast<std::size_t>(va)] * x(a) * x(a);
    if (abs_sign[static_cast<std::size_t>(va)] != 0) pen += eta * std::abs(x(a));
    out.beta(va) = x(a);
  }
  out.value = std::max(0.0, fit) + pen;
  return out;
}

}  // namespace detail

// Exhaustive global minimum over every acyclic intra support. Per column and
// parent set the cost is computed once; inter regressors are enumerated (L1),
// fit jointly by ridge (L2_SQUARED) or enumerated by sign pattern
// (L2_LITERAL_ABS). Weights are constrained to |w| <= c exactly.
inline OracleResult exhaustive_min(const MiqpInstance& inst, int max_d = 5) {
  const int d = inst.d();
  const int p = inst.p();
  if (d > max_d) throw std::invalid_argument("exhaustive_min: d = " + std::to_string(d) + " exceeds guard " + std::to_string(max_d));
  if (p > 2) throw std::invalid_argument("exhaustive_min: p must be at most 2");
  const IndicatorLayout lay = inst.layout();
  const Eigen::MatrixXd& gram = *inst.gram;
  const int m = d * (p + 1);
  const int pd = p * d;
  const RegVariant variant = inst.reg.variant;
  if (variant == RegVariant::kL2LiteralAbs && pd > 8) throw std::invalid_argument("exhaustive_min: sign enumeration needs p*d <= 8");
  const double ridge_floor = 1e-10;

  auto fix_of = [&](int regressor, int j) { return inst.fixings[static_cast<std::size_t>(lay.indicator_of(regressor, j))]; };

  // cost[j][parent mask] and the matching coefficient vector.
  const int parent_sets = 1 << d;
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(d),
                                        std::vector<double>(static_cast<std::size_t>(parent_sets),
                                                            std::numeric_limits<double>::infinity()));
  std::vector<std::vector<Eigen::VectorXd>> coef(static_cast<std::size_t>(d),
                                                 std::vector<Eigen::VectorXd>(static_cast<std::size_t>(parent_sets)));
  for (int j = 0; j < d; ++j) {
    for (int mask = 0; mask < parent_sets; ++mask) {
      if (mask & (1 << j)) continue;
      bool ok = true;
      std::vector<int> intra;
      for (int k = 0; k < d; ++k) {
        if (k == j) continue;
        const bool in = (mask >> k) & 1;
        const Fix f = fix_of(k, j);
        if ((in && f == Fix::kZero) || (!in && f == Fix::kOne)) ok = false;
        if (in) intra.push_back(k);
      }
      if (!ok) continue;
      const double intra_pen = inst.reg.lambda * static_cast<double>(intra.size());
      std::vector<double> l2(static_cast<std::size_t>(m), 0.0);
      std::vector<int> sign(static_cast<std::size_t>(m), 0);
      double best = std::numeric_limits<double>::infinity();
      Eigen::VectorXd best_beta;

      if (variant == RegVariant::kL2) {
        std::vector<int> vars = intra;
        for (int v = d; v < m; ++v) {
          if (fix_of(v, j) == Fix::kZero) continue;
          vars.push_back(v);
          l2[static_cast<std::size_t>(v)] = inst.reg.eta;
        }
        const auto fit = detail::subset_fit(gram, j, vars, inst.c, ridge_floor, l2, sign, 0.0);
        best = fit.value;
        best_beta = fit.beta;
      } else {
        // Enumerate inter subsets (L1) or inter sign patterns (literal abs).
        const int base = variant == RegVariant::kL1 ? 2 : 3;
        long combos = 1;
        for (int t = 0; t < pd; ++t) combos *= base;
        for (long code = 0; code < combos; ++code) {
          std::vector<int> vars = intra;
          std::fill(sign.begin(), sign.end(), 0);
          long rest = code;
          int chosen = 0;
          bool valid = true;
          for (int t = 0; t < pd; ++t) {
            const int digit = static_cast<int>(rest % base);
            rest /= base;
            const int v = d + t;
            const Fix f = fix_of(v, j);
            if (digit == 0) {
              if (variant == RegVariant::kL1 && f == Fix::kOne) valid = false;
              continue;
            }
            if (f == Fix::kZero) valid = false;
            vars.push_back(v);
            ++chosen;
            if (variant == RegVariant::kL2LiteralAbs) sign[static_cast<std::size_t>(v)] = digit == 1 ? 1 : -1;
          }
          if (!valid) continue;
          const auto fit = detail::subset_fit(gram, j, vars, inst.c, ridge_floor, l2, sign, inst.reg.eta);
          const double val = fit.value + (variant == RegVariant::kL1 ? inst.reg.eta * chosen : 0.0);
          if (val < best) {
            best = val;
            best_beta = fit.beta;
          }
        }
      }
      cost[static_cast<std::size_t>(j)][static_cast<std::size_t>(mask)] = best + intra_pen;
      coef[static_cast<std::size_t>(j)][static_cast<std::size_t>(mask)] = best_beta;
    }
  }

  // Enumerate intra supports as bit masks over the d(d-1) off-diagonal slots.
  std::vector<Edge> slots;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j) slots.emplace_back(i, j);
    }
  }
  const auto nslots = static_cast<int>(slots.size());
  OracleResult res;
  std::uint64_t best_mask = 0;
  std::vector<int> parents(static_cast<std::size_t>(d));
  std::vector<int> indeg(static_cast<std::size_t>(d));
  std::vector<int> queue(static_cast<std::size_t>(d));
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nslots); ++mask) {
    std::fill(parents.begin(), parents.end(), 0);
    for (int s = 0; s < nslots; ++s) {
      if ((mask >> s) & 1) parents[static_cast<std::size_t>(slots[static_cast<std::size_t>(s)].second)] |= 1 << slots[static_cast<std::size_t>(s)].first;
    }
    // Kahn: acyclic iff every vertex can be removed.
    int head = 0, tail = 0;
    for (int v = 0; v < d; ++v) {
      indeg[static_cast<std::size_t>(v)] = __builtin_popcount(static_cast<unsigned>(parents[static_cast<std::size_t>(v)]));
      if (indeg[static_cast<std::size_t>(v)] == 0) queue[static_cast<std::size_t>(tail++)] = v;
    }
    while (head < tail) {
      const int u = queue[static_cast<std::size_t>(head++)];
      for (int v = 0; v < d; ++v) {
        if ((parents[static_cast<std::size_t>(v)] >> u) & 1) {
          if (--indeg[static_cast<std::size_t>(v)] == 0) queue[static_cast<std::size_t>(tail++)] = v;
        }
      }
    }
    if (tail < d) continue;
    ++res.supports_evaluated;
    double total = 0.0;
    for (int j = 0; j < d; ++j) total += cost[static_cast<std::size_t>(j)][static_cast<std::size_t>(parents[static_cast<std::size_t>(j)])];
    if (total < res.best_objective) {
      res.best_objective = total;
      best_mask = mask;
    }
  }
  if (!std::isfinite(res.best_objective)) throw std::invalid_argument("exhaustive_min: fixings admit no acyclic support");

  std::fill(parents.begin(), parents.end(), 0);
  for (int s = 0; s < nslots; ++s) {
    if ((best_mask >> s) & 1) parents[static_cast<std::size_t>(slots[static_cast<std::size_t>(s)].second)] |= 1 << slots[static_cast<std::size_t>(s)].first;
  }
  DbnGraph g = DbnGraph::zeros(d, p);
  for (int j = 0; j < d; ++j) {
    const Eigen::VectorXd& b = coef[static_cast<std::size_t>(j)][static_cast<std::size_t>(parents[static_cast<std::size_t>(j)])];
    for (int k = 0; k < d; ++k) {
      if (k != j) g.w(k, j) = b(k);
    }
    for (int s = 1; s <= p; ++s) {
      for (int k = 0; k < d; ++k) g.a[static_cast<std::size_t>(s - 1)](k, j) = b(d + (s - 1) * d + k);
    }
  }
  res.best_graph = std::move(g);
  res.best_objective = score(res.best_graph, inst.panel, inst.reg).total;
  return res;
}

}  // namespace exdbn
