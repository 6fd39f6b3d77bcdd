#include <gtest/gtest.h>

#include "exdbn/oracle.hpp"
#include "exdbn/relaxation.hpp"
#include "exdbn/rng.hpp"
#include "support.hpp"

using exdbn::Cycle;
using exdbn::Fix;
using exdbn::RegVariant;
using exdbn::RelaxStatus;

namespace {

exdbn::RelaxationResult relax(const exdbn::MiqpInstance& inst, const std::vector<Cycle>& cuts = {},
                              const exdbn::Fixings* fx = nullptr) {
  return exdbn::solve_relaxation(inst, cuts, fx ? *fx : inst.fixings, exdbn::RelaxationOptions{});
}

// Relaxed objective with no cuts, by accelerated proximal gradient per column.
// Intra weights pay (lambda / c)|w|; inter weights pay (eta / c)|a| for L1 and
// eta a^2 for L2_SQUARED; all clipped to [-c, c].
double reference_relaxation(const exdbn::MiqpInstance& inst) {
  const Eigen::MatrixXd& g = *inst.gram;
  const int d = inst.d();
  const auto m = static_cast<int>(g.rows());
  const double c = inst.c;
  double total = 0;
  for (int j = 0; j < d; ++j) {
    std::vector<int> vars;
    for (int v = 0; v < m; ++v) {
      if (v != j) vars.push_back(v);
    }
    const auto k = static_cast<int>(vars.size());
    Eigen::MatrixXd h(k, k);
    Eigen::VectorXd f(k), l1(k), quad = Eigen::VectorXd::Zero(k);
    for (int a = 0; a < k; ++a) {
      const int va = vars[static_cast<std::size_t>(a)];
      for (int b = 0; b < k; ++b) h(a, b) = g(va, vars[static_cast<std::size_t>(b)]);
      f(a) = g(va, j);
      const bool intra = va < d;
      if (intra || inst.reg.variant == RegVariant::kL1) {
        l1(a) = (intra ? inst.reg.lambda : inst.reg.eta) / c;
      } else {
        l1(a) = 0;
        quad(a) = inst.reg.eta;
      }
    }
    Eigen::MatrixXd hq = h;
    hq.diagonal() += quad;
    const double lip = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hq).eigenvalues().maxCoeff();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(k), y = x;
    double t = 1;
    for (int it = 0; it < 40000; ++it) {
      const Eigen::VectorXd grad = 2.0 * (hq * y - f);
      Eigen::VectorXd nx = y - grad / lip;
      for (int a = 0; a < k; ++a) {
        const double s = std::max(std::abs(nx(a)) - l1(a) / lip, 0.0);
        nx(a) = std::clamp(std::copysign(s, nx(a)), -c, c);
      }
      const double nt = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
      y = nx + ((t - 1) / nt) * (nx - x);
      x = nx;
      t = nt;
    }
    total += g(j, j) - 2 * f.dot(x) + x.dot(hq * x) + l1.dot(x.cwiseAbs());
  }
  return total;
}

void expect_feasible(const exdbn::MiqpInstance& inst, const exdbn::RelaxationResult& r, const std::vector<Cycle>& cuts) {
  const auto lay = inst.layout();
  for (int idx = 0; idx < lay.count(); ++idx) {
    const double e = r.e[static_cast<std::size_t>(idx)];
    const double w = r.beta(lay.regressor_of(idx), lay.to_of(idx));
    EXPECT_GE(e, -1e-12);
    EXPECT_LE(e, 1 + 1e-12);
    EXPECT_LE(std::abs(w), inst.c * e + 1e-9 * inst.c);
    const Fix f = r.effective[static_cast<std::size_t>(idx)];
    if (f == Fix::kZero) {
      EXPECT_EQ(w, 0.0);
    }
    if (f == Fix::kOne) {
      EXPECT_EQ(e, 1.0);
    }
  }
  for (const auto& cyc : cuts) {
    double s = 0;
    for (const auto& [i, j] : cyc.edges()) s += r.e[static_cast<std::size_t>(lay.intra(i, j))];
    EXPECT_LE(s, static_cast<double>(cyc.length()) - 1 + 1e-7);
  }
}

}  // namespace

TEST(Relaxation, EverythingFixedToZeroBoundsAtSquaredNorm) {
  const auto prob = testsupport::random_problem(3, 1, 100, 1);
  auto inst = exdbn::build_instance(prob.panel, {RegVariant::kL1, 1, 1});
  exdbn::Fixings fx(inst.fixings.size(), Fix::kZero);
  const auto r = relax(inst, {}, &fx);
  EXPECT_EQ(r.status, RelaxStatus::kOptimal);
  const double x2 = prob.panel.x.squaredNorm();
  EXPECT_NEAR(r.lower_bound, x2, 1e-9 * x2);
  EXPECT_NEAR(r.objective, x2, 1e-9 * x2);
}

TEST(Relaxation, DagFixedToOneWithoutPenaltyIsLeastSquares) {
  const auto prob = testsupport::random_problem(4, 1, 150, 2);
  auto inst = exdbn::build_instance(prob.panel, {RegVariant::kL1, 0, 0}, 1e3);
  const auto lay = inst.layout();
  exdbn::Fixings fx(inst.fixings.size(), Fix::kOne);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) fx[static_cast<std::size_t>(lay.intra(i, j))] = Fix::kZero;
  }
  const auto r = relax(inst, {}, &fx);
  double rss = 0;
  const Eigen::MatrixXd z = exdbn::design_matrix(prob.panel);
  for (int j = 0; j < 4; ++j) {
    Eigen::MatrixXd a(z.rows(), j + 4);
    a << z.leftCols(j), z.rightCols(4);
    const Eigen::VectorXd b = a.colPivHouseholderQr().solve(z.col(j));
    rss += (z.col(j) - a * b).squaredNorm();
    for (int i = 0; i < j; ++i) EXPECT_NEAR(r.w(i, j), b(i), 1e-5 * std::max(1.0, std::abs(b(i))));
  }
  EXPECT_NEAR(r.lower_bound, rss, 1e-6 * rss);
  EXPECT_NEAR(r.objective, rss, 1e-6 * rss);
}

TEST(Relaxation, TwoCycleFixedOnIsInfeasible) {
  const auto prob = testsupport::random_problem(2, 1, 60, 3);
  auto inst = exdbn::build_instance(prob.panel, {RegVariant::kL1, 1, 1});
  const auto lay = inst.layout();
  auto fx = inst.fixings;
  fx[static_cast<std::size_t>(lay.intra(0, 1))] = Fix::kOne;
  fx[static_cast<std::size_t>(lay.intra(1, 0))] = Fix::kOne;
  EXPECT_EQ(relax(inst, {Cycle::from_vertices({0, 1})}, &fx).status, RelaxStatus::kInfeasible);
}

TEST(Relaxation, ConflictingFixingIsInfeasible) {
  const auto prob = testsupport::random_problem(2, 1, 60, 3);
  auto inst = exdbn::build_instance(prob.panel, {RegVariant::kL1, 1, 1});
  auto fx = inst.fixings;
  fx[static_cast<std::size_t>(inst.layout().intra(0, 0))] = Fix::kOne;
  EXPECT_EQ(relax(inst, {}, &fx).status, RelaxStatus::kInfeasible);
}

TEST(Relaxation, L1IndicatorsSitAtScaledMagnitude) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = testsupport::random_instance(4, 1, 200, seed, RegVariant::kL1);
    const auto r = relax(inst);
    const auto lay = inst.layout();
    for (int idx = 0; idx < lay.count(); ++idx) {
      if (r.effective[static_cast<std::size_t>(idx)] != Fix::kFree) continue;
      const double w = r.beta(lay.regressor_of(idx), lay.to_of(idx));
      EXPECT_NEAR(r.e[static_cast<std::size_t>(idx)], std::abs(w) / inst.c, 1e-12);
    }
  }
}

TEST(Relaxation, MatchesIndependentProximalSolver) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto variant = seed % 2 ? RegVariant::kL2 : RegVariant::kL1;
    const auto inst = testsupport::random_instance(3 + static_cast<int>(seed % 2), 1 + static_cast<int>(seed % 3 == 0), 200,
                                                   seed, variant, 0.2);
    const auto r = relax(inst);
    ASSERT_EQ(r.status, RelaxStatus::kOptimal);
    const double ref = reference_relaxation(inst);
    EXPECT_LE(testsupport::rel_diff(r.objective, ref), 1e-6) << "seed " << seed;
    EXPECT_LE(r.lower_bound, ref + 1e-9 * ref);
    EXPECT_GE(r.lower_bound, ref - 1e-6 * ref);
  }
}

TEST(Relaxation, BoundNeverExceedsExactOptimum) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto variant = seed % 2 ? RegVariant::kL2 : RegVariant::kL1;
    const auto inst = testsupport::random_instance(3, 1, 200, seed, variant, 0.1);
    const auto exact = exdbn::exhaustive_min(inst);
    const auto r = relax(inst);
    EXPECT_LE(r.lower_bound, exact.best_objective * (1 + 1e-9));
    EXPECT_GE(r.objective, r.lower_bound - 1e-9 * std::abs(r.lower_bound));
  }
}

TEST(Relaxation, MonotoneUnderFixingAndCuts) {
  exdbn::Rng rng(31);
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto inst = testsupport::random_instance(4, 1, 200, seed, seed % 2 ? RegVariant::kL2 : RegVariant::kL1, 0.1);
    const auto lay = inst.layout();
    const auto root = relax(inst);
    const double tol = 1e-6 * std::abs(root.lower_bound);

    auto fx = inst.fixings;
    double prev = root.lower_bound;
    for (int step = 0; step < 4; ++step) {
      int idx;
      do idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(lay.count())));
      while (fx[static_cast<std::size_t>(idx)] != Fix::kFree);
      fx[static_cast<std::size_t>(idx)] = rng.coin() ? Fix::kOne : Fix::kZero;
      const auto r = relax(inst, {}, &fx);
      if (r.status == RelaxStatus::kInfeasible) break;
      EXPECT_GE(r.lower_bound, prev - tol);
      expect_feasible(inst, r, {});
      prev = r.lower_bound;
    }

    std::vector<Cycle> cuts;
    prev = root.lower_bound;
    for (const auto& cyc : {Cycle::from_vertices({0, 1}), Cycle::from_vertices({1, 2, 3}), Cycle::from_vertices({0, 2}),
                            Cycle::from_vertices({0, 1, 2, 3})}) {
      cuts.push_back(cyc);
      const auto r = relax(inst, cuts);
      EXPECT_GE(r.lower_bound, prev - tol);
      EXPECT_GE(r.objective, r.lower_bound - tol);
      expect_feasible(inst, r, cuts);
      prev = r.lower_bound;
    }
  }
}

TEST(Relaxation, WarmStartReproducesColdBound) {
  const auto inst = testsupport::random_instance(5, 1, 300, 4, RegVariant::kL1);
  const auto cold = relax(inst);
  const auto warm = exdbn::solve_relaxation(inst, {}, inst.fixings, {}, &cold);
  EXPECT_NEAR(warm.lower_bound, cold.lower_bound, 1e-7 * std::abs(cold.lower_bound));
}

TEST(Relaxation, BadFixingsSizeThrows) {
  const auto inst = testsupport::random_instance(3, 1, 50, 1, RegVariant::kL1);
  EXPECT_THROW(exdbn::solve_relaxation(inst, {}, exdbn::Fixings(3, Fix::kFree), {}), std::invalid_argument);
}
