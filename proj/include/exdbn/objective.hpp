#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "exdbn/datagen.hpp"
#include "exdbn/error.hpp"
#include "exdbn/graph_core.hpp"

namespace exdbn {

// L1: lambda * #intra edges + eta * #inter edges.
// L2: lambda * #intra edges + eta * sum of squared inter weights.
// L2LiteralAbs: lambda * #intra edges + eta * sum of |inter weights|.
enum class RegVariant { kL1, kL2, kL2LiteralAbs };

inline std::string to_string(RegVariant v) {
  switch (v) {
    case RegVariant::kL1:
      return "L1";
    case RegVariant::kL2:
      return "L2_SQUARED";
    case RegVariant::kL2LiteralAbs:
      return "L2_LITERAL_ABS";
  }
  return "?";
}

inline RegVariant parse_reg_variant(const std::string& s) {
  if (s == "L1") return RegVariant::kL1;
  if (s == "L2" || s == "L2_SQUARED") return RegVariant::kL2;
  if (s == "L2_LITERAL_ABS") return RegVariant::kL2LiteralAbs;
  throw ConfigError("unknown regularization variant '" + s + "' (expected L1, L2_SQUARED, L2_LITERAL_ABS)");
}

struct RegMode {
  RegVariant variant = RegVariant::kL1;
  double lambda = 0.0;  // intra coefficient
  double eta = 0.0;     // inter coefficient

  void validate() const {
    if (!(lambda >= 0.0) || !(eta >= 0.0)) throw std::invalid_argument("RegMode: coefficients must be nonnegative");
  }
  // Whether inter-slice indicators carry a cost (and so need branching).
  bool inter_indicators_priced() const { return variant == RegVariant::kL1; }
};

// lambda(n) = lambda_base * sqrt(n), likewise eta. The fit term grows
// linearly in n, so penalty/fit shrinks like 1/sqrt(n).
inline RegMode scale_regularization(int n_samples, const RegMode& base) {
  if (n_samples < 1) throw std::invalid_argument("scale_regularization: n must be positive");
  const double f = std::sqrt(static_cast<double>(n_samples));
  return {base.variant, base.lambda * f, base.eta * f};
}

struct ScoreValue {
  double fit = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

inline void check_shapes(const DbnGraph& g, const TimeSeriesPanel& panel) {
  if (g.d() != panel.d || g.p() != panel.p || panel.x.cols() != panel.d || panel.y.cols() != panel.p * panel.d ||
      panel.x.rows() != panel.y.rows()) {
    throw DataError("dimension mismatch between graph (d=" + std::to_string(g.d()) + ", p=" + std::to_string(g.p()) +
                    ") and panel (d=" + std::to_string(panel.d) + ", p=" + std::to_string(panel.p) + ")");
  }
}

inline double regularization(const DbnGraph& g, const RegMode& reg) {
  double r = reg.lambda * static_cast<double>(g.intra_support().size());
  switch (reg.variant) {
    case RegVariant::kL1:
      r += reg.eta * static_cast<double>(g.inter_edge_count());
      break;
    case RegVariant::kL2:
      for (const auto& m : g.a) r += reg.eta * m.squaredNorm();
      break;
    case RegVariant::kL2LiteralAbs:
      for (const auto& m : g.a) r += reg.eta * m.cwiseAbs().sum();
      break;
  }
  return r;
}

// J_p evaluated literally: sum over rows i and columns j of
// (X_ij - sum_k X_ik w_kj - sum_s sum_k X^s_ik a^s_kj)^2, plus REG.
inline ScoreValue score(const DbnGraph& g, const TimeSeriesPanel& panel, const RegMode& reg) {
  check_shapes(g, panel);
  const int d = panel.d;
  double fit = 0.0;
  for (int i = 0; i < panel.x.rows(); ++i) {
    for (int j = 0; j < d; ++j) {
      double r = panel.x(i, j);
      for (int k = 0; k < d; ++k) r -= panel.x(i, k) * g.w(k, j);
      for (int s = 1; s <= panel.p; ++s) {
        const auto& as = g.a[static_cast<std::size_t>(s - 1)];
        for (int k = 0; k < d; ++k) r -= panel.y(i, (s - 1) * d + k) * as(k, j);
      }
      fit += r * r;
    }
  }
  const double rg = regularization(g, reg);
  return {fit, rg, fit + rg};
}

// Flat numbering of edge indicators: intra (i, j) -> i*d + j, lag s in 1..p
// (i, j) -> s*d*d + i*d + j.
struct IndicatorLayout {
  int d = 0;
  int p = 0;

  int count() const { return (p + 1) * d * d; }
  int intra(int i, int j) const { return i * d + j; }
  int inter(int s, int i, int j) const { return s * d * d + i * d + j; }
  bool is_intra(int idx) const { return idx < d * d; }
  int lag_of(int idx) const { return idx / (d * d); }
  int from_of(int idx) const { return (idx % (d * d)) / d; }
  int to_of(int idx) const { return idx % d; }

  // Regressor index of an indicator within its target column's design
  // [X | Y]: intra (k, j) -> k, lag (s, k, j) -> d + (s-1)*d + k.
  int regressor_of(int idx) const {
    const int s = lag_of(idx);
    return s == 0 ? from_of(idx) : d + (s - 1) * d + from_of(idx);
  }
  int indicator_of(int regressor, int column) const {
    if (regressor < d) return intra(regressor, column);
    const int s = (regressor - d) / d + 1;
    return inter(s, (regressor - d) % d, column);
  }
  std::string describe(int idx) const {
    const int s = lag_of(idx);
    const std::string e = std::to_string(from_of(idx) + 1) + "->" + std::to_string(to_of(idx) + 1);
    return s == 0 ? "e(" + e + ")" : "e" + std::to_string(s) + "(" + e + ")";
  }
};

enum class Fix : std::int8_t { kFree = -1, kZero = 0, kOne = 1 };
using Fixings = std::vector<Fix>;

// Everything a solve needs: data, regularization, big-M bound c and the
// variable fixings. The Gram matrix of [X | Y] is computed once here and
// shared by every relaxation.
struct MiqpInstance {
  TimeSeriesPanel panel;
  RegMode reg;
  double c = 1.0;
  bool c_auto = false;
  Fixings fixings;
  std::shared_ptr<const Eigen::MatrixXd> gram;

  IndicatorLayout layout() const { return {panel.d, panel.p}; }
  int d() const { return panel.d; }
  int p() const { return panel.p; }

  void validate() const {
    reg.validate();
    if (!(c > 0.0)) throw std::invalid_argument("MiqpInstance: c must be positive");
    if (static_cast<int>(fixings.size()) != layout().count()) {
      throw std::invalid_argument("MiqpInstance: fixings size does not match layout");
    }
    for (int i = 0; i < d(); ++i) {
      if (fixings[static_cast<std::size_t>(layout().intra(i, i))] == Fix::kOne) {
        throw std::invalid_argument("MiqpInstance: self-loop indicator fixed to 1");
      }
    }
  }
};

inline Eigen::MatrixXd design_matrix(const TimeSeriesPanel& panel) {
  Eigen::MatrixXd z(panel.x.rows(), panel.d * (panel.p + 1));
  z << panel.x, panel.y;
  return z;
}

struct RidgeSummary {
  double max_abs_coefficient = 0.0;
  double mean_residual_variance = 0.0;  // residual sum of squares / n, averaged over columns
};

// Ridge fit of every column on all other contemporaneous columns and all
// lags. The penalty is 1e-3 n times the mean second moment of the
// regressors, i.e. 1e-3 n on unit-scale data, and scales with the data.
inline RidgeSummary ridge_summary(const TimeSeriesPanel& panel) {
  const Eigen::MatrixXd z = design_matrix(panel);
  const Eigen::MatrixXd gram = z.transpose() * z;
  const int m = static_cast<int>(gram.rows());
  const double alpha = 1e-3 * gram.trace() / m;
  RidgeSummary out;
  for (int j = 0; j < panel.d; ++j) {
    std::vector<int> keep;
    for (int v = 0; v < m; ++v) {
      if (v != j) keep.push_back(v);
    }
    const auto k = static_cast<int>(keep.size());
    Eigen::MatrixXd h(k, k);
    Eigen::VectorXd rhs(k);
    for (int a = 0; a < k; ++a) {
      rhs(a) = gram(keep[static_cast<std::size_t>(a)], j);
      for (int b = 0; b < k; ++b) h(a, b) = gram(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
      h(a, a) += alpha;
    }
    const Eigen::VectorXd beta = h.ldlt().solve(rhs);
    if (k > 0) out.max_abs_coefficient = std::max(out.max_abs_coefficient, beta.cwiseAbs().maxCoeff());
    Eigen::VectorXd full = Eigen::VectorXd::Zero(m);
    for (int a = 0; a < k; ++a) full(keep[static_cast<std::size_t>(a)]) = beta(a);
    const double rss = (z.col(j) - z * full).squaredNorm();
    out.mean_residual_variance += rss / static_cast<double>(z.rows()) / panel.d;
  }
  return out;
}

inline double ridge_max_abs_coefficient(const TimeSeriesPanel& panel) { return ridge_summary(panel).max_abs_coefficient; }

inline double auto_big_m(const TimeSeriesPanel& panel) { return std::max(1.0, 2.0 * ridge_max_abs_coefficient(panel)); }

// How base coefficients grow with the data. kSqrtN: base * sqrt(n).
// kSqrtNVariance: additionally times the mean ridge residual variance, so
// the penalty stays in proportion to the fit term when the noise scale is
// far from 1.
enum class RegScaling { kNone, kSqrtN, kSqrtNVariance };

inline std::string to_string(RegScaling s) {
  switch (s) {
    case RegScaling::kNone:
      return "none";
    case RegScaling::kSqrtN:
      return "sqrt_n";
    case RegScaling::kSqrtNVariance:
      return "sqrt_n_variance";
  }
  return "?";
}

inline RegScaling parse_reg_scaling(const std::string& s) {
  if (s == "none") return RegScaling::kNone;
  if (s == "sqrt_n") return RegScaling::kSqrtN;
  if (s == "sqrt_n_variance") return RegScaling::kSqrtNVariance;
  throw ConfigError("unknown regularization scaling '" + s + "' (expected none, sqrt_n, sqrt_n_variance)");
}

inline RegMode scale_regularization(const TimeSeriesPanel& panel, const RegMode& base, RegScaling scaling) {
  switch (scaling) {
    case RegScaling::kNone:
      return base;
    case RegScaling::kSqrtN:
      return scale_regularization(panel.n, base);
    case RegScaling::kSqrtNVariance: {
      const RegMode r = scale_regularization(panel.n, base);
      const double v = ridge_summary(panel).mean_residual_variance;
      return {r.variant, r.lambda * v, r.eta * v};
    }
  }
  return base;
}

// c = nullopt selects the data-driven bound.
inline MiqpInstance build_instance(TimeSeriesPanel panel, const RegMode& reg, std::optional<double> c = std::nullopt) {
  if (panel.n < 1 || panel.x.rows() < 1) throw DataError("build_instance: empty panel");
  reg.validate();
  MiqpInstance inst;
  inst.reg = reg;
  inst.c_auto = !c.has_value();
  inst.c = c ? *c : auto_big_m(panel);
  const Eigen::MatrixXd z = design_matrix(panel);
  inst.gram = std::make_shared<const Eigen::MatrixXd>(z.transpose() * z);
  inst.panel = std::move(panel);
  const IndicatorLayout lay = inst.layout();
  inst.fixings.assign(static_cast<std::size_t>(lay.count()), Fix::kFree);
  for (int i = 0; i < lay.d; ++i) inst.fixings[static_cast<std::size_t>(lay.intra(i, i))] = Fix::kZero;
  inst.validate();
  return inst;
}

}  // namespace exdbn
