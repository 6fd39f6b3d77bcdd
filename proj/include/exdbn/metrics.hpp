#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "exdbn/datagen.hpp"
#include "exdbn/graph_core.hpp"
#include "exdbn/objective.hpp"

namespace exdbn {

struct EdgeCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct MetricReport {
  double shd = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double g_score = 0.0;  // sqrt(precision * recall), a repo-defined choice
  double sigma_p = 0.0;
  double frobenius = 0.0;
  double delta_used = 0.0;
  EdgeCounts intra;  // diagnostics; the rates above pool intra and inter
  EdgeCounts inter;
};

struct MetricOptions {
  // Literal reading of the SHD case table: a reversed edge costs 1/2 on one
  // ordered pair and 1 on the other (1.5 total) instead of 1/2 + 1/2.
  bool shd_literal = false;
};

inline void check_same_shape(const DbnGraph& est, const DbnGraph& truth) {
  if (est.d() != truth.d() || est.p() != truth.p()) {
    throw std::invalid_argument("metrics: graphs differ in shape (d=" + std::to_string(est.d()) + ", p=" +
                                std::to_string(est.p()) + " vs d=" + std::to_string(truth.d()) +
                                ", p=" + std::to_string(truth.p()) + ")");
  }
}

namespace detail {

inline double shd_terms(const Eigen::MatrixXd& c, const Eigen::MatrixXd& t, bool literal) {
  double total = 0.0;
  const auto d = static_cast<int>(c.rows());
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const bool ci = c(i, j) != 0.0, ti = t(i, j) != 0.0;
      if (ci == ti) continue;
      const bool cr = c(j, i) != 0.0, tr = t(j, i) != 0.0;
      if (literal) {
        total += (ci && tr) ? 0.5 : 1.0;
      } else {
        // Half on each of the two ordered pairs of a reversed edge.
        const bool reversed = i != j && ((ci && tr && !cr) || (ti && cr && !tr));
        total += reversed ? 0.5 : 1.0;
      }
    }
  }
  return total;
}

inline void count_edges(const Eigen::MatrixXd& e, const Eigen::MatrixXd& t, EdgeCounts& out) {
  for (int i = 0; i < e.rows(); ++i) {
    for (int j = 0; j < e.cols(); ++j) {
      const bool ei = e(i, j) != 0.0, ti = t(i, j) != 0.0;
      if (ei && ti) ++out.tp;
      if (ei && !ti) ++out.fp;
      if (!ei && ti) ++out.fn;
    }
  }
}

}  // namespace detail

inline double shd(const DbnGraph& est, const DbnGraph& truth, const MetricOptions& opt = {}) {
  check_same_shape(est, truth);
  double total = detail::shd_terms(est.w, truth.w, opt.shd_literal);
  for (std::size_t s = 0; s < est.a.size(); ++s) total += detail::shd_terms(est.a[s], truth.a[s], opt.shd_literal);
  return total;
}

inline std::pair<EdgeCounts, EdgeCounts> edge_counts(const DbnGraph& est, const DbnGraph& truth) {
  check_same_shape(est, truth);
  EdgeCounts intra, inter;
  detail::count_edges(est.w, truth.w, intra);
  for (std::size_t s = 0; s < est.a.size(); ++s) detail::count_edges(est.a[s], truth.a[s], inter);
  return {intra, inter};
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Pooled over intra and inter edges. Two empty graphs agree perfectly
// (1, 1, 1); otherwise an empty denominator gives 0, and F1 = 0 when
// precision + recall = 0.
inline PrecisionRecall precision_recall_f1(const DbnGraph& est, const DbnGraph& truth) {
  const auto [intra, inter] = edge_counts(est, truth);
  const double tp = static_cast<double>(intra.tp + inter.tp);
  const double fp = static_cast<double>(intra.fp + inter.fp);
  const double fn = static_cast<double>(intra.fn + inter.fn);
  if (tp + fp == 0.0 && tp + fn == 0.0) return {1.0, 1.0, 1.0};
  PrecisionRecall r;
  r.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

inline double g_score(const DbnGraph& est, const DbnGraph& truth) {
  const auto r = precision_recall_f1(est, truth);
  return std::sqrt(r.precision * r.recall);
}

// |fit(est) - fit(truth)| with the regularization switched off.
inline double sigma_p(const DbnGraph& est, const DbnGraph& truth, const TimeSeriesPanel& panel) {
  check_same_shape(est, truth);
  const RegMode none{RegVariant::kL1, 0.0, 0.0};
  return std::abs(score(est, panel, none).fit - score(truth, panel, none).fit);
}

inline double frobenius_distance(const DbnGraph& est, const DbnGraph& truth) {
  check_same_shape(est, truth);
  double s = (est.w - truth.w).squaredNorm();
  for (std::size_t k = 0; k < est.a.size(); ++k) s += (est.a[k] - truth.a[k]).squaredNorm();
  return std::sqrt(s);
}

inline MetricReport evaluate(const DbnGraph& est, const DbnGraph& truth, const TimeSeriesPanel& panel,
                             const MetricOptions& opt = {}) {
  MetricReport m;
  m.shd = shd(est, truth, opt);
  const auto pr = precision_recall_f1(est, truth);
  m.precision = pr.precision;
  m.recall = pr.recall;
  m.f1 = pr.f1;
  m.g_score = std::sqrt(pr.precision * pr.recall);
  m.sigma_p = sigma_p(est, truth, panel);
  m.frobenius = frobenius_distance(est, truth);
  std::tie(m.intra, m.inter) = edge_counts(est, truth);
  return m;
}

// 40 log-spaced values from 1e-3 to 1.
inline std::vector<double> default_delta_grid() {
  std::vector<double> g;
  for (int k = 0; k < 40; ++k) g.push_back(std::pow(10.0, -3.0 + 3.0 * k / 39.0));
  return g;
}

// Threshold at every grid value; keep the largest F1, ties to the smaller delta.
inline std::pair<double, MetricReport> best_delta_sweep(const DbnGraph& est, const DbnGraph& truth,
                                                        const TimeSeriesPanel& panel, const std::vector<double>& grid,
                                                        const MetricOptions& opt = {}) {
  if (grid.empty()) throw std::invalid_argument("best_delta_sweep: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("best_delta_sweep: grid must be ascending");
  double best_delta = grid.front();
  MetricReport best;
  bool have = false;
  for (double delta : grid) {
    MetricReport m = evaluate(threshold(est, delta), truth, panel, opt);
    m.delta_used = delta;
    if (!have || m.f1 > best.f1) {
      best = m;
      best_delta = delta;
      have = true;
    }
  }
  return {best_delta, best};
}

}  // namespace exdbn
