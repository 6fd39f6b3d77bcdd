#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exdbn/error.hpp"
#include "exdbn/graph_core.hpp"
#include "exdbn/rng.hpp"

namespace exdbn {

enum class GraphModel { kErdosRenyi, kScaleFree };

enum class NoiseKind { kGaussian, kUniform, kExponential };

// Per-variable i.i.d. noise. `scale` is the standard deviation for every
// kind (uniform and exponential are centred and rescaled to match).
// `per_variable`, when non-empty, overrides `scale` variable by variable.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kGaussian;
  double scale = 1.0;
  std::vector<double> per_variable;

  double scale_of(int j) const {
    return per_variable.empty() ? scale : per_variable.at(static_cast<std::size_t>(j));
  }
};

struct GenConfig {
  int d = 5;
  int p = 1;
  GraphModel intra_model = GraphModel::kErdosRenyi;
  double intra_edge_ratio = 1.0;
  // One ratio per lag; a single value is reused for every lag.
  std::vector<double> inter_edge_ratios{1.0};
  double decay = 1.0;  // eta >= 1; lag s weights scaled by 1 / decay^(s-1)
  std::uint64_t seed = 0;
  int n_samples = 500;
  NoiseSpec noise;
  double stability_tolerance = 1e-9;

  double inter_ratio(int s) const {
    if (inter_edge_ratios.empty()) return 0.0;
    if (inter_edge_ratios.size() == 1) return inter_edge_ratios.front();
    return inter_edge_ratios.at(static_cast<std::size_t>(s - 1));
  }

  int burn_in() const { return 50 * p; }

  void validate() const {
    if (d < 2) throw std::invalid_argument("GenConfig: d must be at least 2");
    if (p < 0) throw std::invalid_argument("GenConfig: p must be nonnegative");
    if (!(decay >= 1.0)) throw std::invalid_argument("GenConfig: decay must be >= 1");
    if (n_samples < 1) throw std::invalid_argument("GenConfig: n_samples must be positive");
    if (!(intra_edge_ratio >= 0.0)) throw std::invalid_argument("GenConfig: intra edge ratio must be nonnegative");
    if (inter_edge_ratios.size() > 1 && static_cast<int>(inter_edge_ratios.size()) != p) {
      throw std::invalid_argument("GenConfig: need one inter edge ratio per lag");
    }
    if (!noise.per_variable.empty() && static_cast<int>(noise.per_variable.size()) != d) {
      throw std::invalid_argument("GenConfig: per-variable noise scales must have d entries");
    }
  }
};

// Lag-stacked design: row t of x is slice t, row t of y is
// [slice t-1 | slice t-2 | ... | slice t-p].
struct TimeSeriesPanel {
  int n = 0;
  int d = 0;
  int p = 0;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  std::vector<std::string> variable_names;
};

// Magnitude uniform on [lo, hi), independent fair sign.
inline double signed_uniform(Rng& rng, double lo, double hi) {
  const double mag = rng.uniform(lo, hi);
  return rng.coin() ? -mag : mag;
}

namespace detail {

// Edge list in "rank space": (u, v) with u < v in the topological order.
inline std::vector<Edge> erdos_renyi_ranked(Rng& rng, int d, double ratio) {
  const double pairs = 0.5 * d * (d - 1);
  const double expected = ratio * d;
  if (expected > pairs) {
    std::ostringstream os;
    os << "ER: requested " << expected << " edges exceeds the " << pairs << " available on " << d << " vertices";
    throw GenerationError(os.str());
  }
  const double prob = pairs > 0 ? expected / pairs : 0.0;
  std::vector<Edge> edges;
  for (int u = 0; u < d; ++u) {
    for (int v = u + 1; v < d; ++v) {
      if (rng.uniform() < prob) edges.emplace_back(u, v);
    }
  }
  return edges;
}

// Barabasi-Albert growth: vertex t attaches to min(m, t) distinct earlier
// vertices, chosen with probability proportional to (in-degree + 1). Edges
// point from the newcomer to its targets, so they run from higher to lower
// attachment rank.
inline std::vector<Edge> barabasi_albert_ranked(Rng& rng, int d, double ratio) {
  const double pairs = 0.5 * d * (d - 1);
  if (ratio * d > pairs) {
    std::ostringstream os;
    os << "SF: requested " << ratio * d << " edges exceeds the " << pairs << " available on " << d << " vertices";
    throw GenerationError(os.str());
  }
  const int m = static_cast<int>(std::lround(ratio));
  std::vector<double> indeg(static_cast<std::size_t>(d), 0.0);
  std::vector<Edge> edges;
  for (int t = 1; t < d; ++t) {
    std::vector<bool> taken(static_cast<std::size_t>(t), false);
    const int k = std::min(m, t);
    for (int pick = 0; pick < k; ++pick) {
      double total = 0.0;
      for (int u = 0; u < t; ++u) {
        if (!taken[static_cast<std::size_t>(u)]) total += indeg[static_cast<std::size_t>(u)] + 1.0;
      }
      double r = rng.uniform() * total;
      int chosen = -1;
      for (int u = 0; u < t; ++u) {
        if (taken[static_cast<std::size_t>(u)]) continue;
        chosen = u;
        r -= indeg[static_cast<std::size_t>(u)] + 1.0;
        if (r < 0.0) break;
      }
      taken[static_cast<std::size_t>(chosen)] = true;
      edges.emplace_back(t, chosen);
    }
    for (int u = 0; u < t; ++u) {
      if (taken[static_cast<std::size_t>(u)]) indeg[static_cast<std::size_t>(u)] += 1.0;
    }
  }
  return edges;
}

inline double draw_noise(Rng& rng, NoiseKind kind, double scale) {
  if (scale == 0.0) return 0.0;
  switch (kind) {
    case NoiseKind::kGaussian:
      return scale * rng.normal();
    case NoiseKind::kUniform:
      return scale * std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
    case NoiseKind::kExponential:
      return scale * (rng.exponential() - 1.0);
  }
  return 0.0;
}

}  // namespace detail

// Random ground truth. Intra-slice: ER or SF DAG on a random vertex order,
// weights uniform on [-2, -0.5] U [0.5, 2]. Lag s: ER bipartite graph with
// expected inter_ratio(s) * d edges, weights uniform on
// [-0.5 alpha, -0.2 alpha] U [0.2 alpha, 0.5 alpha], alpha = 1 / decay^(s-1).
inline DbnGraph generate_ground_truth(const GenConfig& cfg) {
  cfg.validate();
  const int d = cfg.d;
  Rng rng(cfg.seed);
  const std::vector<int> order = rng.permutation(d);

  const auto ranked = cfg.intra_model == GraphModel::kErdosRenyi
                          ? detail::erdos_renyi_ranked(rng, d, cfg.intra_edge_ratio)
                          : detail::barabasi_albert_ranked(rng, d, cfg.intra_edge_ratio);
  DbnGraph g = DbnGraph::zeros(d, cfg.p);
  for (const auto& [u, v] : ranked) {
    g.w(order[static_cast<std::size_t>(u)], order[static_cast<std::size_t>(v)]) = signed_uniform(rng, 0.5, 2.0);
  }

  for (int s = 1; s <= cfg.p; ++s) {
    const double ratio = cfg.inter_ratio(s);
    const double prob = ratio / d;
    if (prob > 1.0) throw GenerationError("ER: inter edge ratio exceeds d");
    const double alpha = 1.0 / std::pow(cfg.decay, s - 1);
    auto& m = g.a[static_cast<std::size_t>(s - 1)];
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (rng.uniform() < prob) m(i, j) = signed_uniform(rng, 0.2 * alpha, 0.5 * alpha);
      }
    }
  }
  if (!is_acyclic(g.intra_support())) throw std::logic_error("generate_ground_truth: intra graph is cyclic");
  return g;
}

// Spectral radius of the companion matrix of x_t = sum_s x_{t-s} A_s (I - W)^-1.
inline double companion_spectral_radius(const DbnGraph& g) {
  const int d = g.d();
  const int p = g.p();
  if (p == 0) return 0.0;
  const Eigen::MatrixXd mix = (Eigen::MatrixXd::Identity(d, d) - g.w).inverse();
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(p * d, p * d);
  for (int s = 0; s < p; ++s) {
    comp.block(s * d, 0, d, d) = g.a[static_cast<std::size_t>(s)] * mix;
    if (s + 1 < p) comp.block(s * d, (s + 1) * d, d, d) = Eigen::MatrixXd::Identity(d, d);
  }
  return comp.eigenvalues().cwiseAbs().maxCoeff();
}

// Redraws the ground truth until the lag process is stationary (companion
// spectral radius below 1). Attempt 0 uses cfg.seed unchanged; attempt k uses
// a seed derived from (cfg.seed, k), so the result is deterministic per seed.
struct StableTruth {
  DbnGraph graph;
  int attempts = 0;
  std::uint64_t graph_seed = 0;
  double radius = 0.0;
};

inline StableTruth generate_stable_ground_truth(const GenConfig& cfg, int max_attempts = 1000) {
  GenConfig trial = cfg;
  for (int k = 0; k < max_attempts; ++k) {
    trial.seed = k == 0 ? cfg.seed : cfg.seed * 0x100000001B3ULL + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k);
    DbnGraph g = generate_ground_truth(trial);
    const double radius = companion_spectral_radius(g);
    if (radius < 1.0 - cfg.stability_tolerance) return {std::move(g), k + 1, trial.seed, radius};
  }
  throw GenerationError("no stationary ground truth after " + std::to_string(max_attempts) + " draws");
}

// Raw trajectory plus the noise that drove it (row-aligned with the series).
struct SimulationTrace {
  Eigen::MatrixXd series;  // (n_samples + p) x d, time ascending
  Eigen::MatrixXd noise;
};

// Simulates X_t = X_t W + Y_t A + Z_t row by row: X_t = (Y_t A + Z_t)(I - W)^-1.
// The first p slices are pure noise, then 50 p slices are discarded as
// burn-in; the trace keeps the last n_samples + p slices.
inline SimulationTrace simulate_trace(const DbnGraph& truth, const GenConfig& cfg) {
  cfg.validate();
  const int d = truth.d();
  const int p = truth.p();
  if (d != cfg.d || p != cfg.p) throw std::invalid_argument("simulate: graph shape does not match config");
  if (!is_acyclic(truth.intra_support())) throw std::invalid_argument("simulate: intra support must be acyclic");
  const double radius = companion_spectral_radius(truth);
  if (radius >= 1.0 + cfg.stability_tolerance) {
    std::ostringstream os;
    os.precision(6);
    os << "simulate: explosive process, companion spectral radius " << radius;
    throw GenerationError(os.str());
  }

  // Separate stream from the graph draws so graph and noise are independent.
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  const int keep = cfg.n_samples + p;
  const int total = keep + cfg.burn_in();
  const Eigen::MatrixXd mix = (Eigen::MatrixXd::Identity(d, d) - truth.w).inverse();

  Eigen::MatrixXd series(total, d);
  Eigen::MatrixXd noise(total, d);
  for (int t = 0; t < total; ++t) {
    Eigen::RowVectorXd z(d);
    for (int j = 0; j < d; ++j) z(j) = detail::draw_noise(rng, cfg.noise.kind, cfg.noise.scale_of(j));
    noise.row(t) = z;
    if (t < p) {
      series.row(t) = z;
      continue;
    }
    Eigen::RowVectorXd drive = z;
    for (int s = 1; s <= p; ++s) drive += series.row(t - s) * truth.a[static_cast<std::size_t>(s - 1)];
    series.row(t) = drive * mix;
  }
  return {series.bottomRows(keep), noise.bottomRows(keep)};
}

inline TimeSeriesPanel lag_stack(const Eigen::MatrixXd& series, int p, std::vector<std::string> names = {}) {
  const auto t_len = static_cast<int>(series.rows());
  const auto d = static_cast<int>(series.cols());
  if (p < 0) throw std::invalid_argument("lag_stack: negative order");
  if (t_len <= p) {
    throw DataError("lag_stack: need more than p = " + std::to_string(p) + " rows, got " + std::to_string(t_len));
  }
  TimeSeriesPanel panel;
  panel.n = t_len - p;
  panel.d = d;
  panel.p = p;
  panel.x = series.bottomRows(panel.n);
  panel.y.resize(panel.n, p * d);
  for (int s = 1; s <= p; ++s) panel.y.middleCols((s - 1) * d, d) = series.middleRows(p - s, panel.n);
  if (names.empty()) {
    for (int j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  panel.variable_names = std::move(names);
  return panel;
}

inline TimeSeriesPanel simulate(const DbnGraph& truth, const GenConfig& cfg) {
  return lag_stack(simulate_trace(truth, cfg).series, cfg.p);
}

// CSV: header of variable names, then one slice per line, time ascending.
inline void write_series_csv(std::ostream& os, const Eigen::MatrixXd& series, const std::vector<std::string>& names) {
  for (std::size_t j = 0; j < names.size(); ++j) os << (j ? "," : "") << names[j];
  os << '\n';
  char buf[32];
  for (int t = 0; t < series.rows(); ++t) {
    for (int j = 0; j < series.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", series(t, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

}  // namespace exdbn
