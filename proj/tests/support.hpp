#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <vector>

#include "exdbn/exdbn.hpp"

namespace testsupport {

// Kahn's algorithm: an acyclicity check that shares no code with the DFS.
inline bool kahn_acyclic(int d, const std::vector<exdbn::Edge>& edges) {
  std::vector<int> indeg(static_cast<std::size_t>(d), 0);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(d));
  for (const auto& [i, j] : edges) {
    out[static_cast<std::size_t>(i)].push_back(j);
    ++indeg[static_cast<std::size_t>(j)];
  }
  std::queue<int> q;
  for (int v = 0; v < d; ++v) {
    if (indeg[static_cast<std::size_t>(v)] == 0) q.push(v);
  }
  int seen = 0;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    ++seen;
    for (int v : out[static_cast<std::size_t>(u)]) {
      if (--indeg[static_cast<std::size_t>(v)] == 0) q.push(v);
    }
  }
  return seen == d;
}

inline exdbn::GenConfig gen_config(int d, int p, int n, std::uint64_t seed, double sigma = 1.0, double ratio = 1.0) {
  exdbn::GenConfig g;
  g.d = d;
  g.p = p;
  g.n_samples = n;
  g.seed = seed;
  g.noise.scale = sigma;
  g.intra_edge_ratio = ratio;
  g.inter_edge_ratios = {1.0};
  return g;
}

struct Problem {
  exdbn::DbnGraph truth;
  exdbn::TimeSeriesPanel panel;
};

// Stable random truth plus simulated panel. Edge ratio is capped so small d
// stays generatable.
inline Problem random_problem(int d, int p, int n, std::uint64_t seed, double sigma = 1.0) {
  const double ratio = d <= 2 ? 0.5 : 1.0;
  const auto g = gen_config(d, p, n, seed, sigma, ratio);
  auto st = exdbn::generate_stable_ground_truth(g);
  auto panel = exdbn::simulate(st.graph, g);
  return {std::move(st.graph), std::move(panel)};
}

inline exdbn::MiqpInstance random_instance(int d, int p, int n, std::uint64_t seed, exdbn::RegVariant variant,
                                           double base = 0.05) {
  auto prob = random_problem(d, p, n, seed);
  const auto reg = exdbn::scale_regularization(prob.panel, {variant, base, base}, exdbn::RegScaling::kSqrtN);
  return exdbn::build_instance(prob.panel, reg);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace testsupport
