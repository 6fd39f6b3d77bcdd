#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "exdbn/graph_core.hpp"
#include "exdbn/rng.hpp"
#include "support.hpp"

using exdbn::Cycle;
using exdbn::DbnGraph;
using exdbn::Edge;
using exdbn::EdgeSupport;

namespace {

// All simple cycles by brute force: every ordered vertex sequence starting
// at its minimum vertex whose consecutive pairs (and closing pair) are edges.
std::set<std::vector<int>> brute_force_cycles(const EdgeSupport& s) {
  std::set<std::vector<int>> out;
  const int d = s.d();
  for (int mask = 1; mask < (1 << d); ++mask) {
    std::vector<int> verts;
    for (int v = 0; v < d; ++v) {
      if (mask >> v & 1) verts.push_back(v);
    }
    if (verts.size() < 2) continue;
    do {
      if (verts.front() != *std::min_element(verts.begin(), verts.end())) continue;
      bool ok = true;
      for (std::size_t k = 0; k < verts.size() && ok; ++k) ok = s.contains(verts[k], verts[(k + 1) % verts.size()]);
      if (ok) out.insert(verts);
    } while (std::next_permutation(verts.begin(), verts.end()));
  }
  return out;
}

EdgeSupport random_support(exdbn::Rng& rng, int d, double density) {
  std::vector<Edge> edges;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j && rng.uniform() < density) edges.emplace_back(i, j);
    }
  }
  return EdgeSupport(d, edges);
}

void expect_closed_simple(const Cycle& c, const EdgeSupport& s) {
  std::set<int> seen;
  for (std::size_t k = 0; k < c.length(); ++k) {
    const auto& e = c.edges()[k];
    EXPECT_TRUE(s.contains(e.first, e.second));
    EXPECT_EQ(e.second, c.edges()[(k + 1) % c.length()].first);
    EXPECT_TRUE(seen.insert(e.first).second);
  }
}

}  // namespace

TEST(FindCycles, EmptyGraphHasNone) { EXPECT_TRUE(exdbn::find_cycles(EdgeSupport(3)).empty()); }

TEST(FindCycles, TwoCycle) {
  const auto cycles = exdbn::find_cycles(EdgeSupport(2, {{0, 1}, {1, 0}}));
  ASSERT_EQ(cycles.size(), 1u);
  EXPECT_EQ(cycles[0].length(), 2u);
}

TEST(FindCycles, TransitiveTriangleIsAcyclic) {
  EXPECT_TRUE(exdbn::find_cycles(EdgeSupport(3, {{0, 1}, {0, 2}, {1, 2}})).empty());
}

TEST(FindCycles, TriangleWithTwoCycleAgainstBruteForce) {
  const EdgeSupport s(4, {{0, 1}, {1, 2}, {2, 0}, {2, 3}, {3, 2}});
  const auto cycles = exdbn::find_cycles(s);
  ASSERT_EQ(cycles.size(), 2u);
  std::multiset<std::size_t> lengths;
  const auto all = brute_force_cycles(s);
  EXPECT_EQ(all.size(), 2u);
  for (const auto& c : cycles) {
    lengths.insert(c.length());
    EXPECT_TRUE(all.count(c.canonical_vertices()));
  }
  EXPECT_EQ(lengths, (std::multiset<std::size_t>{2, 3}));
}

TEST(FindCycles, ReturnedCyclesAreClosedSimpleAndReal) {
  exdbn::Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform() * 6);
    const auto s = random_support(rng, d, 0.35);
    const auto all = brute_force_cycles(s);
    const auto cycles = exdbn::find_cycles(s);
    EXPECT_EQ(cycles.empty(), all.empty());
    for (const auto& c : cycles) {
      expect_closed_simple(c, s);
      EXPECT_TRUE(all.count(c.canonical_vertices()));
    }
  }
}

TEST(FindCycles, RemovingOneEdgePerReportedCycleLeavesNoFoundCycle) {
  // Each back edge closes exactly one reported cycle, so deleting every
  // back edge leaves the DFS tree plus forward/cross edges: a DAG.
  exdbn::Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform() * 6);
    const auto s = random_support(rng, d, 0.4);
    std::set<Edge> back;
    for (const auto& c : exdbn::find_cycles(s)) back.insert(c.edges().back());
    std::vector<Edge> rest;
    for (const auto& e : s.edges()) {
      if (!back.count(e)) rest.push_back(e);
    }
    EXPECT_TRUE(testsupport::kahn_acyclic(d, rest));
  }
}

TEST(IsAcyclic, EmptyIsAcyclic) { EXPECT_TRUE(exdbn::is_acyclic(EdgeSupport(4))); }

TEST(IsAcyclic, SelfLoopRejectedAtConstruction) { EXPECT_THROW(EdgeSupport(2, {{0, 0}}), std::invalid_argument); }

TEST(IsAcyclic, DuplicateEdgeRejected) { EXPECT_THROW(EdgeSupport(2, {{0, 1}, {0, 1}}), std::invalid_argument); }

TEST(IsAcyclic, CompleteForwardOrientation) {
  std::vector<Edge> edges;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) edges.emplace_back(i, j);
  }
  EXPECT_TRUE(exdbn::is_acyclic(EdgeSupport(5, edges)));
}

TEST(IsAcyclic, AgreesWithTopologicalSortOnRandomDigraphs) {
  exdbn::Rng rng(2024);
  int cyclic = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform() * 8);
    const auto s = random_support(rng, d, rng.uniform() * 0.5);
    const bool ours = exdbn::is_acyclic(s);
    EXPECT_EQ(ours, testsupport::kahn_acyclic(d, s.edges()));
    EXPECT_EQ(ours, exdbn::find_cycles(s).empty());
    cyclic += ours ? 0 : 1;
  }
  EXPECT_GT(cyclic, 100);
  EXPECT_LT(cyclic, 900);
}

TEST(CycleType, RejectsBrokenChains) {
  EXPECT_THROW(Cycle({{0, 1}}), std::invalid_argument);
  EXPECT_THROW(Cycle({{0, 1}, {2, 0}}), std::invalid_argument);
  EXPECT_THROW(Cycle({{0, 1}, {1, 0}, {0, 1}, {1, 0}}), std::invalid_argument);
  EXPECT_EQ(Cycle::from_vertices({2, 0, 1}).canonical_vertices(), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(Cycle::from_vertices({0, 1, 2}).to_string(), "1->2->3->1");
}

TEST(Threshold, ZeroDeltaIsIdentity) {
  DbnGraph g = DbnGraph::zeros(3, 1);
  g.w(0, 1) = 0.3;
  g.a[0](2, 2) = -1e-12;
  EXPECT_EQ(exdbn::threshold(g, 0.0), g);
}

TEST(Threshold, KeepsOnlyLargeEntries) {
  DbnGraph g = DbnGraph::zeros(2, 0);
  g.w(0, 1) = 0.4;
  g.w(1, 0) = -1.2;
  const auto t = exdbn::threshold(g, 0.5);
  EXPECT_EQ(t.w(0, 1), 0.0);
  EXPECT_EQ(t.w(1, 0), -1.2);
}

TEST(Threshold, NegativeDeltaRejected) { EXPECT_THROW(exdbn::threshold(DbnGraph::zeros(2, 1), -0.1), std::invalid_argument); }

TEST(Threshold, IdempotentMonotoneAndAcyclicityPreserving) {
  exdbn::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform() * 5);
    DbnGraph g = DbnGraph::zeros(d, 2);
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        if (rng.uniform() < 0.5) g.w(i, j) = rng.uniform() * 4 - 2;
      }
      for (auto& m : g.a) {
        for (int j = 0; j < d; ++j) {
          if (rng.uniform() < 0.4) m(i, j) = rng.uniform() * 2 - 1;
        }
      }
    }
    const double d1 = rng.uniform(), d2 = d1 + rng.uniform();
    const auto t1 = exdbn::threshold(g, d1);
    EXPECT_EQ(exdbn::threshold(t1, d1), t1);
    const auto t2 = exdbn::threshold(g, d2);
    EXPECT_TRUE(t2.intra_support().is_subset_of(t1.intra_support()));
    for (int s = 1; s <= 2; ++s) {
      const auto e1 = t1.inter_edges(s), e2 = t2.inter_edges(s);
      EXPECT_TRUE(std::includes(e1.begin(), e1.end(), e2.begin(), e2.end()));
    }
    EXPECT_TRUE(exdbn::is_acyclic(t2.intra_support()));
  }
}

TEST(GraphIo, RoundTripIsBitExact) {
  exdbn::Rng rng(9);
  DbnGraph g = DbnGraph::zeros(4, 2);
  g.w(0, 3) = 1.0 / 3.0;
  g.w(2, 1) = -std::exp(1.0);
  g.a[0](1, 1) = 1e-300;
  g.a[1](3, 0) = rng.uniform();
  std::stringstream ss;
  exdbn::write_graph(ss, g);
  EXPECT_EQ(exdbn::read_graph(ss), g);
}

TEST(GraphIo, MalformedInputIsDataError) {
  std::stringstream bad_header("x y\n");
  EXPECT_THROW(exdbn::read_graph(bad_header), exdbn::DataError);
  std::stringstream truncated("2 0\n0 1\n0\n");
  EXPECT_THROW(exdbn::read_graph(truncated), exdbn::DataError);
  std::stringstream self_loop("2 0\n1 0\n0 0\n");
  EXPECT_THROW(exdbn::read_graph(self_loop), exdbn::DataError);
  std::stringstream junk("2 0\n0 abc\n0 0\n");
  EXPECT_THROW(exdbn::read_graph(junk), exdbn::DataError);
}

TEST(DbnGraphType, RejectsShapeMismatch) {
  EXPECT_THROW(DbnGraph(Eigen::MatrixXd::Zero(2, 3), {}), std::invalid_argument);
  EXPECT_THROW(DbnGraph(Eigen::MatrixXd::Zero(2, 2), {Eigen::MatrixXd::Zero(3, 3)}), std::invalid_argument);
}
