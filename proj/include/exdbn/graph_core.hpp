#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "exdbn/error.hpp"

namespace exdbn {

// A directed edge (from, to), 0-indexed.
using Edge = std::pair<int, int>;

// Set of directed edges over d vertices. No self-loops, no duplicates.
// Edges are kept sorted, so two supports with the same edges compare equal.
class EdgeSupport {
 public:
  EdgeSupport() = default;

  explicit EdgeSupport(int d, std::vector<Edge> edges = {}) : d_(d), edges_(std::move(edges)) {
    if (d < 0) throw std::invalid_argument("EdgeSupport: negative vertex count");
    std::sort(edges_.begin(), edges_.end());
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const auto [i, j] = edges_[k];
      if (i < 0 || j < 0 || i >= d || j >= d) {
        throw std::invalid_argument("EdgeSupport: vertex index out of range");
      }
      if (i == j) throw std::invalid_argument("EdgeSupport: self-loop (" + std::to_string(i + 1) + "," +
                                              std::to_string(i + 1) + ")");
      if (k > 0 && edges_[k - 1] == edges_[k]) throw std::invalid_argument("EdgeSupport: duplicate edge");
    }
  }

  int d() const { return d_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }

  bool contains(int i, int j) const { return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j}); }

  // Out-neighbour lists, ascending.
  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(d_));
    for (const auto& [i, j] : edges_) adj[static_cast<std::size_t>(i)].push_back(j);
    return adj;
  }

  bool is_subset_of(const EdgeSupport& other) const {
    return std::includes(other.edges_.begin(), other.edges_.end(), edges_.begin(), edges_.end());
  }

  friend bool operator==(const EdgeSupport&, const EdgeSupport&) = default;

 private:
  int d_ = 0;
  std::vector<Edge> edges_;
};

// Simple directed cycle (i1,i2),(i2,i3),...,(ik,i1).
class Cycle {
 public:
  Cycle() = default;

  explicit Cycle(std::vector<Edge> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw std::invalid_argument("Cycle: length must be at least 2");
    std::set<int> seen;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const auto& cur = edges_[k];
      const auto& nxt = edges_[(k + 1) % edges_.size()];
      if (cur.second != nxt.first) throw std::invalid_argument("Cycle: edges do not chain head-to-tail");
      if (!seen.insert(cur.first).second) throw std::invalid_argument("Cycle: repeated vertex");
    }
  }

  // Builds the cycle visiting `vertices` in order and returning to the first.
  static Cycle from_vertices(const std::vector<int>& vertices) {
    std::vector<Edge> edges;
    edges.reserve(vertices.size());
    for (std::size_t k = 0; k < vertices.size(); ++k) {
      edges.emplace_back(vertices[k], vertices[(k + 1) % vertices.size()]);
    }
    return Cycle(std::move(edges));
  }

  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t length() const { return edges_.size(); }

  // Rotation starting at the smallest vertex; equal for equal cycles.
  std::vector<int> canonical_vertices() const {
    std::vector<int> v;
    v.reserve(edges_.size());
    for (const auto& e : edges_) v.push_back(e.first);
    std::rotate(v.begin(), std::min_element(v.begin(), v.end()), v.end());
    return v;
  }

  // 1-indexed, e.g. "1->2->3->1".
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& e : edges_) os << e.first + 1 << "->";
    os << edges_.front().first + 1;
    return os.str();
  }

  friend bool operator==(const Cycle&, const Cycle&) = default;

 private:
  std::vector<Edge> edges_;
};

// One full DFS traversal, roots and neighbours in ascending index order.
// Every back edge (u, v) closes the cycle v -> ... -> u -> v along the current
// DFS stack; one cycle is reported per back edge, in discovery order.
inline std::vector<Cycle> find_cycles(const EdgeSupport& support) {
  const int d = support.d();
  const auto adj = support.adjacency();
  enum Color : unsigned char { kWhite, kGray, kBlack };
  std::vector<Color> color(static_cast<std::size_t>(d), kWhite);
  std::vector<int> stack_pos(static_cast<std::size_t>(d), -1);
  std::vector<int> path;
  std::vector<std::size_t> next_child;
  std::vector<Cycle> cycles;

  for (int root = 0; root < d; ++root) {
    if (color[static_cast<std::size_t>(root)] != kWhite) continue;
    path.push_back(root);
    next_child.push_back(0);
    color[static_cast<std::size_t>(root)] = kGray;
    stack_pos[static_cast<std::size_t>(root)] = 0;
    while (!path.empty()) {
      const int u = path.back();
      auto& k = next_child.back();
      const auto& out = adj[static_cast<std::size_t>(u)];
      if (k < out.size()) {
        const int v = out[k++];
        const auto vs = static_cast<std::size_t>(v);
        if (color[vs] == kWhite) {
          color[vs] = kGray;
          stack_pos[vs] = static_cast<int>(path.size());
          path.push_back(v);
          next_child.push_back(0);
        } else if (color[vs] == kGray) {
          std::vector<int> verts(path.begin() + stack_pos[vs], path.end());
          cycles.push_back(Cycle::from_vertices(verts));
        }
      } else {
        color[static_cast<std::size_t>(u)] = kBlack;
        stack_pos[static_cast<std::size_t>(u)] = -1;
        path.pop_back();
        next_child.pop_back();
      }
    }
  }
  return cycles;
}

inline bool is_acyclic(const EdgeSupport& support) { return find_cycles(support).empty(); }

// Weighted DBN: intra-slice W and lag matrices A_1..A_p.
// w(i, j) != 0 means edge i -> j within a slice; a[s-1](i, j) != 0 means
// variable i at lag s drives variable j now. Supports are derived from the
// non-zero pattern, so there is a single source of truth.
struct DbnGraph {
  Eigen::MatrixXd w;
  std::vector<Eigen::MatrixXd> a;

  DbnGraph() = default;
  DbnGraph(Eigen::MatrixXd intra, std::vector<Eigen::MatrixXd> inter) : w(std::move(intra)), a(std::move(inter)) {
    validate();
  }

  static DbnGraph zeros(int d, int p) {
    return DbnGraph(Eigen::MatrixXd::Zero(d, d),
                    std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(d, d)));
  }

  int d() const { return static_cast<int>(w.rows()); }
  int p() const { return static_cast<int>(a.size()); }

  void validate() const {
    if (w.rows() != w.cols()) throw std::invalid_argument("DbnGraph: W must be square");
    for (const auto& m : a) {
      if (m.rows() != w.rows() || m.cols() != w.cols()) {
        throw std::invalid_argument("DbnGraph: lag matrix shape differs from W");
      }
    }
    for (int i = 0; i < d(); ++i) {
      if (w(i, i) != 0.0) throw std::invalid_argument("DbnGraph: W diagonal must be zero");
    }
  }

  EdgeSupport intra_support() const { return EdgeSupport(d(), edges_of(w)); }

  // s in 1..p. Inter supports may contain (i, i): lag self-dependence.
  std::vector<Edge> inter_edges(int s) const { return edges_of(a.at(static_cast<std::size_t>(s - 1))); }

  std::size_t inter_edge_count() const {
    std::size_t n = 0;
    for (const auto& m : a) n += static_cast<std::size_t>((m.array() != 0.0).count());
    return n;
  }

  friend bool operator==(const DbnGraph& x, const DbnGraph& y) {
    if (x.w.rows() != y.w.rows() || x.a.size() != y.a.size() || x.w != y.w) return false;
    for (std::size_t s = 0; s < x.a.size(); ++s) {
      if (x.a[s] != y.a[s]) return false;
    }
    return true;
  }

 private:
  static std::vector<Edge> edges_of(const Eigen::MatrixXd& m) {
    std::vector<Edge> edges;
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        if (m(i, j) != 0.0) edges.emplace_back(i, j);
      }
    }
    return edges;
  }
};

// Zeroes every weight with |weight| < delta, in W and every A_s.
inline DbnGraph threshold(const DbnGraph& g, double delta) {
  if (!(delta >= 0.0)) throw std::invalid_argument("threshold: delta must be nonnegative");
  DbnGraph out = g;
  auto cut = [delta](Eigen::MatrixXd& m) { m = (m.array().abs() < delta).select(0.0, m); };
  cut(out.w);
  for (auto& m : out.a) cut(m);
  return out;
}

// Text format: header "d p", then W as d rows, then A_1..A_p as d rows each.
// Values use 17 significant digits, enough to round-trip any double.
inline void write_graph(std::ostream& os, const DbnGraph& g) {
  os << g.d() << ' ' << g.p() << '\n';
  char buf[32];
  auto put = [&](const Eigen::MatrixXd& m) {
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        os << (j ? " " : "") << buf;
      }
      os << '\n';
    }
  };
  put(g.w);
  for (const auto& m : g.a) put(m);
}

inline DbnGraph read_graph(std::istream& is) {
  int d = -1, p = -1;
  if (!(is >> d >> p) || d < 1 || p < 0) throw DataError("graph file: bad header, expected 'd p'");
  auto get = [&](const char* what) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        std::string tok;
        if (!(is >> tok)) throw DataError(std::string("graph file: truncated ") + what);
        try {
          std::size_t used = 0;
          m(i, j) = std::stod(tok, &used);
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw DataError(std::string("graph file: non-numeric entry '") + tok + "' in " + what);
        }
      }
    }
    return m;
  };
  Eigen::MatrixXd w = get("W");
  std::vector<Eigen::MatrixXd> a;
  for (int s = 1; s <= p; ++s) a.push_back(get("A"));
  try {
    return DbnGraph(std::move(w), std::move(a));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("graph file: ") + e.what());
  }
}

}  // namespace exdbn
