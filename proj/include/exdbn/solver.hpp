#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "exdbn/graph_core.hpp"
#include "exdbn/objective.hpp"
#include "exdbn/relaxation.hpp"

namespace exdbn {

enum class CutStrategy { kFirstCycle, kShortestCycle, kAllCycles };
enum class NodeSelection { kBestBound, kDfsDive, kBestBoundPlunge };
enum class Branching { kMostFractional };
enum class SolveStatus { kOptimal, kTimeLimit, kInfeasibleConfig };

inline std::string to_string(CutStrategy s) {
  switch (s) {
    case CutStrategy::kFirstCycle:
      return "FIRST_CYCLE";
    case CutStrategy::kShortestCycle:
      return "SHORTEST_CYCLE";
    case CutStrategy::kAllCycles:
      return "ALL_CYCLES";
  }
  return "?";
}

inline CutStrategy parse_cut_strategy(const std::string& s) {
  if (s == "FIRST_CYCLE" || s == "first") return CutStrategy::kFirstCycle;
  if (s == "SHORTEST_CYCLE" || s == "shortest") return CutStrategy::kShortestCycle;
  if (s == "ALL_CYCLES" || s == "all") return CutStrategy::kAllCycles;
  throw ConfigError("unknown cut strategy '" + s + "' (expected FIRST_CYCLE, SHORTEST_CYCLE, ALL_CYCLES)");
}

inline std::string to_string(NodeSelection s) {
  switch (s) {
    case NodeSelection::kBestBound:
      return "BEST_BOUND";
    case NodeSelection::kDfsDive:
      return "DFS_DIVE";
    case NodeSelection::kBestBoundPlunge:
      return "BEST_BOUND_PLUNGE";
  }
  return "?";
}

inline NodeSelection parse_node_selection(const std::string& s) {
  if (s == "BEST_BOUND" || s == "best") return NodeSelection::kBestBound;
  if (s == "DFS_DIVE" || s == "dfs") return NodeSelection::kDfsDive;
  if (s == "BEST_BOUND_PLUNGE" || s == "plunge") return NodeSelection::kBestBoundPlunge;
  throw ConfigError("unknown node selection '" + s + "' (expected BEST_BOUND, DFS_DIVE, BEST_BOUND_PLUNGE)");
}

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal:
      return "OPTIMAL";
    case SolveStatus::kTimeLimit:
      return "TIME_LIMIT";
    case SolveStatus::kInfeasibleConfig:
      return "INFEASIBLE_CONFIG";
  }
  return "?";
}

struct SolverConfig {
  double time_limit = 7200.0;  // seconds
  double gap_tolerance = 1e-6;
  CutStrategy cut_strategy = CutStrategy::kAllCycles;
  double integrality_tol = 1e-6;
  NodeSelection node_selection = NodeSelection::kBestBound;
  Branching branching = Branching::kMostFractional;
  int parallel_nodes = 1;
  long node_limit = 0;  // 0: unlimited; otherwise stop after this many nodes
  double memory_limit_mb = 2048.0;  // approximate cap on the open-node queue
  RelaxationOptions relax;

  void validate() const {
    if (!(time_limit > 0.0)) throw ConfigError("solver.time_limit must be positive");
    if (!(gap_tolerance >= 0.0)) throw ConfigError("solver.gap_tolerance must be nonnegative");
    if (!(integrality_tol > 0.0 && integrality_tol < 0.5)) throw ConfigError("solver.integrality_tol must be in (0, 0.5)");
    if (parallel_nodes < 1) throw ConfigError("solver.parallel_nodes must be at least 1");
    if (node_limit < 0) throw ConfigError("solver.node_limit must be nonnegative");
    if (!(memory_limit_mb > 0.0)) throw ConfigError("solver.memory_limit_mb must be positive");
    if (!(relax.tol_feas > 0.0) || !(relax.tol_bound > 0.0) || !(relax.max_iter_factor > 0.0)) {
      throw ConfigError("relax.* tolerances must be positive");
    }
  }
};

struct TracePoint {
  double time = 0.0;
  double value = 0.0;
};

struct SolveReport {
  DbnGraph incumbent;
  bool has_incumbent = false;
  double incumbent_objective = std::numeric_limits<double>::infinity();
  double best_bound = -std::numeric_limits<double>::infinity();
  double mip_gap = std::numeric_limits<double>::infinity();
  std::size_t cuts_added = 0;
  std::vector<Cycle> cuts;
  double total_cycle_constraints_possible = 0.0;
  long nodes_explored = 0;
  long relaxations_solved = 0;
  long iteration_limit_resolves = 0;
  double wall_time = 0.0;
  SolveStatus status = SolveStatus::kTimeLimit;
  std::vector<std::string> warnings;
  std::vector<TracePoint> bound_trace;
  std::vector<TracePoint> incumbent_trace;

  // Echo of the configuration in force.
  SolverConfig config;
  RegMode reg;
  double c = 0.0;
  bool c_auto = false;
  double effective_tol_bound = 0.0;

  std::string to_text() const;
};

// Test and tooling observers. All callbacks run under the engine lock.
struct SolveHooks {
  std::function<void(const Fixings&, const RelaxationResult&)> on_node;
  std::function<void(const DbnGraph&, double)> on_incumbent;
  std::function<void(const std::vector<Cycle>&)> on_cuts;
};

// (incumbent - bound) / max(|incumbent|, 1e-10), clamped at 0.
inline double mip_gap(double incumbent_obj, double best_bound) {
  if (incumbent_obj == best_bound) return 0.0;
  return std::max(0.0, (incumbent_obj - best_bound) / std::max(std::abs(incumbent_obj), 1e-10));
}

inline std::vector<Cycle> lazy_cuts_for(const EdgeSupport& candidate, CutStrategy strategy) {
  std::vector<Cycle> found = find_cycles(candidate);
  if (found.empty() || strategy == CutStrategy::kAllCycles) return found;
  if (strategy == CutStrategy::kFirstCycle) return {found.front()};
  auto it = std::min_element(found.begin(), found.end(),
                             [](const Cycle& x, const Cycle& y) { return x.length() < y.length(); });
  return {*it};
}

// Number of simple directed cycles of length 2..max_len on the complete
// digraph over d vertices: sum_k C(d, k) (k - 1)!.
inline double count_simple_cycles(int d, int max_len) {
  double total = 0.0;
  for (int k = 2; k <= std::min(d, max_len); ++k) {
    double choose = 1.0;
    for (int t = 0; t < k; ++t) choose = choose * (d - t) / (t + 1);
    double fact = 1.0;
    for (int t = 2; t < k; ++t) fact *= t;
    total += choose * fact;
  }
  return total;
}

inline std::string SolveReport::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "status=" << to_string(status) << '\n'
     << "incumbent_objective=" << incumbent_objective << '\n'
     << "best_bound=" << best_bound << '\n'
     << "mip_gap=" << mip_gap << '\n'
     << "cuts_added=" << cuts_added << '\n';
  if (total_cycle_constraints_possible > 1e15) {
    os << "total_cycle_constraints_possible=superexponential(" << total_cycle_constraints_possible << ")\n";
  } else {
    os << "total_cycle_constraints_possible=" << total_cycle_constraints_possible << '\n';
  }
  os << "nodes_explored=" << nodes_explored << '\n'
     << "relaxations_solved=" << relaxations_solved << '\n'
     << "iteration_limit_resolves=" << iteration_limit_resolves << '\n'
     << "wall_time=" << wall_time << '\n'
     << "reg.variant=" << to_string(reg.variant) << '\n'
     << "reg.lambda=" << reg.lambda << '\n'
     << "reg.eta=" << reg.eta << '\n'
     << "bigM=" << c << (c_auto ? " (auto)" : "") << '\n'
     << "solver.time_limit=" << config.time_limit << '\n'
     << "solver.gap_tolerance=" << config.gap_tolerance << '\n'
     << "solver.cut_strategy=" << to_string(config.cut_strategy) << '\n'
     << "solver.integrality_tol=" << config.integrality_tol << '\n'
     << "solver.node_selection=" << to_string(config.node_selection) << '\n'
     << "solver.branching=MOST_FRACTIONAL\n"
     << "solver.parallel_nodes=" << config.parallel_nodes << '\n'
     << "solver.node_limit=" << config.node_limit << '\n'
     << "solver.memory_limit_mb=" << config.memory_limit_mb << '\n'
     << "relax.tol_feas=" << config.relax.tol_feas << '\n'
     << "relax.tol_bound=" << config.relax.tol_bound << '\n'
     << "relax.tol_bound_effective=" << effective_tol_bound << '\n'
     << "relax.max_iter_factor=" << config.relax.max_iter_factor << '\n'
     << "relax.ridge_floor=" << config.relax.ridge_floor << '\n';
  for (std::size_t k = 0; k < cuts.size(); ++k) os << "cut." << k << '=' << cuts[k].to_string() << '\n';
  for (std::size_t k = 0; k < warnings.size(); ++k) os << "warning." << k << '=' << warnings[k] << '\n';
  return os.str();
}

namespace detail {

class BranchAndBound {
 public:
  BranchAndBound(const MiqpInstance& inst, const SolverConfig& cfg, const SolveHooks& hooks)
      : inst_(inst), cfg_(cfg), hooks_(hooks), lay_(inst.layout()), pool_(std::make_shared<const std::vector<Cycle>>()) {
    relax_ = cfg.relax;
    relax_.tol_bound = std::max(1e-12, std::min(cfg.relax.tol_bound, 0.1 * cfg.gap_tolerance));
  }

  SolveReport run() {
    start_ = std::chrono::steady_clock::now();
    report_.config = cfg_;
    report_.reg = inst_.reg;
    report_.c = inst_.c;
    report_.c_auto = inst_.c_auto;
    report_.effective_tol_bound = relax_.tol_bound;
    report_.total_cycle_constraints_possible = count_simple_cycles(lay_.d, lay_.d);

    if (fixed_support_cyclic()) {
      report_.status = SolveStatus::kInfeasibleConfig;
      report_.warnings.push_back("instance fixings force a directed cycle");
      return finish();
    }

    push({inst_.fixings, 0.0, 0, nullptr});
    if (cfg_.parallel_nodes == 1) {
      worker();
    } else {
      std::vector<std::thread> threads;
      for (int t = 0; t < cfg_.parallel_nodes; ++t) threads.emplace_back([this] { worker(); });
      for (auto& t : threads) t.join();
    }
    if (infeasible_everywhere_ && !report_.has_incumbent) {
      report_.status = SolveStatus::kInfeasibleConfig;
      report_.warnings.push_back("every node relaxation was infeasible");
    }
    return finish();
  }

 private:
  struct Node {
    Fixings fixings;
    double bound = 0.0;
    int depth = 0;
    std::shared_ptr<const RelaxationResult> warm;
    bool preferred = false;  // the child to dive into
  };

  struct Outcome {
    enum Kind { kInfeasible, kPruned, kLeaf, kBranched } kind = kInfeasible;
    double bound = 0.0;
    std::vector<Node> children;
    bool has_candidate = false;
    DbnGraph candidate;
    double candidate_obj = 0.0;
  };

  // (tier, bound, sequence): tier 0 holds dive nodes, popped LIFO.
  using Key = std::tuple<int, double, long>;

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  bool fixed_support_cyclic() const {
    std::vector<Edge> edges;
    for (int i = 0; i < lay_.d; ++i) {
      for (int j = 0; j < lay_.d; ++j) {
        if (i != j && inst_.fixings[static_cast<std::size_t>(lay_.intra(i, j))] == Fix::kOne) edges.emplace_back(i, j);
      }
    }
    return !is_acyclic(EdgeSupport(lay_.d, edges));
  }

  // Rough heap footprint of a queued node, for the memory limit.
  static std::size_t node_bytes(const Node& n) { return sizeof(Node) + n.fixings.size() + 128; }

  static std::size_t warm_bytes(const RelaxationResult& r) {
    std::size_t doubles = static_cast<std::size_t>(r.beta.size() + r.lagrange_beta.size() + r.w.size());
    for (const auto& m : r.a) doubles += static_cast<std::size_t>(m.size());
    doubles += r.e.size() + r.column_primal.size() + r.column_gap.size() + r.column_dual.size() + r.multipliers.size() +
               r.extra.size() + r.column_lagrange_primal.size();
    return sizeof(RelaxationResult) + 8 * doubles + r.effective.size() + r.column_converged.size();
  }

  // Caller holds the lock (or is the constructor path).
  void push(Node n) {
    const long seq = seq_++;
    Key key{1, n.bound, seq};
    const bool dive = cfg_.node_selection == NodeSelection::kDfsDive ||
                      (cfg_.node_selection == NodeSelection::kBestBoundPlunge && n.preferred);
    if (dive) key = Key{0, 0.0, -seq};
    // Queued best-bound nodes may wait a long time; once their warm states
    // use a quarter of the memory limit, new ones are dropped (they only save time).
    if (n.warm && !dive && static_cast<double>(warm_open_bytes_) > 0.25 * cfg_.memory_limit_mb * 1048576.0) {
      n.warm.reset();
    }
    const std::size_t wb = n.warm ? warm_bytes(*n.warm) / 2 : 0;
    warm_open_bytes_ += wb;
    open_bytes_ += node_bytes(n) + wb;
    open_bounds_.insert(n.bound);
    open_.emplace(key, std::move(n));
  }

  void forget(const Node& n) {
    const std::size_t wb = n.warm ? warm_bytes(*n.warm) / 2 : 0;
    warm_open_bytes_ -= std::min(warm_open_bytes_, wb);
    open_bytes_ -= std::min(open_bytes_, node_bytes(n) + wb);
    open_bounds_.erase(open_bounds_.find(n.bound));
  }

  double global_bound_locked() const {
    double b = floor_;
    if (!open_bounds_.empty()) b = std::min(b, *open_bounds_.begin());
    if (!inflight_.empty()) b = std::min(b, *inflight_.begin());
    return b;
  }

  void record_bound_locked() {
    const double b = global_bound_locked();
    if (std::isfinite(b) && (report_.bound_trace.empty() || b != report_.bound_trace.back().value)) {
      report_.bound_trace.push_back({elapsed(), b});
    }
  }

  void worker() {
    std::unique_lock lock(mu_);
    while (true) {
      if (stop_) break;
      if (open_.empty()) {
        if (inflight_.empty()) break;
        cv_.wait(lock);
        continue;
      }
      if (elapsed() >= cfg_.time_limit) {
        stop_ = true;
        timed_out_ = true;
        break;
      }
      if (cfg_.node_limit > 0 && report_.nodes_explored >= cfg_.node_limit) {
        stop_ = true;
        node_limited_ = true;
        break;
      }
      if (static_cast<double>(open_bytes_) > cfg_.memory_limit_mb * 1048576.0) {
        stop_ = true;
        memory_limited_ = true;
        break;
      }
      auto it = open_.begin();
      Node node = std::move(it->second);
      open_.erase(it);
      forget(node);
      const auto slot = inflight_.insert(node.bound);
      ++report_.nodes_explored;
      const double inc = report_.incumbent_objective;
      const bool has_inc = report_.has_incumbent;

      lock.unlock();
      Outcome out = process(node, has_inc, inc);
      lock.lock();

      inflight_.erase(slot);
      apply(std::move(out));
      record_bound_locked();
      if (report_.has_incumbent && mip_gap(report_.incumbent_objective, global_bound_locked()) <= cfg_.gap_tolerance) {
        stop_ = true;
      }
      cv_.notify_all();
    }
    cv_.notify_all();
  }

  void apply(Outcome out) {
    if (out.kind != Outcome::kInfeasible) infeasible_everywhere_ = false;
    if (out.has_candidate && (!report_.has_incumbent || out.candidate_obj < report_.incumbent_objective)) {
      if (!is_acyclic(out.candidate.intra_support())) throw std::logic_error("solver: cyclic incumbent candidate");
      report_.incumbent = std::move(out.candidate);
      report_.incumbent_objective = out.candidate_obj;
      report_.has_incumbent = true;
      report_.incumbent_trace.push_back({elapsed(), out.candidate_obj});
      if (hooks_.on_incumbent) hooks_.on_incumbent(report_.incumbent, out.candidate_obj);
      prune_open_locked();
    }
    switch (out.kind) {
      case Outcome::kInfeasible:
        break;
      case Outcome::kPruned:
      case Outcome::kLeaf:
        floor_ = std::min(floor_, out.bound);
        break;
      case Outcome::kBranched:
        for (auto& c : out.children) push(std::move(c));
        break;
    }
  }

  double prune_threshold_locked() const {
    const double inc = report_.incumbent_objective;
    return inc - cfg_.gap_tolerance * std::max(std::abs(inc), 1e-10);
  }

  // Drops open nodes whose bound already meets the pruning threshold.
  void prune_open_locked() {
    const double thr = prune_threshold_locked();
    for (auto it = open_.begin(); it != open_.end();) {
      if (it->second.bound >= thr) {
        floor_ = std::min(floor_, it->second.bound);
        forget(it->second);
        it = open_.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::shared_ptr<const std::vector<Cycle>> pool() {
    std::lock_guard g(pool_mu_);
    return pool_;
  }

  // Appends cycles not yet in the pool; returns how many were new.
  std::size_t add_cuts(const std::vector<Cycle>& cycles) {
    std::lock_guard g(pool_mu_);
    std::vector<Cycle> fresh;
    for (const Cycle& c : cycles) {
      if (pool_keys_.insert(c.canonical_vertices()).second) fresh.push_back(c);
    }
    if (fresh.empty()) return 0;
    auto next = std::make_shared<std::vector<Cycle>>(*pool_);
    next->insert(next->end(), fresh.begin(), fresh.end());
    pool_ = std::move(next);
    if (hooks_.on_cuts) {
      std::lock_guard h(mu_hooks_);
      hooks_.on_cuts(fresh);
    }
    return fresh.size();
  }

  // Branching candidate: most fractional intra indicator, ties to larger |w|
  // then lower index; inter indicators only once every intra one is integral.
  int choose_branch(const RelaxationResult& r) const {
    const double tol = cfg_.integrality_tol;
    auto pick = [&](bool intra) {
      int best = -1;
      double best_frac = 0.0, best_mag = 0.0;
      for (int idx = 0; idx < lay_.count(); ++idx) {
        if (lay_.is_intra(idx) != intra) continue;
        if (r.effective[static_cast<std::size_t>(idx)] != Fix::kFree) continue;
        const double e = r.e[static_cast<std::size_t>(idx)];
        const double frac = std::min(e, 1.0 - e);
        if (frac <= tol) continue;
        const double mag = std::abs(r.beta(lay_.regressor_of(idx), lay_.to_of(idx)));
        if (best < 0 || frac > best_frac || (frac == best_frac && mag > best_mag)) {
          best = idx;
          best_frac = frac;
          best_mag = mag;
        }
      }
      return best;
    };
    const int b = pick(true);
    if (b >= 0 || !inst_.reg.inter_indicators_priced()) return b;
    return pick(false);
  }

  Outcome process(const Node& node, bool has_inc, double inc) {
    Outcome out;
    const double thr = has_inc ? inc - cfg_.gap_tolerance * std::max(std::abs(inc), 1e-10)
                               : std::numeric_limits<double>::infinity();
    RelaxationOptions ro = relax_;
    std::shared_ptr<const RelaxationResult> warm = node.warm;
    int retries = 0;
    while (true) {
      auto cuts = pool();
      auto r = std::make_shared<RelaxationResult>(solve_relaxation(inst_, *cuts, node.fixings, ro, warm.get()));
      {
        std::lock_guard g(mu_hooks_);
        ++relaxations_;
        if (hooks_.on_node) hooks_.on_node(node.fixings, *r);
      }
      if (r->status == RelaxStatus::kInfeasible) {
        out.kind = Outcome::kInfeasible;
        return out;
      }
      if (r->status == RelaxStatus::kIterationLimit && retries < 3) {
        ++retries;
        ++iter_resolves_;
        ro.max_iter_factor *= 4.0;
        warm = r;
        continue;
      }
      const double lb = std::max({r->lower_bound, node.bound, 0.0});
      out.bound = lb;
      if (lb >= thr) {
        out.kind = Outcome::kPruned;
        return out;
      }
      const int var = choose_branch(*r);
      if (var >= 0) {
        branch(node, var, lb, std::move(r), out);
        return out;
      }

      // Integral: the candidate support is the set of indicators at 1.
      std::vector<Edge> edges;
      DbnGraph g = DbnGraph::zeros(lay_.d, lay_.p);
      for (int idx = 0; idx < lay_.count(); ++idx) {
        if (r->e[static_cast<std::size_t>(idx)] < 0.5) continue;
        const int s = lay_.lag_of(idx), i = lay_.from_of(idx), j = lay_.to_of(idx);
        const double val = r->beta(lay_.regressor_of(idx), j);
        if (s == 0) {
          edges.emplace_back(i, j);
          g.w(i, j) = val;
        } else {
          g.a[static_cast<std::size_t>(s - 1)](i, j) = val;
        }
      }
      const EdgeSupport support(lay_.d, edges);
      const auto cycles = lazy_cuts_for(support, cfg_.cut_strategy);
      if (!cycles.empty()) {
        if (add_cuts(cycles) == 0) {
          // Every cycle was already pooled (possible only within tolerance):
          // split on a free edge of the first one instead of looping.
          for (const auto& [i, j] : cycles.front().edges()) {
            const int idx = lay_.intra(i, j);
            if (r->effective[static_cast<std::size_t>(idx)] == Fix::kFree) {
              branch(node, idx, lb, std::move(r), out);
              return out;
            }
          }
          out.kind = Outcome::kInfeasible;
          return out;
        }
        warm = r;
        continue;
      }
      out.kind = Outcome::kLeaf;
      out.has_candidate = true;
      out.candidate_obj = score(g, inst_.panel, inst_.reg).total;
      out.candidate = std::move(g);
      return out;
    }
  }

  void branch(const Node& node, int var, double lb, std::shared_ptr<RelaxationResult> r, Outcome& out) {
    // Children only need the column state for warm starts.
    r->w.resize(0, 0);
    r->a.clear();
    r->e.clear();
    std::shared_ptr<const RelaxationResult> warm = std::move(r);
    out.kind = Outcome::kBranched;
    Node down{node.fixings, lb, node.depth + 1, warm};
    Node up{node.fixings, lb, node.depth + 1, warm};
    down.fixings[static_cast<std::size_t>(var)] = Fix::kZero;
    up.fixings[static_cast<std::size_t>(var)] = Fix::kOne;
    // Dive into the up child unless it closes a cycle of edges fixed to 1
    // (then its subtree can only end in cuts and infeasibility). Ordering
    // only; both children are kept.
    const bool up_first = !lay_.is_intra(var) || !closes_fixed_cycle(node.fixings, var);
    (up_first ? up : down).preferred = true;
    // With a LIFO queue the last child pushed is explored first.
    if (up_first) {
      out.children.push_back(std::move(down));
      out.children.push_back(std::move(up));
    } else {
      out.children.push_back(std::move(up));
      out.children.push_back(std::move(down));
    }
  }

  // Whether intra edge `var` = (i, j) would close a directed cycle with the
  // edges already fixed to 1, i.e. j reaches i through fixed edges.
  bool closes_fixed_cycle(const Fixings& fix, int var) const {
    const int from = lay_.from_of(var), to = lay_.to_of(var);
    std::vector<char> seen(static_cast<std::size_t>(lay_.d), 0);
    std::vector<int> stack{to};
    seen[static_cast<std::size_t>(to)] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (u == from) return true;
      for (int v = 0; v < lay_.d; ++v) {
        if (!seen[static_cast<std::size_t>(v)] && fix[static_cast<std::size_t>(lay_.intra(u, v))] == Fix::kOne) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    return false;
  }

  SolveReport finish() {
    report_.wall_time = elapsed();
    report_.relaxations_solved = relaxations_;
    report_.iteration_limit_resolves = iter_resolves_;
    report_.cuts = *pool_;
    report_.cuts_added = pool_->size();
    if (report_.status == SolveStatus::kInfeasibleConfig) return report_;

    double bound = global_bound_locked();
    if (!std::isfinite(bound)) bound = report_.incumbent_objective;
    if (report_.has_incumbent) bound = std::min(bound, report_.incumbent_objective);
    report_.best_bound = bound;
    if (report_.has_incumbent) report_.mip_gap = mip_gap(report_.incumbent_objective, bound);

    const bool exhausted = open_.empty() && !timed_out_ && !node_limited_ && !memory_limited_;
    const bool closed = report_.has_incumbent && report_.mip_gap <= cfg_.gap_tolerance;
    report_.status = (closed && (exhausted || stop_)) ? SolveStatus::kOptimal : SolveStatus::kTimeLimit;
    if (node_limited_) report_.warnings.push_back("node limit reached");
    if (memory_limited_) report_.warnings.push_back("open-node memory limit reached");
    if (exhausted && !closed && report_.has_incumbent) report_.warnings.push_back("search exhausted above gap tolerance");
    if (!report_.has_incumbent) report_.warnings.push_back("no incumbent found");
    if (iter_resolves_ > 0) report_.warnings.push_back("relaxation iteration limit hit; nodes re-solved");

    if (report_.has_incumbent) {
      const double lim = inst_.c * (1.0 - 1e-6);
      bool binding = (report_.incumbent.w.array().abs() >= lim).any();
      for (const auto& m : report_.incumbent.a) binding = binding || (m.array().abs() >= lim).any();
      if (binding) report_.warnings.push_back("big-M binding: a weight is within 1e-6*c of c");
    }
    return report_;
  }

  const MiqpInstance& inst_;
  const SolverConfig cfg_;
  const SolveHooks& hooks_;
  const IndicatorLayout lay_;
  RelaxationOptions relax_;
  std::chrono::steady_clock::time_point start_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::map<Key, Node> open_;
  std::multiset<double> open_bounds_;
  std::multiset<double> inflight_;
  double floor_ = std::numeric_limits<double>::infinity();
  long seq_ = 0;
  bool stop_ = false;
  bool timed_out_ = false;
  bool node_limited_ = false;
  bool memory_limited_ = false;
  std::size_t warm_open_bytes_ = 0;
  std::size_t open_bytes_ = 0;
  bool infeasible_everywhere_ = true;
  SolveReport report_;

  std::mutex pool_mu_;
  std::shared_ptr<const std::vector<Cycle>> pool_;
  std::set<std::vector<int>> pool_keys_;

  std::mutex mu_hooks_;
  long relaxations_ = 0;
  long iter_resolves_ = 0;
};

}  // namespace detail

inline SolveReport solve(const MiqpInstance& inst, const SolverConfig& cfg, const SolveHooks& hooks = {}) {
  inst.validate();
  cfg.validate();
  detail::BranchAndBound bnb(inst, cfg, hooks);
  return bnb.run();
}

}  // namespace exdbn
