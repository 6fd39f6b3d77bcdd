#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "exdbn/datagen.hpp"
#include "exdbn/error.hpp"
#include "exdbn/metrics.hpp"
#include "exdbn/objective.hpp"
#include "exdbn/solver.hpp"

namespace exdbn {

// ---------------------------------------------------------------- ensembles

struct EnsembleSpec {
  std::string name;
  GraphModel model = GraphModel::kErdosRenyi;
  double intra_ratio = 1.0;
  std::vector<double> inter_ratios;  // one per lag
  int p() const { return static_cast<int>(inter_ratios.size()); }
};

// "<MODEL><intra>-<inter>[-<inter>...]", e.g. ER3-1 or SF2-1-1.
inline EnsembleSpec parse_ensemble(const std::string& name) {
  static const std::regex re(R"(^(ER|SF)([0-9]+(?:\.[0-9]+)?)((?:-[0-9]+(?:\.[0-9]+)?)+)$)");
  std::smatch m;
  if (!std::regex_match(name, m, re)) {
    throw ConfigError("bad ensemble name '" + name + "' (expected e.g. ER3-1, SF2-1-1)");
  }
  EnsembleSpec e;
  e.name = name;
  e.model = m[1] == "ER" ? GraphModel::kErdosRenyi : GraphModel::kScaleFree;
  e.intra_ratio = std::stod(m[2]);
  std::istringstream rest(m[3].str().substr(1));
  std::string tok;
  while (std::getline(rest, tok, '-')) e.inter_ratios.push_back(std::stod(tok));
  return e;
}

// ------------------------------------------------------------------- config

struct ExperimentConfig {
  std::string ensemble_name = "ER3-1";
  std::vector<int> d_list{5};
  std::vector<int> n_list{500};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  // Benchmarks run under a time cap, so they plunge for incumbents early.
  SolverConfig solver = [] {
    SolverConfig s;
    s.node_selection = NodeSelection::kBestBoundPlunge;
    return s;
  }();
  // Base coefficients before scaling. An unset variant means L1 for n < 500
  // and L2_SQUARED otherwise.
  std::optional<RegVariant> reg_variant;
  double lambda_base = 0.05;
  double eta_base = 0.05;
  RegScaling reg_scaling = RegScaling::kSqrtN;
  std::optional<double> big_m;  // unset: AUTO
  double noise_scale = 1.0;
  double decay = 1.0;
  MetricOptions metrics;
  int workers = 1;
  std::string output_dir = "bench_out";

  void validate() const {
    parse_ensemble(ensemble_name);
    if (d_list.empty() || n_list.empty() || seeds.empty()) throw ConfigError("d_list, n_list and seeds must be nonempty");
    for (int d : d_list) {
      if (d < 2) throw ConfigError("every d must be at least 2");
    }
    for (int n : n_list) {
      if (n < 1) throw ConfigError("every n must be positive");
    }
    if (!(lambda_base >= 0.0) || !(eta_base >= 0.0)) throw ConfigError("reg.lambda and reg.eta must be nonnegative");
    if (big_m && !(*big_m > 0.0)) throw ConfigError("bigM must be positive or AUTO");
    if (!(noise_scale > 0.0)) throw ConfigError("experiment.noise must be positive");
    if (workers < 1) throw ConfigError("experiment.workers must be at least 1");
    solver.validate();
  }

  RegMode base_reg(int n) const {
    const RegVariant v = reg_variant ? *reg_variant : (n < 500 ? RegVariant::kL1 : RegVariant::kL2);
    return {v, lambda_base, eta_base};
  }
};

namespace detail {

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::string tok;
  std::istringstream is(text);
  while (std::getline(is, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw ConfigError(key + ": bad list entry '" + tok + "'");
    }
  }
  return out;
}

inline std::string join_list(const auto& xs) {
  std::ostringstream os;
  bool first = true;
  for (const auto& x : xs) {
    os << (first ? "" : ",") << x;
    first = false;
  }
  return os.str();
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

// Every key understood by apply_setting.
inline const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys{
      "experiment.ensemble",    "experiment.d_list",     "experiment.n_list",       "experiment.seeds",
      "experiment.noise",       "experiment.decay",      "experiment.workers",      "experiment.output_dir",
      "bigM",                   "reg.variant",           "reg.lambda",              "reg.eta",
      "reg.scaling",            "relax.tol_feas",        "relax.tol_bound",         "relax.max_iter_factor",
      "solver.time_limit",      "solver.gap_tolerance",  "solver.cut_strategy",     "solver.integrality_tol",
      "solver.node_selection",  "solver.branching",      "solver.parallel_nodes",   "solver.node_limit",
      "solver.memory_limit_mb", "shd.literal"};
  return keys;
}

// Applies `key = value` pairs (dotted keys, e.g. "solver.time_limit") on top
// of `cfg`. Used for both the config file and command-line overrides.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto num = [&](const std::string& v) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
  };
  auto flag = [&](const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
  };
  if (key == "experiment.ensemble") {
    cfg.ensemble_name = value;
  } else if (key == "experiment.d_list") {
    cfg.d_list = detail::parse_list<int>(key, value);
  } else if (key == "experiment.n_list") {
    cfg.n_list = detail::parse_list<int>(key, value);
  } else if (key == "experiment.seeds") {
    cfg.seeds = detail::parse_list<std::uint64_t>(key, value);
  } else if (key == "experiment.noise") {
    cfg.noise_scale = num(value);
  } else if (key == "experiment.decay") {
    cfg.decay = num(value);
  } else if (key == "experiment.workers") {
    cfg.workers = static_cast<int>(num(value));
  } else if (key == "experiment.output_dir") {
    cfg.output_dir = value;
  } else if (key == "bigM") {
    if (value == "AUTO" || value == "auto") {
      cfg.big_m.reset();
    } else {
      cfg.big_m = num(value);
    }
  } else if (key == "reg.variant") {
    if (value == "AUTO" || value == "auto") {
      cfg.reg_variant.reset();
    } else {
      cfg.reg_variant = parse_reg_variant(value);
    }
  } else if (key == "reg.lambda") {
    cfg.lambda_base = num(value);
  } else if (key == "reg.eta") {
    cfg.eta_base = num(value);
  } else if (key == "reg.scaling") {
    cfg.reg_scaling = parse_reg_scaling(value);
  } else if (key == "relax.tol_feas") {
    cfg.solver.relax.tol_feas = num(value);
  } else if (key == "relax.tol_bound") {
    cfg.solver.relax.tol_bound = num(value);
  } else if (key == "relax.max_iter_factor") {
    cfg.solver.relax.max_iter_factor = num(value);
  } else if (key == "solver.time_limit") {
    cfg.solver.time_limit = num(value);
  } else if (key == "solver.gap_tolerance") {
    cfg.solver.gap_tolerance = num(value);
  } else if (key == "solver.cut_strategy") {
    cfg.solver.cut_strategy = parse_cut_strategy(value);
  } else if (key == "solver.integrality_tol") {
    cfg.solver.integrality_tol = num(value);
  } else if (key == "solver.node_selection") {
    cfg.solver.node_selection = parse_node_selection(value);
  } else if (key == "solver.branching") {
    if (value != "MOST_FRACTIONAL") throw ConfigError("solver.branching: only MOST_FRACTIONAL is supported");
  } else if (key == "solver.parallel_nodes") {
    cfg.solver.parallel_nodes = static_cast<int>(num(value));
  } else if (key == "solver.node_limit") {
    cfg.solver.node_limit = static_cast<long>(num(value));
  } else if (key == "solver.memory_limit_mb") {
    cfg.solver.memory_limit_mb = num(value);
  } else if (key == "shd.literal") {
    cfg.metrics.shd_literal = flag(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

// INI text: top-level keys (bigM) plus [experiment], [reg], [relax],
// [solver] and [shd] sections.
inline ExperimentConfig parse_experiment_config(std::istream& is, ExperimentConfig cfg = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [k, v] : tree) {
    if (v.empty()) {
      apply_setting(cfg, k, v.data());
      continue;
    }
    for (const auto& [k2, v2] : v) apply_setting(cfg, k + "." + k2, v2.data());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_experiment_config(in, std::move(cfg));
}

// Canonical `key = value` dump of everything that influences results.
inline std::string config_echo(const ExperimentConfig& c) {
  using detail::fmt;
  std::ostringstream os;
  os << "bigM = " << (c.big_m ? fmt(*c.big_m) : "AUTO") << '\n'
     << "[experiment]\n"
     << "ensemble = " << c.ensemble_name << '\n'
     << "d_list = " << detail::join_list(c.d_list) << '\n'
     << "n_list = " << detail::join_list(c.n_list) << '\n'
     << "seeds = " << detail::join_list(c.seeds) << '\n'
     << "noise = " << fmt(c.noise_scale) << '\n'
     << "decay = " << fmt(c.decay) << '\n'
     << "[reg]\n"
     << "variant = " << (c.reg_variant ? to_string(*c.reg_variant) : "AUTO") << '\n'
     << "lambda = " << fmt(c.lambda_base) << '\n'
     << "eta = " << fmt(c.eta_base) << '\n'
     << "scaling = " << to_string(c.reg_scaling) << '\n'
     << "[relax]\n"
     << "tol_feas = " << fmt(c.solver.relax.tol_feas) << '\n'
     << "tol_bound = " << fmt(c.solver.relax.tol_bound) << '\n'
     << "max_iter_factor = " << fmt(c.solver.relax.max_iter_factor) << '\n'
     << "[solver]\n"
     << "time_limit = " << fmt(c.solver.time_limit) << '\n'
     << "gap_tolerance = " << fmt(c.solver.gap_tolerance) << '\n'
     << "cut_strategy = " << to_string(c.solver.cut_strategy) << '\n'
     << "integrality_tol = " << fmt(c.solver.integrality_tol) << '\n'
     << "node_selection = " << to_string(c.solver.node_selection) << '\n'
     << "branching = MOST_FRACTIONAL\n"
     << "parallel_nodes = " << c.solver.parallel_nodes << '\n'
     << "node_limit = " << c.solver.node_limit << '\n'
     << "memory_limit_mb = " << fmt(c.solver.memory_limit_mb) << '\n'
     << "[shd]\n"
     << "literal = " << (c.metrics.shd_literal ? "true" : "false") << '\n';
  return os.str();
}

// 64-bit FNV-1a of the canonical echo, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_echo(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --------------------------------------------------------------- data input

// Header row of variable names, then one row per time step. Errors carry
// 1-based line numbers.
inline Eigen::MatrixXd read_series_csv(std::istream& in, std::vector<std::string>& names, const std::string& label) {
  std::string line;
  int lineno = 0;
  names.clear();
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(s);
    while (std::getline(is, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      const auto last = cell.find_last_not_of(" \t\r");
      cell.erase(last == std::string::npos ? 0 : last + 1);
      cells.push_back(cell);
    }
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    names = split(line);
    break;
  }
  if (names.empty()) throw DataError(label + ": empty file, expected a header row");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != names.size()) {
      throw DataError(label + ":" + std::to_string(lineno) + ": ragged row, expected " + std::to_string(names.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[k], &used);
        if (used != cells[k].size() || !std::isfinite(v)) throw std::invalid_argument(cells[k]);
        row.push_back(v);
      } catch (const std::exception&) {
        throw DataError(label + ":" + std::to_string(lineno) + ": non-numeric cell '" + cells[k] + "' in column '" +
                        names[k] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd series(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < names.size(); ++k) series(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  }
  return series;
}

inline TimeSeriesPanel load_timeseries_csv(const std::string& path, int p) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> names;
  const Eigen::MatrixXd series = read_series_csv(in, names, path);
  if (series.rows() <= p) {
    throw DataError(path + ": too few rows (" + std::to_string(series.rows()) + " data rows, need at least " +
                    std::to_string(p + 1) + " for p = " + std::to_string(p) + ")");
  }
  if (names.size() < 2) throw DataError(path + ": need at least 2 variables");
  return lag_stack(series, p, names);
}

// ---------------------------------------------------------------------- fit

struct FitResult {
  DbnGraph graph;
  SolveReport report;
  RegMode reg;
  std::vector<std::pair<RegMode, double>> tried;  // (reg, final mip gap)
};

// Builds the instance and solves it. With a non-empty `grid` of (lambda,
// eta) pairs every pair is solved and the one with the smallest final MIP
// gap wins (first on ties); `reg` then only supplies the variant.
inline FitResult fit(const TimeSeriesPanel& panel, const SolverConfig& cfg, const RegMode& reg,
                     std::optional<double> big_m = std::nullopt,
                     const std::vector<std::pair<double, double>>& grid = {}) {
  std::vector<RegMode> modes;
  if (grid.empty()) {
    modes.push_back(reg);
  } else {
    for (const auto& [l, e] : grid) modes.push_back({reg.variant, l, e});
  }
  FitResult best;
  bool have = false;
  for (const RegMode& m : modes) {
    const MiqpInstance inst = build_instance(panel, m, big_m);
    SolveReport rep = solve(inst, cfg);
    best.tried.emplace_back(m, rep.mip_gap);
    if (!have || rep.mip_gap < best.report.mip_gap) {
      best.graph = rep.incumbent;
      best.report = std::move(rep);
      best.reg = m;
      have = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------- benchmark

struct BenchRow {
  std::uint64_t seed = 0;
  int d = 0;
  int n = 0;
  std::string model;
  std::string method = "ExDBN";
  MetricReport metrics;
  double wall_time = 0.0;
  double mip_gap = 0.0;
  std::size_t cuts_added = 0;
  std::string config_hash;
  std::string status;
};

inline const char* bench_header() {
  return "seed,d,n,model,method,delta,shd,precision,recall,f1,g_score,sigma_p,frobenius,wall_time,mip_gap,cuts_added,"
         "config_hash,status";
}

inline std::string to_csv(const BenchRow& r) {
  using detail::fmt;
  const auto& m = r.metrics;
  std::ostringstream os;
  os << r.seed << ',' << r.d << ',' << r.n << ',' << r.model << ',' << r.method << ',' << fmt(m.delta_used) << ','
     << fmt(m.shd) << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ',' << fmt(m.f1) << ',' << fmt(m.g_score)
     << ',' << fmt(m.sigma_p) << ',' << fmt(m.frobenius) << ',' << fmt(r.wall_time) << ',' << fmt(r.mip_gap) << ','
     << r.cuts_added << ',' << r.config_hash << ',' << r.status;
  return os.str();
}

inline BenchRow parse_bench_row(const std::string& line) {
  std::vector<std::string> c;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) c.push_back(cell);
  if (c.size() != 18) throw DataError("rows.csv: malformed row '" + line + "'");
  BenchRow r;
  try {
    r.seed = std::stoull(c[0]);
    r.d = std::stoi(c[1]);
    r.n = std::stoi(c[2]);
    r.model = c[3];
    r.method = c[4];
    r.metrics.delta_used = std::stod(c[5]);
    r.metrics.shd = std::stod(c[6]);
    r.metrics.precision = std::stod(c[7]);
    r.metrics.recall = std::stod(c[8]);
    r.metrics.f1 = std::stod(c[9]);
    r.metrics.g_score = std::stod(c[10]);
    r.metrics.sigma_p = std::stod(c[11]);
    r.metrics.frobenius = std::stod(c[12]);
    r.wall_time = std::stod(c[13]);
    r.mip_gap = std::stod(c[14]);
    r.cuts_added = std::stoull(c[15]);
  } catch (const std::exception&) {
    throw DataError("rows.csv: malformed row '" + line + "'");
  }
  r.config_hash = c[16];
  r.status = c[17];
  return r;
}

// One (d, n, seed) cell end to end.
inline BenchRow run_cell(const ExperimentConfig& cfg, const EnsembleSpec& ens, int d, int n, std::uint64_t seed,
                         const std::string& hash) {
  BenchRow row;
  row.seed = seed;
  row.d = d;
  row.n = n;
  row.model = ens.name;
  row.config_hash = hash;
  try {
    GenConfig g;
    g.d = d;
    g.p = ens.p();
    g.intra_model = ens.model;
    g.intra_edge_ratio = ens.intra_ratio;
    g.inter_edge_ratios = ens.inter_ratios;
    g.decay = cfg.decay;
    g.seed = seed;
    g.n_samples = n;
    g.noise.scale = cfg.noise_scale;
    const StableTruth truth = generate_stable_ground_truth(g);
    const TimeSeriesPanel panel = simulate(truth.graph, g);
    const RegMode reg = scale_regularization(panel, cfg.base_reg(n), cfg.reg_scaling);
    const MiqpInstance inst = build_instance(panel, reg, cfg.big_m);
    const SolveReport rep = solve(inst, cfg.solver);
    row.wall_time = rep.wall_time;
    row.mip_gap = rep.mip_gap;
    row.cuts_added = rep.cuts_added;
    row.status = to_string(rep.status);
    if (!rep.has_incumbent) {
      row.status = "NO_INCUMBENT";
      return row;
    }
    row.metrics = best_delta_sweep(rep.incumbent, truth.graph, panel, default_delta_grid(), cfg.metrics).second;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    row.status = "ERROR: " + msg;
  }
  return row;
}

struct AggregateLine {
  std::string model;
  int d = 0;
  int n = 0;
  int count = 0;
  std::map<std::string, std::pair<double, double>> values;  // metric -> (mean, worst)
};

// Metric name, accessor, and whether larger is better (worst = min).
inline const std::vector<std::tuple<std::string, double (*)(const BenchRow&), bool>>& aggregate_metrics() {
  static const std::vector<std::tuple<std::string, double (*)(const BenchRow&), bool>> m{
      {"shd", [](const BenchRow& r) { return r.metrics.shd; }, false},
      {"precision", [](const BenchRow& r) { return r.metrics.precision; }, true},
      {"recall", [](const BenchRow& r) { return r.metrics.recall; }, true},
      {"f1", [](const BenchRow& r) { return r.metrics.f1; }, true},
      {"g_score", [](const BenchRow& r) { return r.metrics.g_score; }, true},
      {"sigma_p", [](const BenchRow& r) { return r.metrics.sigma_p; }, false},
      {"frobenius", [](const BenchRow& r) { return r.metrics.frobenius; }, false},
      {"wall_time", [](const BenchRow& r) { return r.wall_time; }, false},
      {"mip_gap", [](const BenchRow& r) { return r.mip_gap; }, false},
      {"cuts_added", [](const BenchRow& r) { return static_cast<double>(r.cuts_added); }, false},
  };
  return m;
}

// Mean and worst case per (model, d, n), over rows of one config hash that
// completed (status OPTIMAL or TIME_LIMIT).
inline std::vector<AggregateLine> aggregate(const std::vector<BenchRow>& rows) {
  std::map<std::tuple<std::string, int, int>, std::vector<const BenchRow*>> groups;
  for (const auto& r : rows) {
    if (r.status == "OPTIMAL" || r.status == "TIME_LIMIT") groups[{r.model, r.d, r.n}].push_back(&r);
  }
  std::vector<AggregateLine> out;
  for (const auto& [key, rs] : groups) {
    AggregateLine a;
    std::tie(a.model, a.d, a.n) = key;
    a.count = static_cast<int>(rs.size());
    for (const auto& [name, get, higher_better] : aggregate_metrics()) {
      double sum = 0.0;
      double worst = get(*rs.front());
      for (const BenchRow* r : rs) {
        const double v = get(*r);
        sum += v;
        worst = higher_better ? std::min(worst, v) : std::max(worst, v);
      }
      a.values[name] = {sum / a.count, worst};
    }
    out.push_back(std::move(a));
  }
  return out;
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateLine>& lines) {
  os << "model,d,n,count";
  for (const auto& m : aggregate_metrics()) os << ',' << std::get<0>(m) << "_mean," << std::get<0>(m) << "_worst";
  os << '\n';
  for (const auto& a : lines) {
    os << a.model << ',' << a.d << ',' << a.n << ',' << a.count;
    for (const auto& m : aggregate_metrics()) {
      const auto& [mean, worst] = a.values.at(std::get<0>(m));
      os << ',' << detail::fmt(mean) << ',' << detail::fmt(worst);
    }
    os << '\n';
  }
}

// Metric vs d, one solid (mean) and one dashed (worst) polyline per n.
inline std::string render_svg(const std::string& title, const std::string& metric,
                              const std::vector<AggregateLine>& lines) {
  const double w = 640, h = 400, left = 60, right = 20, top = 40, bottom = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  std::map<int, std::vector<std::tuple<double, double, double>>> series;
  for (const auto& a : lines) {
    const auto& [mean, worst] = a.values.at(metric);
    series[a.n].emplace_back(a.d, mean, worst);
    xmin = std::min(xmin, static_cast<double>(a.d));
    xmax = std::max(xmax, static_cast<double>(a.d));
    ymin = std::min({ymin, mean, worst});
    ymax = std::max({ymax, mean, worst});
  }
  if (series.empty()) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 1, xmax += 1;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
  auto sy = [&](double y) { return h - bottom - (y - ymin) / (ymax - ymin) * (h - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << title << "</text>\n"
     << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = ymin + (ymax - ymin) * t / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << y << "</text>\n";
  }
  std::set<int> ds;
  for (const auto& a : lines) ds.insert(a.d);
  for (int d : ds) {
    os << "<text x=\"" << sx(d) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"11\">" << d << "</text>\n";
  }
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"12\">d (variables)</text>\n";
  int k = 0;
  for (auto& [n, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* col = colors[k % 6];
    for (int which = 0; which < 2; ++which) {
      os << "<polyline fill=\"none\" stroke=\"" << col << "\"" << (which ? " stroke-dasharray=\"5,4\"" : "")
         << " points=\"";
      for (const auto& pt : pts) os << sx(std::get<0>(pt)) << ',' << sy(which ? std::get<2>(pt) : std::get<1>(pt)) << ' ';
      os << "\"/>\n";
    }
    for (const auto& pt : pts) {
      os << "<circle cx=\"" << sx(std::get<0>(pt)) << "\" cy=\"" << sy(std::get<1>(pt)) << "\" r=\"3\" fill=\"" << col
         << "\"/>\n";
    }
    os << "<text x=\"" << w - right - 4 << "\" y=\"" << top + 14 * (k + 1) << "\" text-anchor=\"end\" "
       << "font-family=\"sans-serif\" font-size=\"11\" fill=\"" << col << "\">n=" << n << " (solid mean, dashed worst)"
       << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

struct ExperimentSummary {
  int cells = 0;
  int computed = 0;
  int skipped = 0;  // already present for this config hash
  bool up_to_date = false;
  std::string config_hash;
};

inline std::vector<BenchRow> read_rows(const std::filesystem::path& path) {
  std::vector<BenchRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  std::getline(in, line);
  if (line != bench_header()) throw DataError(path.string() + ": unexpected header");
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_bench_row(line));
  }
  return rows;
}

// Runs every (d, n, seed) cell not yet recorded for this config hash,
// appends their rows in cell order, then rewrites aggregates and plots.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate();
  const EnsembleSpec ens = parse_ensemble(cfg.ensemble_name);
  const std::string hash = config_hash(cfg);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  const fs::path rows_path = dir / "rows.csv";

  std::vector<BenchRow> existing = read_rows(rows_path);
  std::set<std::tuple<int, int, std::uint64_t>> done;
  for (const auto& r : existing) {
    if (r.config_hash == hash) done.insert({r.d, r.n, r.seed});
  }

  struct Cell {
    int d;
    int n;
    std::uint64_t seed;
  };
  std::vector<Cell> todo;
  ExperimentSummary sum;
  sum.config_hash = hash;
  for (int d : cfg.d_list) {
    for (int n : cfg.n_list) {
      for (auto seed : cfg.seeds) {
        ++sum.cells;
        if (done.count({d, n, seed})) {
          ++sum.skipped;
        } else {
          todo.push_back({d, n, seed});
        }
      }
    }
  }
  sum.up_to_date = todo.empty();

  {
    std::ofstream echo(dir / ("config_" + hash + ".ini"));
    echo << "# config_hash = " << hash << '\n' << config_echo(cfg);
  }

  if (!todo.empty()) {
    const bool fresh = !fs::exists(rows_path);
    std::ofstream out(rows_path, std::ios::app);
    if (!out) throw DataError("cannot write '" + rows_path.string() + "'");
    if (fresh) out << bench_header() << '\n';

    // Workers fill slots; this thread writes them strictly in cell order.
    std::vector<std::optional<BenchRow>> slots(todo.size());
    std::mutex mu;
    std::condition_variable cv;
    std::size_t next_cell = 0;
    auto work = [&] {
      while (true) {
        std::size_t k;
        {
          std::lock_guard g(mu);
          if (next_cell >= todo.size()) return;
          k = next_cell++;
        }
        BenchRow row = run_cell(cfg, ens, todo[k].d, todo[k].n, todo[k].seed, hash);
        {
          std::lock_guard g(mu);
          slots[k] = std::move(row);
        }
        cv.notify_all();
      }
    };
    std::vector<std::thread> pool;
    const int nw = std::min<int>(cfg.workers, static_cast<int>(todo.size()));
    for (int t = 0; t < nw; ++t) pool.emplace_back(work);
    for (std::size_t k = 0; k < todo.size(); ++k) {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return slots[k].has_value(); });
      const BenchRow row = *slots[k];
      lock.unlock();
      out << to_csv(row) << '\n';
      out.flush();
      existing.push_back(row);
      ++sum.computed;
      if (log) {
        *log << "cell d=" << row.d << " n=" << row.n << " seed=" << row.seed << " status=" << row.status
             << " f1=" << row.metrics.f1 << " shd=" << row.metrics.shd << " gap=" << row.mip_gap << '\n';
      }
    }
    for (auto& t : pool) t.join();
  }

  std::vector<BenchRow> mine;
  for (const auto& r : existing) {
    if (r.config_hash == hash) mine.push_back(r);
  }
  const auto agg = aggregate(mine);
  {
    std::ofstream out(dir / "aggregate.csv");
    write_aggregate_csv(out, agg);
  }
  for (const auto& m : aggregate_metrics()) {
    const std::string& name = std::get<0>(m);
    std::ofstream svg(dir / (ens.name + "_" + name + ".svg"));
    svg << render_svg(ens.name + ": " + (name == "g_score" ? "g_score (sqrt(P*R))" : name) + " vs d", name, agg);
    std::ofstream data(dir / (ens.name + "_" + name + ".csv"));
    data << "d,n,mean,worst\n";
    for (const auto& a : agg) {
      const auto& [mean, worst] = a.values.at(name);
      data << a.d << ',' << a.n << ',' << detail::fmt(mean) << ',' << detail::fmt(worst) << '\n';
    }
  }
  if (log && sum.up_to_date) *log << "up to date: all " << sum.cells << " cells present for config " << hash << '\n';
  return sum;
}

}  // namespace exdbn
