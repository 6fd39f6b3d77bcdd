// exdbn command-line tool: generate, solve, benchmark, score (+ hidden oracle).
//
// Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 solver failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "exdbn/exdbn.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kSolver = 3 };

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Layered settings: defaults < config file < flags (in command-line order).
struct Layers {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "INI config file");
    cmd->add_option_function<std::vector<std::string>>(
           "--set",
           [this](const std::vector<std::string>& kvs) {
             for (const auto& kv : kvs) {
               const auto eq = kv.find('=');
               if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
               overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
             }
           },
           "Override any config key (key=value)")
        ->type_name("KEY=VALUE");
    for (const auto& key : exdbn::setting_keys()) {
      cmd->add_option_function<std::string>(
             "--" + key, [this, key](const std::string& v) { overrides.emplace_back(key, v); }, "Config key " + key)
          ->group("Config keys");
    }
  }

  exdbn::ExperimentConfig resolve() const {
    exdbn::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = exdbn::load_experiment_config(config_path, cfg);
    for (const auto& [k, v] : overrides) exdbn::apply_setting(cfg, k, v);
    cfg.validate();
    return cfg;
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw exdbn::DataError("cannot write '" + path + "'");
  out << text;
}

std::string graph_text(const exdbn::DbnGraph& g) {
  std::ostringstream os;
  exdbn::write_graph(os, g);
  return os.str();
}

exdbn::DbnGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw exdbn::DataError("cannot open '" + path + "'");
  try {
    return exdbn::read_graph(in);
  } catch (const exdbn::DataError& e) {
    throw exdbn::DataError(path + ": " + e.what());
  }
}

// "l:e,l:e,..."
std::vector<std::pair<double, double>> parse_grid(const std::string& text) {
  std::vector<std::pair<double, double>> grid;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument(item);
      grid.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw exdbn::ConfigError("--grid: bad entry '" + item + "' (expected lambda:eta)");
    }
  }
  if (grid.empty()) throw exdbn::ConfigError("--grid: empty");
  return grid;
}

void print_metrics(std::ostream& os, const exdbn::MetricReport& m) {
  os.precision(17);
  os << "delta=" << m.delta_used << '\n'
     << "shd=" << m.shd << '\n'
     << "precision=" << m.precision << '\n'
     << "recall=" << m.recall << '\n'
     << "f1=" << m.f1 << '\n'
     << "g_score (sqrt(P*R))=" << m.g_score << '\n'
     << "sigma_p=" << m.sigma_p << '\n'
     << "frobenius=" << m.frobenius << '\n'
     << "intra.tp=" << m.intra.tp << " intra.fp=" << m.intra.fp << " intra.fn=" << m.intra.fn << '\n'
     << "inter.tp=" << m.inter.tp << " inter.fp=" << m.inter.fp << " inter.fn=" << m.inter.fn << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact dynamic Bayesian network structure learning (branch-and-bound with lazy cycle cuts)"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Draw a ground-truth DBN and simulate a time series");
  std::string g_ensemble = "ER3-1", g_csv = "data.csv", g_truth = "truth.graph";
  int g_d = 5, g_n = 500;
  std::uint64_t g_seed = 0;
  double g_noise = 1.0, g_decay = 1.0;
  bool g_no_redraw = false;
  gen->add_option("--ensemble", g_ensemble, "Ensemble name, e.g. ER3-1, SF2-1-1")->capture_default_str();
  gen->add_option("-d,--d", g_d, "Number of variables")->capture_default_str();
  gen->add_option("-n,--n", g_n, "Number of samples (rows after lag stacking)")->capture_default_str();
  gen->add_option("--seed", g_seed, "Seed")->capture_default_str();
  gen->add_option("--noise", g_noise, "Gaussian noise standard deviation")->capture_default_str();
  gen->add_option("--decay", g_decay, "Lag decay (>= 1)")->capture_default_str();
  gen->add_option("--csv", g_csv, "Output CSV path")->capture_default_str();
  gen->add_option("--truth", g_truth, "Output ground-truth graph path")->capture_default_str();
  gen->add_flag("--no-redraw", g_no_redraw, "Fail on an explosive draw instead of redrawing");

  // solve
  auto* sol = app.add_subcommand("solve", "Learn a DBN from a CSV time series");
  Layers s_layers;
  std::string s_data, s_out, s_report, s_grid;
  int s_p = 1;
  s_layers.attach(sol);
  sol->add_option("--data", s_data, "Input CSV (header of names, one time step per row)")->required();
  sol->add_option("-p,--p", s_p, "Autoregressive order")->capture_default_str();
  sol->add_option("-o,--out", s_out, "Output graph path (default: stdout)");
  sol->add_option("--report", s_report, "Output report path (default: stderr)");
  sol->add_option("--grid", s_grid, "lambda:eta pairs; the smallest final MIP gap wins");

  // benchmark
  auto* ben = app.add_subcommand("benchmark", "Run an experiment grid and write rows, aggregates and plots");
  Layers b_layers;
  b_layers.attach(ben);

  // score
  auto* sco = app.add_subcommand("score", "Compare an estimated graph with the truth");
  std::string c_est, c_truth, c_data;
  std::optional<double> c_delta;
  bool c_literal = false;
  sco->add_option("--est", c_est, "Estimated graph")->required();
  sco->add_option("--truth", c_truth, "Ground-truth graph")->required();
  sco->add_option("--data", c_data, "CSV the estimate was learned from (for sigma_p)")->required();
  sco->add_option("--delta", c_delta, "Fixed threshold (default: best-F1 sweep)");
  sco->add_flag("--shd-literal", c_literal, "Reversal costs 1.5 instead of 1");

  // oracle (debug; hidden)
  auto* ora = app.add_subcommand("oracle", "Brute-force optimum for tiny instances");
  ora->group("");
  Layers o_layers;
  std::string o_data;
  int o_p = 1;
  o_layers.attach(ora);
  ora->add_option("--data", o_data, "Input CSV")->required();
  ora->add_option("-p,--p", o_p, "Autoregressive order")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      const exdbn::EnsembleSpec ens = exdbn::parse_ensemble(g_ensemble);
      exdbn::GenConfig g;
      g.d = g_d;
      g.p = ens.p();
      g.intra_model = ens.model;
      g.intra_edge_ratio = ens.intra_ratio;
      g.inter_edge_ratios = ens.inter_ratios;
      g.decay = g_decay;
      g.seed = g_seed;
      g.n_samples = g_n;
      g.noise.scale = g_noise;
      try {
        g.validate();
      } catch (const std::invalid_argument& e) {
        throw exdbn::ConfigError(e.what());
      }
      exdbn::DbnGraph truth;
      if (g_no_redraw) {
        truth = exdbn::generate_ground_truth(g);
      } else {
        const auto st = exdbn::generate_stable_ground_truth(g);
        truth = st.graph;
        std::cerr << "draws=" << st.attempts << " radius=" << st.radius << '\n';
      }
      const auto trace = exdbn::simulate_trace(truth, g);
      std::vector<std::string> names;
      for (int j = 0; j < g.d; ++j) names.push_back("x" + std::to_string(j + 1));
      std::ostringstream csv;
      exdbn::write_series_csv(csv, trace.series, names);
      write_file(g_csv, csv.str());
      write_file(g_truth, graph_text(truth));
      std::cerr << "wrote " << g_csv << " (" << trace.series.rows() << " rows) and " << g_truth << '\n';
      return kOk;
    }

    if (sol->parsed()) {
      const exdbn::ExperimentConfig cfg = s_layers.resolve();
      const exdbn::TimeSeriesPanel panel = exdbn::load_timeseries_csv(s_data, s_p);
      const exdbn::RegMode base = cfg.base_reg(panel.n);
      exdbn::FitResult fit;
      if (s_grid.empty()) {
        fit = exdbn::fit(panel, cfg.solver, exdbn::scale_regularization(panel, base, cfg.reg_scaling), cfg.big_m);
      } else {
        // Grid entries are base coefficients, scaled like the single-shot path.
        std::vector<std::pair<double, double>> grid;
        for (const auto& [l, e] : parse_grid(s_grid)) {
          const auto r = exdbn::scale_regularization(panel, {base.variant, l, e}, cfg.reg_scaling);
          grid.emplace_back(r.lambda, r.eta);
        }
        fit = exdbn::fit(panel, cfg.solver, base, cfg.big_m, grid);
      }
      const auto& rep = fit.report;
      std::string report = rep.to_text();
      for (const auto& [reg, gap] : fit.tried) {
        std::ostringstream os;
        os.precision(17);
        os << "grid.lambda=" << reg.lambda << " grid.eta=" << reg.eta << " grid.mip_gap=" << gap << '\n';
        report += os.str();
      }
      if (s_report.empty()) {
        std::cerr << report;
      } else {
        write_file(s_report, report);
      }
      if (rep.status == exdbn::SolveStatus::kInfeasibleConfig || !rep.has_incumbent) {
        throw SolverFailure("no feasible graph found (status " + exdbn::to_string(rep.status) + ")");
      }
      if (s_out.empty()) {
        std::cout << graph_text(fit.graph);
      } else {
        write_file(s_out, graph_text(fit.graph));
      }
      return kOk;
    }

    if (ben->parsed()) {
      const exdbn::ExperimentConfig cfg = b_layers.resolve();
      const auto sum = exdbn::run_experiment(cfg, &std::cerr);
      std::cout << "config_hash=" << sum.config_hash << " cells=" << sum.cells << " computed=" << sum.computed
                << " skipped=" << sum.skipped << (sum.up_to_date ? " (up to date)" : "") << '\n';
      return kOk;
    }

    if (sco->parsed()) {
      const exdbn::DbnGraph est = load_graph(c_est);
      const exdbn::DbnGraph truth = load_graph(c_truth);
      exdbn::check_same_shape(est, truth);
      const exdbn::TimeSeriesPanel panel = exdbn::load_timeseries_csv(c_data, truth.p());
      if (panel.d != truth.d()) throw exdbn::DataError(c_data + ": variable count differs from the graphs");
      exdbn::MetricOptions opt;
      opt.shd_literal = c_literal;
      exdbn::MetricReport m;
      if (c_delta) {
        if (!(*c_delta >= 0.0)) throw exdbn::ConfigError("--delta must be nonnegative");
        m = exdbn::evaluate(exdbn::threshold(est, *c_delta), truth, panel, opt);
        m.delta_used = *c_delta;
      } else {
        m = exdbn::best_delta_sweep(est, truth, panel, exdbn::default_delta_grid(), opt).second;
      }
      print_metrics(std::cout, m);
      return kOk;
    }

    if (ora->parsed()) {
      const exdbn::ExperimentConfig cfg = o_layers.resolve();
      const exdbn::TimeSeriesPanel panel = exdbn::load_timeseries_csv(o_data, o_p);
      const exdbn::RegMode reg = exdbn::scale_regularization(panel, cfg.base_reg(panel.n), cfg.reg_scaling);
      const exdbn::MiqpInstance inst = exdbn::build_instance(panel, reg, cfg.big_m);
      const auto res = exdbn::exhaustive_min(inst);
      std::cout.precision(17);
      std::cout << "best_objective=" << res.best_objective << '\n'
                << "supports_evaluated=" << res.supports_evaluated << '\n'
                << graph_text(res.best_graph);
      return kOk;
    }
  } catch (const exdbn::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const exdbn::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const exdbn::GenerationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const SolverFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolver;
  }
  return kUsage;
}
