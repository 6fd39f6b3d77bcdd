// Minimal end-to-end use of the library: simulate a small DBN, learn it back
// exactly, and compare.

#include <iostream>

#include "exdbn/exdbn.hpp"

int main() {
  exdbn::GenConfig gen;
  gen.d = 5;
  gen.p = 1;
  gen.intra_edge_ratio = 1.0;
  gen.inter_edge_ratios = {1.0};
  gen.n_samples = 500;
  gen.seed = 7;

  const exdbn::StableTruth truth = exdbn::generate_stable_ground_truth(gen);
  const exdbn::TimeSeriesPanel panel = exdbn::simulate(truth.graph, gen);

  const exdbn::RegMode reg = exdbn::scale_regularization(panel, {exdbn::RegVariant::kL2, 0.05, 0.05},
                                                         exdbn::RegScaling::kSqrtN);
  const exdbn::MiqpInstance inst = exdbn::build_instance(panel, reg);

  exdbn::SolverConfig cfg;
  cfg.time_limit = 60.0;
  const exdbn::SolveReport rep = exdbn::solve(inst, cfg);

  std::cout << "status " << exdbn::to_string(rep.status) << ", objective " << rep.incumbent_objective << ", gap "
            << rep.mip_gap << ", nodes " << rep.nodes_explored << ", cuts " << rep.cuts_added << "\n";
  if (!rep.has_incumbent) return 1;

  const auto [delta, m] = exdbn::best_delta_sweep(rep.incumbent, truth.graph, panel, exdbn::default_delta_grid());
  std::cout << "best delta " << delta << ": SHD " << m.shd << ", F1 " << m.f1 << "\n\nestimated W\n"
            << exdbn::threshold(rep.incumbent, delta).w << "\n\ntrue W\n"
            << truth.graph.w << "\n";
  return 0;
}
