// SPDX-License-Identifier: Apache-2.0
//
// Minimal library-level walkthrough of the reduction loop: sample demands,
// learn commitment predictors, then compare the full solve against the
// prediction-guided reductions on one held-out sample.

#include <cstdio>
#include <string>

#include "uclab/harness.hpp"

int main(int argc, char** argv) {
  std::string path = argc > 1 ? argv[1] : std::string(UCLAB_DATA_DIR) + "/case6.json";
  auto system = uclab::load_system(path);

  uclab::NoiseParams noise;
  noise.master_seed = 11;
  auto ds = uclab::generate_dataset(system, 12, noise);
  ds = uclab::shuffle_split(std::move(ds), 0.75, 11);
  auto ens = uclab::train_ensemble(ds);
  ens.threshold = uclab::tune_threshold(ens, ds, uclab::default_threshold_grid());
  std::printf("trained on %zu samples, threshold %.2f\n", ds.split.train_ids.size(),
              ens.threshold);

  const auto& sample = ds.by_id(ds.split.test_ids.front());
  auto pred = uclab::predict(ens, sample.demand);
  for (auto proc : {uclab::ProcedureId::B1, uclab::ProcedureId::B2, uclab::ProcedureId::P1,
                    uclab::ProcedureId::P2}) {
    auto out = uclab::run_procedure(proc, system, sample.demand, pred);
    std::printf("%-2s %-18s fixed %3d u + %3d v, %3d binaries left, %lld nodes",
                uclab::to_string(proc), uclab::to_string(out.status), out.n_fixed_u,
                out.n_fixed_v, out.stats.n_binary_vars, out.nodes_explored);
    if (out.has_objective) std::printf(", objective %.2f", out.objective);
    std::printf("\n");
  }
  return 0;
}
