// SPDX-License-Identifier: Apache-2.0
//
// Loads a grid system, solves the commitment problem at base demand and
// prints the ON/OFF schedule. Pass a system JSON path, or rely on the
// bundled 6-bus case.

#include <cstdio>
#include <string>

#include "uclab/mip.hpp"
#include "uclab/scuc.hpp"

int main(int argc, char** argv) {
  std::string path = argc > 1 ? argv[1] : std::string(UCLAB_DATA_DIR) + "/case6.json";
  auto system = uclab::load_system(path);
  auto demand = uclab::base_profile(system);
  auto pr = uclab::build_scuc(system, demand);
  auto st = uclab::problem_stats(pr);
  std::printf("%s: %d columns (%d binary), %d constraints\n", path.c_str(),
              st.n_linear_vars + st.n_binary_vars, st.n_binary_vars, st.n_constraints);

  auto res = uclab::solve_mip(pr);
  std::printf("status %s, objective %.2f, %lld nodes, gap %.4f\n",
              uclab::to_string(res.status), res.incumbent.objective, res.nodes_explored,
              res.achieved_gap);
  if (!res.has_incumbent) return 1;

  auto sol = uclab::expand_solution(pr, res.incumbent.values);
  for (int g = 0; g < static_cast<int>(system.generators.size()); ++g) {
    std::printf("g%-3d ", system.generators[g].id);
    for (int t = 0; t < system.n_periods; ++t)
      std::putchar(sol.commit[g][t] == 1 ? '#' : '.');
    double energy = 0.0;
    for (int t = 0; t < system.n_periods; ++t) energy += sol.dispatch[g][t];
    std::printf("  %8.1f MWh\n", energy);
  }
  return 0;
}
