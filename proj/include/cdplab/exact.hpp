#pragma once

#include <vector>

#include "cdplab/environments.hpp"
#include "cdplab/function_class.hpp"
#include "cdplab/types.hpp"

namespace cdplab {

// Flattened layered chain over "atoms" (the environment's Markov sufficient
// statistic per level), each mapped to the context core it presents. For an
// MDP atoms are states; for the POMDP-like model atoms are (hidden, obs)
// pairs. All exact dynamic programming runs on this one representation.
struct ExactModel {
  int horizon = 0;
  int action_count = 0;
  std::vector<int> atoms;                   // per level 1..H+1
  std::vector<int> cores;                   // context cores per level 1..H+1
  std::vector<std::vector<int>> atom_core;  // per level: atom -> core
  std::vector<double> init;                 // level-1 atom distribution
  std::vector<std::vector<double>> trans;   // [h-1]: (atom*K + a) x atoms_{h+1}
  std::vector<std::vector<double>> reward;  // [h-1]: atom*K + a (means)

  int atom_count(int level) const { return atoms[static_cast<std::size_t>(level - 1)]; }
};

// Throws CapabilityError when the environment is flagged sampling-only.
ExactModel build_exact_model(const Env& env);

// Forward occupancy over level-`level` atoms with a_{1:level-1} ~ policy.
std::vector<double> atom_occupancy(const ExactModel& m, const Policy& policy, int level);

// Occupancy aggregated onto context cores.
std::vector<double> core_occupancy(const ExactModel& m, const Policy& policy, int level);

// Exact V^pi: occupancy x reward summed over levels.
double exact_value(const ExactModel& m, const Policy& policy);

// Exact E[f(x_1, pi_f(x_1))].
double exact_initial_value(const ExactModel& m, const Hypothesis& f);

// Per-atom conditional Bellman error at level h with a_{h:h+1} ~ f.policy:
// g(x_h) - E[r_h] - E[g(x_{h+1})].
std::vector<double> atom_bellman_errors(const ExactModel& m, const Hypothesis& f, int h);

// Exact average Bellman error E(f, rollin, h).
double exact_bellman_error(const ExactModel& m, const Hypothesis& f, const Policy& rollin,
                           int h);

}  // namespace cdplab
