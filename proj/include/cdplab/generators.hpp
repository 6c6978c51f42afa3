#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cdplab/environments.hpp"
#include "cdplab/function_class.hpp"

namespace cdplab {

// Desk-scale construction caps; overridable per call site.
struct GeneratorCaps {
  int max_states = 16;
  int max_observations = 64;
  int max_class_size = 256;
  int max_tree_leaves = 4096;
};

// Uniform-size layered MDP: flat-Dirichlet transition rows, reward means
// uniform in [0, 1/H].
TabularMDP make_random_mdp(int states, int actions, int horizon, std::uint64_t seed,
                           RewardNoise noise = RewardNoise::None);

// Transition tables built as products of row-stochastic Dirichlet factors of
// inner dimension latent_dim (<= states).
LowRankMDP make_low_rank_mdp(int states, int actions, int horizon, int latent_dim,
                             std::uint64_t seed);

// Random POMDP-like model: Dirichlet emissions and (hidden, obs, action)
// transitions, reward means uniform in [0, 1/H].
ReactivePOMDP make_reactive_pomdp(int hidden_states, int observations, int actions,
                                  int horizon, std::uint64_t seed);

// Grid-world preset: few hidden cells, many observations per cell, slippy
// four-direction moves, goal reward split evenly across levels.
ReactivePOMDP make_gridworld_pomdp(int width, int height, int obs_per_cell, int horizon,
                                   std::uint64_t seed, double slip = 0.1);

// States-as-observations embedding with identity emission; the trajectory
// distribution matches the source MDP exactly.
ReactivePOMDP embed_mdp_as_pomdp(const TabularMDP& mdp);

// Complete K-ary tree of depth H with Bernoulli leaf rewards: mean 1/2
// everywhere except the distinguished leaf at 1/2 + gap. leaf_index encodes
// the H-digit base-K action path to that leaf.
TabularMDP make_tree_lower_bound(int actions, int horizon, double gap, int leaf_index,
                                 const GeneratorCaps& caps = {});

// One member per leaf placement: the optimal action-value function of the
// corresponding tree instance. Size K^H.
FunctionClass tree_qstar_class(int actions, int horizon, double gap,
                               const GeneratorCaps& caps = {});

// Waiting/good/bad chain with per-level bandit states and gap tau; reward 1 is
// paid at level H in the good state.
TabularMDP make_bandit_chain(int states_per_level, int horizon, int actions, double tau,
                             const std::optional<std::vector<std::vector<int>>>& best_actions,
                             std::uint64_t seed);

// Per-bandit-state visit probability at a given level (policy independent).
double bandit_chain_visit_probability(int states_per_level, int horizon, int level);
// Closed-form optimal value of the chain.
double bandit_chain_optimal_value(int horizon, double tau);

// Optimal action-value function by backward dynamic programming. For the
// POMDP-like model this is defined only when transitions and rewards do not
// depend on the hidden state (the observations are then Markovian); otherwise
// throws std::runtime_error.
QFunction qstar(const Env& env);

// Member 0 is Q*; remaining members alternate clipped perturbations of Q* and
// fresh random tables. The Q*-index marker is set.
FunctionClass realizable_class(const Env& env, int size, double perturbation_scale,
                               std::uint64_t seed, const GeneratorCaps& caps = {});

// Independent uniform tables in [0,1]; no marker.
FunctionClass random_class(const Env& env, int size, std::uint64_t seed,
                           const GeneratorCaps& caps = {});

}  // namespace cdplab
