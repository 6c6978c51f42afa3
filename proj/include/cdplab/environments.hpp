#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "cdplab/rng.hpp"
#include "cdplab/types.hpp"

namespace cdplab {

enum class RewardNoise { None, Bernoulli };

// Raised when an exact-expectation query reaches a sampling-only environment.
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Episodic layered MDP with states as contexts. Level h in 1..H+1 has
// cores[h-1] states; transitions and rewards are defined for levels 1..H.
struct TabularMDP {
  int horizon = 0;       // H
  int action_count = 0;  // K
  std::vector<int> cores;  // size H+1

  std::vector<double> init;  // distribution over level-1 states
  // trans[h-1]: row (s*K + a), columns = states of level h+1, row-stochastic
  std::vector<std::vector<double>> trans;
  // reward_mean[h-1]: indexed s*K + a
  std::vector<std::vector<double>> reward_mean;

  RewardNoise reward_noise = RewardNoise::None;
  // Bernoulli mode: realized reward at level h is {0, reward_scale[h-1]} with
  // the stored mean preserved. Requires mean <= scale.
  std::vector<double> reward_scale;

  bool sampling_only = false;  // capability flag: hides the explicit dynamics

  int states(int level) const { return cores[static_cast<std::size_t>(level - 1)]; }
  double transition(int level, int s, int a, int next) const {
    return trans[static_cast<std::size_t>(level - 1)]
                [static_cast<std::size_t>((s * action_count + a) * states(level + 1) + next)];
  }
};

// Tabular MDP whose per-level transition matrix is the product of two
// retained row-stochastic factors: (S*K) x M times M x S'.
struct LowRankMDP {
  TabularMDP mdp;      // product dynamics
  int latent_dim = 0;  // M
  std::vector<std::vector<double>> factor_sa;    // [h-1]: (s*K + a) x M
  std::vector<std::vector<double>> factor_next;  // [h-1]: m x S_{h+1}
};

// POMDP-like layered model in which transition and reward may depend on the
// current observation as well as the hidden state. Contexts are (o, h).
struct ReactivePOMDP {
  int horizon = 0;
  int action_count = 0;
  std::vector<int> hidden_counts;  // size H+1
  std::vector<int> obs_counts;     // size H+1 (= context cores per level)

  std::vector<double> init_hidden;  // distribution over level-1 hidden states
  // emission[h-1]: row z, columns = observations of level h; levels 1..H+1
  std::vector<std::vector<double>> emission;
  // trans[h-1]: row ((z*O_h + o)*K + a), columns = hidden states of level h+1
  std::vector<std::vector<double>> trans;
  // reward_mean[h-1]: indexed (z*O_h + o)*K + a
  std::vector<std::vector<double>> reward_mean;

  RewardNoise reward_noise = RewardNoise::None;
  std::vector<double> reward_scale;

  bool sampling_only = false;

  int hidden(int level) const { return hidden_counts[static_cast<std::size_t>(level - 1)]; }
  int observations(int level) const { return obs_counts[static_cast<std::size_t>(level - 1)]; }
};

using Env = std::variant<TabularMDP, LowRankMDP, ReactivePOMDP>;

int horizon(const Env& env);
int action_count(const Env& env);
int core_count(const Env& env, int level);          // context cores at level 1..H+1
std::vector<int> core_counts(const Env& env);       // all H+1 levels
bool oracle_capable(const Env& env);
const TabularMDP* as_tabular(const Env& env);       // LowRankMDP unwraps to its MDP

// Action source used while rolling an episode forward.
using ActionChooser = std::function<int(int level, int core, Rng& rng)>;

Trajectory sample_episode(const Env& env, const ActionChooser& choose, Rng& rng);
Trajectory sample_episode(const Env& env, const Policy& policy, Rng& rng);

// Follows base_policy except that the single action at deviate_level is drawn
// uniformly from the K actions. The full H-step trajectory is returned.
Trajectory sample_episode_with_deviation(const Env& env, const Policy& base_policy,
                                         int deviate_level, Rng& rng);

// Mean of episode reward sums over n_episodes independent rollouts.
double policy_value_mc(const Env& env, const Policy& policy, long long n_episodes, Rng& rng);

// Structural audit: distribution rows normalized, rewards nonnegative, and the
// worst-case realizable reward path sum bounded by 1. Returns violations
// instead of raising.
ValidationReport validate_environment(const Env& env);

// Raises std::runtime_error if the trajectory violates its invariants or the
// reward boundedness assumption (nonnegative steps, sum <= 1).
void check_trajectory(const Env& env, const Trajectory& traj);

}  // namespace cdplab
