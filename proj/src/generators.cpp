#include "cdplab/generators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cdplab/exact.hpp"

namespace cdplab {

namespace {

void require(bool cond, const char* message) {
  if (!cond) throw std::invalid_argument(message);
}

std::vector<int> uniform_levels(int count, int horizon) {
  return std::vector<int>(static_cast<std::size_t>(horizon + 1), count);
}

long long checked_pow(int base, int exponent, long long cap) {
  long long v = 1;
  for (int i = 0; i < exponent; ++i) {
    v *= base;
    if (v > cap) {
      std::ostringstream msg;
      msg << "tree size " << base << "^" << exponent << " exceeds the configured cap " << cap;
      throw std::length_error(msg.str());
    }
  }
  return v;
}

}  // namespace

TabularMDP make_random_mdp(int states, int actions, int horizon, std::uint64_t seed,
                           RewardNoise noise) {
  require(states >= 1 && actions >= 1 && horizon >= 1, "make_random_mdp: S, K, H must be >= 1");
  Rng rng(seed);
  Rng trans_rng = rng.substream("transitions");
  Rng reward_rng = rng.substream("rewards");
  Rng init_rng = rng.substream("init");

  TabularMDP mdp;
  mdp.horizon = horizon;
  mdp.action_count = actions;
  mdp.cores = uniform_levels(states, horizon);
  mdp.init = init_rng.dirichlet(states);
  mdp.trans.resize(static_cast<std::size_t>(horizon));
  mdp.reward_mean.resize(static_cast<std::size_t>(horizon));
  mdp.reward_noise = noise;
  if (noise == RewardNoise::Bernoulli)
    mdp.reward_scale.assign(static_cast<std::size_t>(horizon), 1.0 / horizon);

  const double reward_cap = 1.0 / horizon;
  for (int h = 1; h <= horizon; ++h) {
    auto& table = mdp.trans[static_cast<std::size_t>(h - 1)];
    auto& rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    table.reserve(static_cast<std::size_t>(states * actions * states));
    rew.resize(static_cast<std::size_t>(states * actions));
    for (int row = 0; row < states * actions; ++row) {
      const auto dist = trans_rng.substream("row", static_cast<std::uint64_t>(h) * 1000003ULL +
                                                       static_cast<std::uint64_t>(row))
                            .dirichlet(states);
      table.insert(table.end(), dist.begin(), dist.end());
      rew[static_cast<std::size_t>(row)] = reward_cap * reward_rng.uniform();
    }
  }
  return mdp;
}

LowRankMDP make_low_rank_mdp(int states, int actions, int horizon, int latent_dim,
                             std::uint64_t seed) {
  require(states >= 1 && actions >= 1 && horizon >= 1,
          "make_low_rank_mdp: S, K, H must be >= 1");
  if (latent_dim < 1 || latent_dim > states)
    throw std::invalid_argument("make_low_rank_mdp: latent dimension must lie in [1, S]");
  Rng rng(seed);
  Rng f1_rng = rng.substream("factor_sa");
  Rng f2_rng = rng.substream("factor_next");

  LowRankMDP lr;
  lr.latent_dim = latent_dim;
  lr.mdp = make_random_mdp(states, actions, horizon, seed);
  lr.factor_sa.resize(static_cast<std::size_t>(horizon));
  lr.factor_next.resize(static_cast<std::size_t>(horizon));
  for (int h = 1; h <= horizon; ++h) {
    auto& f1 = lr.factor_sa[static_cast<std::size_t>(h - 1)];
    auto& f2 = lr.factor_next[static_cast<std::size_t>(h - 1)];
    f1.reserve(static_cast<std::size_t>(states * actions * latent_dim));
    f2.reserve(static_cast<std::size_t>(latent_dim * states));
    for (int row = 0; row < states * actions; ++row) {
      const auto dist =
          f1_rng.substream("row", static_cast<std::uint64_t>(h) * 1000003ULL +
                                      static_cast<std::uint64_t>(row))
              .dirichlet(latent_dim);
      f1.insert(f1.end(), dist.begin(), dist.end());
    }
    for (int m = 0; m < latent_dim; ++m) {
      const auto dist = f2_rng.substream("row", static_cast<std::uint64_t>(h) * 1000003ULL +
                                                    static_cast<std::uint64_t>(m))
                            .dirichlet(states);
      f2.insert(f2.end(), dist.begin(), dist.end());
    }
    // overwrite the transition table with the exact factor product
    auto& table = lr.mdp.trans[static_cast<std::size_t>(h - 1)];
    for (int row = 0; row < states * actions; ++row) {
      for (int sp = 0; sp < states; ++sp) {
        double v = 0.0;
        for (int m = 0; m < latent_dim; ++m)
          v += f1[static_cast<std::size_t>(row * latent_dim + m)] *
               f2[static_cast<std::size_t>(m * states + sp)];
        table[static_cast<std::size_t>(row * states + sp)] = v;
      }
    }
  }
  return lr;
}

ReactivePOMDP make_reactive_pomdp(int hidden_states, int observations, int actions,
                                  int horizon, std::uint64_t seed) {
  require(hidden_states >= 1 && observations >= 1 && actions >= 1 && horizon >= 1,
          "make_reactive_pomdp: S, O, K, H must be >= 1");
  Rng rng(seed);
  Rng em_rng = rng.substream("emission");
  Rng trans_rng = rng.substream("transitions");
  Rng reward_rng = rng.substream("rewards");

  ReactivePOMDP p;
  p.horizon = horizon;
  p.action_count = actions;
  p.hidden_counts = uniform_levels(hidden_states, horizon);
  p.obs_counts = uniform_levels(observations, horizon);
  p.init_hidden = rng.substream("init").dirichlet(hidden_states);

  p.emission.resize(static_cast<std::size_t>(horizon + 1));
  for (int h = 1; h <= horizon + 1; ++h) {
    auto& em = p.emission[static_cast<std::size_t>(h - 1)];
    em.reserve(static_cast<std::size_t>(hidden_states * observations));
    for (int z = 0; z < hidden_states; ++z) {
      const auto dist = em_rng.substream("row", static_cast<std::uint64_t>(h) * 1000003ULL +
                                                    static_cast<std::uint64_t>(z))
                            .dirichlet(observations);
      em.insert(em.end(), dist.begin(), dist.end());
    }
  }

  const double reward_cap = 1.0 / horizon;
  p.trans.resize(static_cast<std::size_t>(horizon));
  p.reward_mean.resize(static_cast<std::size_t>(horizon));
  for (int h = 1; h <= horizon; ++h) {
    auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    auto& rew = p.reward_mean[static_cast<std::size_t>(h - 1)];
    const int rows = hidden_states * observations * actions;
    table.reserve(static_cast<std::size_t>(rows * hidden_states));
    rew.resize(static_cast<std::size_t>(rows));
    for (int row = 0; row < rows; ++row) {
      const auto dist = trans_rng.substream("row", static_cast<std::uint64_t>(h) * 10000019ULL +
                                                       static_cast<std::uint64_t>(row))
                            .dirichlet(hidden_states);
      table.insert(table.end(), dist.begin(), dist.end());
      rew[static_cast<std::size_t>(row)] = reward_cap * reward_rng.uniform();
    }
  }
  return p;
}

ReactivePOMDP make_gridworld_pomdp(int width, int height, int obs_per_cell, int horizon,
                                   std::uint64_t seed, double slip) {
  require(width >= 1 && height >= 1 && obs_per_cell >= 1 && horizon >= 1,
          "make_gridworld_pomdp: dimensions must be >= 1");
  require(slip >= 0.0 && slip < 1.0, "make_gridworld_pomdp: slip must lie in [0, 1)");
  const int cells = width * height;
  const int actions = 4;  // N, E, S, W
  Rng rng(seed);
  Rng em_rng = rng.substream("emission");

  ReactivePOMDP p;
  p.horizon = horizon;
  p.action_count = actions;
  p.hidden_counts = uniform_levels(cells, horizon);
  p.obs_counts = uniform_levels(cells * obs_per_cell, horizon);
  p.init_hidden.assign(static_cast<std::size_t>(cells), 0.0);
  p.init_hidden[0] = 1.0;  // start in the corner cell
  const int goal = cells - 1;

  // each cell emits only within its own observation block
  const int n_obs = cells * obs_per_cell;
  p.emission.resize(static_cast<std::size_t>(horizon + 1));
  for (int h = 1; h <= horizon + 1; ++h) {
    auto& em = p.emission[static_cast<std::size_t>(h - 1)];
    em.assign(static_cast<std::size_t>(cells * n_obs), 0.0);
    for (int c = 0; c < cells; ++c) {
      const auto dist = em_rng.substream("cell", static_cast<std::uint64_t>(h) * 1000003ULL +
                                                     static_cast<std::uint64_t>(c))
                            .dirichlet(obs_per_cell);
      for (int k = 0; k < obs_per_cell; ++k)
        em[static_cast<std::size_t>(c * n_obs + c * obs_per_cell + k)] =
            dist[static_cast<std::size_t>(k)];
    }
  }

  auto move = [&](int cell, int a) {
    int x = cell % width;
    int y = cell / width;
    if (a == 0) y = std::max(0, y - 1);
    if (a == 1) x = std::min(width - 1, x + 1);
    if (a == 2) y = std::min(height - 1, y + 1);
    if (a == 3) x = std::max(0, x - 1);
    return y * width + x;
  };

  const double reward_cap = 1.0 / horizon;
  p.trans.resize(static_cast<std::size_t>(horizon));
  p.reward_mean.resize(static_cast<std::size_t>(horizon));
  for (int h = 1; h <= horizon; ++h) {
    auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    auto& rew = p.reward_mean[static_cast<std::size_t>(h - 1)];
    const int rows = cells * n_obs * actions;
    table.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cells), 0.0);
    rew.assign(static_cast<std::size_t>(rows), 0.0);
    for (int z = 0; z < cells; ++z) {
      for (int o = 0; o < n_obs; ++o) {
        for (int a = 0; a < actions; ++a) {
          const std::size_t row = static_cast<std::size_t>((z * n_obs + o) * actions + a);
          const std::size_t base = row * static_cast<std::size_t>(cells);
          const int intended = move(z, a);
          table[base + static_cast<std::size_t>(intended)] += 1.0 - slip;
          for (int other = 0; other < actions; ++other)
            table[base + static_cast<std::size_t>(move(z, other))] += slip / actions;
          if (z == goal) rew[row] = reward_cap;
        }
      }
    }
  }
  return p;
}

ReactivePOMDP embed_mdp_as_pomdp(const TabularMDP& mdp) {
  for (int h = 2; h <= mdp.horizon + 1; ++h)
    require(mdp.states(h) == mdp.states(1), "embed_mdp_as_pomdp: levels must be uniform");
  const int S = mdp.states(1);
  const int K = mdp.action_count;

  ReactivePOMDP p;
  p.horizon = mdp.horizon;
  p.action_count = K;
  p.hidden_counts = mdp.cores;
  p.obs_counts = mdp.cores;
  p.init_hidden = mdp.init;
  p.reward_noise = mdp.reward_noise;
  p.reward_scale = mdp.reward_scale;

  p.emission.resize(static_cast<std::size_t>(mdp.horizon + 1));
  for (auto& em : p.emission) {
    em.assign(static_cast<std::size_t>(S) * static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) em[static_cast<std::size_t>(s * S + s)] = 1.0;
  }

  // Store the dynamics against the observation coordinate. Under the identity
  // emission o == z almost surely, so the trajectory law is unchanged, and the
  // observation process is Markovian by construction.
  p.trans.resize(static_cast<std::size_t>(mdp.horizon));
  p.reward_mean.resize(static_cast<std::size_t>(mdp.horizon));
  for (int h = 1; h <= mdp.horizon; ++h) {
    auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    auto& rew = p.reward_mean[static_cast<std::size_t>(h - 1)];
    table.assign(static_cast<std::size_t>(S) * static_cast<std::size_t>(S) *
                     static_cast<std::size_t>(K) * static_cast<std::size_t>(S),
                 0.0);
    rew.assign(static_cast<std::size_t>(S) * static_cast<std::size_t>(S) *
                   static_cast<std::size_t>(K),
               0.0);
    const auto& src_table = mdp.trans[static_cast<std::size_t>(h - 1)];
    const auto& src_rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    for (int z = 0; z < S; ++z) {
      for (int o = 0; o < S; ++o) {
        for (int a = 0; a < K; ++a) {
          const std::size_t dst = static_cast<std::size_t>((z * S + o) * K + a);
          const std::size_t src = static_cast<std::size_t>(o * K + a);
          rew[dst] = src_rew[src];
          for (int sp = 0; sp < S; ++sp)
            table[dst * static_cast<std::size_t>(S) + static_cast<std::size_t>(sp)] =
                src_table[src * static_cast<std::size_t>(S) + static_cast<std::size_t>(sp)];
        }
      }
    }
  }
  return p;
}

TabularMDP make_tree_lower_bound(int actions, int horizon, double gap, int leaf_index,
                                 const GeneratorCaps& caps) {
  require(actions >= 2, "make_tree_lower_bound: K must be >= 2");
  require(horizon >= 1, "make_tree_lower_bound: H must be >= 1");
  require(gap >= 0.0 && gap <= 0.5, "make_tree_lower_bound: gap must lie in [0, 1/2]");
  const long long leaves = checked_pow(actions, horizon, caps.max_tree_leaves);
  require(leaf_index >= 0 && leaf_index < leaves,
          "make_tree_lower_bound: leaf index out of range");

  TabularMDP mdp;
  mdp.horizon = horizon;
  mdp.action_count = actions;
  mdp.cores.resize(static_cast<std::size_t>(horizon + 1));
  long long width = 1;
  for (int h = 1; h <= horizon + 1; ++h) {
    mdp.cores[static_cast<std::size_t>(h - 1)] = static_cast<int>(width);
    width *= actions;
  }
  mdp.init.assign(1, 1.0);
  mdp.reward_noise = RewardNoise::Bernoulli;
  mdp.reward_scale.assign(static_cast<std::size_t>(horizon), 0.0);
  mdp.reward_scale.back() = 1.0;

  mdp.trans.resize(static_cast<std::size_t>(horizon));
  mdp.reward_mean.resize(static_cast<std::size_t>(horizon));
  for (int h = 1; h <= horizon; ++h) {
    const int n = mdp.states(h);
    const int np = mdp.states(h + 1);
    auto& table = mdp.trans[static_cast<std::size_t>(h - 1)];
    auto& rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    table.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(actions) *
                     static_cast<std::size_t>(np),
                 0.0);
    rew.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(actions), 0.0);
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < actions; ++a) {
        const std::size_t row = static_cast<std::size_t>(s * actions + a);
        table[row * static_cast<std::size_t>(np) + static_cast<std::size_t>(s * actions + a)] =
            1.0;
        if (h == horizon) rew[row] = 0.5;
      }
    }
  }
  // the distinguished leaf sits at level-H state leaf/K, action leaf%K
  mdp.reward_mean.back()[static_cast<std::size_t>(leaf_index)] = 0.5 + gap;
  return mdp;
}

FunctionClass tree_qstar_class(int actions, int horizon, double gap,
                               const GeneratorCaps& caps) {
  require(actions >= 2, "tree_qstar_class: K must be >= 2");
  require(horizon >= 1, "tree_qstar_class: H must be >= 1");
  const long long leaves = checked_pow(actions, horizon, caps.max_tree_leaves);

  FunctionClass cls;
  cls.members.reserve(static_cast<std::size_t>(leaves));
  for (long long leaf = 0; leaf < leaves; ++leaf) {
    QFunction f;
    f.horizon = horizon;
    f.action_count = actions;
    f.cores.resize(static_cast<std::size_t>(horizon));
    f.values.resize(static_cast<std::size_t>(horizon));
    long long width = 1;
    for (int h = 1; h <= horizon; ++h) {
      f.cores[static_cast<std::size_t>(h - 1)] = static_cast<int>(width);
      // (state, action) lies on the leaf's path iff it equals the first h
      // base-K digits of the leaf index
      long long prefix = leaf;
      for (int rest = h; rest < horizon; ++rest) prefix /= actions;
      auto& row = f.values[static_cast<std::size_t>(h - 1)];
      row.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(actions), 0.5);
      row[static_cast<std::size_t>(prefix)] = 0.5 + gap;
      width *= actions;
    }
    cls.members.push_back(std::move(f));
  }
  return cls;
}

TabularMDP make_bandit_chain(int states_per_level, int horizon, int actions, double tau,
                             const std::optional<std::vector<std::vector<int>>>& best_actions,
                             std::uint64_t seed) {
  require(states_per_level >= 4, "make_bandit_chain: M must be >= 4");
  require(horizon >= 2, "make_bandit_chain: H must be >= 2");
  require(actions >= 2, "make_bandit_chain: K must be >= 2");
  require(tau > 0.0 && tau <= std::sqrt(1.0 / 8.0),
          "make_bandit_chain: tau must lie in (0, sqrt(1/8)]");

  const int M = states_per_level;
  const int bandits = M - 3;
  // state layout per level: 0 = waiting, 1 = good, 2 = bad, 3.. = bandit states
  std::vector<std::vector<int>> best(static_cast<std::size_t>(horizon),
                                     std::vector<int>(static_cast<std::size_t>(bandits), 0));
  if (best_actions) {
    require(static_cast<int>(best_actions->size()) == horizon,
            "make_bandit_chain: best_actions must have one row per level");
    for (const auto& row : *best_actions) {
      require(static_cast<int>(row.size()) == bandits,
              "make_bandit_chain: best_actions row width must be M-3");
      for (int a : row) require(a >= 0 && a < actions, "make_bandit_chain: action out of range");
    }
    best = *best_actions;
  } else {
    Rng rng(seed);
    Rng pick = rng.substream("best_actions");
    for (auto& row : best)
      for (auto& a : row) a = pick.uniform_int(actions);
  }

  TabularMDP mdp;
  mdp.horizon = horizon;
  mdp.action_count = actions;
  mdp.cores = uniform_levels(M, horizon);
  mdp.init.assign(static_cast<std::size_t>(M), 0.0);
  mdp.init[0] = 1.0 - 1.0 / horizon;
  for (int i = 0; i < bandits; ++i)
    mdp.init[static_cast<std::size_t>(3 + i)] = 1.0 / (horizon * bandits);

  mdp.trans.resize(static_cast<std::size_t>(horizon));
  mdp.reward_mean.resize(static_cast<std::size_t>(horizon));
  for (int h = 1; h <= horizon; ++h) {
    auto& table = mdp.trans[static_cast<std::size_t>(h - 1)];
    auto& rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    table.assign(static_cast<std::size_t>(M) * static_cast<std::size_t>(actions) *
                     static_cast<std::size_t>(M),
                 0.0);
    rew.assign(static_cast<std::size_t>(M) * static_cast<std::size_t>(actions), 0.0);
    auto cell = [&table, M, actions](int s, int a, int sp) -> double& {
      return table[static_cast<std::size_t>((s * actions + a) * M + sp)];
    };
    for (int a = 0; a < actions; ++a) {
      cell(0, a, 0) = 1.0 - 1.0 / horizon;  // waiting persists
      for (int i = 0; i < bandits; ++i) cell(0, a, 3 + i) = 1.0 / (horizon * bandits);
      cell(1, a, 1) = 1.0;  // good chain
      cell(2, a, 2) = 1.0;  // bad chain
      for (int i = 0; i < bandits; ++i) {
        const bool is_best = best[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)] == a;
        const double p_good = is_best ? 0.5 + tau : 0.5;
        cell(3 + i, a, 1) = p_good;
        cell(3 + i, a, 2) = 1.0 - p_good;
      }
      if (h == horizon) rew[static_cast<std::size_t>(1 * actions + a)] = 1.0;
    }
  }
  return mdp;
}

double bandit_chain_visit_probability(int states_per_level, int horizon, int level) {
  require(states_per_level >= 4, "bandit_chain_visit_probability: M must be >= 4");
  require(level >= 1 && level <= horizon, "bandit_chain_visit_probability: level out of range");
  const double stay = 1.0 - 1.0 / horizon;
  return std::pow(stay, level - 1) / (horizon * (states_per_level - 3));
}

double bandit_chain_optimal_value(int horizon, double tau) {
  const double stay = 1.0 - 1.0 / horizon;
  return (0.5 + tau) * (1.0 - std::pow(stay, horizon - 1));
}

namespace {

QFunction qstar_from_tables(int horizon, int actions, const std::vector<int>& cores,
                            const std::vector<std::vector<double>>& trans,
                            const std::vector<std::vector<double>>& reward) {
  QFunction q;
  q.horizon = horizon;
  q.action_count = actions;
  q.cores.assign(cores.begin(), cores.end() - 1);
  q.values.resize(static_cast<std::size_t>(horizon));
  std::vector<double> next_value(static_cast<std::size_t>(cores.back()), 0.0);
  for (int h = horizon; h >= 1; --h) {
    const int n = cores[static_cast<std::size_t>(h - 1)];
    const int np = cores[static_cast<std::size_t>(h)];
    auto& row = q.values[static_cast<std::size_t>(h - 1)];
    row.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(actions), 0.0);
    std::vector<double> value(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < n; ++s) {
      double best = 0.0;
      for (int a = 0; a < actions; ++a) {
        const std::size_t idx = static_cast<std::size_t>(s * actions + a);
        double v = reward[static_cast<std::size_t>(h - 1)][idx];
        const std::size_t base = idx * static_cast<std::size_t>(np);
        for (int sp = 0; sp < np; ++sp)
          v += trans[static_cast<std::size_t>(h - 1)][base + static_cast<std::size_t>(sp)] *
               next_value[static_cast<std::size_t>(sp)];
        row[idx] = v;
        if (a == 0 || v > best) best = v;
      }
      value[static_cast<std::size_t>(s)] = best;
    }
    next_value = std::move(value);
  }
  return q;
}

// Rebuild the POMDP-like model as an MDP over observations. Valid only when
// neither transitions nor rewards depend on the hidden coordinate.
TabularMDP observation_mdp(const ReactivePOMDP& p) {
  const int H = p.horizon;
  const int K = p.action_count;
  for (int h = 1; h <= H; ++h) {
    const int nz = p.hidden(h);
    const int no = p.observations(h);
    const int nzp = p.hidden(h + 1);
    const auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    const auto& rew = p.reward_mean[static_cast<std::size_t>(h - 1)];
    for (int o = 0; o < no; ++o) {
      for (int a = 0; a < K; ++a) {
        const std::size_t ref = static_cast<std::size_t>((0 * no + o) * K + a);
        for (int z = 1; z < nz; ++z) {
          const std::size_t row = static_cast<std::size_t>((z * no + o) * K + a);
          if (std::abs(rew[row] - rew[ref]) > 1e-12)
            throw std::runtime_error(
                "qstar: rewards depend on the hidden state; observations are not Markovian");
          for (int zp = 0; zp < nzp; ++zp)
            if (std::abs(table[row * static_cast<std::size_t>(nzp) + static_cast<std::size_t>(zp)] -
                         table[ref * static_cast<std::size_t>(nzp) +
                               static_cast<std::size_t>(zp)]) > 1e-12)
              throw std::runtime_error(
                  "qstar: transitions depend on the hidden state; observations are not "
                  "Markovian");
        }
      }
    }
  }

  TabularMDP mdp;
  mdp.horizon = H;
  mdp.action_count = K;
  mdp.cores = p.obs_counts;
  mdp.reward_noise = p.reward_noise;
  mdp.reward_scale = p.reward_scale;

  const int no1 = p.observations(1);
  mdp.init.assign(static_cast<std::size_t>(no1), 0.0);
  for (int z = 0; z < p.hidden(1); ++z)
    for (int o = 0; o < no1; ++o)
      mdp.init[static_cast<std::size_t>(o)] +=
          p.init_hidden[static_cast<std::size_t>(z)] *
          p.emission[0][static_cast<std::size_t>(z * no1 + o)];

  mdp.trans.resize(static_cast<std::size_t>(H));
  mdp.reward_mean.resize(static_cast<std::size_t>(H));
  for (int h = 1; h <= H; ++h) {
    const int no = p.observations(h);
    const int nzp = p.hidden(h + 1);
    const int nop = p.observations(h + 1);
    const auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    const auto& emp = p.emission[static_cast<std::size_t>(h)];
    auto& dst = mdp.trans[static_cast<std::size_t>(h - 1)];
    auto& rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    dst.assign(static_cast<std::size_t>(no) * static_cast<std::size_t>(K) *
                   static_cast<std::size_t>(nop),
               0.0);
    rew.assign(static_cast<std::size_t>(no) * static_cast<std::size_t>(K), 0.0);
    for (int o = 0; o < no; ++o) {
      for (int a = 0; a < K; ++a) {
        const std::size_t src = static_cast<std::size_t>((0 * no + o) * K + a);
        const std::size_t out_row = static_cast<std::size_t>(o * K + a);
        rew[out_row] = p.reward_mean[static_cast<std::size_t>(h - 1)][src];
        for (int zp = 0; zp < nzp; ++zp) {
          const double pz =
              table[src * static_cast<std::size_t>(nzp) + static_cast<std::size_t>(zp)];
          if (pz == 0.0) continue;
          for (int op = 0; op < nop; ++op)
            dst[out_row * static_cast<std::size_t>(nop) + static_cast<std::size_t>(op)] +=
                pz * emp[static_cast<std::size_t>(zp * nop + op)];
        }
      }
    }
  }
  return mdp;
}

}  // namespace

QFunction qstar(const Env& env) {
  if (!oracle_capable(env)) throw CapabilityError("qstar requires an oracle-capable environment");
  if (const auto* p = std::get_if<ReactivePOMDP>(&env)) {
    const TabularMDP mdp = observation_mdp(*p);
    return qstar_from_tables(mdp.horizon, mdp.action_count, mdp.cores, mdp.trans,
                             mdp.reward_mean);
  }
  const TabularMDP& mdp = *as_tabular(env);
  return qstar_from_tables(mdp.horizon, mdp.action_count, mdp.cores, mdp.trans,
                           mdp.reward_mean);
}

namespace {

QFunction blank_qfunction(const Env& env) {
  QFunction f;
  f.horizon = horizon(env);
  f.action_count = action_count(env);
  const auto cores = core_counts(env);
  f.cores.assign(cores.begin(), cores.end() - 1);
  f.values.resize(static_cast<std::size_t>(f.horizon));
  for (int h = 1; h <= f.horizon; ++h)
    f.values[static_cast<std::size_t>(h - 1)].assign(
        static_cast<std::size_t>(f.cores[static_cast<std::size_t>(h - 1)]) *
            static_cast<std::size_t>(f.action_count),
        0.0);
  return f;
}

}  // namespace

FunctionClass realizable_class(const Env& env, int size, double perturbation_scale,
                               std::uint64_t seed, const GeneratorCaps& caps) {
  require(size >= 1, "realizable_class: size must be >= 1");
  if (size > caps.max_class_size)
    throw std::length_error("realizable_class: size exceeds the configured cap");
  Rng rng(seed);

  FunctionClass cls;
  cls.members.reserve(static_cast<std::size_t>(size));
  cls.members.push_back(qstar(env));
  cls.qstar_index = 0;

  for (int i = 1; i < size; ++i) {
    Rng member_rng = rng.substream("member", static_cast<std::uint64_t>(i));
    QFunction f = blank_qfunction(env);
    const bool perturb = (i % 2) == 1;
    const QFunction& base = cls.members.front();
    for (auto& row : f.values) {
      for (auto& v : row) v = member_rng.uniform();
    }
    if (perturb) {
      for (std::size_t lvl = 0; lvl < f.values.size(); ++lvl) {
        auto& row = f.values[lvl];
        const auto& qrow = base.values[lvl];
        for (std::size_t k = 0; k < row.size(); ++k) {
          const double shift = perturbation_scale * (2.0 * row[k] - 1.0);
          row[k] = std::clamp(qrow[k] + shift, 0.0, 1.0);
        }
      }
    }
    cls.members.push_back(std::move(f));
  }
  return cls;
}

FunctionClass random_class(const Env& env, int size, std::uint64_t seed,
                           const GeneratorCaps& caps) {
  require(size >= 1, "random_class: size must be >= 1");
  if (size > caps.max_class_size)
    throw std::length_error("random_class: size exceeds the configured cap");
  Rng rng(seed);
  FunctionClass cls;
  cls.members.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    Rng member_rng = rng.substream("member", static_cast<std::uint64_t>(i));
    QFunction f = blank_qfunction(env);
    for (auto& row : f.values)
      for (auto& v : row) v = member_rng.uniform();
    cls.members.push_back(std::move(f));
  }
  return cls;
}

}  // namespace cdplab
