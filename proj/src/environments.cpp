#include "cdplab/environments.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cdplab {

namespace {

struct EnvView {
  int horizon;
  int action_count;
  const std::vector<int>* cores;
};

EnvView view(const Env& env) {
  return std::visit(
      [](const auto& e) -> EnvView {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, TabularMDP>)
          return {e.horizon, e.action_count, &e.cores};
        else if constexpr (std::is_same_v<T, LowRankMDP>)
          return {e.mdp.horizon, e.mdp.action_count, &e.mdp.cores};
        else
          return {e.horizon, e.action_count, &e.obs_counts};
      },
      env);
}

double draw_reward(RewardNoise noise, double mean, double scale, Rng& rng) {
  if (noise == RewardNoise::None) return mean;
  if (scale <= 0.0) return 0.0;
  return rng.bernoulli(mean / scale) ? scale : 0.0;
}

Trajectory roll_mdp(const TabularMDP& mdp, const ActionChooser& choose, Rng& rng) {
  Trajectory traj;
  const int H = mdp.horizon;
  const int K = mdp.action_count;
  traj.contexts.reserve(static_cast<std::size_t>(H + 1));
  traj.actions.reserve(static_cast<std::size_t>(H));
  traj.rewards.reserve(static_cast<std::size_t>(H));

  int s = rng.categorical(mdp.init);
  traj.contexts.push_back({s, 1});
  for (int h = 1; h <= H; ++h) {
    const int a = choose(h, s, rng);
    if (a < 0 || a >= K) throw std::runtime_error("sample_episode: action out of range");
    const std::size_t row = static_cast<std::size_t>(s * K + a);
    const double mean = mdp.reward_mean[static_cast<std::size_t>(h - 1)][row];
    const double scale =
        mdp.reward_noise == RewardNoise::Bernoulli ? mdp.reward_scale[static_cast<std::size_t>(h - 1)] : 0.0;
    traj.actions.push_back(a);
    traj.rewards.push_back(draw_reward(mdp.reward_noise, mean, scale, rng));

    const int next_n = mdp.states(h + 1);
    const auto& table = mdp.trans[static_cast<std::size_t>(h - 1)];
    double u = rng.uniform();
    double acc = 0.0;
    int next = next_n - 1;
    for (int sp = 0; sp < next_n; ++sp) {
      acc += table[row * static_cast<std::size_t>(next_n) + static_cast<std::size_t>(sp)];
      if (u < acc) {
        next = sp;
        break;
      }
    }
    s = next;
    traj.contexts.push_back({s, h + 1});
  }
  return traj;
}

Trajectory roll_pomdp(const ReactivePOMDP& p, const ActionChooser& choose, Rng& rng) {
  Trajectory traj;
  const int H = p.horizon;
  const int K = p.action_count;
  traj.contexts.reserve(static_cast<std::size_t>(H + 1));

  auto emit = [&](int level, int z) {
    const int n_obs = p.observations(level);
    const auto& em = p.emission[static_cast<std::size_t>(level - 1)];
    double u = rng.uniform();
    double acc = 0.0;
    int o = n_obs - 1;
    for (int i = 0; i < n_obs; ++i) {
      acc += em[static_cast<std::size_t>(z * n_obs + i)];
      if (u < acc) {
        o = i;
        break;
      }
    }
    return o;
  };

  int z = rng.categorical(p.init_hidden);
  int o = emit(1, z);
  traj.contexts.push_back({o, 1});
  for (int h = 1; h <= H; ++h) {
    const int a = choose(h, o, rng);
    if (a < 0 || a >= K) throw std::runtime_error("sample_episode: action out of range");
    const int n_obs = p.observations(h);
    const std::size_t row = static_cast<std::size_t>((z * n_obs + o) * K + a);
    const double mean = p.reward_mean[static_cast<std::size_t>(h - 1)][row];
    const double scale =
        p.reward_noise == RewardNoise::Bernoulli ? p.reward_scale[static_cast<std::size_t>(h - 1)] : 0.0;
    traj.actions.push_back(a);
    traj.rewards.push_back(draw_reward(p.reward_noise, mean, scale, rng));

    const int next_hidden = p.hidden(h + 1);
    const auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    double u = rng.uniform();
    double acc = 0.0;
    int zp = next_hidden - 1;
    for (int i = 0; i < next_hidden; ++i) {
      acc += table[row * static_cast<std::size_t>(next_hidden) + static_cast<std::size_t>(i)];
      if (u < acc) {
        zp = i;
        break;
      }
    }
    z = zp;
    o = emit(h + 1, z);
    traj.contexts.push_back({o, h + 1});
  }
  return traj;
}

void check_distribution(const std::vector<double>& row, std::size_t offset, std::size_t n,
                        const char* kind, int level, int core, int action,
                        std::vector<Violation>& out) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = row[offset + i];
    if (v < 0.0) {
      std::ostringstream msg;
      msg << kind << " has negative entry at level " << level << ", row (" << core << ","
          << action << ")";
      out.push_back({std::string(kind) + "_negative", level, core, action, v, msg.str()});
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << kind << " row sums to " << sum << " at level " << level << ", state " << core
        << ", action " << action;
    out.push_back({std::string(kind) + "_row_sum", level, core, action, sum, msg.str()});
  }
}

// Largest realizable single-step reward for a row under the noise model.
double max_step_reward(RewardNoise noise, double mean, double scale) {
  if (noise == RewardNoise::None) return mean;
  return mean > 0.0 ? scale : 0.0;
}

void validate_mdp(const TabularMDP& mdp, std::vector<Violation>& out) {
  const int H = mdp.horizon;
  const int K = mdp.action_count;
  check_distribution(mdp.init, 0, mdp.init.size(), "init", 1, 0, -1, out);
  for (int h = 1; h <= H; ++h) {
    const int n = mdp.states(h);
    const int np = mdp.states(h + 1);
    const auto& table = mdp.trans[static_cast<std::size_t>(h - 1)];
    const auto& rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    const double scale =
        mdp.reward_noise == RewardNoise::Bernoulli ? mdp.reward_scale[static_cast<std::size_t>(h - 1)] : 0.0;
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < K; ++a) {
        const std::size_t row = static_cast<std::size_t>(s * K + a);
        check_distribution(table, row * static_cast<std::size_t>(np),
                           static_cast<std::size_t>(np), "transition", h, s, a, out);
        const double mean = rew[row];
        if (mean < 0.0) {
          std::ostringstream msg;
          msg << "negative reward mean at level " << h << ", state " << s << ", action " << a;
          out.push_back({"negative_reward", h, s, a, mean, msg.str()});
        }
        if (mdp.reward_noise == RewardNoise::Bernoulli && mean > scale + 1e-12) {
          std::ostringstream msg;
          msg << "Bernoulli mean exceeds scale at level " << h << ", state " << s
              << ", action " << a;
          out.push_back({"reward_scale", h, s, a, mean, msg.str()});
        }
      }
    }
  }

  // Worst realizable reward path: backward max over support-restricted moves.
  std::vector<double> worst(static_cast<std::size_t>(mdp.states(H + 1)), 0.0);
  for (int h = H; h >= 1; --h) {
    const int n = mdp.states(h);
    const int np = mdp.states(h + 1);
    const auto& table = mdp.trans[static_cast<std::size_t>(h - 1)];
    const auto& rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    const double scale =
        mdp.reward_noise == RewardNoise::Bernoulli ? mdp.reward_scale[static_cast<std::size_t>(h - 1)] : 0.0;
    std::vector<double> cur(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < n; ++s) {
      double best = 0.0;
      for (int a = 0; a < K; ++a) {
        const std::size_t row = static_cast<std::size_t>(s * K + a);
        double reach = 0.0;
        for (int sp = 0; sp < np; ++sp) {
          if (table[row * static_cast<std::size_t>(np) + static_cast<std::size_t>(sp)] > 0.0)
            reach = std::max(reach, worst[static_cast<std::size_t>(sp)]);
        }
        best = std::max(best, max_step_reward(mdp.reward_noise, rew[row], scale) + reach);
      }
      cur[static_cast<std::size_t>(s)] = best;
    }
    worst = std::move(cur);
  }
  double worst_sum = 0.0;
  for (std::size_t s = 0; s < mdp.init.size(); ++s)
    if (mdp.init[s] > 0.0) worst_sum = std::max(worst_sum, worst[s]);
  if (worst_sum > 1.0 + 1e-12) {
    std::ostringstream msg;
    msg << "worst-case reward path sums to " << worst_sum;
    out.push_back({"reward_path_sum", 0, 0, -1, worst_sum, msg.str()});
  }
}

void validate_pomdp(const ReactivePOMDP& p, std::vector<Violation>& out) {
  const int H = p.horizon;
  const int K = p.action_count;
  check_distribution(p.init_hidden, 0, p.init_hidden.size(), "init", 1, 0, -1, out);
  for (int h = 1; h <= H + 1; ++h) {
    const int nz = p.hidden(h);
    const int no = p.observations(h);
    const auto& em = p.emission[static_cast<std::size_t>(h - 1)];
    for (int z = 0; z < nz; ++z)
      check_distribution(em, static_cast<std::size_t>(z * no), static_cast<std::size_t>(no),
                         "emission", h, z, -1, out);
  }
  for (int h = 1; h <= H; ++h) {
    const int nz = p.hidden(h);
    const int no = p.observations(h);
    const int nzp = p.hidden(h + 1);
    const auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    const auto& rew = p.reward_mean[static_cast<std::size_t>(h - 1)];
    const double scale =
        p.reward_noise == RewardNoise::Bernoulli ? p.reward_scale[static_cast<std::size_t>(h - 1)] : 0.0;
    for (int z = 0; z < nz; ++z) {
      for (int o = 0; o < no; ++o) {
        for (int a = 0; a < K; ++a) {
          const std::size_t row = static_cast<std::size_t>((z * no + o) * K + a);
          check_distribution(table, row * static_cast<std::size_t>(nzp),
                             static_cast<std::size_t>(nzp), "transition", h, z * no + o, a, out);
          const double mean = rew[row];
          if (mean < 0.0)
            out.push_back({"negative_reward", h, z * no + o, a, mean,
                           "negative reward mean in hidden-state model"});
          if (p.reward_noise == RewardNoise::Bernoulli && mean > scale + 1e-12)
            out.push_back({"reward_scale", h, z * no + o, a, mean,
                           "Bernoulli mean exceeds scale in hidden-state model"});
        }
      }
    }
  }

  // Worst realizable reward path over (hidden, obs) atoms.
  std::vector<double> worst(
      static_cast<std::size_t>(p.hidden(H + 1) * p.observations(H + 1)), 0.0);
  for (int h = H; h >= 1; --h) {
    const int nz = p.hidden(h);
    const int no = p.observations(h);
    const int nzp = p.hidden(h + 1);
    const int nop = p.observations(h + 1);
    const auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    const auto& emp = p.emission[static_cast<std::size_t>(h)];
    const auto& rew = p.reward_mean[static_cast<std::size_t>(h - 1)];
    const double scale =
        p.reward_noise == RewardNoise::Bernoulli ? p.reward_scale[static_cast<std::size_t>(h - 1)] : 0.0;
    std::vector<double> cur(static_cast<std::size_t>(nz * no), 0.0);
    for (int z = 0; z < nz; ++z) {
      for (int o = 0; o < no; ++o) {
        double best = 0.0;
        for (int a = 0; a < K; ++a) {
          const std::size_t row = static_cast<std::size_t>((z * no + o) * K + a);
          double reach = 0.0;
          for (int zp = 0; zp < nzp; ++zp) {
            if (table[row * static_cast<std::size_t>(nzp) + static_cast<std::size_t>(zp)] <= 0.0)
              continue;
            for (int op = 0; op < nop; ++op) {
              if (emp[static_cast<std::size_t>(zp * nop + op)] > 0.0)
                reach = std::max(reach, worst[static_cast<std::size_t>(zp * nop + op)]);
            }
          }
          best = std::max(best, max_step_reward(p.reward_noise, rew[row], scale) + reach);
        }
        cur[static_cast<std::size_t>(z * no + o)] = best;
      }
    }
    worst = std::move(cur);
  }
  double worst_sum = 0.0;
  const int no1 = p.observations(1);
  for (int z = 0; z < p.hidden(1); ++z) {
    if (p.init_hidden[static_cast<std::size_t>(z)] <= 0.0) continue;
    const auto& em1 = p.emission[0];
    for (int o = 0; o < no1; ++o)
      if (em1[static_cast<std::size_t>(z * no1 + o)] > 0.0)
        worst_sum = std::max(worst_sum, worst[static_cast<std::size_t>(z * no1 + o)]);
  }
  if (worst_sum > 1.0 + 1e-12)
    out.push_back({"reward_path_sum", 0, 0, -1, worst_sum,
                   "worst-case reward path exceeds the unit bound"});
}

void validate_lowrank(const LowRankMDP& lr, std::vector<Violation>& out) {
  validate_mdp(lr.mdp, out);
  const int H = lr.mdp.horizon;
  const int K = lr.mdp.action_count;
  const int M = lr.latent_dim;
  for (int h = 1; h <= H; ++h) {
    const int n = lr.mdp.states(h);
    const int np = lr.mdp.states(h + 1);
    const auto& f1 = lr.factor_sa[static_cast<std::size_t>(h - 1)];
    const auto& f2 = lr.factor_next[static_cast<std::size_t>(h - 1)];
    for (int row = 0; row < n * K; ++row)
      check_distribution(f1, static_cast<std::size_t>(row * M), static_cast<std::size_t>(M),
                         "factor_sa", h, row / K, row % K, out);
    for (int m = 0; m < M; ++m)
      check_distribution(f2, static_cast<std::size_t>(m * np), static_cast<std::size_t>(np),
                         "factor_next", h, m, -1, out);
    // product must reproduce the stored transition table
    const auto& table = lr.mdp.trans[static_cast<std::size_t>(h - 1)];
    double max_err = 0.0;
    for (int row = 0; row < n * K; ++row) {
      for (int sp = 0; sp < np; ++sp) {
        double prod = 0.0;
        for (int m = 0; m < M; ++m)
          prod += f1[static_cast<std::size_t>(row * M + m)] *
                  f2[static_cast<std::size_t>(m * np + sp)];
        max_err = std::max(
            max_err,
            std::abs(prod - table[static_cast<std::size_t>(row * np + sp)]));
      }
    }
    if (max_err > 1e-12) {
      std::ostringstream msg;
      msg << "factor product deviates from transitions by " << max_err << " at level " << h;
      out.push_back({"factor_product", h, 0, -1, max_err, msg.str()});
    }
  }
}

}  // namespace

int horizon(const Env& env) { return view(env).horizon; }
int action_count(const Env& env) { return view(env).action_count; }

int core_count(const Env& env, int level) {
  const auto v = view(env);
  if (level < 1 || level > v.horizon + 1)
    throw std::invalid_argument("core_count: level out of range");
  return (*v.cores)[static_cast<std::size_t>(level - 1)];
}

std::vector<int> core_counts(const Env& env) { return *view(env).cores; }

bool oracle_capable(const Env& env) {
  return std::visit(
      [](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, LowRankMDP>)
          return !e.mdp.sampling_only;
        else
          return !e.sampling_only;
      },
      env);
}

const TabularMDP* as_tabular(const Env& env) {
  if (const auto* m = std::get_if<TabularMDP>(&env)) return m;
  if (const auto* lr = std::get_if<LowRankMDP>(&env)) return &lr->mdp;
  return nullptr;
}

Trajectory sample_episode(const Env& env, const ActionChooser& choose, Rng& rng) {
  if (const auto* p = std::get_if<ReactivePOMDP>(&env)) return roll_pomdp(*p, choose, rng);
  return roll_mdp(*as_tabular(env), choose, rng);
}

Trajectory sample_episode(const Env& env, const Policy& policy, Rng& rng) {
  if (policy.horizon() != horizon(env))
    throw std::invalid_argument("sample_episode: policy horizon does not match environment");
  return sample_episode(
      env, [&policy](int level, int core, Rng&) { return policy.at(level, core); }, rng);
}

Trajectory sample_episode_with_deviation(const Env& env, const Policy& base_policy,
                                         int deviate_level, Rng& rng) {
  const int H = horizon(env);
  if (deviate_level < 1 || deviate_level > H)
    throw std::invalid_argument("sample_episode_with_deviation: level out of range");
  const int K = action_count(env);
  return sample_episode(
      env,
      [&base_policy, deviate_level, K](int level, int core, Rng& r) {
        if (level == deviate_level) return r.uniform_int(K);
        return base_policy.at(level, core);
      },
      rng);
}

double policy_value_mc(const Env& env, const Policy& policy, long long n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("policy_value_mc: n_episodes must be >= 1");
  double total = 0.0;
  for (long long i = 0; i < n_episodes; ++i) {
    const Trajectory traj = sample_episode(env, policy, rng);
    total += std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0);
  }
  return total / static_cast<double>(n_episodes);
}

ValidationReport validate_environment(const Env& env) {
  if (!oracle_capable(env))
    throw CapabilityError("validate_environment requires explicit dynamics");
  ValidationReport report;
  std::visit(
      [&report](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, TabularMDP>)
          validate_mdp(e, report.violations);
        else if constexpr (std::is_same_v<T, LowRankMDP>)
          validate_lowrank(e, report.violations);
        else
          validate_pomdp(e, report.violations);
      },
      env);
  return report;
}

void check_trajectory(const Env& env, const Trajectory& traj) {
  const int H = horizon(env);
  if (static_cast<int>(traj.contexts.size()) != H + 1 ||
      static_cast<int>(traj.actions.size()) != H ||
      static_cast<int>(traj.rewards.size()) != H)
    throw std::runtime_error("trajectory has wrong shape");
  double sum = 0.0;
  for (int h = 1; h <= H + 1; ++h) {
    const Context& x = traj.contexts[static_cast<std::size_t>(h - 1)];
    if (x.level != h) throw std::runtime_error("trajectory levels out of order");
    if (x.core < 0 || x.core >= core_count(env, h))
      throw std::runtime_error("trajectory context core out of range");
  }
  for (double r : traj.rewards) {
    if (r < 0.0) throw std::runtime_error("negative step reward");
    sum += r;
  }
  if (sum > 1.0 + 1e-12) throw std::runtime_error("episode reward sum exceeds 1");
}

}  // namespace cdplab
