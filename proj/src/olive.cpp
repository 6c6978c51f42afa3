#include "cdplab/olive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cdplab {

namespace {

double checked_log(double arg, const char* what) {
  if (!(arg > 0.0)) {
    std::ostringstream msg;
    msg << "compute_parameters: nonpositive logarithm argument for " << what;
    throw std::invalid_argument(msg.str());
  }
  return std::log(arg);
}

long long ceil_count(double x, const char* what) {
  if (!(x > 0.0)) {
    std::ostringstream msg;
    msg << "compute_parameters: derived sample size for " << what << " is not positive";
    throw std::invalid_argument(msg.str());
  }
  return static_cast<long long>(std::ceil(x));
}

}  // namespace

std::string to_string(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::Success: return "success";
    case RunOutcome::EmptySurvivorSet: return "empty_survivor_set";
    case RunOutcome::BudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

std::string to_string(ExecutionMode mode) {
  return mode == ExecutionMode::Population ? "population" : "sampled";
}

OliveParams compute_parameters(double epsilon, double delta, int bellman_rank,
                               double norm_bound, int horizon, int action_count,
                               int class_size) {
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("compute_parameters: epsilon and delta must lie in (0,1)");
  if (bellman_rank < 1) throw std::invalid_argument("compute_parameters: M must be >= 1");
  if (!(norm_bound > 0.0)) throw std::invalid_argument("compute_parameters: zeta must be > 0");
  if (horizon < 1 || action_count < 1 || class_size < 1)
    throw std::invalid_argument("compute_parameters: H, K, N must be >= 1");

  const double H = horizon;
  const double K = action_count;
  const double N = class_size;
  const double M = bellman_rank;
  const double root_m = std::sqrt(M);

  OliveParams params;
  params.phi = epsilon / (12.0 * H * root_m);

  const double inner = checked_log(6.0 * H * root_m * norm_bound / epsilon,
                                   "ln(6 H sqrt(M) zeta / eps)");
  params.n_est = ceil_count(
      32.0 / (epsilon * epsilon) * checked_log(6.0 * N / delta, "ln(6N/delta)"), "n_est");
  params.n_eval = ceil_count(
      288.0 * H * H / (epsilon * epsilon) *
          checked_log(12.0 * H * H * M * inner / delta, "ln(12 H^2 M ln(.)/delta)"),
      "n_eval");
  params.n = ceil_count(
      4608.0 * H * H * M * K / (epsilon * epsilon) *
          checked_log(12.0 * N * H * M * inner / delta, "ln(12 N H M ln(.)/delta)"),
      "n");
  return params;
}

double elimination_iteration_bound(int horizon, int bellman_rank, double norm_bound, double phi) {
  const double arg = norm_bound / (2.0 * phi);
  if (!(arg > 1.0)) return 0.0;  // degenerate: the bound gives no iterations
  return horizon * bellman_rank * std::log(arg) / std::log(5.0 / 3.0);
}

std::vector<double> estimate_initial_values(const Env& env, const HypothesisClass& cls,
                                            long long n_est, ExecutionMode mode,
                                            const ExactModel* model, Rng& rng) {
  const int n_members = cls.size();
  std::vector<double> vhat(static_cast<std::size_t>(n_members), 0.0);
  if (mode == ExecutionMode::Population) {
    for (int j = 0; j < n_members; ++j)
      vhat[static_cast<std::size_t>(j)] =
          exact_initial_value(*model, cls.members[static_cast<std::size_t>(j)]);
    return vhat;
  }

  if (n_est < 1) throw std::invalid_argument("estimate_initial_values: n_est must be >= 1");
  const int K = action_count(env);
  std::vector<int> initial_cores;
  initial_cores.reserve(static_cast<std::size_t>(n_est));
  for (long long i = 0; i < n_est; ++i) {
    Rng episode_rng = rng.substream("episode", static_cast<std::uint64_t>(i));
    const Trajectory traj = sample_episode(
        env, [K](int, int, Rng& r) { return r.uniform_int(K); }, episode_rng);
    initial_cores.push_back(traj.contexts.front().core);
  }
  for (int j = 0; j < n_members; ++j) {
    const Hypothesis& f = cls.members[static_cast<std::size_t>(j)];
    double sum = 0.0;
    for (int core : initial_cores) sum += f.state_value(1, core);
    vhat[static_cast<std::size_t>(j)] = sum / static_cast<double>(n_est);
  }
  return vhat;
}

int choose_optimistic(const SurvivingSet& surviving, const std::vector<double>& vhat) {
  int best = -1;
  for (int j = 0; j < static_cast<int>(vhat.size()); ++j) {
    if (!surviving[j]) continue;
    if (best < 0 || vhat[static_cast<std::size_t>(j)] > vhat[static_cast<std::size_t>(best)])
      best = j;
  }
  if (best < 0)
    throw std::runtime_error("choose_optimistic: surviving set is empty");
  return best;
}

std::vector<double> estimate_self_errors(const Env& env, const Hypothesis& f,
                                         long long n_eval, ExecutionMode mode,
                                         const ExactModel* model, Rng& rng) {
  const int H = mode == ExecutionMode::Population ? model->horizon : horizon(env);
  std::vector<double> errors(static_cast<std::size_t>(H), 0.0);
  if (mode == ExecutionMode::Population) {
    for (int h = 1; h <= H; ++h)
      errors[static_cast<std::size_t>(h - 1)] = exact_bellman_error(*model, f, f.policy, h);
    return errors;
  }

  if (n_eval < 1) throw std::invalid_argument("estimate_self_errors: n_eval must be >= 1");
  for (long long i = 0; i < n_eval; ++i) {
    Rng episode_rng = rng.substream("episode", static_cast<std::uint64_t>(i));
    const Trajectory traj = sample_episode(env, f.policy, episode_rng);
    for (int h = 1; h <= H; ++h) {
      const double here = f.state_value(h, traj.contexts[static_cast<std::size_t>(h - 1)].core);
      const double next =
          h < H ? f.state_value(h + 1, traj.contexts[static_cast<std::size_t>(h)].core) : 0.0;
      errors[static_cast<std::size_t>(h - 1)] +=
          here - traj.rewards[static_cast<std::size_t>(h - 1)] - next;
    }
  }
  for (auto& e : errors) e /= static_cast<double>(n_eval);
  return errors;
}

TerminationDecision check_termination(const std::vector<double>& self_errors,
                                      double epsilon_effective) {
  const double sum = std::accumulate(self_errors.begin(), self_errors.end(), 0.0);
  if (sum <= 5.0 * epsilon_effective / 8.0) return {true, -1};
  const int H = static_cast<int>(self_errors.size());
  const double level_threshold = 5.0 * epsilon_effective / (8.0 * H);
  for (int h = 1; h <= H; ++h)
    if (self_errors[static_cast<std::size_t>(h - 1)] >= level_threshold) return {false, h};
  // impossible by pigeonhole with exact arithmetic
  throw std::logic_error("check_termination: no level met the bound while the sum exceeded it");
}

std::vector<double> estimate_all_errors(const Env& env, const Policy& rollin, int level,
                                        const HypothesisClass& cls,
                                        const SurvivingSet& surviving, long long n,
                                        ExecutionMode mode, const ExactModel* model,
                                        Rng& rng) {
  const int n_members = cls.size();
  std::vector<double> errors(static_cast<std::size_t>(n_members), 0.0);
  if (mode == ExecutionMode::Population) {
    for (int j = 0; j < n_members; ++j) {
      if (!surviving[j]) continue;
      errors[static_cast<std::size_t>(j)] =
          exact_bellman_error(*model, cls.members[static_cast<std::size_t>(j)], rollin, level);
    }
    return errors;
  }

  if (n < 1) throw std::invalid_argument("estimate_all_errors: n must be >= 1");
  const int K = action_count(env);
  const double weight = static_cast<double>(K);  // 1 / (1/K)
  for (long long i = 0; i < n; ++i) {
    Rng episode_rng = rng.substream("episode", static_cast<std::uint64_t>(i));
    const Trajectory traj = sample_episode_with_deviation(env, rollin, level, episode_rng);
    const int core = traj.contexts[static_cast<std::size_t>(level - 1)].core;
    const int taken = traj.actions[static_cast<std::size_t>(level - 1)];
    const double reward = traj.rewards[static_cast<std::size_t>(level - 1)];
    const int next_core = traj.contexts[static_cast<std::size_t>(level)].core;
    for (int j = 0; j < n_members; ++j) {
      if (!surviving[j]) continue;
      const Hypothesis& f = cls.members[static_cast<std::size_t>(j)];
      if (f.policy.at(level, core) != taken) continue;
      const double next_value = f.state_value(level + 1, next_core);
      errors[static_cast<std::size_t>(j)] +=
          weight * (f.state_value(level, core) - reward - next_value);
    }
  }
  for (int j = 0; j < n_members; ++j)
    if (surviving[j]) errors[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  return errors;
}

SurvivingSet eliminate(const SurvivingSet& surviving, const std::vector<double>& errors,
                       double threshold) {
  SurvivingSet out = surviving;
  for (int j = 0; j < static_cast<int>(errors.size()); ++j)
    if (surviving[j] && std::abs(errors[static_cast<std::size_t>(j)]) > threshold)
      out.alive[static_cast<std::size_t>(j)] = 0;
  return out;
}

OliveResult run_oliver(const Env& env, const HypothesisClass& cls, const OliveConfig& config,
                       Rng rng) {
  const int H = horizon(env);
  const int K = action_count(env);
  const int N = cls.size();
  if (N < 1) throw std::invalid_argument("run_oliver: empty hypothesis class");
  if (!(config.epsilon > 0.0 && config.epsilon < 1.0))
    throw std::invalid_argument("run_oliver: epsilon must lie in (0,1)");
  if (config.theta < 0.0 || config.theta_m < 0.0)
    throw std::invalid_argument("run_oliver: slacks must be nonnegative");

  OliveResult result;
  result.mode = config.mode;
  result.epsilon = config.epsilon;
  result.delta = config.delta;
  result.bellman_rank = config.bellman_rank;
  result.norm_bound = config.norm_bound;
  result.theta = config.theta;
  result.theta_m = config.theta_m;

  const double root_m = std::sqrt(static_cast<double>(config.bellman_rank));
  OliveParams params;
  params.phi = config.epsilon / (12.0 * H * root_m);
  const bool all_sizes_overridden =
      config.n_est_override && config.n_eval_override && config.n_override;
  if (config.mode == ExecutionMode::Sampled && !all_sizes_overridden) {
    params = compute_parameters(config.epsilon, config.delta, config.bellman_rank,
                                config.norm_bound, H, K, N);
  }
  bool overridden = false;
  if (config.phi_override) {
    params.phi = *config.phi_override;
    overridden = true;
  }
  if (config.n_est_override) {
    params.n_est = *config.n_est_override;
    overridden = true;
  }
  if (config.n_eval_override) {
    params.n_eval = *config.n_eval_override;
    overridden = true;
  }
  if (config.n_override) {
    params.n = *config.n_override;
    overridden = true;
  }
  if (overridden)
    result.warnings.push_back(
        "parameter overrides in effect: the iteration-bound guarantee no longer applies");
  result.params = params;

  const double eps_eff =
      config.epsilon +
      2.0 * H * (3.0 * root_m * (config.theta + config.theta_m) + config.theta_m);
  result.epsilon_effective = eps_eff;
  const double elimination_threshold = params.phi + config.theta;

  long long max_iterations;
  if (config.max_iterations) {
    max_iterations = *config.max_iterations;
  } else {
    const double bound =
        elimination_iteration_bound(H, config.bellman_rank, config.norm_bound, params.phi);
    max_iterations = bound > 0.0 ? 2 * static_cast<long long>(std::ceil(bound))
                                 : static_cast<long long>(N) * H + 1;
  }

  const bool population = config.mode == ExecutionMode::Population;
  ExactModel model;
  if (population) model = build_exact_model(env);
  const ExactModel* model_ptr = population ? &model : nullptr;

  long long episodes = 0;
  auto budget_allows = [&](long long cost) {
    return population || episodes + cost <= config.max_episodes;
  };

  if (!budget_allows(params.n_est)) {
    result.outcome = RunOutcome::BudgetExhausted;
    return result;
  }
  Rng init_rng = rng.substream("initial_values");
  const std::vector<double> vhat =
      estimate_initial_values(env, cls, params.n_est, config.mode, model_ptr, init_rng);
  if (!population) episodes += params.n_est;

  SurvivingSet surviving = SurvivingSet::all(N);
  for (long long t = 1; t <= max_iterations; ++t) {
    IterationRecord record;
    record.t = static_cast<int>(t);
    record.survivors_before = surviving.count();

    const int chosen = choose_optimistic(surviving, vhat);
    record.chosen_index = chosen;
    record.predicted_value = vhat[static_cast<std::size_t>(chosen)];
    const Hypothesis& f_t = cls.members[static_cast<std::size_t>(chosen)];

    if (!budget_allows(params.n_eval)) {
      result.outcome = RunOutcome::BudgetExhausted;
      result.episodes = episodes;
      return result;
    }
    Rng eval_rng = rng.substream("self_errors", static_cast<std::uint64_t>(t));
    record.self_errors =
        estimate_self_errors(env, f_t, params.n_eval, config.mode, model_ptr, eval_rng);
    if (!population) episodes += params.n_eval;
    record.self_error_sum =
        std::accumulate(record.self_errors.begin(), record.self_errors.end(), 0.0);
    record.episodes_cumulative = episodes;

    const TerminationDecision decision = check_termination(record.self_errors, eps_eff);
    if (decision.terminate) {
      record.terminated = true;
      record.survivors_after = record.survivors_before;
      result.records.push_back(std::move(record));
      result.outcome = RunOutcome::Success;
      result.policy = f_t.policy;
      result.chosen_index = chosen;
      result.iterations = static_cast<int>(t);
      result.episodes = episodes;
      return result;
    }
    record.level = decision.level;

    if (!budget_allows(params.n)) {
      result.outcome = RunOutcome::BudgetExhausted;
      result.episodes = episodes;
      result.iterations = static_cast<int>(t - 1);
      return result;
    }
    Rng learn_rng = rng.substream("all_errors", static_cast<std::uint64_t>(t));
    const std::vector<double> all_errors =
        estimate_all_errors(env, f_t.policy, decision.level, cls, surviving, params.n,
                            config.mode, model_ptr, learn_rng);
    if (!population) episodes += params.n;
    record.episodes_cumulative = episodes;

    const SurvivingSet next = eliminate(surviving, all_errors, elimination_threshold);
    for (int j = 0; j < N; ++j)
      if (surviving[j] && !next[j]) record.eliminated.push_back(j);
    record.survivors_after = next.count();
    surviving = next;
    result.records.push_back(std::move(record));
    result.iterations = static_cast<int>(t);

    if (surviving.count() == 0) {
      result.outcome = RunOutcome::EmptySurvivorSet;
      result.episodes = episodes;
      return result;
    }
  }

  result.outcome = RunOutcome::BudgetExhausted;
  result.episodes = episodes;
  return result;
}

OliveResult run_olive(const Env& env, const HypothesisClass& cls, OliveConfig config,
                      Rng rng) {
  config.theta = 0.0;
  config.theta_m = 0.0;
  return run_oliver(env, cls, config, rng);
}

OliveResult run_guess_m(const Env& env, const HypothesisClass& cls, const GuessMConfig& config,
                        Rng rng) {
  const int H = horizon(env);
  OliveResult last;
  last.mode = config.mode;
  long long total_episodes = 0;
  std::vector<GuessAttempt> attempts;

  for (int i = 1; i <= config.max_doublings; ++i) {
    const int guessed = 1 << i;
    const double zeta = config.zeta_rule ? (*config.zeta_rule)(guessed)
                                         : 2.0 * std::sqrt(static_cast<double>(guessed));
    const double delta_share =
        config.delta / (static_cast<double>(i) * static_cast<double>(i + 1));

    OliveConfig sub;
    sub.epsilon = config.epsilon;
    sub.delta = delta_share;
    sub.bellman_rank = guessed;
    sub.norm_bound = zeta;
    sub.mode = config.mode;
    sub.n_est_override = config.n_est_override;
    sub.n_eval_override = config.n_eval_override;
    sub.n_override = config.n_override;
    sub.max_episodes = config.max_episodes - total_episodes;

    // Hard stop: terminate the subroutine when t exceeds the iteration bound
    // computed from the guessed rank.
    const double bound =
        H * guessed * std::log(6.0 * H * std::sqrt(static_cast<double>(guessed)) * zeta /
                               config.epsilon) /
        std::log(5.0 / 3.0);
    const long long cap = std::max<long long>(0, static_cast<long long>(std::floor(bound)));
    sub.max_iterations = cap;

    GuessAttempt attempt;
    attempt.guessed_rank = guessed;
    attempt.norm_bound = zeta;
    attempt.delta_share = delta_share;
    attempt.iteration_cap = cap;

    OliveResult sub_result =
        run_oliver(env, cls, sub, rng.substream("guess", static_cast<std::uint64_t>(i)));
    attempt.iterations = sub_result.iterations;
    attempt.episodes = sub_result.episodes;
    attempt.returned = sub_result.success();
    total_episodes += sub_result.episodes;
    attempts.push_back(attempt);

    if (sub_result.success()) {
      sub_result.episodes = total_episodes;
      sub_result.guess_attempts = std::move(attempts);
      return sub_result;
    }
    last = std::move(sub_result);
    if (config.mode == ExecutionMode::Sampled && total_episodes >= config.max_episodes) break;
  }

  last.outcome = RunOutcome::BudgetExhausted;
  last.episodes = total_episodes;
  last.guess_attempts = std::move(attempts);
  return last;
}

}  // namespace cdplab
