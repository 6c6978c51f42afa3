#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdplab/exact.hpp"
#include "cdplab/oracle.hpp"

namespace cdplab {

enum class ExecutionMode { Sampled, Population };

// Resolved per-run sample sizes and elimination threshold.
struct OliveParams {
  double phi = 0.0;
  long long n_est = 0;
  long long n_eval = 0;
  long long n = 0;
};

// phi = eps / (12 H sqrt(M));
// n_est  = (32/eps^2) ln(6N/delta);
// n_eval = (288 H^2/eps^2) ln(12 H^2 M ln(6 H sqrt(M) zeta / eps) / delta);
// n      = (4608 H^2 M K/eps^2) ln(12 N H M ln(6 H sqrt(M) zeta / eps) / delta).
// Sample sizes are rounded up. Natural logarithms throughout; nonpositive
// logarithm arguments raise std::invalid_argument.
OliveParams compute_parameters(double epsilon, double delta, int bellman_rank,
                               double norm_bound, int horizon, int action_count,
                               int class_size);

struct OliveConfig {
  double epsilon = 0.1;
  double delta = 0.05;
  int bellman_rank = 1;     // M
  double norm_bound = 2.0;  // zeta
  double theta = 0.0;       // validity slack (0 recovers the plain algorithm)
  double theta_m = 0.0;     // factorization slack
  ExecutionMode mode = ExecutionMode::Sampled;

  std::optional<double> phi_override;
  std::optional<long long> n_est_override;
  std::optional<long long> n_eval_override;
  std::optional<long long> n_override;

  std::optional<long long> max_iterations;  // default: 2x the iteration bound
  long long max_episodes = 10'000'000;
};

enum class RunOutcome { Success, EmptySurvivorSet, BudgetExhausted };

std::string to_string(RunOutcome outcome);
std::string to_string(ExecutionMode mode);

struct IterationRecord {
  int t = 0;
  int chosen_index = -1;
  double predicted_value = 0.0;
  std::vector<double> self_errors;  // per level 1..H
  double self_error_sum = 0.0;
  bool terminated = false;
  int level = -1;                 // h_t; -1 on the terminating iteration
  std::vector<int> eliminated;    // member indices removed this iteration
  int survivors_before = 0;
  int survivors_after = 0;
  long long episodes_cumulative = 0;
};

struct GuessAttempt {
  int guessed_rank = 0;  // M'
  double norm_bound = 0.0;
  double delta_share = 0.0;
  long long iteration_cap = 0;
  int iterations = 0;
  long long episodes = 0;
  bool returned = false;
};

struct OliveResult {
  RunOutcome outcome = RunOutcome::Success;
  std::optional<Policy> policy;
  std::optional<int> chosen_index;
  int iterations = 0;
  long long episodes = 0;
  ExecutionMode mode = ExecutionMode::Sampled;
  OliveParams params;
  double epsilon_effective = 0.0;  // eps' used by termination / level selection
  // config echo, enough to replay diagnostics from the files alone
  double epsilon = 0.0, delta = 0.0;
  int bellman_rank = 0;
  double norm_bound = 0.0, theta = 0.0, theta_m = 0.0;
  std::vector<IterationRecord> records;
  std::vector<GuessAttempt> guess_attempts;  // populated by the rank-guessing wrapper
  std::vector<std::string> warnings;

  bool success() const { return outcome == RunOutcome::Success; }
};

// --- Building blocks (exposed for the estimator-level tests) ---------------

// Warm-up batch: n_est uniform-action episodes, V-hat per member from the
// retained initial contexts. Population mode returns the exact initial values.
std::vector<double> estimate_initial_values(const Env& env, const HypothesisClass& cls,
                                            long long n_est, ExecutionMode mode,
                                            const ExactModel* model, Rng& rng);

// argmax of vhat over surviving members, lowest index on ties. Throws
// std::runtime_error if the set is empty.
int choose_optimistic(const SurvivingSet& surviving, const std::vector<double>& vhat);

// On-policy per-level self-errors of one hypothesis:
// mean of g(x_h) - r_h - g(x_{h+1}) over n_eval rollouts of its own policy.
std::vector<double> estimate_self_errors(const Env& env, const Hypothesis& f,
                                         long long n_eval, ExecutionMode mode,
                                         const ExactModel* model, Rng& rng);

struct TerminationDecision {
  bool terminate = false;
  int level = -1;  // smallest qualifying level when continuing
};

// Terminate iff sum_h err <= 5 eps_eff / 8; otherwise the smallest level with
// err >= 5 eps_eff / (8H). The level is guaranteed to exist by pigeonhole.
TerminationDecision check_termination(const std::vector<double>& self_errors,
                                      double epsilon_effective);

// Importance-weighted errors for every surviving member from one shared batch
// of n uniform-deviation episodes:
// mean of K 1[a_h = pi_f(x_h)] (g_f(x_h) - r_h - g_f(x_{h+1})).
// Non-survivors get 0 entries.
std::vector<double> estimate_all_errors(const Env& env, const Policy& rollin, int level,
                                        const HypothesisClass& cls,
                                        const SurvivingSet& surviving, long long n,
                                        ExecutionMode mode, const ExactModel* model,
                                        Rng& rng);

// Learning step: keep f iff |err_f| <= threshold.
SurvivingSet eliminate(const SurvivingSet& surviving, const std::vector<double>& errors,
                       double threshold);

// --- Full runs --------------------------------------------------------------

// The elimination loop with validity slack theta and factorization slack
// theta_m; theta = theta_m = 0 is the plain optimism-led elimination run.
OliveResult run_oliver(const Env& env, const HypothesisClass& cls, const OliveConfig& config,
                       Rng rng);

// Convenience wrapper: run_oliver with both slacks forced to zero.
OliveResult run_olive(const Env& env, const HypothesisClass& cls, OliveConfig config,
                      Rng rng);

using ZetaRule = std::function<double(int)>;  // guessed rank M' -> norm bound

struct GuessMConfig {
  double epsilon = 0.1;
  double delta = 0.05;
  ExecutionMode mode = ExecutionMode::Sampled;
  std::optional<ZetaRule> zeta_rule;  // default: 2 sqrt(M')
  int max_doublings = 24;
  long long max_episodes = 10'000'000;
  std::optional<long long> n_est_override, n_eval_override, n_override;
};

// Doubling schedule over guessed ranks M' = 2^i with failure budget
// delta/(i(i+1)) and a hard per-call iteration stop; returns the first policy
// any call produces.
OliveResult run_guess_m(const Env& env, const HypothesisClass& cls, const GuessMConfig& config,
                        Rng rng);

// Iteration bound H * M * ln(zeta/(2 phi)) / ln(5/3).
double elimination_iteration_bound(int horizon, int bellman_rank, double norm_bound, double phi);

}  // namespace cdplab
