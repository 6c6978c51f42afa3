#include <doctest.h>

#include "cdplab/olive.hpp"
#include "support/test_helpers.hpp"

using namespace cdplab;
using namespace cdplab::testing;

TEST_CASE("exact value of a deterministic chain") {
  const Env env{deterministic_chain(3, 0.4)};
  const ExactModel model = build_exact_model(env);
  CHECK(exact_value_of_policy(model, constant_policy(env, 1)) == doctest::Approx(0.4));
}

TEST_CASE("exact value with action-independent rewards is the mean reward sum") {
  TabularMDP mdp = make_random_mdp(3, 2, 3, 10);
  // force both actions to share rewards and transitions
  for (int h = 1; h <= 3; ++h) {
    auto& rew = mdp.reward_mean[static_cast<std::size_t>(h - 1)];
    auto& table = mdp.trans[static_cast<std::size_t>(h - 1)];
    for (int s = 0; s < 3; ++s) {
      rew[static_cast<std::size_t>(s * 2 + 1)] = rew[static_cast<std::size_t>(s * 2)];
      for (int sp = 0; sp < 3; ++sp)
        table[static_cast<std::size_t>((s * 2 + 1) * 3 + sp)] =
            table[static_cast<std::size_t>((s * 2) * 3 + sp)];
    }
  }
  const Env env{mdp};
  const ExactModel model = build_exact_model(env);
  Rng rng(3);
  const Policy arbitrary = random_policy(env, rng);
  // forward sum with the all-zero policy equals any policy's value here
  double expected = 0.0;
  std::vector<double> occ = mdp.init;
  for (int h = 1; h <= 3; ++h) {
    std::vector<double> next(3, 0.0);
    for (int s = 0; s < 3; ++s) {
      expected += occ[static_cast<std::size_t>(s)] *
                  mdp.reward_mean[static_cast<std::size_t>(h - 1)]
                                 [static_cast<std::size_t>(s * 2)];
      for (int sp = 0; sp < 3; ++sp)
        next[static_cast<std::size_t>(sp)] +=
            occ[static_cast<std::size_t>(s)] *
            mdp.trans[static_cast<std::size_t>(h - 1)]
                     [static_cast<std::size_t>((s * 2) * 3 + sp)];
    }
    occ = std::move(next);
  }
  CHECK(exact_value_of_policy(model, arbitrary) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("occupancy matches brute-force path enumeration") {
  const TabularMDP mdp = make_random_mdp(3, 2, 3, 7);
  const Env env{mdp};
  const ExactModel model = build_exact_model(env);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Rng policy_rng = rng.substream("policy", static_cast<std::uint64_t>(trial));
    const Policy pi = random_policy(env, policy_rng);
    for (int h = 1; h <= 3; ++h) {
      const auto fast = occupancy(model, pi, h);
      const auto slow = enumerated_occupancy(mdp, pi, h);
      REQUIRE(fast.probabilities.size() == slow.size());
      double total = 0.0;
      for (std::size_t s = 0; s < slow.size(); ++s) {
        CHECK(fast.probabilities[s] == doctest::Approx(slow[s]).epsilon(1e-12));
        total += fast.probabilities[s];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("occupancy degenerate cases") {
  const Env env{make_random_mdp(3, 2, 3, 7)};
  const ExactModel model = build_exact_model(env);
  const Policy pi = constant_policy(env, 0);
  const auto level1 = occupancy(model, pi, 1);
  CHECK(level1.probabilities == std::get<TabularMDP>(env).init);

  const Env chain{deterministic_chain(3, 0.0)};
  const auto point = occupancy(build_exact_model(chain), constant_policy(chain, 0), 3);
  CHECK(point.probabilities == std::vector<double>{1.0});
}

TEST_CASE("Q* has zero average Bellman error under every roll-in") {
  const Env env{make_random_mdp(4, 3, 3, 29)};
  const ExactModel model = build_exact_model(env);
  const Hypothesis opt = hypothesis_of(qstar(env));
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Rng policy_rng = rng.substream("policy", static_cast<std::uint64_t>(trial));
    const Policy rollin = random_policy(env, policy_rng);
    for (int h = 1; h <= 3; ++h)
      CHECK(std::abs(exact_bellman_error(model, opt, rollin, h)) <= 1e-10);
  }
}

TEST_CASE("constant functions telescope except at the last level") {
  const Env env{deterministic_chain(3, 0.0)};
  const ExactModel model = build_exact_model(env);
  const Hypothesis constant = hypothesis_of(constant_qfunction(env, 0.37));
  const Policy pi = constant_policy(env, 0);
  CHECK(exact_bellman_error(model, constant, pi, 1) == doctest::Approx(0.0));
  CHECK(exact_bellman_error(model, constant, pi, 2) == doctest::Approx(0.0));
  CHECK(exact_bellman_error(model, constant, pi, 3) == doctest::Approx(0.37));
}

TEST_CASE("importance-weighted estimator agrees with the exact error") {
  // 20 (env, f, rollin, h) tuples: 5 environments x 4 class members each
  const long long n = 100000;
  const double band = 4.0 * std::sqrt(4.0 * 2.0 / static_cast<double>(n));
  int tuples = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Env env{make_random_mdp(3, 2, 3, seed * 7)};
    const ExactModel model = build_exact_model(env);
    const HypothesisClass hyps = to_hypotheses(realizable_class(env, 4, 0.5, seed + 21));
    Rng rng(seed + 44);
    const Policy rollin = random_policy(env, rng);
    const int h = 1 + static_cast<int>(seed % 3);

    Rng est_rng(seed + 91);
    const auto estimates = estimate_all_errors(env, rollin, h, hyps, SurvivingSet::all(4),
                                               n, ExecutionMode::Sampled, nullptr, est_rng);
    for (int j = 0; j < 4; ++j) {
      const double exact =
          exact_bellman_error(model, hyps.members[static_cast<std::size_t>(j)], rollin, h);
      CHECK(std::abs(estimates[static_cast<std::size_t>(j)] - exact) <= band);
      ++tuples;
    }
  }
  CHECK(tuples == 20);
}

TEST_CASE("Bellman error matrices: zero matrix for {Q*} and a zero Q* column") {
  const Env env{make_random_mdp(3, 2, 3, 31)};
  const ExactModel model = build_exact_model(env);

  FunctionClass only_qstar;
  only_qstar.members.push_back(qstar(env));
  for (int h = 1; h <= 3; ++h) {
    const auto mat = bellman_error_matrix(model, to_hypotheses(only_qstar), h);
    CHECK(std::abs(mat.at(0, 0)) <= 1e-12);
  }

  const FunctionClass cls = realizable_class(env, 12, 0.5, 3);
  const HypothesisClass hyps = to_hypotheses(cls);
  for (int h = 1; h <= 3; ++h) {
    const auto mat = bellman_error_matrix(model, hyps, h);
    for (int i = 0; i < mat.size; ++i) CHECK(std::abs(mat.at(i, 0)) <= 1e-10);
    for (int i = 0; i < mat.size; ++i)
      for (int j = 0; j < mat.size; ++j) {
        CHECK(mat.at(i, j) >= -2.0 - 1e-12);
        CHECK(mat.at(i, j) <= 1.0 + 1e-12);
      }
  }
}

TEST_CASE("numerical rank thresholds") {
  SUBCASE("all-zero matrices have rank 0") {
    BellmanErrorMatrix zero;
    zero.level = 1;
    zero.size = 4;
    zero.entries.assign(16, 0.0);
    CHECK(numerical_bellman_rank({zero}) == 0);
    CHECK_THROWS_AS((void)numerical_bellman_rank({}), std::invalid_argument);
  }
  SUBCASE("tabular rank is bounded by the state count") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Env env{make_random_mdp(3, 2, 3, seed)};
      const auto matrices =
          bellman_error_matrices(build_exact_model(env),
                                 to_hypotheses(random_class(env, 20, seed + 100)));
      CHECK(numerical_bellman_rank(matrices) <= 3);
    }
  }
  SUBCASE("low-rank dynamics cut the bound to the latent dimension") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Env env{make_low_rank_mdp(6, 2, 3, 2, seed)};
      const auto matrices =
          bellman_error_matrices(build_exact_model(env),
                                 to_hypotheses(random_class(env, 20, seed + 100)));
      CHECK(numerical_bellman_rank(matrices) <= 2);
    }
  }
}

TEST_CASE("MDP factorization is exact with certified norms") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularMDP mdp = make_random_mdp(4, 2, 3, seed);
    const Env env{mdp};
    const ExactModel model = build_exact_model(env);
    const HypothesisClass hyps = to_hypotheses(random_class(env, 8, seed + 7));
    for (int h = 1; h <= 3; ++h) {
      const BellmanFactorization fact = mdp_factorization(mdp, hyps, h);
      const FactorizationReport report = verify_factorization(model, hyps, fact, 1e-10);
      CHECK(report.pass());
      CHECK(report.max_residual <= 1e-10);
      for (const auto& nu : fact.nu) {
        double norm = 0.0, l1 = 0.0;
        for (double v : nu) {
          norm += v * v;
          l1 += std::abs(v);
        }
        CHECK(std::sqrt(norm) <= 1.0 + 1e-12);
        CHECK(l1 == doctest::Approx(1.0).epsilon(1e-10));
      }
      for (const auto& xi : fact.xi) {
        double norm = 0.0;
        for (double v : xi) norm += v * v;
        CHECK(std::sqrt(norm) <= 2.0 * std::sqrt(4.0) + 1e-12);
      }
    }
  }
}

TEST_CASE("deterministic dynamics give one-hot occupancy vectors") {
  const TabularMDP chain = deterministic_chain(3, 0.2);
  const Env env{chain};
  const HypothesisClass hyps = to_hypotheses(random_class(env, 3, 5));
  const BellmanFactorization fact = mdp_factorization(chain, hyps, 2);
  for (const auto& nu : fact.nu) {
    CHECK(nu.size() == 1);
    CHECK(nu[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("low-rank factorization reproduces exact errors in latent dimension") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const LowRankMDP lr = make_low_rank_mdp(5, 2, 3, 2, seed);
    const Env env{lr};
    const ExactModel model = build_exact_model(env);
    const HypothesisClass hyps = to_hypotheses(random_class(env, 8, seed + 19));
    for (int h = 1; h <= 3; ++h) {
      const BellmanFactorization fact = lowrank_factorization(lr, hyps, h);
      CHECK(fact.dim == 2);
      const FactorizationReport report = verify_factorization(model, hyps, fact, 1e-8);
      CHECK(report.pass());
      CHECK(report.norm_product <= fact.zeta + 1e-12);
    }
  }
}

TEST_CASE("rank-1 dynamics make every roll-in row identical") {
  const LowRankMDP lr = make_low_rank_mdp(5, 2, 3, 1, 3);
  const Env env{lr};
  const ExactModel model = build_exact_model(env);
  const HypothesisClass hyps = to_hypotheses(random_class(env, 6, 4));
  for (int h = 2; h <= 3; ++h) {
    const auto mat = bellman_error_matrix(model, hyps, h);
    for (int i = 1; i < mat.size; ++i)
      for (int j = 0; j < mat.size; ++j)
        CHECK(mat.at(i, j) == doctest::Approx(mat.at(0, j)).epsilon(1e-10));
    const BellmanFactorization fact = lowrank_factorization(lr, hyps, h);
    for (const auto& nu : fact.nu) CHECK(nu[0] == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("hidden-state factorization: exactness, unit mass, and MDP reduction") {
  SUBCASE("round trip on random hidden-state models") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const ReactivePOMDP pomdp = make_reactive_pomdp(3, 8, 2, 3, seed);
      const Env env{pomdp};
      const ExactModel model = build_exact_model(env);
      const HypothesisClass hyps = to_hypotheses(random_class(env, 8, seed + 11));
      for (int h = 1; h <= 3; ++h) {
        const BellmanFactorization fact = pomdp_factorization(pomdp, hyps, h);
        CHECK(verify_factorization(model, hyps, fact, 1e-8).pass());
        for (const auto& nu : fact.nu) {
          double l1 = 0.0;
          for (double v : nu) l1 += std::abs(v);
          CHECK(l1 == doctest::Approx(1.0).epsilon(1e-10));
        }
      }
    }
  }
  SUBCASE("identity embedding reduces to the MDP factorization") {
    const TabularMDP mdp = make_random_mdp(3, 2, 3, 9);
    const ReactivePOMDP embedded = embed_mdp_as_pomdp(mdp);
    const HypothesisClass hyps = to_hypotheses(random_class(Env{mdp}, 6, 2));
    for (int h = 1; h <= 3; ++h) {
      const BellmanFactorization via_mdp = mdp_factorization(mdp, hyps, h);
      const BellmanFactorization via_pomdp = pomdp_factorization(embedded, hyps, h);
      REQUIRE(via_mdp.dim == via_pomdp.dim);
      for (std::size_t j = 0; j < hyps.members.size(); ++j) {
        for (int s = 0; s < 3; ++s) {
          CHECK(via_pomdp.nu[j][static_cast<std::size_t>(s)] ==
                doctest::Approx(via_mdp.nu[j][static_cast<std::size_t>(s)]).epsilon(1e-12));
          CHECK(via_pomdp.xi[j][static_cast<std::size_t>(s)] ==
                doctest::Approx(via_mdp.xi[j][static_cast<std::size_t>(s)]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("verify_factorization localizes corruption and honors declared slack") {
  const TabularMDP mdp = make_random_mdp(3, 2, 2, 13);
  const Env env{mdp};
  const ExactModel model = build_exact_model(env);
  const HypothesisClass hyps = to_hypotheses(random_class(env, 5, 3));
  BellmanFactorization fact = mdp_factorization(mdp, hyps, 2);

  SUBCASE("clean factorization passes tightly") {
    const auto report = verify_factorization(model, hyps, fact, 1e-10);
    CHECK(report.pass());
  }
  SUBCASE("corrupting one coordinate is caught with a witness") {
    fact.nu[2][1] += 0.1;
    const auto report = verify_factorization(model, hyps, fact, 1e-8);
    CHECK_FALSE(report.pass());
    REQUIRE_FALSE(report.failing_pairs.empty());
    bool rollin_2_named = false;
    for (const auto& [i, j] : report.failing_pairs)
      if (i == 2) rollin_2_named = true;
    CHECK(rollin_2_named);
    CHECK(report.worst_rollin == 2);
  }
  SUBCASE("declared approximation slack widens the acceptance") {
    fact.nu[2][1] += 0.01;
    const auto strict = verify_factorization(model, hyps, fact, 1e-8);
    CHECK_FALSE(strict.residual_ok);
    fact.theta_m = 0.05;
    const auto slack = verify_factorization(model, hyps, fact, 1e-8);
    CHECK(slack.residual_ok);
  }
}

TEST_CASE("policy loss decomposition holds as an identity") {
  Rng rng(64);
  int pairs_checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Env env{make_random_mdp(3 + static_cast<int>(seed % 3), 2, 2 + static_cast<int>(seed % 3), seed)};
    const ExactModel model = build_exact_model(env);
    const FunctionClass cls = random_class(env, 5, seed + 31);
    for (const auto& f : cls.members) {
      CHECK(policy_loss_residual(model, hypothesis_of(f)) <= 1e-10);
      ++pairs_checked;
    }
    const Hypothesis opt = hypothesis_of(qstar(env));
    CHECK(policy_loss_residual(model, opt) <= 1e-10);
    CHECK(std::abs(exact_initial_value(model, opt) - exact_value(model, opt.policy)) <= 1e-10);
  }
  CHECK(pairs_checked == 100);
}

TEST_CASE("theta-valid sets grow with theta and recover the realizable optimum") {
  const Env env{make_random_mdp(3, 2, 3, 41)};
  const ExactModel model = build_exact_model(env);
  const FunctionClass cls = realizable_class(env, 12, 0.4, 17);
  const HypothesisClass hyps = to_hypotheses(cls);

  SUBCASE("theta = 0 marks Q* and attains V*") {
    const SurvivingSet valid = theta_valid_set(model, hyps, 0.0);
    CHECK(valid[0]);
    const auto best = optimal_valid_value(model, hyps, 0.0);
    REQUIRE(best.has_value());
    const double vstar = exact_value(model, greedy_policy(qstar(env)));
    CHECK(best->value == doctest::Approx(vstar).epsilon(1e-10));
  }
  SUBCASE("theta = 2 marks everything") {
    const SurvivingSet valid = theta_valid_set(model, hyps, 2.0);
    CHECK(valid.count() == 12);
  }
  SUBCASE("v*_theta is nondecreasing on a grid") {
    double previous = -1.0;
    for (int k = 0; k <= 10; ++k) {
      const auto best = optimal_valid_value(model, hyps, 0.01 * k);
      REQUIRE(best.has_value());
      CHECK(best->value >= previous - 1e-12);
      previous = best->value;
    }
  }
  SUBCASE("an empty valid set is signaled explicitly") {
    // constants far from any fixed point at the last level
    FunctionClass bad;
    bad.members.push_back(constant_qfunction(env, 0.9));
    bad.members.push_back(constant_qfunction(env, 0.8));
    const auto best = optimal_valid_value(model, to_hypotheses(bad), 0.0);
    CHECK_FALSE(best.has_value());
  }
}
