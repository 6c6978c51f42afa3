#include <doctest.h>

#include <cmath>

#include "cdplab/geometry.hpp"
#include "support/test_helpers.hpp"

using namespace cdplab;
using namespace cdplab::testing;

namespace {

// quadratic form w^T B^{-1} w for the diagonal shapes produced here
double form_value(const CenteredEllipsoid& e, const std::vector<double>& w) {
  double v = 0.0;
  for (int i = 0; i < e.dim; ++i)
    v += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)] /
         e.shape_at(i, i);
  return v;
}

// uniform point in the d-ball via gaussian direction and radius u^(1/d)
std::vector<double> ball_point(int dim, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(dim));
  double norm = 0.0;
  for (auto& x : w) {
    // Box-Muller
    const double u1 = std::max(rng.uniform(), 1e-300);
    const double u2 = rng.uniform();
    x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  const double radius = std::pow(rng.uniform(), 1.0 / dim);
  for (auto& x : w) x = x / norm * radius;
  return w;
}

}  // namespace

TEST_CASE("the identity cut returns the unit ball") {
  for (int d : {2, 5, 17}) {
    const double beta = 1.0 / std::sqrt(static_cast<double>(d));
    const CenteredEllipsoid e = mvee_slab_cut_unit(beta, d);
    for (int i = 0; i < d; ++i) CHECK(e.shape_at(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(volume_ratio(beta, d) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("d=2 closed forms match the worked example") {
  const double beta = 1.0 / (3.0 * std::sqrt(2.0));
  const CenteredEllipsoid e = mvee_slab_cut_unit(beta, 2);
  // sigma = 16/17, rho = 17/9, so the axes are rho(1-sigma) = 1/9 and rho
  CHECK(e.shape_at(0, 0) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(e.shape_at(1, 1) == doctest::Approx(17.0 / 9.0).epsilon(1e-12));

  // two independent closed-form routes to the same number
  const double direct = volume_ratio(beta, 2);
  CHECK(direct == doctest::Approx(std::sqrt(17.0) / 9.0).epsilon(1e-12));
  CHECK(direct == doctest::Approx(0.45812284729085117).epsilon(1e-9));
}

TEST_CASE("volume ratio equals the determinant route") {
  for (int d : {2, 3, 8, 33, 64}) {
    for (double frac : {0.2, 0.5, 0.9, 1.0}) {
      const double beta = frac / std::sqrt(static_cast<double>(d));
      const CenteredEllipsoid e = mvee_slab_cut_unit(beta, d);
      CHECK(volume_ratio(beta, d) ==
            doctest::Approx(std::exp(0.5 * e.log_det)).epsilon(1e-12));
    }
  }
}

TEST_CASE("volume ratio is strictly increasing in beta") {
  for (int d : {2, 7, 64}) {
    double previous = 0.0;
    for (int k = 1; k <= 40; ++k) {
      const double beta = (k / 40.0) / std::sqrt(static_cast<double>(d));
      const double ratio = volume_ratio(beta, d);
      CHECK(ratio > previous);
      previous = ratio;
    }
    CHECK(previous == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("dimension one degenerates to the interval") {
  const CenteredEllipsoid e = mvee_slab_cut_unit(0.4, 1);
  CHECK(e.dim == 1);
  CHECK(e.shape_at(0, 0) == doctest::Approx(0.16));
  CHECK(volume_ratio(0.4, 1) == doctest::Approx(0.4));
  CHECK(slab_cut_ratio_bound(1.0, 1.0 / 3.0, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("out-of-range cuts are rejected") {
  CHECK_THROWS_AS((void)mvee_slab_cut_unit(0.9, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)mvee_slab_cut_unit(0.0, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)volume_ratio(-0.1, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)slab_cut_ratio_bound(1.0, 0.9, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)slab_cut_ratio_bound(0.0, 0.1, 2), std::invalid_argument);
}

TEST_CASE("slab bound reduces to the volume ratio and is tau-free after scaling") {
  CHECK(slab_cut_ratio_bound(3.0, 1.0, 4) == doctest::Approx(volume_ratio(1.0 / 3.0, 4)));
  // kappa = 3 sqrt(d) tau makes the bound independent of tau
  for (int d : {2, 9, 64}) {
    const double a = slab_cut_ratio_bound(3.0 * std::sqrt(static_cast<double>(d)) * 0.01,
                                          0.01, d);
    const double b = slab_cut_ratio_bound(3.0 * std::sqrt(static_cast<double>(d)) * 1.7,
                                          1.7, d);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("the one-third-of-sqrt-d cut shrinks volume below 0.6") {
  for (int d = 2; d <= 64; ++d) {
    const double value =
        slab_cut_ratio_bound(3.0 * std::sqrt(static_cast<double>(d)), 1.0, d);
    CHECK(value < 0.6);
    if (d == 2) CHECK(value < 0.52);  // the proof's tighter constant
  }
}

TEST_CASE("the enclosing ellipsoid contains the slab region") {
  Rng rng(7);
  for (int d : {2, 3, 5}) {
    const double beta = 1.0 / (3.0 * std::sqrt(static_cast<double>(d)));
    const CenteredEllipsoid e = mvee_slab_cut_unit(beta, d);
    int tested = 0;
    double max_form = 0.0;
    while (tested < 100000) {
      std::vector<double> w = ball_point(d, rng);
      if (std::abs(w[0]) > beta) continue;
      ++tested;
      const double v = form_value(e, w);
      max_form = std::max(max_form, v);
      CHECK(v <= 1.0 + 1e-12);
    }
    // extreme shell: |w_1| = beta with the rest on the orthogonal sphere;
    // these sit exactly on the enclosing boundary
    for (int rep = 0; rep < 1000; ++rep) {
      std::vector<double> w = ball_point(d, rng);
      double tail = 0.0;
      for (int i = 1; i < d; ++i) tail += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
      if (tail <= 0.0) continue;
      const double scale = std::sqrt((1.0 - beta * beta) / tail);
      w[0] = beta;
      for (int i = 1; i < d; ++i) w[static_cast<std::size_t>(i)] *= scale;
      const double v = form_value(e, w);
      CHECK(v <= 1.0 + 1e-12);
      max_form = std::max(max_form, v);
    }
    // minimality evidence: a 0.999 shrink loses one of the sampled points
    CHECK(max_form * (1.0 / 0.999) > 1.0);
  }
}

TEST_CASE("version-space tracker certifies a finished population run") {
  const Env env{make_random_mdp(3, 2, 3, 91)};
  const TabularMDP& mdp = std::get<TabularMDP>(env);
  const HypothesisClass hyps = to_hypotheses(realizable_class(env, 12, 0.4, 8));
  OliveConfig config;
  config.epsilon = 0.05;
  config.delta = 0.05;
  config.bellman_rank = 3;
  config.norm_bound = 2.0 * std::sqrt(3.0);
  config.mode = ExecutionMode::Population;
  const OliveResult result = run_olive(env, hyps, config, Rng(4));
  REQUIRE(result.success());

  std::vector<BellmanFactorization> facts;
  for (int h = 1; h <= 3; ++h) facts.push_back(mdp_factorization(mdp, hyps, h));
  const VersionSpaceAudit audit = version_space_tracker(
      facts, result, result.params.phi, 0.0, 0.0, config.bellman_rank, config.norm_bound);

  CHECK(audit.pass());
  int total_cuts = 0;
  for (const auto& level : audit.levels) {
    CHECK(level.witnesses_ok);
    CHECK(level.count_ok);
    CHECK(static_cast<double>(level.cuts.size()) <= level.cut_count_bound + 1e-9);
    for (const auto& cut : level.cuts) {
      CHECK(cut.witness >= cut.required * (1.0 - 1e-12));
      CHECK(cut.ratio_bound > 0.0);
      CHECK(cut.ratio_bound < 0.6);
      CHECK(cut.slab_half_width > 0.0);
    }
    total_cuts += static_cast<int>(level.cuts.size());
  }
  // every non-terminating iteration contributed exactly one cut
  CHECK(total_cuts == result.iterations - 1);

  SUBCASE("levels that never trained produce empty logs") {
    OliveResult empty_trace = result;
    empty_trace.records.clear();
    const VersionSpaceAudit empty = version_space_tracker(
        facts, empty_trace, result.params.phi, 0.0, 0.0, 3, config.norm_bound);
    for (const auto& level : empty.levels) CHECK(level.cuts.empty());
    CHECK(empty.pass());
  }
}

TEST_CASE("the tracker flags a witness that breaks its precondition") {
  const Env env{make_random_mdp(3, 2, 2, 92)};
  const TabularMDP& mdp = std::get<TabularMDP>(env);
  const HypothesisClass hyps = to_hypotheses(realizable_class(env, 8, 0.4, 9));
  std::vector<BellmanFactorization> facts;
  for (int h = 1; h <= 2; ++h) facts.push_back(mdp_factorization(mdp, hyps, h));

  OliveResult fake;
  fake.mode = ExecutionMode::Population;
  IterationRecord record;
  record.t = 1;
  record.chosen_index = 0;  // Q*: its witness is ~0, far below the requirement
  record.level = 1;
  fake.records.push_back(record);

  const VersionSpaceAudit audit = version_space_tracker(facts, fake, 0.001, 0.0, 0.0, 3,
                                                        2.0 * std::sqrt(3.0));
  CHECK_FALSE(audit.pass());
  CHECK_FALSE(audit.levels[0].witnesses_ok);
  CHECK_FALSE(audit.levels[0].cuts[0].witness_ok);
}
