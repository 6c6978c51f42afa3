#include "cdplab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <sstream>
#include <thread>

#include "cdplab/generators.hpp"
#include "cdplab/geometry.hpp"

namespace cdplab {

const char* kToolVersion = "cdplab 0.1.0";

namespace fs = std::filesystem;

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "olive") return ExperimentKind::Olive;
  if (s == "oliver") return ExperimentKind::Oliver;
  if (s == "guessm") return ExperimentKind::GuessM;
  if (s == "rank") return ExperimentKind::Rank;
  if (s == "geometry") return ExperimentKind::Geometry;
  if (s == "lowerbound-demo") return ExperimentKind::LowerBoundDemo;
  throw std::invalid_argument("unknown experiment kind: " + s);
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Olive: return "olive";
    case ExperimentKind::Oliver: return "oliver";
    case ExperimentKind::GuessM: return "guessm";
    case ExperimentKind::Rank: return "rank";
    case ExperimentKind::Geometry: return "geometry";
    case ExperimentKind::LowerBoundDemo: return "lowerbound-demo";
  }
  return "unknown";
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig config;
  if (!j.contains("kind")) throw std::invalid_argument("config: missing field 'kind'");
  config.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  config.env_spec = j.value("env", json::object());
  config.class_spec = j.value("class", json::object());
  config.algorithm = j.value("algorithm", json::object());
  config.extra = j.value("extra", json::object());
  if (j.contains("seeds")) {
    for (const auto& s : j.at("seeds")) config.seeds.push_back(s.get<std::uint64_t>());
  }
  if (config.seeds.empty() && config.kind != ExperimentKind::Geometry)
    throw std::invalid_argument("config: 'seeds' must be a nonempty array");
  config.out_dir = j.value("out_dir", std::string{});
  return config;
}

json ExperimentConfig::to_json() const {
  return json{{"kind", cdplab::to_string(kind)}, {"env", env_spec},
              {"class", class_spec},             {"algorithm", algorithm},
              {"extra", extra},                  {"seeds", seeds},
              {"out_dir", out_dir}};
}

namespace {

std::uint64_t spec_seed(const json& gen, const char* purpose, std::uint64_t run_seed) {
  if (gen.contains("seed")) return gen.at("seed").get<std::uint64_t>();
  return Rng(run_seed).substream(purpose).root_seed();
}

int require_int(const json& j, const char* field, const char* where) {
  if (!j.contains(field)) {
    std::ostringstream msg;
    msg << where << ": missing field '" << field << "'";
    throw std::invalid_argument(msg.str());
  }
  return j.at(field).get<int>();
}

}  // namespace

Env resolve_env(const json& env_spec, std::uint64_t run_seed) {
  if (env_spec.contains("file")) return env_from_json(read_json_file(env_spec.at("file")));
  if (!env_spec.contains("generator"))
    throw std::invalid_argument("env: expected 'file' or 'generator'");
  const json& gen = env_spec.at("generator");
  const std::string family = gen.value("family", "");
  const std::uint64_t seed = spec_seed(gen, "env", run_seed);

  if (family == "mdp") {
    const RewardNoise noise =
        gen.value("reward_noise", std::string("none")) == "bernoulli" ? RewardNoise::Bernoulli
                                                                      : RewardNoise::None;
    return make_random_mdp(require_int(gen, "states", "env.generator"),
                           require_int(gen, "actions", "env.generator"),
                           require_int(gen, "horizon", "env.generator"), seed, noise);
  }
  if (family == "lowrank")
    return make_low_rank_mdp(require_int(gen, "states", "env.generator"),
                             require_int(gen, "actions", "env.generator"),
                             require_int(gen, "horizon", "env.generator"),
                             require_int(gen, "latent_dim", "env.generator"), seed);
  if (family == "pomdp")
    return make_reactive_pomdp(require_int(gen, "hidden_states", "env.generator"),
                               require_int(gen, "observations", "env.generator"),
                               require_int(gen, "actions", "env.generator"),
                               require_int(gen, "horizon", "env.generator"), seed);
  if (family == "gridworld")
    return make_gridworld_pomdp(require_int(gen, "width", "env.generator"),
                                require_int(gen, "height", "env.generator"),
                                require_int(gen, "obs_per_cell", "env.generator"),
                                require_int(gen, "horizon", "env.generator"), seed,
                                gen.value("slip", 0.1));
  if (family == "tree") {
    const int actions = require_int(gen, "actions", "env.generator");
    const int horizon = require_int(gen, "horizon", "env.generator");
    int leaf = gen.value("leaf_index", -1);
    if (leaf < 0) {
      long long leaves = 1;
      for (int i = 0; i < horizon; ++i) leaves *= actions;
      leaf = static_cast<int>(Rng(seed).substream("leaf").uniform_int(static_cast<int>(leaves)));
    }
    return make_tree_lower_bound(actions, horizon, gen.value("gap", 0.2), leaf);
  }
  if (family == "chain") {
    std::optional<std::vector<std::vector<int>>> best;
    if (gen.contains("best_actions"))
      best = gen.at("best_actions").get<std::vector<std::vector<int>>>();
    return make_bandit_chain(require_int(gen, "states_per_level", "env.generator"),
                             require_int(gen, "horizon", "env.generator"),
                             require_int(gen, "actions", "env.generator"),
                             gen.value("tau", 0.1), best, seed);
  }
  throw std::invalid_argument("env.generator: unknown family '" + family + "'");
}

FunctionClass resolve_class(const json& class_spec, const Env& env, std::uint64_t run_seed) {
  if (class_spec.contains("file"))
    return class_from_json(read_json_file(class_spec.at("file")));
  if (!class_spec.contains("generator"))
    throw std::invalid_argument("class: expected 'file' or 'generator'");
  const json& gen = class_spec.at("generator");
  const std::string type = gen.value("type", "");
  const std::uint64_t seed = spec_seed(gen, "class", run_seed);

  if (type == "realizable")
    return realizable_class(env, require_int(gen, "size", "class.generator"),
                            gen.value("perturbation", 0.3), seed);
  if (type == "random")
    return random_class(env, require_int(gen, "size", "class.generator"), seed);
  if (type == "tree_qstar")
    return tree_qstar_class(require_int(gen, "actions", "class.generator"),
                            require_int(gen, "horizon", "class.generator"),
                            gen.value("gap", 0.2));
  throw std::invalid_argument("class.generator: unknown type '" + type + "'");
}

namespace {

int default_rank(const Env& env) {
  if (const auto* lr = std::get_if<LowRankMDP>(&env)) return lr->latent_dim;
  if (const auto* p = std::get_if<ReactivePOMDP>(&env)) {
    int best = 1;
    for (int h = 1; h <= p->horizon; ++h) best = std::max(best, p->hidden(h));
    return best;
  }
  const TabularMDP* mdp = as_tabular(env);
  int best = 1;
  for (int h = 1; h <= mdp->horizon; ++h) best = std::max(best, mdp->states(h));
  return best;
}

struct AlgorithmSpec {
  OliveConfig olive;
  GuessMConfig guessm;
};

AlgorithmSpec parse_algorithm(const json& algorithm, const Env& env) {
  AlgorithmSpec spec;
  OliveConfig& cfg = spec.olive;
  cfg.epsilon = algorithm.value("epsilon", 0.1);
  cfg.delta = algorithm.value("delta", 0.05);
  cfg.bellman_rank = algorithm.value("bellman_rank", default_rank(env));
  cfg.norm_bound =
      algorithm.value("norm_bound", 2.0 * std::sqrt(static_cast<double>(cfg.bellman_rank)));
  cfg.theta = algorithm.value("theta", 0.0);
  cfg.theta_m = algorithm.value("theta_m", 0.0);
  cfg.mode = algorithm.value("mode", std::string("sampled")) == "population"
                 ? ExecutionMode::Population
                 : ExecutionMode::Sampled;
  if (algorithm.contains("overrides")) {
    const json& o = algorithm.at("overrides");
    if (o.contains("phi")) cfg.phi_override = o.at("phi").get<double>();
    if (o.contains("n_est")) cfg.n_est_override = o.at("n_est").get<long long>();
    if (o.contains("n_eval")) cfg.n_eval_override = o.at("n_eval").get<long long>();
    if (o.contains("n")) cfg.n_override = o.at("n").get<long long>();
  }
  if (algorithm.contains("budgets")) {
    const json& b = algorithm.at("budgets");
    if (b.contains("max_iterations"))
      cfg.max_iterations = b.at("max_iterations").get<long long>();
    if (b.contains("max_episodes")) cfg.max_episodes = b.at("max_episodes").get<long long>();
  }

  spec.guessm.epsilon = cfg.epsilon;
  spec.guessm.delta = cfg.delta;
  spec.guessm.mode = cfg.mode;
  spec.guessm.max_episodes = cfg.max_episodes;
  spec.guessm.n_est_override = cfg.n_est_override;
  spec.guessm.n_eval_override = cfg.n_eval_override;
  spec.guessm.n_override = cfg.n_override;
  return spec;
}

std::string seed_dir(const std::string& out_dir, std::uint64_t seed) {
  std::ostringstream path;
  path << out_dir << "/seed_" << seed;
  return path.str();
}

SeedOutcome run_elimination_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedOutcome outcome;
  outcome.seed = seed;
  const Env env = resolve_env(config.env_spec, seed);
  const FunctionClass cls = resolve_class(config.class_spec, env, seed);
  const HypothesisClass hyps = to_hypotheses(cls);
  AlgorithmSpec spec = parse_algorithm(config.algorithm, env);

  Rng rng = Rng(seed).substream("algorithm");
  OliveResult result;
  double subopt_allowance = spec.olive.epsilon;
  if (config.kind == ExperimentKind::GuessM) {
    result = run_guess_m(env, hyps, spec.guessm, rng);
    if (!result.guess_attempts.empty())
      outcome.largest_guess = result.guess_attempts.back().guessed_rank;
  } else if (config.kind == ExperimentKind::Oliver) {
    result = run_oliver(env, hyps, spec.olive, rng);
    subopt_allowance +=
        8.0 * horizon(env) * std::sqrt(static_cast<double>(spec.olive.bellman_rank)) *
        (spec.olive.theta + spec.olive.theta_m);
  } else {
    result = run_olive(env, hyps, spec.olive, rng);
  }

  outcome.outcome = to_string(result.outcome);
  outcome.episodes = result.episodes;
  outcome.iterations = result.iterations;
  outcome.env_fingerprint = fingerprint_hex(env_to_json(env));

  bool value_ok = result.success();
  if (result.success() && oracle_capable(env)) {
    const ExactModel model = build_exact_model(env);
    const double value = exact_value(model, *result.policy);
    outcome.output_value = value;
    outcome.value_is_exact = true;
    const auto best = optimal_valid_value(model, hyps, spec.olive.theta);
    if (best) {
      outcome.optimal_value = best->value;
      outcome.suboptimality = best->value - value;
      value_ok = *outcome.suboptimality <= subopt_allowance + 1e-9;
    }
  } else if (result.success()) {
    // sampling-only: report a Monte-Carlo estimate and flag its provenance
    Rng mc_rng = Rng(seed).substream("value_estimate");
    outcome.output_value = policy_value_mc(env, *result.policy, 20000, mc_rng);
    outcome.value_is_exact = false;
  }
  outcome.success = result.success() && value_ok;
  outcome.detail = result_to_json(result);

  if (!config.out_dir.empty()) {
    const std::string dir = seed_dir(config.out_dir, seed);
    fs::create_directories(dir);
    write_json_file(dir + "/result.json", outcome.detail);
    write_text_file(dir + "/iterations.csv", iteration_csv(result));
  }
  return outcome;
}

SeedOutcome run_rank_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedOutcome outcome;
  outcome.seed = seed;
  const Env env = resolve_env(config.env_spec, seed);
  const FunctionClass cls = resolve_class(config.class_spec, env, seed);
  const HypothesisClass hyps = to_hypotheses(cls);
  const double rel_tol = config.extra.value("rel_tol", 1e-8);

  const ExactModel model = build_exact_model(env);
  const auto matrices = bellman_error_matrices(model, hyps);

  json per_level_rank = json::array();
  json singular = json::array();
  json residuals = json::array();
  json norms = json::array();
  int max_rank = 0;
  std::ostringstream csv;
  csv.precision(17);
  for (const auto& mat : matrices) {
    const int r = numerical_rank(mat.entries, mat.size, mat.size, rel_tol);
    per_level_rank.push_back(r);
    max_rank = std::max(max_rank, r);
    singular.push_back(singular_values(mat));

    const BellmanFactorization fact = env_factorization(env, hyps, mat.level);
    const FactorizationReport report = verify_factorization(model, hyps, fact, 1e-8);
    residuals.push_back(report.max_residual);
    norms.push_back(json{{"norm_product", report.norm_product}, {"zeta", fact.zeta}});

    for (int i = 0; i < mat.size; ++i) {
      csv << mat.level;
      for (int j = 0; j < mat.size; ++j) csv << ',' << mat.at(i, j);
      csv << '\n';
    }
  }

  json doc{{"format", "cdplab-rank"},
           {"rel_tol", rel_tol},
           {"per_level_rank", per_level_rank},
           {"max_rank", max_rank},
           {"singular_values", singular},
           {"norms", norms},
           {"residuals", residuals},
           {"class_size", cls.size()}};

  outcome.outcome = "ok";
  outcome.success = true;
  outcome.max_rank = max_rank;
  outcome.env_fingerprint = fingerprint_hex(env_to_json(env));
  outcome.detail = doc;

  if (!config.out_dir.empty()) {
    const std::string dir = seed_dir(config.out_dir, seed);
    fs::create_directories(dir);
    write_json_file(dir + "/rank.json", doc);
    if (config.extra.value("emit_matrices_csv", false))
      write_text_file(dir + "/matrices.csv", csv.str());
    if (config.extra.value("emit_factorizations", false)) {
      json facts = json::array();
      for (int h = 1; h <= model.horizon; ++h)
        facts.push_back(factorization_to_json(env_factorization(env, hyps, h)));
      write_json_file(dir + "/factorizations.json", facts);
    }
  }
  return outcome;
}

RunSummary run_geometry(const ExperimentConfig& config) {
  RunSummary summary;
  summary.config_echo = config.to_json();
  summary.tool_version = kToolVersion;

  std::vector<int> dims;
  if (config.extra.contains("dims")) {
    for (const auto& d : config.extra.at("dims")) dims.push_back(d.get<int>());
  } else {
    for (int d = 2; d <= 64; ++d) dims.push_back(d);
  }
  std::vector<double> fractions;  // beta as a fraction of 1/sqrt(d)
  if (config.extra.contains("beta_fractions")) {
    for (const auto& b : config.extra.at("beta_fractions")) fractions.push_back(b.get<double>());
  } else {
    fractions = {1.0 / 3.0, 0.5, 1.0};
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "d,beta,volume_ratio,slab_bound\n";
  json grid = json::array();
  for (int d : dims) {
    for (double frac : fractions) {
      const double beta = frac / std::sqrt(static_cast<double>(d));
      const double ratio = volume_ratio(beta, d);
      const double bound = slab_cut_ratio_bound(1.0, beta, d);
      csv << d << ',' << beta << ',' << ratio << ',' << bound << '\n';
      grid.push_back(json{{"d", d}, {"beta", beta}, {"volume_ratio", ratio},
                          {"slab_bound", bound}});
    }
  }

  summary.aggregates = json{{"rows", grid.size()}, {"grid", grid}};
  SeedOutcome outcome;
  outcome.seed = 0;
  outcome.outcome = "ok";
  outcome.success = true;
  outcome.detail = json{{"rows", grid.size()}};
  summary.per_seed.push_back(outcome);

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir + "/geometry.csv", csv.str());
    write_json_file(config.out_dir + "/summary.json", summary.to_json());
  }
  return summary;
}

json aggregate(const std::vector<SeedOutcome>& outcomes) {
  json agg;
  int successes = 0;
  long long episodes = 0;
  double sub_min = 0.0, sub_max = 0.0, sub_sum = 0.0;
  int sub_count = 0;
  int max_rank = -1;
  for (const auto& s : outcomes) {
    if (s.success) ++successes;
    episodes += s.episodes;
    if (s.suboptimality) {
      const double v = *s.suboptimality;
      if (sub_count == 0 || v < sub_min) sub_min = v;
      if (sub_count == 0 || v > sub_max) sub_max = v;
      sub_sum += v;
      ++sub_count;
    }
    if (s.max_rank) max_rank = std::max(max_rank, *s.max_rank);
  }
  agg["seeds"] = outcomes.size();
  agg["successes"] = successes;
  agg["total_episodes"] = episodes;
  if (sub_count > 0) {
    agg["suboptimality"] = json{{"mean", sub_sum / sub_count}, {"min", sub_min},
                                {"max", sub_max}};
  }
  if (max_rank >= 0) agg["max_rank"] = max_rank;
  return agg;
}

json seed_outcome_to_json(const SeedOutcome& s) {
  json j{{"seed", s.seed},
         {"outcome", s.outcome},
         {"success", s.success},
         {"value_is_exact", s.value_is_exact},
         {"episodes", s.episodes},
         {"iterations", s.iterations},
         {"env_fingerprint", s.env_fingerprint}};
  if (s.output_value) j["output_value"] = *s.output_value;
  if (s.optimal_value) j["optimal_value"] = *s.optimal_value;
  if (s.suboptimality) j["suboptimality"] = *s.suboptimality;
  if (s.max_rank) j["max_rank"] = *s.max_rank;
  if (s.largest_guess) j["largest_guess"] = *s.largest_guess;
  return j;
}

}  // namespace

json RunSummary::to_json() const {
  json seeds = json::array();
  for (const auto& s : per_seed) seeds.push_back(seed_outcome_to_json(s));
  return json{{"format", "cdplab-summary"},
              {"tool_version", tool_version},
              {"config", config_echo},
              {"per_seed", seeds},
              {"aggregates", aggregates}};
}

RunSummary run_experiment(const ExperimentConfig& config) {
  if (config.kind == ExperimentKind::Geometry) return run_geometry(config);
  if (config.kind == ExperimentKind::LowerBoundDemo) return lowerbound_demo(config);

  RunSummary summary;
  summary.config_echo = config.to_json();
  summary.tool_version = kToolVersion;
  summary.per_seed.resize(config.seeds.size());

  const auto worker = [&config](std::uint64_t seed) {
    switch (config.kind) {
      case ExperimentKind::Rank:
        return run_rank_seed(config, seed);
      default:
        return run_elimination_seed(config, seed);
    }
  };

  // seeds run in parallel; reduction stays in seed-list order
  const unsigned workers =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(config.seeds.size()));
  if (workers <= 1 || config.seeds.size() == 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i)
      summary.per_seed[i] = worker(config.seeds[i]);
  } else {
    std::vector<std::future<SeedOutcome>> futures;
    futures.reserve(config.seeds.size());
    for (std::size_t i = 0; i < config.seeds.size(); ++i)
      futures.push_back(std::async(std::launch::async, worker, config.seeds[i]));
    for (std::size_t i = 0; i < futures.size(); ++i) summary.per_seed[i] = futures[i].get();
  }

  summary.aggregates = aggregate(summary.per_seed);
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_json_file(config.out_dir + "/summary.json", summary.to_json());
  }
  return summary;
}

std::string emit_plot_data(const std::vector<RunSummary>& summaries, const std::string& x_axis,
                           const std::string& y_axis) {
  if (summaries.empty()) throw std::invalid_argument("emit_plot_data: no summaries");

  const auto seed_axis = [](const SeedOutcome& s, const std::string& axis,
                            double& out) -> bool {
    if (axis == "seed") out = static_cast<double>(s.seed);
    else if (axis == "episodes") out = static_cast<double>(s.episodes);
    else if (axis == "iterations") out = static_cast<double>(s.iterations);
    else if (axis == "suboptimality") {
      if (!s.suboptimality) return false;
      out = *s.suboptimality;
    } else if (axis == "value") {
      if (!s.output_value) return false;
      out = *s.output_value;
    } else if (axis == "optimal_value") {
      if (!s.optimal_value) return false;
      out = *s.optimal_value;
    } else if (axis == "max_rank") {
      if (!s.max_rank) return false;
      out = static_cast<double>(*s.max_rank);
    } else if (axis == "largest_guess") {
      if (!s.largest_guess) return false;
      out = static_cast<double>(*s.largest_guess);
    } else {
      throw std::invalid_argument("emit_plot_data: unknown axis '" + axis + "'");
    }
    return true;
  };

  const bool geometry_axes = x_axis == "d" || x_axis == "beta";
  std::ostringstream out;
  out.precision(17);
  out << "x,y,series,seed\n";
  for (const auto& summary : summaries) {
    const std::string series = summary.config_echo.value("kind", "run");
    if (geometry_axes) {
      if (!summary.aggregates.contains("grid"))
        throw std::invalid_argument("emit_plot_data: geometry axes need a geometry summary");
      for (const auto& row : summary.aggregates.at("grid")) {
        if (!row.contains(x_axis) || !row.contains(y_axis))
          throw std::invalid_argument("emit_plot_data: unknown axis for geometry grid");
        out << row.at(x_axis).get<double>() << ',' << row.at(y_axis).get<double>() << ','
            << series << ",0\n";
      }
      continue;
    }
    for (const auto& s : summary.per_seed) {
      double x = 0.0, y = 0.0;
      if (!seed_axis(s, x_axis, x) || !seed_axis(s, y_axis, y)) continue;
      out << x << ',' << y << ',' << series << ',' << s.seed << '\n';
    }
  }
  return out.str();
}

RunSummary lowerbound_demo(const ExperimentConfig& config) {
  RunSummary summary;
  summary.config_echo = config.to_json();
  summary.tool_version = kToolVersion;

  const std::string family = config.extra.value("family", "tree");
  const double epsilon = config.extra.value("epsilon", 0.05);
  const long long baseline_episodes = config.extra.value("baseline_episodes", 20000LL);

  for (std::uint64_t seed : config.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;

    Env env;
    FunctionClass cls;
    if (family == "tree") {
      const int actions = config.extra.value("actions", 2);
      const int horizon_steps = config.extra.value("horizon", 3);
      const double gap = config.extra.value("gap", 0.2);
      long long leaves = 1;
      for (int i = 0; i < horizon_steps; ++i) leaves *= actions;
      const int leaf =
          Rng(seed).substream("leaf").uniform_int(static_cast<int>(leaves));
      env = make_tree_lower_bound(actions, horizon_steps, gap, leaf);
      cls = tree_qstar_class(actions, horizon_steps, gap);
    } else if (family == "chain") {
      env = make_bandit_chain(config.extra.value("states_per_level", 4),
                              config.extra.value("horizon", 2),
                              config.extra.value("actions", 2),
                              config.extra.value("tau", 0.1), std::nullopt, seed);
      cls = realizable_class(env, config.extra.value("class_size", 8), 0.3,
                             Rng(seed).substream("class").root_seed());
    } else {
      throw std::invalid_argument("lowerbound-demo: unknown family '" + family + "'");
    }

    const HypothesisClass hyps = to_hypotheses(cls);
    const ExactModel model = build_exact_model(env);
    const QFunction opt = qstar(env);
    const double vstar = exact_value(model, greedy_policy(opt));

    OliveConfig cfg;
    cfg.epsilon = epsilon;
    cfg.mode = ExecutionMode::Population;
    cfg.bellman_rank = default_rank(env);
    cfg.norm_bound = 2.0 * std::sqrt(static_cast<double>(cfg.bellman_rank));
    const OliveResult result =
        run_olive(env, hyps, cfg, Rng(seed).substream("algorithm"));

    // uniform-exploration baseline: estimate every level-H (state, action)
    // reward from uniform rollouts and follow the empirically best path
    Rng baseline_rng = Rng(seed).substream("baseline");
    const int K = action_count(env);
    const int H = horizon(env);
    std::vector<double> sums(
        static_cast<std::size_t>(core_count(env, H) * K), 0.0);
    std::vector<long long> counts(sums.size(), 0);
    for (long long i = 0; i < baseline_episodes; ++i) {
      const Trajectory traj = sample_episode(
          env, [K](int, int, Rng& r) { return r.uniform_int(K); }, baseline_rng);
      const int idx = traj.contexts[static_cast<std::size_t>(H - 1)].core * K +
                      traj.actions[static_cast<std::size_t>(H - 1)];
      sums[static_cast<std::size_t>(idx)] += traj.rewards[static_cast<std::size_t>(H - 1)];
      counts[static_cast<std::size_t>(idx)] += 1;
    }
    // greedy policy toward the best empirical terminal pair
    int best_idx = 0;
    double best_mean = -1.0;
    for (std::size_t i = 0; i < sums.size(); ++i) {
      const double mean = counts[i] > 0 ? sums[i] / static_cast<double>(counts[i]) : 0.0;
      if (mean > best_mean) {
        best_mean = mean;
        best_idx = static_cast<int>(i);
      }
    }
    double baseline_value = 0.0;
    bool baseline_success = false;
    if (const TabularMDP* mdp = as_tabular(env); mdp && family == "tree") {
      // decode the terminal pair into the deterministic tree path
      Policy baseline_policy;
      baseline_policy.action.resize(static_cast<std::size_t>(H));
      long long path = static_cast<long long>(best_idx);
      std::vector<int> digits(static_cast<std::size_t>(H), 0);
      for (int h = H; h >= 1; --h) {
        digits[static_cast<std::size_t>(h - 1)] = static_cast<int>(path % K);
        path /= K;
      }
      for (int h = 1; h <= H; ++h) {
        baseline_policy.action[static_cast<std::size_t>(h - 1)].assign(
            static_cast<std::size_t>(mdp->states(h)), 0);
        // the digit matters only on the realized path; uniform elsewhere
        for (int s = 0; s < mdp->states(h); ++s)
          baseline_policy.action[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(s)] =
              digits[static_cast<std::size_t>(h - 1)];
      }
      baseline_value = exact_value(model, baseline_policy);
      baseline_success = baseline_value >= vstar - epsilon;
    } else {
      // chain baseline: greedy against empirical terminal estimates is not a
      // full policy; report the uniform policy value instead
      Policy uniform_policy;
      uniform_policy.action.resize(static_cast<std::size_t>(H));
      for (int h = 1; h <= H; ++h)
        uniform_policy.action[static_cast<std::size_t>(h - 1)].assign(
            static_cast<std::size_t>(core_count(env, h)), 0);
      baseline_value = exact_value(model, uniform_policy);
      baseline_success = baseline_value >= vstar - epsilon;
    }

    outcome.outcome = to_string(result.outcome);
    outcome.episodes = result.episodes;
    outcome.iterations = result.iterations;
    outcome.env_fingerprint = fingerprint_hex(env_to_json(env));
    outcome.optimal_value = vstar;
    if (result.success() && result.policy) {
      outcome.output_value = exact_value(model, *result.policy);
      outcome.suboptimality = vstar - *outcome.output_value;
    }
    outcome.success = result.success();
    outcome.detail = json{{"family", family},
                          {"class_size", cls.size()},
                          {"optimal_value", vstar},
                          {"elimination", result_to_json(result)},
                          {"baseline",
                           {{"episodes", baseline_episodes},
                            {"value", baseline_value},
                            {"success", baseline_success}}}};
    if (!config.out_dir.empty()) {
      const std::string dir = seed_dir(config.out_dir, seed);
      fs::create_directories(dir);
      write_json_file(dir + "/demo.json", outcome.detail);
    }
    summary.per_seed.push_back(outcome);
  }

  summary.aggregates = aggregate(summary.per_seed);
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_json_file(config.out_dir + "/summary.json", summary.to_json());
  }
  return summary;
}

}  // namespace cdplab
