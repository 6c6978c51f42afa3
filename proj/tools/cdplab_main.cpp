#include <CLI11.hpp>
#include <iostream>

#include "cdplab/experiment.hpp"
#include "cdplab/generators.hpp"
#include "cdplab/geometry.hpp"

using namespace cdplab;

namespace {

json parse_inline_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const std::exception& e) {
    throw CLI::ValidationError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

struct CommonRunFlags {
  std::string config_file;
  std::string env_file, env_gen;
  std::string class_file, class_gen;
  double epsilon = 0.1, delta = 0.05;
  int rank = 0;
  double zeta = 0.0, theta = 0.0, theta_m = 0.0;
  std::string mode = "sampled";
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  long long max_iterations = -1, max_episodes = -1;
  long long n_est = -1, n_eval = -1, n = -1;
  double phi = -1.0;
};

void add_run_flags(CLI::App* cmd, CommonRunFlags& flags) {
  cmd->add_option("--config", flags.config_file, "experiment config JSON file");
  cmd->add_option("--env", flags.env_file, "environment JSON file");
  cmd->add_option("--env-gen", flags.env_gen, "inline environment generator spec (JSON)");
  cmd->add_option("--class", flags.class_file, "function class JSON file");
  cmd->add_option("--class-gen", flags.class_gen, "inline class generator spec (JSON)");
  cmd->add_option("--epsilon", flags.epsilon, "target suboptimality");
  cmd->add_option("--delta", flags.delta, "failure probability");
  cmd->add_option("--rank", flags.rank, "Bellman rank input M (default: derived from env)");
  cmd->add_option("--zeta", flags.zeta, "norm parameter (default: 2 sqrt(M))");
  cmd->add_option("--theta", flags.theta, "validity slack");
  cmd->add_option("--theta-m", flags.theta_m, "factorization slack");
  cmd->add_option("--mode", flags.mode, "sampled | population")
      ->check(CLI::IsMember({"sampled", "population"}));
  cmd->add_option("--seed", flags.seeds, "seed(s), repeatable");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--max-iterations", flags.max_iterations, "iteration budget override");
  cmd->add_option("--max-episodes", flags.max_episodes, "episode budget override");
  cmd->add_option("--n-est", flags.n_est, "override n_est");
  cmd->add_option("--n-eval", flags.n_eval, "override n_eval");
  cmd->add_option("--n", flags.n, "override n");
  cmd->add_option("--phi", flags.phi, "override phi");
}

ExperimentConfig config_from_flags(const CommonRunFlags& flags, const std::string& kind) {
  if (!flags.config_file.empty()) {
    ExperimentConfig config = ExperimentConfig::from_json(read_json_file(flags.config_file));
    if (!flags.seeds.empty()) config.seeds = flags.seeds;
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    return config;
  }

  json j;
  j["kind"] = kind;
  if (!flags.env_file.empty())
    j["env"] = json{{"file", flags.env_file}};
  else if (!flags.env_gen.empty())
    j["env"] = json{{"generator", parse_inline_json(flags.env_gen, "--env-gen")}};
  else
    throw CLI::ValidationError("either --config, --env or --env-gen is required");
  if (!flags.class_file.empty())
    j["class"] = json{{"file", flags.class_file}};
  else if (!flags.class_gen.empty())
    j["class"] = json{{"generator", parse_inline_json(flags.class_gen, "--class-gen")}};
  else
    throw CLI::ValidationError("either --config, --class or --class-gen is required");

  json algorithm{{"epsilon", flags.epsilon}, {"delta", flags.delta}, {"mode", flags.mode},
                 {"theta", flags.theta},     {"theta_m", flags.theta_m}};
  if (flags.rank > 0) algorithm["bellman_rank"] = flags.rank;
  if (flags.zeta > 0.0) algorithm["norm_bound"] = flags.zeta;
  json overrides = json::object();
  if (flags.n_est >= 0) overrides["n_est"] = flags.n_est;
  if (flags.n_eval >= 0) overrides["n_eval"] = flags.n_eval;
  if (flags.n >= 0) overrides["n"] = flags.n;
  if (flags.phi >= 0.0) overrides["phi"] = flags.phi;
  if (!overrides.empty()) algorithm["overrides"] = overrides;
  json budgets = json::object();
  if (flags.max_iterations >= 0) budgets["max_iterations"] = flags.max_iterations;
  if (flags.max_episodes >= 0) budgets["max_episodes"] = flags.max_episodes;
  if (!budgets.empty()) algorithm["budgets"] = budgets;
  j["algorithm"] = algorithm;

  j["seeds"] = flags.seeds.empty() ? std::vector<std::uint64_t>{1} : flags.seeds;
  j["out_dir"] = flags.out_dir;
  return ExperimentConfig::from_json(j);
}

int report_summary(const RunSummary& summary) {
  std::cout << summary.to_json().dump(2) << std::endl;
  return summary.all_succeeded() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdplab: contextual decision process laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // ---- gen -----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate an environment file");
  gen->require_subcommand(1);
  std::string gen_out = "env.json";
  std::uint64_t gen_seed = 1;

  struct {
    int states = 3, actions = 2, horizon = 3, latent = 1, hidden = 3, observations = 12;
    int width = 3, height = 3, obs_per_cell = 4;
    double gap = 0.2, tau = 0.1, slip = 0.1;
    int leaf = 0, chain_states = 4;
    std::string noise = "none";
  } g;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", gen_out, "output file")->capture_default_str();
    cmd->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  };

  auto* gen_mdp = gen->add_subcommand("mdp", "random tabular MDP");
  gen_mdp->add_option("--states", g.states)->capture_default_str();
  gen_mdp->add_option("--actions", g.actions)->capture_default_str();
  gen_mdp->add_option("--horizon", g.horizon)->capture_default_str();
  gen_mdp->add_option("--reward-noise", g.noise)->check(CLI::IsMember({"none", "bernoulli"}));
  add_common(gen_mdp);

  auto* gen_lowrank = gen->add_subcommand("lowrank", "low-rank transition MDP");
  gen_lowrank->add_option("--states", g.states)->capture_default_str();
  gen_lowrank->add_option("--actions", g.actions)->capture_default_str();
  gen_lowrank->add_option("--horizon", g.horizon)->capture_default_str();
  gen_lowrank->add_option("--latent-dim", g.latent)->capture_default_str();
  add_common(gen_lowrank);

  auto* gen_pomdp = gen->add_subcommand("pomdp", "random hidden-state model");
  gen_pomdp->add_option("--hidden-states", g.hidden)->capture_default_str();
  gen_pomdp->add_option("--observations", g.observations)->capture_default_str();
  gen_pomdp->add_option("--actions", g.actions)->capture_default_str();
  gen_pomdp->add_option("--horizon", g.horizon)->capture_default_str();
  add_common(gen_pomdp);

  auto* gen_grid = gen->add_subcommand("gridworld", "grid-world hidden-state preset");
  gen_grid->add_option("--width", g.width)->capture_default_str();
  gen_grid->add_option("--height", g.height)->capture_default_str();
  gen_grid->add_option("--obs-per-cell", g.obs_per_cell)->capture_default_str();
  gen_grid->add_option("--horizon", g.horizon)->capture_default_str();
  gen_grid->add_option("--slip", g.slip)->capture_default_str();
  add_common(gen_grid);

  auto* gen_tree = gen->add_subcommand("tree", "complete-tree family instance");
  gen_tree->add_option("--actions", g.actions)->capture_default_str();
  gen_tree->add_option("--horizon", g.horizon)->capture_default_str();
  gen_tree->add_option("--gap", g.gap)->capture_default_str();
  gen_tree->add_option("--leaf-index", g.leaf)->capture_default_str();
  add_common(gen_tree);

  auto* gen_chain = gen->add_subcommand("chain", "waiting/good/bad bandit chain");
  gen_chain->add_option("--states-per-level", g.chain_states)->capture_default_str();
  gen_chain->add_option("--horizon", g.horizon)->capture_default_str();
  gen_chain->add_option("--actions", g.actions)->capture_default_str();
  gen_chain->add_option("--tau", g.tau)->capture_default_str();
  add_common(gen_chain);

  // ---- rank ------------------------------------------------------------------
  auto* rank_cmd = app.add_subcommand("rank", "Bellman error matrices, ranks, factorizations");
  CommonRunFlags rank_flags;
  double rel_tol = 1e-8;
  bool matrices_csv = false, emit_facts = false;
  add_run_flags(rank_cmd, rank_flags);
  rank_cmd->add_option("--rel-tol", rel_tol, "singular value threshold")->capture_default_str();
  rank_cmd->add_flag("--matrices-csv", matrices_csv, "also write the matrices as CSV");
  rank_cmd->add_flag("--emit-factorizations", emit_facts,
                     "also write per-level factorization files");

  // ---- olive / oliver / guessm ----------------------------------------------
  auto* olive_cmd = app.add_subcommand("olive", "optimism-led elimination run");
  CommonRunFlags olive_flags;
  add_run_flags(olive_cmd, olive_flags);

  auto* oliver_cmd = app.add_subcommand("oliver", "robust elimination run with slacks");
  CommonRunFlags oliver_flags;
  add_run_flags(oliver_cmd, oliver_flags);

  auto* guessm_cmd = app.add_subcommand("guessm", "rank-adaptive doubling wrapper");
  CommonRunFlags guessm_flags;
  add_run_flags(guessm_cmd, guessm_flags);

  // ---- geometry ---------------------------------------------------------------
  auto* geometry_cmd = app.add_subcommand("geometry", "slab-cut volume tables");
  std::vector<int> geo_dims;
  std::vector<double> geo_fracs;
  std::string geo_out;
  geometry_cmd->add_option("--dim", geo_dims, "dimension(s), repeatable (default 2..64)");
  geometry_cmd->add_option("--beta-frac", geo_fracs,
                           "beta as fraction of 1/sqrt(d), repeatable");
  geometry_cmd->add_option("--out", geo_out, "output directory");

  // ---- trace-audit -------------------------------------------------------------
  auto* audit_cmd = app.add_subcommand("trace-audit", "version-space replay of a finished run");
  std::string audit_trace, audit_facts, audit_out;
  audit_cmd->add_option("--trace", audit_trace, "result JSON from a population run")
      ->required();
  audit_cmd->add_option("--factorizations", audit_facts, "per-level factorization JSON")
      ->required();
  audit_cmd->add_option("--out", audit_out, "audit output file");

  // ---- lowerbound-demo ----------------------------------------------------------
  auto* demo_cmd = app.add_subcommand("lowerbound-demo", "hardness family demonstration");
  std::string demo_config, demo_family = "tree", demo_out;
  std::vector<std::uint64_t> demo_seeds;
  int demo_actions = 2, demo_horizon = 3, demo_states = 4;
  double demo_gap = 0.2, demo_tau = 0.1, demo_eps = 0.05;
  long long demo_baseline = 20000;
  demo_cmd->add_option("--config", demo_config, "experiment config JSON file");
  demo_cmd->add_option("--family", demo_family)->check(CLI::IsMember({"tree", "chain"}));
  demo_cmd->add_option("--actions", demo_actions)->capture_default_str();
  demo_cmd->add_option("--horizon", demo_horizon)->capture_default_str();
  demo_cmd->add_option("--gap", demo_gap)->capture_default_str();
  demo_cmd->add_option("--tau", demo_tau)->capture_default_str();
  demo_cmd->add_option("--states-per-level", demo_states)->capture_default_str();
  demo_cmd->add_option("--epsilon", demo_eps)->capture_default_str();
  demo_cmd->add_option("--baseline-episodes", demo_baseline)->capture_default_str();
  demo_cmd->add_option("--seed", demo_seeds, "seed(s), repeatable");
  demo_cmd->add_option("--out", demo_out, "output directory");

  // ---- plot-data ------------------------------------------------------------------
  auto* plot_cmd = app.add_subcommand("plot-data", "long-format CSV from summaries");
  std::vector<std::string> plot_summaries;
  std::string plot_x = "episodes", plot_y = "suboptimality", plot_out;
  plot_cmd->add_option("--summary", plot_summaries, "summary JSON file(s)")->required();
  plot_cmd->add_option("--x", plot_x, "x axis")->capture_default_str();
  plot_cmd->add_option("--y", plot_y, "y axis")->capture_default_str();
  plot_cmd->add_option("--out", plot_out, "output CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      Env env;
      if (gen_mdp->parsed())
        env = make_random_mdp(g.states, g.actions, g.horizon, gen_seed,
                              g.noise == "bernoulli" ? RewardNoise::Bernoulli
                                                     : RewardNoise::None);
      else if (gen_lowrank->parsed())
        env = make_low_rank_mdp(g.states, g.actions, g.horizon, g.latent, gen_seed);
      else if (gen_pomdp->parsed())
        env = make_reactive_pomdp(g.hidden, g.observations, g.actions, g.horizon, gen_seed);
      else if (gen_grid->parsed())
        env = make_gridworld_pomdp(g.width, g.height, g.obs_per_cell, g.horizon, gen_seed,
                                   g.slip);
      else if (gen_tree->parsed())
        env = make_tree_lower_bound(g.actions, g.horizon, g.gap, g.leaf);
      else
        env = make_bandit_chain(g.chain_states, g.horizon, g.actions, g.tau, std::nullopt,
                                gen_seed);
      const ValidationReport report = validate_environment(env);
      if (!report.ok()) {
        for (const auto& v : report.violations) std::cerr << v.message << '\n';
        return 1;
      }
      write_json_file(gen_out, env_to_json(env));
      std::cout << "wrote " << gen_out << std::endl;
      return 0;
    }

    if (rank_cmd->parsed()) {
      ExperimentConfig config = config_from_flags(rank_flags, "rank");
      config.extra["rel_tol"] = rel_tol;
      config.extra["emit_matrices_csv"] = matrices_csv;
      config.extra["emit_factorizations"] = emit_facts;
      return report_summary(run_experiment(config));
    }
    if (olive_cmd->parsed())
      return report_summary(run_experiment(config_from_flags(olive_flags, "olive")));
    if (oliver_cmd->parsed())
      return report_summary(run_experiment(config_from_flags(oliver_flags, "oliver")));
    if (guessm_cmd->parsed())
      return report_summary(run_experiment(config_from_flags(guessm_flags, "guessm")));

    if (geometry_cmd->parsed()) {
      json j{{"kind", "geometry"}, {"seeds", {0}}, {"out_dir", geo_out}};
      json extra = json::object();
      if (!geo_dims.empty()) extra["dims"] = geo_dims;
      if (!geo_fracs.empty()) extra["beta_fractions"] = geo_fracs;
      j["extra"] = extra;
      return report_summary(run_experiment(ExperimentConfig::from_json(j)));
    }

    if (audit_cmd->parsed()) {
      const OliveResult trace = result_from_json(read_json_file(audit_trace));
      std::vector<BellmanFactorization> facts;
      for (const auto& f : read_json_file(audit_facts)) facts.push_back(factorization_from_json(f));
      const VersionSpaceAudit audit =
          version_space_tracker(facts, trace, trace.params.phi, trace.theta, trace.theta_m,
                                trace.bellman_rank, trace.norm_bound);
      json out = json::array();
      for (const auto& level : audit.levels) {
        json cuts = json::array();
        for (const auto& c : level.cuts)
          cuts.push_back(json{{"t", c.t},
                              {"f_t", c.chosen_index},
                              {"witness", c.witness},
                              {"required", c.required},
                              {"witness_ok", c.witness_ok},
                              {"slab_half_width", c.slab_half_width},
                              {"ratio_bound", c.ratio_bound}});
        out.push_back(json{{"level", level.level},
                           {"cuts", cuts},
                           {"cut_count", level.cuts.size()},
                           {"cut_count_bound", level.cut_count_bound},
                           {"cumulative_ratio_bound", level.cumulative_ratio_bound},
                           {"count_ok", level.count_ok},
                           {"witnesses_ok", level.witnesses_ok}});
      }
      const json doc{{"format", "cdplab-trace-audit"}, {"pass", audit.pass()},
                     {"levels", out}};
      if (!audit_out.empty())
        write_json_file(audit_out, doc);
      else
        std::cout << doc.dump(2) << std::endl;
      return audit.pass() ? 0 : 1;
    }

    if (demo_cmd->parsed()) {
      ExperimentConfig config;
      if (!demo_config.empty()) {
        config = ExperimentConfig::from_json(read_json_file(demo_config));
      } else {
        json j{{"kind", "lowerbound-demo"},
               {"seeds", demo_seeds.empty() ? std::vector<std::uint64_t>{1} : demo_seeds},
               {"out_dir", demo_out},
               {"extra",
                {{"family", demo_family},
                 {"actions", demo_actions},
                 {"horizon", demo_horizon},
                 {"gap", demo_gap},
                 {"tau", demo_tau},
                 {"states_per_level", demo_states},
                 {"epsilon", demo_eps},
                 {"baseline_episodes", demo_baseline}}}};
        config = ExperimentConfig::from_json(j);
      }
      if (!demo_seeds.empty()) config.seeds = demo_seeds;
      if (!demo_out.empty()) config.out_dir = demo_out;
      return report_summary(run_experiment(config));
    }

    if (plot_cmd->parsed()) {
      std::vector<RunSummary> summaries;
      for (const auto& path : plot_summaries) {
        const json j = read_json_file(path);
        RunSummary s;
        s.config_echo = j.at("config");
        s.tool_version = j.value("tool_version", "");
        s.aggregates = j.value("aggregates", json::object());
        for (const auto& row : j.at("per_seed")) {
          SeedOutcome seed;
          seed.seed = row.at("seed").get<std::uint64_t>();
          seed.outcome = row.at("outcome").get<std::string>();
          seed.success = row.at("success").get<bool>();
          seed.episodes = row.value("episodes", 0LL);
          seed.iterations = row.value("iterations", 0);
          if (row.contains("output_value")) seed.output_value = row.at("output_value").get<double>();
          if (row.contains("optimal_value"))
            seed.optimal_value = row.at("optimal_value").get<double>();
          if (row.contains("suboptimality"))
            seed.suboptimality = row.at("suboptimality").get<double>();
          if (row.contains("max_rank")) seed.max_rank = row.at("max_rank").get<int>();
          if (row.contains("largest_guess"))
            seed.largest_guess = row.at("largest_guess").get<int>();
          s.per_seed.push_back(std::move(seed));
        }
        summaries.push_back(std::move(s));
      }
      const std::string csv = emit_plot_data(summaries, plot_x, plot_y);
      if (!plot_out.empty())
        write_text_file(plot_out, csv);
      else
        std::cout << csv;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
