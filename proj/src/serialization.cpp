#include "cdplab/serialization.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace cdplab {

namespace {

constexpr int kEnvVersion = 1;
constexpr int kClassVersion = 1;

json noise_to_json(RewardNoise noise) {
  return noise == RewardNoise::Bernoulli ? "bernoulli" : "none";
}

RewardNoise noise_from_json(const json& j) {
  const std::string s = j.get<std::string>();
  if (s == "none") return RewardNoise::None;
  if (s == "bernoulli") return RewardNoise::Bernoulli;
  throw std::invalid_argument("unknown reward noise kind: " + s);
}

json levels_to_json(const std::vector<int>& cores) {
  json out = json::array();
  for (int c : cores) out.push_back(json{{"context_cores", c}});
  return out;
}

std::vector<int> levels_from_json(const json& j) {
  std::vector<int> out;
  for (const auto& level : j) out.push_back(level.at("context_cores").get<int>());
  return out;
}

json mdp_body(const TabularMDP& mdp) {
  return json{{"init", mdp.init},
              {"transitions", mdp.trans},
              {"reward_mean", mdp.reward_mean},
              {"reward_noise", noise_to_json(mdp.reward_noise)},
              {"reward_scale", mdp.reward_scale},
              {"sampling_only", mdp.sampling_only}};
}

TabularMDP mdp_from_body(const json& j, int horizon, int actions, std::vector<int> cores) {
  TabularMDP mdp;
  mdp.horizon = horizon;
  mdp.action_count = actions;
  mdp.cores = std::move(cores);
  mdp.init = j.at("init").get<std::vector<double>>();
  mdp.trans = j.at("transitions").get<std::vector<std::vector<double>>>();
  mdp.reward_mean = j.at("reward_mean").get<std::vector<std::vector<double>>>();
  mdp.reward_noise = noise_from_json(j.at("reward_noise"));
  mdp.reward_scale = j.at("reward_scale").get<std::vector<double>>();
  mdp.sampling_only = j.value("sampling_only", false);
  return mdp;
}

}  // namespace

json env_to_json(const Env& env) {
  json j{{"format", "cdplab-env"},
         {"version", kEnvVersion},
         {"horizon", horizon(env)},
         {"action_count", action_count(env)},
         {"levels", levels_to_json(core_counts(env))}};
  if (const auto* mdp = std::get_if<TabularMDP>(&env)) {
    j["kind"] = "tabular_mdp";
    j.update(mdp_body(*mdp));
  } else if (const auto* lr = std::get_if<LowRankMDP>(&env)) {
    j["kind"] = "low_rank_mdp";
    j.update(mdp_body(lr->mdp));
    j["latent_dim"] = lr->latent_dim;
    j["factor_sa"] = lr->factor_sa;
    j["factor_next"] = lr->factor_next;
  } else {
    const auto& p = std::get<ReactivePOMDP>(env);
    j["kind"] = "reactive_pomdp";
    j["hidden_counts"] = p.hidden_counts;
    j["init_hidden"] = p.init_hidden;
    j["emission"] = p.emission;
    j["hidden_transitions"] = p.trans;
    j["reward_mean"] = p.reward_mean;
    j["reward_noise"] = noise_to_json(p.reward_noise);
    j["reward_scale"] = p.reward_scale;
    j["sampling_only"] = p.sampling_only;
  }
  return j;
}

Env env_from_json(const json& j) {
  if (j.value("format", "") != "cdplab-env")
    throw std::invalid_argument("not a cdplab-env document");
  if (j.at("version").get<int>() != kEnvVersion)
    throw std::invalid_argument("unsupported cdplab-env version");
  const int horizon = j.at("horizon").get<int>();
  const int actions = j.at("action_count").get<int>();
  std::vector<int> cores = levels_from_json(j.at("levels"));
  if (static_cast<int>(cores.size()) != horizon + 1)
    throw std::invalid_argument("levels array must have horizon+1 entries");

  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tabular_mdp") return mdp_from_body(j, horizon, actions, std::move(cores));
  if (kind == "low_rank_mdp") {
    LowRankMDP lr;
    lr.mdp = mdp_from_body(j, horizon, actions, std::move(cores));
    lr.latent_dim = j.at("latent_dim").get<int>();
    lr.factor_sa = j.at("factor_sa").get<std::vector<std::vector<double>>>();
    lr.factor_next = j.at("factor_next").get<std::vector<std::vector<double>>>();
    return lr;
  }
  if (kind == "reactive_pomdp") {
    ReactivePOMDP p;
    p.horizon = horizon;
    p.action_count = actions;
    p.obs_counts = std::move(cores);
    p.hidden_counts = j.at("hidden_counts").get<std::vector<int>>();
    p.init_hidden = j.at("init_hidden").get<std::vector<double>>();
    p.emission = j.at("emission").get<std::vector<std::vector<double>>>();
    p.trans = j.at("hidden_transitions").get<std::vector<std::vector<double>>>();
    p.reward_mean = j.at("reward_mean").get<std::vector<std::vector<double>>>();
    p.reward_noise = noise_from_json(j.at("reward_noise"));
    p.reward_scale = j.at("reward_scale").get<std::vector<double>>();
    p.sampling_only = j.value("sampling_only", false);
    return p;
  }
  throw std::invalid_argument("unknown environment kind: " + kind);
}

json class_to_json(const FunctionClass& cls) {
  json members = json::array();
  for (const auto& f : cls.members) members.push_back(f.values);
  json j{{"format", "cdplab-class"}, {"version", kClassVersion}};
  if (!cls.members.empty()) {
    const auto& f = cls.members.front();
    j["horizon"] = f.horizon;
    j["action_count"] = f.action_count;
    json levels = json::array();
    for (int c : f.cores) levels.push_back(json{{"context_cores", c}});
    j["levels"] = levels;
  }
  j["members"] = members;
  if (cls.qstar_index) j["qstar_index"] = *cls.qstar_index;
  return j;
}

FunctionClass class_from_json(const json& j) {
  if (j.value("format", "") != "cdplab-class")
    throw std::invalid_argument("not a cdplab-class document");
  if (j.at("version").get<int>() != kClassVersion)
    throw std::invalid_argument("unsupported cdplab-class version");
  FunctionClass cls;
  const int horizon = j.at("horizon").get<int>();
  const int actions = j.at("action_count").get<int>();
  const std::vector<int> cores = levels_from_json(j.at("levels"));
  for (const auto& tables : j.at("members")) {
    QFunction f;
    f.horizon = horizon;
    f.action_count = actions;
    f.cores = cores;
    f.values = tables.get<std::vector<std::vector<double>>>();
    cls.members.push_back(std::move(f));
  }
  if (j.contains("qstar_index")) cls.qstar_index = j.at("qstar_index").get<int>();
  return cls;
}

json factorization_to_json(const BellmanFactorization& fact) {
  return json{{"format", "cdplab-factorization"}, {"level", fact.level},
              {"dim", fact.dim},         {"nu", fact.nu},
              {"xi", fact.xi},           {"zeta", fact.zeta},
              {"theta_m", fact.theta_m}};
}

BellmanFactorization factorization_from_json(const json& j) {
  BellmanFactorization fact;
  fact.level = j.at("level").get<int>();
  fact.dim = j.at("dim").get<int>();
  fact.nu = j.at("nu").get<std::vector<std::vector<double>>>();
  fact.xi = j.at("xi").get<std::vector<std::vector<double>>>();
  fact.zeta = j.at("zeta").get<double>();
  fact.theta_m = j.value("theta_m", 0.0);
  return fact;
}

namespace {

json record_to_json(const IterationRecord& r) {
  return json{{"t", r.t},
              {"chosen_index", r.chosen_index},
              {"predicted_value", r.predicted_value},
              {"self_errors", r.self_errors},
              {"self_error_sum", r.self_error_sum},
              {"terminated", r.terminated},
              {"level", r.level},
              {"eliminated", r.eliminated},
              {"survivors_before", r.survivors_before},
              {"survivors_after", r.survivors_after},
              {"episodes_cumulative", r.episodes_cumulative}};
}

IterationRecord record_from_json(const json& j) {
  IterationRecord r;
  r.t = j.at("t").get<int>();
  r.chosen_index = j.at("chosen_index").get<int>();
  r.predicted_value = j.at("predicted_value").get<double>();
  r.self_errors = j.at("self_errors").get<std::vector<double>>();
  r.self_error_sum = j.at("self_error_sum").get<double>();
  r.terminated = j.at("terminated").get<bool>();
  r.level = j.at("level").get<int>();
  r.eliminated = j.at("eliminated").get<std::vector<int>>();
  r.survivors_before = j.at("survivors_before").get<int>();
  r.survivors_after = j.at("survivors_after").get<int>();
  r.episodes_cumulative = j.at("episodes_cumulative").get<long long>();
  return r;
}

json policy_to_json(const Policy& p) { return json{{"action", p.action}}; }

Policy policy_from_json(const json& j) {
  Policy p;
  p.action = j.at("action").get<std::vector<std::vector<int>>>();
  return p;
}

}  // namespace

json result_to_json(const OliveResult& result) {
  json j{{"format", "cdplab-result"},
         {"outcome", to_string(result.outcome)},
         {"iterations", result.iterations},
         {"episodes", result.episodes},
         {"mode", to_string(result.mode)},
         {"epsilon_effective", result.epsilon_effective},
         {"epsilon", result.epsilon},
         {"delta", result.delta},
         {"bellman_rank", result.bellman_rank},
         {"norm_bound", result.norm_bound},
         {"theta", result.theta},
         {"theta_m", result.theta_m},
         {"params",
          {{"phi", result.params.phi},
           {"n_est", result.params.n_est},
           {"n_eval", result.params.n_eval},
           {"n", result.params.n}}},
         {"warnings", result.warnings}};
  if (result.policy) j["policy"] = policy_to_json(*result.policy);
  if (result.chosen_index) j["chosen_index"] = *result.chosen_index;
  json records = json::array();
  for (const auto& r : result.records) records.push_back(record_to_json(r));
  j["records"] = records;
  if (!result.guess_attempts.empty()) {
    json attempts = json::array();
    for (const auto& a : result.guess_attempts)
      attempts.push_back(json{{"guessed_rank", a.guessed_rank},
                              {"norm_bound", a.norm_bound},
                              {"delta_share", a.delta_share},
                              {"iteration_cap", a.iteration_cap},
                              {"iterations", a.iterations},
                              {"episodes", a.episodes},
                              {"returned", a.returned}});
    j["guess_attempts"] = attempts;
  }
  return j;
}

OliveResult result_from_json(const json& j) {
  OliveResult result;
  const std::string outcome = j.at("outcome").get<std::string>();
  if (outcome == "success")
    result.outcome = RunOutcome::Success;
  else if (outcome == "empty_survivor_set")
    result.outcome = RunOutcome::EmptySurvivorSet;
  else
    result.outcome = RunOutcome::BudgetExhausted;
  result.iterations = j.at("iterations").get<int>();
  result.episodes = j.at("episodes").get<long long>();
  result.mode = j.at("mode").get<std::string>() == "population" ? ExecutionMode::Population
                                                                : ExecutionMode::Sampled;
  result.epsilon_effective = j.at("epsilon_effective").get<double>();
  result.epsilon = j.value("epsilon", 0.0);
  result.delta = j.value("delta", 0.0);
  result.bellman_rank = j.value("bellman_rank", 0);
  result.norm_bound = j.value("norm_bound", 0.0);
  result.theta = j.value("theta", 0.0);
  result.theta_m = j.value("theta_m", 0.0);
  result.params.phi = j.at("params").at("phi").get<double>();
  result.params.n_est = j.at("params").at("n_est").get<long long>();
  result.params.n_eval = j.at("params").at("n_eval").get<long long>();
  result.params.n = j.at("params").at("n").get<long long>();
  result.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (j.contains("policy")) result.policy = policy_from_json(j.at("policy"));
  if (j.contains("chosen_index")) result.chosen_index = j.at("chosen_index").get<int>();
  for (const auto& r : j.at("records")) result.records.push_back(record_from_json(r));
  return result;
}

std::string iteration_csv(const OliveResult& result) {
  std::ostringstream out;
  out << "t,f_t,Vhat,sum_self_err,h_t,survivors_before,survivors_after,episodes_cum\n";
  out << std::setprecision(17);
  for (const auto& r : result.records) {
    out << r.t << ',' << r.chosen_index << ',' << r.predicted_value << ','
        << r.self_error_sum << ',' << r.level << ',' << r.survivors_before << ','
        << r.survivors_after << ',' << r.episodes_cumulative << '\n';
  }
  return out.str();
}

std::uint64_t fingerprint(const json& j) { return Rng::fnv1a64(j.dump()); }

std::string fingerprint_hex(const json& j) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fingerprint(j);
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json read_json_file(const std::string& path) { return json::parse(read_text_file(path)); }

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace cdplab
