#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdplab/serialization.hpp"

namespace cdplab {

enum class ExperimentKind { Olive, Oliver, GuessM, Rank, Geometry, LowerBoundDemo };

ExperimentKind experiment_kind_from_string(const std::string& s);
std::string to_string(ExperimentKind kind);

// One JSON document fully specifies an experiment; no environment variables
// influence results. See docs/formats.md for the schema.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Olive;
  json env_spec;        // {"file": path} or {"generator": {...}}
  json class_spec;      // {"file": path} or {"generator": {...}}
  json algorithm;       // epsilon, delta, rank/norm inputs, mode, overrides, budgets
  json extra;           // kind-specific fields (rel_tol, grids, demo params)
  std::vector<std::uint64_t> seeds;
  std::string out_dir;

  static ExperimentConfig from_json(const json& j);
  json to_json() const;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::string outcome;                 // run outcome or "ok" for analysis kinds
  bool success = false;
  std::optional<double> output_value;  // exact value of the returned policy
  std::optional<double> optimal_value; // V* (realizable) or v*_theta
  std::optional<double> suboptimality;
  bool value_is_exact = true;          // false when only MC estimates exist
  long long episodes = 0;
  int iterations = 0;
  std::optional<int> max_rank;         // rank experiments
  std::optional<int> largest_guess;    // guessm experiments
  std::string env_fingerprint;
  json detail;                         // per-seed result document
};

struct RunSummary {
  json config_echo;
  std::string tool_version;
  std::vector<SeedOutcome> per_seed;
  json aggregates;

  bool all_succeeded() const {
    for (const auto& s : per_seed)
      if (!s.success) return false;
    return true;
  }
  json to_json() const;
};

// Executes the configured experiment over all seeds (in parallel, reduced in
// seed order), writes per-seed JSON results and iteration CSVs plus one
// summary JSON under out_dir. Never writes timestamps.
RunSummary run_experiment(const ExperimentConfig& config);

// Resolves {"file"| "generator"} specs. Generator seeds default to substreams
// of run_seed so each seed sees its own instance unless the spec pins one.
Env resolve_env(const json& env_spec, std::uint64_t run_seed);
FunctionClass resolve_class(const json& class_spec, const Env& env, std::uint64_t run_seed);

// Long-format plot rows (x, y, series, seed) extracted from summaries.
// Unknown axis names raise std::invalid_argument.
std::string emit_plot_data(const std::vector<RunSummary>& summaries, const std::string& x_axis,
                           const std::string& y_axis);

// Side-by-side population-mode elimination run and uniform-exploration
// baseline on a lower-bound family instance.
RunSummary lowerbound_demo(const ExperimentConfig& config);

extern const char* kToolVersion;

}  // namespace cdplab
