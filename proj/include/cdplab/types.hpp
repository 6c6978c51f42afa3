#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cdplab {

// Levels run 1..H+1; level H+1 contexts are terminal.
struct Context {
  int core = 0;   // state / observation identity within its level
  int level = 1;  // 1..H+1

  friend bool operator==(const Context& a, const Context& b) {
    return a.core == b.core && a.level == b.level;
  }
};

struct ActionIndex {
  int index = 0;  // 0..K-1
};

// One episode: x_1, a_1, r_1, ..., x_H, a_H, r_H, x_{H+1}.
struct Trajectory {
  std::vector<Context> contexts;  // H+1 entries, levels 1..H+1 in order
  std::vector<int> actions;       // H entries
  std::vector<double> rewards;    // H entries

  int horizon() const { return static_cast<int>(actions.size()); }
};

// Total deterministic map Context -> action, tabular over levels 1..H.
struct Policy {
  std::vector<std::vector<int>> action;  // [level-1][core]

  int horizon() const { return static_cast<int>(action.size()); }

  int at(int level, int core) const {
    if (level < 1 || level > horizon())
      throw std::invalid_argument("Policy::at: level out of range");
    const auto& row = action[static_cast<std::size_t>(level - 1)];
    if (core < 0 || core >= static_cast<int>(row.size()))
      throw std::invalid_argument("Policy::at: context core out of range");
    return row[static_cast<std::size_t>(core)];
  }
};

struct Violation {
  std::string kind;  // e.g. "row_sum", "negative_reward", "reward_path_sum"
  int level = 0;     // 1-based, 0 if not applicable
  int core = 0;      // row identity (state, atom, ...)
  int action = -1;   // -1 if not applicable
  double value = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

}  // namespace cdplab
