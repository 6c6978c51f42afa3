#pragma once

#include <optional>
#include <vector>

#include "cdplab/types.hpp"

namespace cdplab {

// Action-value table over (level 1..H, core, action), values in [0,1].
// Evaluation at any level-(H+1) context is identically zero.
struct QFunction {
  int horizon = 0;
  int action_count = 0;
  std::vector<int> cores;                  // per level 1..H
  std::vector<std::vector<double>> values; // [h-1]: core*K + a

  double at(int level, int core, int action) const {
    if (level == horizon + 1) return 0.0;
    if (level < 1 || level > horizon)
      throw std::invalid_argument("QFunction::at: level out of range");
    return values[static_cast<std::size_t>(level - 1)]
                 [static_cast<std::size_t>(core * action_count + action)];
  }
};

// Finite ordered hypothesis space. The optional marker records which member is
// the optimal action-value function; it exists for test harnesses only and is
// never read by the algorithms.
struct FunctionClass {
  std::vector<QFunction> members;
  std::optional<int> qstar_index;

  int size() const { return static_cast<int>(members.size()); }
};

// (policy, state-value function) pair; the only two forms in which the
// algorithms ever interact with a hypothesis.
struct PolicyValuePair {
  Policy policy;
  std::vector<std::vector<double>> vvalue;  // [h-1][core], zero at level H+1

  double state_value(int level, int core) const {
    if (level == static_cast<int>(vvalue.size()) + 1) return 0.0;
    return vvalue[static_cast<std::size_t>(level - 1)][static_cast<std::size_t>(core)];
  }
};

struct PairClass {
  std::vector<PolicyValuePair> members;
  std::optional<int> qstar_index;

  int size() const { return static_cast<int>(members.size()); }
};

// Internal execution form shared by Q-backed and pair-backed hypotheses.
struct Hypothesis {
  Policy policy;
  std::vector<std::vector<double>> value;  // g(x) per level 1..H

  double state_value(int level, int core) const {
    if (level > static_cast<int>(value.size())) return 0.0;
    return value[static_cast<std::size_t>(level - 1)][static_cast<std::size_t>(core)];
  }
};

struct HypothesisClass {
  std::vector<Hypothesis> members;
  std::optional<int> qstar_index;

  int size() const { return static_cast<int>(members.size()); }
};

// Member mask; shrinks monotonically during elimination runs.
struct SurvivingSet {
  std::vector<std::uint8_t> alive;

  static SurvivingSet all(int n) { return SurvivingSet{std::vector<std::uint8_t>(n, 1)}; }
  int count() const {
    int c = 0;
    for (auto b : alive) c += b ? 1 : 0;
    return c;
  }
  bool operator[](int i) const { return alive[static_cast<std::size_t>(i)] != 0; }
};

// pi_f(x) = argmax_a f(x,a); ties broken by the lowest action index.
Policy greedy_policy(const QFunction& f);

// max_a f(x1, a) for a level-1 context.
double predicted_value(const QFunction& f, const Context& x1);

// The (pi_f, g_f) view; behaviorally identical to f for every algorithm here.
PolicyValuePair to_pair(const QFunction& f);

// Cartesian product |policies| x |vvalues|, policy-major order.
PairClass product_class(const std::vector<Policy>& policies,
                        const std::vector<std::vector<std::vector<double>>>& vvalues);

Hypothesis hypothesis_of(const QFunction& f);
Hypothesis hypothesis_of(const PolicyValuePair& p);
HypothesisClass to_hypotheses(const FunctionClass& fc);
HypothesisClass to_hypotheses(const PairClass& pc);

}  // namespace cdplab
