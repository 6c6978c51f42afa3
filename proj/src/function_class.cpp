#include "cdplab/function_class.hpp"

namespace cdplab {

Policy greedy_policy(const QFunction& f) {
  Policy pi;
  pi.action.resize(static_cast<std::size_t>(f.horizon));
  for (int h = 1; h <= f.horizon; ++h) {
    const int n = f.cores[static_cast<std::size_t>(h - 1)];
    auto& row = pi.action[static_cast<std::size_t>(h - 1)];
    row.resize(static_cast<std::size_t>(n));
    for (int core = 0; core < n; ++core) {
      int best = 0;
      double best_value = f.at(h, core, 0);
      for (int a = 1; a < f.action_count; ++a) {
        const double v = f.at(h, core, a);
        if (v > best_value) {  // strict: ties keep the lowest action index
          best_value = v;
          best = a;
        }
      }
      row[static_cast<std::size_t>(core)] = best;
    }
  }
  return pi;
}

double predicted_value(const QFunction& f, const Context& x1) {
  if (x1.level != 1) throw std::invalid_argument("predicted_value: context must be at level 1");
  double best = f.at(1, x1.core, 0);
  for (int a = 1; a < f.action_count; ++a) best = std::max(best, f.at(1, x1.core, a));
  return best;
}

PolicyValuePair to_pair(const QFunction& f) {
  PolicyValuePair pair;
  pair.policy = greedy_policy(f);
  pair.vvalue.resize(static_cast<std::size_t>(f.horizon));
  for (int h = 1; h <= f.horizon; ++h) {
    const int n = f.cores[static_cast<std::size_t>(h - 1)];
    auto& row = pair.vvalue[static_cast<std::size_t>(h - 1)];
    row.resize(static_cast<std::size_t>(n));
    for (int core = 0; core < n; ++core)
      row[static_cast<std::size_t>(core)] = f.at(h, core, pair.policy.at(h, core));
  }
  return pair;
}

PairClass product_class(const std::vector<Policy>& policies,
                        const std::vector<std::vector<std::vector<double>>>& vvalues) {
  if (policies.empty() || vvalues.empty())
    throw std::invalid_argument("product_class: inputs must be nonempty");
  const int H = policies.front().horizon();
  for (const auto& pi : policies)
    if (pi.horizon() != H) throw std::invalid_argument("product_class: policy shape mismatch");
  for (const auto& g : vvalues) {
    if (static_cast<int>(g.size()) != H)
      throw std::invalid_argument("product_class: value-table shape mismatch");
    for (int h = 1; h <= H; ++h)
      if (g[static_cast<std::size_t>(h - 1)].size() !=
          policies.front().action[static_cast<std::size_t>(h - 1)].size())
        throw std::invalid_argument("product_class: value-table shape mismatch");
  }

  PairClass out;
  out.members.reserve(policies.size() * vvalues.size());
  for (const auto& pi : policies)
    for (const auto& g : vvalues) out.members.push_back(PolicyValuePair{pi, g});
  return out;
}

Hypothesis hypothesis_of(const QFunction& f) {
  const PolicyValuePair pair = to_pair(f);
  return Hypothesis{pair.policy, pair.vvalue};
}

Hypothesis hypothesis_of(const PolicyValuePair& p) { return Hypothesis{p.policy, p.vvalue}; }

HypothesisClass to_hypotheses(const FunctionClass& fc) {
  HypothesisClass out;
  out.members.reserve(fc.members.size());
  for (const auto& f : fc.members) out.members.push_back(hypothesis_of(f));
  out.qstar_index = fc.qstar_index;
  return out;
}

HypothesisClass to_hypotheses(const PairClass& pc) {
  HypothesisClass out;
  out.members.reserve(pc.members.size());
  for (const auto& p : pc.members) out.members.push_back(hypothesis_of(p));
  out.qstar_index = pc.qstar_index;
  return out;
}

}  // namespace cdplab
