#include "cdplab/exact.hpp"

#include <cmath>

namespace cdplab {

namespace {

ExactModel from_mdp(const TabularMDP& mdp) {
  ExactModel m;
  m.horizon = mdp.horizon;
  m.action_count = mdp.action_count;
  m.atoms = mdp.cores;
  m.cores = mdp.cores;
  m.atom_core.resize(static_cast<std::size_t>(mdp.horizon + 1));
  for (int h = 1; h <= mdp.horizon + 1; ++h) {
    auto& ids = m.atom_core[static_cast<std::size_t>(h - 1)];
    ids.resize(static_cast<std::size_t>(mdp.states(h)));
    for (int s = 0; s < mdp.states(h); ++s) ids[static_cast<std::size_t>(s)] = s;
  }
  m.init = mdp.init;
  m.trans = mdp.trans;
  m.reward = mdp.reward_mean;
  return m;
}

// Atoms are (hidden, obs) pairs, index z * O_h + o. Atom transitions compose
// the hidden transition with the next level's emission.
ExactModel from_pomdp(const ReactivePOMDP& p) {
  ExactModel m;
  const int H = p.horizon;
  const int K = p.action_count;
  m.horizon = H;
  m.action_count = K;
  m.atoms.resize(static_cast<std::size_t>(H + 1));
  m.cores = p.obs_counts;
  m.atom_core.resize(static_cast<std::size_t>(H + 1));
  for (int h = 1; h <= H + 1; ++h) {
    const int nz = p.hidden(h);
    const int no = p.observations(h);
    m.atoms[static_cast<std::size_t>(h - 1)] = nz * no;
    auto& ids = m.atom_core[static_cast<std::size_t>(h - 1)];
    ids.resize(static_cast<std::size_t>(nz * no));
    for (int z = 0; z < nz; ++z)
      for (int o = 0; o < no; ++o) ids[static_cast<std::size_t>(z * no + o)] = o;
  }

  m.init.resize(static_cast<std::size_t>(m.atoms[0]));
  {
    const int no = p.observations(1);
    const auto& em = p.emission[0];
    for (int z = 0; z < p.hidden(1); ++z)
      for (int o = 0; o < no; ++o)
        m.init[static_cast<std::size_t>(z * no + o)] =
            p.init_hidden[static_cast<std::size_t>(z)] * em[static_cast<std::size_t>(z * no + o)];
  }

  m.trans.resize(static_cast<std::size_t>(H));
  m.reward.resize(static_cast<std::size_t>(H));
  for (int h = 1; h <= H; ++h) {
    const int nz = p.hidden(h);
    const int no = p.observations(h);
    const int nzp = p.hidden(h + 1);
    const int nop = p.observations(h + 1);
    const int n_atoms = nz * no;
    const int n_next = nzp * nop;
    const auto& table = p.trans[static_cast<std::size_t>(h - 1)];
    const auto& emp = p.emission[static_cast<std::size_t>(h)];
    auto& tm = m.trans[static_cast<std::size_t>(h - 1)];
    tm.assign(static_cast<std::size_t>(n_atoms) * static_cast<std::size_t>(K) *
                  static_cast<std::size_t>(n_next),
              0.0);
    m.reward[static_cast<std::size_t>(h - 1)] = p.reward_mean[static_cast<std::size_t>(h - 1)];
    for (int atom = 0; atom < n_atoms; ++atom) {
      for (int a = 0; a < K; ++a) {
        const std::size_t src_row = static_cast<std::size_t>(atom * K + a);
        const std::size_t dst_base = src_row * static_cast<std::size_t>(n_next);
        for (int zp = 0; zp < nzp; ++zp) {
          const double pz = table[src_row * static_cast<std::size_t>(nzp) +
                                  static_cast<std::size_t>(zp)];
          if (pz == 0.0) continue;
          for (int op = 0; op < nop; ++op)
            tm[dst_base + static_cast<std::size_t>(zp * nop + op)] =
                pz * emp[static_cast<std::size_t>(zp * nop + op)];
        }
      }
    }
  }
  return m;
}

}  // namespace

ExactModel build_exact_model(const Env& env) {
  if (!oracle_capable(env))
    throw CapabilityError("exact computation requires an oracle-capable environment");
  if (const auto* p = std::get_if<ReactivePOMDP>(&env)) return from_pomdp(*p);
  return from_mdp(*as_tabular(env));
}

std::vector<double> atom_occupancy(const ExactModel& m, const Policy& policy, int level) {
  if (level < 1 || level > m.horizon + 1)
    throw std::invalid_argument("atom_occupancy: level out of range");
  std::vector<double> occ = m.init;
  for (int h = 1; h < level; ++h) {
    const int n = m.atom_count(h);
    const int np = m.atom_count(h + 1);
    const auto& table = m.trans[static_cast<std::size_t>(h - 1)];
    std::vector<double> next(static_cast<std::size_t>(np), 0.0);
    for (int atom = 0; atom < n; ++atom) {
      const double p = occ[static_cast<std::size_t>(atom)];
      if (p == 0.0) continue;
      const int a = policy.at(h, m.atom_core[static_cast<std::size_t>(h - 1)]
                                            [static_cast<std::size_t>(atom)]);
      const std::size_t base =
          static_cast<std::size_t>(atom * m.action_count + a) * static_cast<std::size_t>(np);
      for (int ap = 0; ap < np; ++ap)
        next[static_cast<std::size_t>(ap)] += p * table[base + static_cast<std::size_t>(ap)];
    }
    occ = std::move(next);
  }
  return occ;
}

std::vector<double> core_occupancy(const ExactModel& m, const Policy& policy, int level) {
  const std::vector<double> occ = atom_occupancy(m, policy, level);
  std::vector<double> out(static_cast<std::size_t>(m.cores[static_cast<std::size_t>(level - 1)]),
                          0.0);
  const auto& ids = m.atom_core[static_cast<std::size_t>(level - 1)];
  for (std::size_t atom = 0; atom < occ.size(); ++atom)
    out[static_cast<std::size_t>(ids[atom])] += occ[atom];
  return out;
}

double exact_value(const ExactModel& m, const Policy& policy) {
  double total = 0.0;
  std::vector<double> occ = m.init;
  for (int h = 1; h <= m.horizon; ++h) {
    const int n = m.atom_count(h);
    const int np = m.atom_count(h + 1);
    const auto& table = m.trans[static_cast<std::size_t>(h - 1)];
    const auto& rew = m.reward[static_cast<std::size_t>(h - 1)];
    std::vector<double> next(static_cast<std::size_t>(np), 0.0);
    for (int atom = 0; atom < n; ++atom) {
      const double p = occ[static_cast<std::size_t>(atom)];
      if (p == 0.0) continue;
      const int a = policy.at(h, m.atom_core[static_cast<std::size_t>(h - 1)]
                                            [static_cast<std::size_t>(atom)]);
      const std::size_t row = static_cast<std::size_t>(atom * m.action_count + a);
      total += p * rew[row];
      const std::size_t base = row * static_cast<std::size_t>(np);
      for (int ap = 0; ap < np; ++ap)
        next[static_cast<std::size_t>(ap)] += p * table[base + static_cast<std::size_t>(ap)];
    }
    occ = std::move(next);
  }
  return total;
}

double exact_initial_value(const ExactModel& m, const Hypothesis& f) {
  double total = 0.0;
  const auto& ids = m.atom_core[0];
  for (std::size_t atom = 0; atom < m.init.size(); ++atom)
    total += m.init[atom] * f.state_value(1, ids[atom]);
  return total;
}

std::vector<double> atom_bellman_errors(const ExactModel& m, const Hypothesis& f, int h) {
  if (h < 1 || h > m.horizon)
    throw std::invalid_argument("atom_bellman_errors: level out of range");
  const int n = m.atom_count(h);
  const int np = m.atom_count(h + 1);
  const auto& table = m.trans[static_cast<std::size_t>(h - 1)];
  const auto& rew = m.reward[static_cast<std::size_t>(h - 1)];
  const auto& ids = m.atom_core[static_cast<std::size_t>(h - 1)];
  const auto& next_ids = m.atom_core[static_cast<std::size_t>(h)];

  // successor values g(x_{h+1}) with a_{h+1} ~ pi_f; identically 0 past level H
  std::vector<double> next_value(static_cast<std::size_t>(np), 0.0);
  if (h < m.horizon)
    for (int ap = 0; ap < np; ++ap)
      next_value[static_cast<std::size_t>(ap)] =
          f.state_value(h + 1, next_ids[static_cast<std::size_t>(ap)]);

  std::vector<double> errors(static_cast<std::size_t>(n), 0.0);
  for (int atom = 0; atom < n; ++atom) {
    const int core = ids[static_cast<std::size_t>(atom)];
    const int a = f.policy.at(h, core);
    const std::size_t row = static_cast<std::size_t>(atom * m.action_count + a);
    double future = 0.0;
    const std::size_t base = row * static_cast<std::size_t>(np);
    for (int ap = 0; ap < np; ++ap)
      future += table[base + static_cast<std::size_t>(ap)] *
                next_value[static_cast<std::size_t>(ap)];
    errors[static_cast<std::size_t>(atom)] = f.state_value(h, core) - rew[row] - future;
  }
  return errors;
}

double exact_bellman_error(const ExactModel& m, const Hypothesis& f, const Policy& rollin,
                           int h) {
  const std::vector<double> occ = atom_occupancy(m, rollin, h);
  const std::vector<double> err = atom_bellman_errors(m, f, h);
  double total = 0.0;
  for (std::size_t i = 0; i < occ.size(); ++i) total += occ[i] * err[i];
  return total;
}

}  // namespace cdplab
