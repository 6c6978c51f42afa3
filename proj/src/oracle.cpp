#include "cdplab/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace cdplab {

namespace {

constexpr double kValiditySlack = 1e-9;  // absorbs double-precision DP noise at theta = 0

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double exact_value_of_policy(const ExactModel& m, const Policy& policy) {
  return exact_value(m, policy);
}

OccupancyDistribution occupancy(const ExactModel& m, const Policy& policy, int h) {
  if (h < 1 || h > m.horizon) throw std::invalid_argument("occupancy: level out of range");
  return OccupancyDistribution{h, core_occupancy(m, policy, h)};
}

BellmanErrorMatrix bellman_error_matrix(const ExactModel& m, const HypothesisClass& cls,
                                        int h) {
  const int n = cls.size();
  BellmanErrorMatrix out;
  out.level = h;
  out.size = n;
  out.entries.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));

  std::vector<std::vector<double>> occ(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> err(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    occ[static_cast<std::size_t>(i)] =
        atom_occupancy(m, cls.members[static_cast<std::size_t>(i)].policy, h);
  for (int j = 0; j < n; ++j)
    err[static_cast<std::size_t>(j)] =
        atom_bellman_errors(m, cls.members[static_cast<std::size_t>(j)], h);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.entries[static_cast<std::size_t>(i * n + j)] =
          dot(occ[static_cast<std::size_t>(i)], err[static_cast<std::size_t>(j)]);
  return out;
}

std::vector<BellmanErrorMatrix> bellman_error_matrices(const ExactModel& m,
                                                       const HypothesisClass& cls) {
  std::vector<BellmanErrorMatrix> out;
  out.reserve(static_cast<std::size_t>(m.horizon));
  for (int h = 1; h <= m.horizon; ++h) out.push_back(bellman_error_matrix(m, cls, h));
  return out;
}

int numerical_rank(const std::vector<double>& row_major, int rows, int cols, double rel_tol) {
  Eigen::MatrixXd mat(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) mat(i, j) = row_major[static_cast<std::size_t>(i * cols + j)];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = rel_tol * sv(0);
  if (sv(0) <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

std::vector<double> singular_values(const BellmanErrorMatrix& matrix) {
  Eigen::MatrixXd mat(matrix.size, matrix.size);
  for (int i = 0; i < matrix.size; ++i)
    for (int j = 0; j < matrix.size; ++j) mat(i, j) = matrix.at(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
  std::vector<double> out(static_cast<std::size_t>(svd.singularValues().size()));
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    out[static_cast<std::size_t>(i)] = svd.singularValues()(i);
  return out;
}

int numerical_bellman_rank(const std::vector<BellmanErrorMatrix>& matrices, double rel_tol) {
  if (matrices.empty()) throw std::invalid_argument("numerical_bellman_rank: empty input");
  int best = 0;
  for (const auto& m : matrices)
    best = std::max(best, numerical_rank(m.entries, m.size, m.size, rel_tol));
  return best;
}

BellmanFactorization mdp_factorization(const TabularMDP& mdp, const HypothesisClass& cls,
                                       int h) {
  if (mdp.sampling_only) throw CapabilityError("mdp_factorization requires explicit dynamics");
  const ExactModel m = build_exact_model(Env{mdp});
  const int dim = mdp.states(h);
  BellmanFactorization fact;
  fact.level = h;
  fact.dim = dim;
  fact.zeta = 2.0 * std::sqrt(static_cast<double>(dim));
  fact.nu.reserve(cls.members.size());
  fact.xi.reserve(cls.members.size());
  for (const auto& member : cls.members) {
    fact.nu.push_back(atom_occupancy(m, member.policy, h));
    fact.xi.push_back(atom_bellman_errors(m, member, h));
  }
  // A state unreachable under every roll-in leaves its xi coordinate free; the
  // conditional-error convention already yields a finite value, and zeroing it
  // would equally preserve the inner products.
  return fact;
}

BellmanFactorization lowrank_factorization(const LowRankMDP& lr, const HypothesisClass& cls,
                                           int h) {
  if (lr.mdp.sampling_only)
    throw CapabilityError("lowrank_factorization requires explicit dynamics");
  const ExactModel m = build_exact_model(Env{lr.mdp});
  const int M = lr.latent_dim;
  const int K = lr.mdp.action_count;
  BellmanFactorization fact;
  fact.level = h;
  fact.dim = M;
  fact.zeta = 2.0 * std::sqrt(static_cast<double>(M));
  fact.nu.reserve(cls.members.size());
  fact.xi.reserve(cls.members.size());

  if (h == 1) {
    // No preceding factorized transition: carry the scalar aggregated error in
    // the first coordinate against nu = e_1. The level-1 error does not depend
    // on the roll-in policy (no actions precede level 1), so any roll-in works.
    for (const auto& member : cls.members) {
      std::vector<double> nu(static_cast<std::size_t>(M), 0.0);
      nu[0] = 1.0;
      fact.nu.push_back(std::move(nu));
      std::vector<double> xi(static_cast<std::size_t>(M), 0.0);
      xi[0] = exact_bellman_error(m, member, member.policy, 1);
      fact.xi.push_back(std::move(xi));
    }
    return fact;
  }

  const int n_prev = lr.mdp.states(h - 1);
  const int n_here = lr.mdp.states(h);
  const auto& f1 = lr.factor_sa[static_cast<std::size_t>(h - 2)];    // (s,a) x M at level h-1
  const auto& f2 = lr.factor_next[static_cast<std::size_t>(h - 2)];  // M x S_h

  for (const auto& member : cls.members) {
    // nu_m = Pr[latent factor = m at the (h-1)->h transition | roll-in]
    const std::vector<double> occ_prev = atom_occupancy(m, member.policy, h - 1);
    std::vector<double> nu(static_cast<std::size_t>(M), 0.0);
    for (int s = 0; s < n_prev; ++s) {
      const double p = occ_prev[static_cast<std::size_t>(s)];
      if (p == 0.0) continue;
      const int a = member.policy.at(h - 1, s);
      const std::size_t base = static_cast<std::size_t>((s * K + a) * M);
      for (int mm = 0; mm < M; ++mm)
        nu[static_cast<std::size_t>(mm)] += p * f1[base + static_cast<std::size_t>(mm)];
    }
    fact.nu.push_back(std::move(nu));

    // xi_m = sum_s Gamma2[m, s] * per-state error
    const std::vector<double> err = atom_bellman_errors(m, member, h);
    std::vector<double> xi(static_cast<std::size_t>(M), 0.0);
    for (int mm = 0; mm < M; ++mm) {
      double v = 0.0;
      const std::size_t base = static_cast<std::size_t>(mm * n_here);
      for (int s = 0; s < n_here; ++s)
        v += f2[base + static_cast<std::size_t>(s)] * err[static_cast<std::size_t>(s)];
      xi[static_cast<std::size_t>(mm)] = v;
    }
    fact.xi.push_back(std::move(xi));
  }
  return fact;
}

BellmanFactorization pomdp_factorization(const ReactivePOMDP& pomdp,
                                         const HypothesisClass& cls, int h) {
  if (pomdp.sampling_only)
    throw CapabilityError("pomdp_factorization requires explicit dynamics");
  const ExactModel m = build_exact_model(Env{pomdp});
  const int nz = pomdp.hidden(h);
  const int no = pomdp.observations(h);
  const auto& em = pomdp.emission[static_cast<std::size_t>(h - 1)];

  BellmanFactorization fact;
  fact.level = h;
  fact.dim = nz;
  fact.zeta = 2.0 * std::sqrt(static_cast<double>(nz));
  fact.nu.reserve(cls.members.size());
  fact.xi.reserve(cls.members.size());
  for (const auto& member : cls.members) {
    const std::vector<double> occ = atom_occupancy(m, member.policy, h);
    std::vector<double> nu(static_cast<std::size_t>(nz), 0.0);
    for (int z = 0; z < nz; ++z)
      for (int o = 0; o < no; ++o)
        nu[static_cast<std::size_t>(z)] += occ[static_cast<std::size_t>(z * no + o)];
    fact.nu.push_back(std::move(nu));

    const std::vector<double> err = atom_bellman_errors(m, member, h);
    std::vector<double> xi(static_cast<std::size_t>(nz), 0.0);
    for (int z = 0; z < nz; ++z) {
      double v = 0.0;
      for (int o = 0; o < no; ++o)
        v += em[static_cast<std::size_t>(z * no + o)] * err[static_cast<std::size_t>(z * no + o)];
      xi[static_cast<std::size_t>(z)] = v;
    }
    fact.xi.push_back(std::move(xi));
  }
  return fact;
}

BellmanFactorization env_factorization(const Env& env, const HypothesisClass& cls, int h) {
  if (const auto* lr = std::get_if<LowRankMDP>(&env)) return lowrank_factorization(*lr, cls, h);
  if (const auto* p = std::get_if<ReactivePOMDP>(&env)) return pomdp_factorization(*p, cls, h);
  return mdp_factorization(std::get<TabularMDP>(env), cls, h);
}

FactorizationReport verify_factorization(const ExactModel& m, const HypothesisClass& cls,
                                         const BellmanFactorization& fact, double tol) {
  FactorizationReport report;
  const int n = cls.size();
  const BellmanErrorMatrix exact_matrix = bellman_error_matrix(m, cls, fact.level);

  double max_nu = 0.0, max_xi = 0.0;
  for (const auto& v : fact.nu) max_nu = std::max(max_nu, l2_norm(v));
  for (const auto& v : fact.xi) max_xi = std::max(max_xi, l2_norm(v));
  report.norm_product = max_nu * max_xi;
  report.norms_ok = report.norm_product <= fact.zeta + 1e-12;

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double inner =
          dot(fact.nu[static_cast<std::size_t>(i)], fact.xi[static_cast<std::size_t>(j)]);
      const double residual = std::abs(inner - exact_matrix.at(i, j));
      if (residual > report.max_residual) {
        report.max_residual = residual;
        report.worst_rollin = i;
        report.worst_evaluated = j;
      }
      if (residual > fact.theta_m + tol) report.failing_pairs.emplace_back(i, j);
    }
  }
  report.residual_ok = report.failing_pairs.empty();
  return report;
}

double policy_loss_residual(const ExactModel& m, const Hypothesis& f) {
  const double vf = exact_initial_value(m, f);
  const double vpi = exact_value(m, f.policy);
  double err_sum = 0.0;
  for (int h = 1; h <= m.horizon; ++h) err_sum += exact_bellman_error(m, f, f.policy, h);
  return std::abs(vf - vpi - err_sum);
}

SurvivingSet theta_valid_set(const ExactModel& m, const HypothesisClass& cls, double theta) {
  const int n = cls.size();
  SurvivingSet set = SurvivingSet::all(n);
  const auto matrices = bellman_error_matrices(m, cls);
  for (int j = 0; j < n; ++j) {
    double worst = 0.0;
    for (const auto& mat : matrices)
      for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(mat.at(i, j)));
    set.alive[static_cast<std::size_t>(j)] = worst <= theta + kValiditySlack ? 1 : 0;
  }
  return set;
}

std::optional<OptimalValidValue> optimal_valid_value(const ExactModel& m,
                                                     const HypothesisClass& cls, double theta) {
  const SurvivingSet valid = theta_valid_set(m, cls, theta);
  std::optional<OptimalValidValue> best;
  for (int j = 0; j < cls.size(); ++j) {
    if (!valid[j]) continue;
    const double v = exact_value(m, cls.members[static_cast<std::size_t>(j)].policy);
    if (!best || v > best->value) best = OptimalValidValue{j, v};
  }
  return best;
}

}  // namespace cdplab
