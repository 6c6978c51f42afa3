#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdplab/exact.hpp"

namespace cdplab {

struct OccupancyDistribution {
  int level = 0;
  std::vector<double> probabilities;  // over the level's cores (or hidden states)
};

// Entry (i, j) = E(class[j], pi_{class[i]}, h): rows are roll-in members,
// columns are evaluated members. Entries lie in [-2, 1].
struct BellmanErrorMatrix {
  int level = 0;
  int size = 0;
  std::vector<double> entries;  // row-major, size x size

  double at(int row, int col) const {
    return entries[static_cast<std::size_t>(row * size + col)];
  }
};

// Vector maps realizing E(f, pi_{f'}, h) = <nu(f'), xi(f)> with a norm
// certificate zeta >= max ||nu||_2 * max ||xi||_2 and declared slack theta_m.
struct BellmanFactorization {
  int level = 0;
  int dim = 0;
  std::vector<std::vector<double>> nu;  // per member (roll-in role)
  std::vector<std::vector<double>> xi;  // per member (evaluated role)
  double zeta = 0.0;
  double theta_m = 0.0;
};

struct FactorizationReport {
  double max_residual = 0.0;
  int worst_rollin = -1;
  int worst_evaluated = -1;
  double norm_product = 0.0;  // max ||nu||_2 * max ||xi||_2
  bool norms_ok = false;
  bool residual_ok = false;
  std::vector<std::pair<int, int>> failing_pairs;  // (roll-in, evaluated) over tolerance

  bool pass() const { return norms_ok && residual_ok; }
};

double exact_value_of_policy(const ExactModel& m, const Policy& policy);
OccupancyDistribution occupancy(const ExactModel& m, const Policy& policy, int h);

BellmanErrorMatrix bellman_error_matrix(const ExactModel& m, const HypothesisClass& cls,
                                        int h);
std::vector<BellmanErrorMatrix> bellman_error_matrices(const ExactModel& m,
                                                       const HypothesisClass& cls);

// Max over levels of the numerical rank: count of singular values exceeding
// rel_tol * sigma_max. An all-zero matrix has rank 0.
int numerical_bellman_rank(const std::vector<BellmanErrorMatrix>& matrices,
                           double rel_tol = 1e-8);
int numerical_rank(const std::vector<double>& row_major, int rows, int cols, double rel_tol);
std::vector<double> singular_values(const BellmanErrorMatrix& matrix);

// State-occupancy / per-state-error factorization of a tabular MDP; dim is the
// level-h state count and zeta = 2 sqrt(dim).
BellmanFactorization mdp_factorization(const TabularMDP& mdp, const HypothesisClass& cls,
                                       int h);

// Latent-factor factorization of a low-rank MDP; dim is the retained factor
// dimension M. Level 1 has no preceding factorized transition and is carried
// by a one-dimensional pad: nu = e_1, xi = (aggregate error, 0, ...).
BellmanFactorization lowrank_factorization(const LowRankMDP& lr, const HypothesisClass& cls,
                                           int h);

// Hidden-state-occupancy factorization of the POMDP-like model; dim is the
// level-h hidden state count and zeta = 2 sqrt(dim).
BellmanFactorization pomdp_factorization(const ReactivePOMDP& pomdp,
                                         const HypothesisClass& cls, int h);

BellmanFactorization env_factorization(const Env& env, const HypothesisClass& cls, int h);

FactorizationReport verify_factorization(const ExactModel& m, const HypothesisClass& cls,
                                         const BellmanFactorization& fact, double tol);

// |V_f - V^{pi_f} - sum_h E(f, pi_f, h)|; an exact identity, so the residual
// is floating-point noise only.
double policy_loss_residual(const ExactModel& m, const Hypothesis& f);

// Members whose worst-case |E(f, pi_{f'}, h)| over the class and all levels is
// at most theta (plus a fixed 1e-9 numerical slack so theta = 0 is usable on
// double-precision DP output).
SurvivingSet theta_valid_set(const ExactModel& m, const HypothesisClass& cls, double theta);

struct OptimalValidValue {
  int index = -1;
  double value = 0.0;
};

// Highest exact policy value among theta-valid members; empty optional when no
// member qualifies.
std::optional<OptimalValidValue> optimal_valid_value(const ExactModel& m,
                                                     const HypothesisClass& cls, double theta);

}  // namespace cdplab
