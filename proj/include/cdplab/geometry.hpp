#pragma once

#include <vector>

#include "cdplab/olive.hpp"
#include "cdplab/oracle.hpp"

namespace cdplab {

// Origin-centered ellipsoid {w : w^T B^{-1} w <= 1} with diagonal-free storage
// of the defining symmetric positive definite matrix.
struct CenteredEllipsoid {
  int dim = 0;
  std::vector<double> shape;  // row-major dim x dim
  double log_det = 0.0;       // log det(shape)

  double shape_at(int i, int j) const {
    return shape[static_cast<std::size_t>(i * dim + j)];
  }
};

// Minimum volume enclosing ellipsoid of the unit ball intersected with the
// symmetric slab |w_1| <= beta, for 0 < beta <= 1/sqrt(d):
// rho (I - sigma e1 e1^T) with sigma = (1 - d beta^2)/(1 - beta^2) and
// rho = d (1 - beta^2)/(d - 1). d = 1 degenerates to the interval itself.
CenteredEllipsoid mvee_slab_cut_unit(double beta, int dim);

// Volume ratio of that ellipsoid to the unit ball:
// sqrt(d) beta (d/(d-1))^{(d-1)/2} (1 - beta^2)^{(d-1)/2}, evaluated in
// log-space. Equals beta at d = 1 and 1 at beta = 1/sqrt(d).
double volume_ratio(double beta, int dim);

// Volume shrink guaranteed by one slab cut of half-width tau against a
// witness of magnitude kappa; requires tau/kappa <= 1/sqrt(d).
double slab_cut_ratio_bound(double kappa, double tau, int dim);

// --- Version-space audit of a completed population-mode run -----------------

struct VersionSpaceCut {
  int t = 0;
  int chosen_index = -1;
  double witness = 0.0;        // |<nu(f_t), xi(f_t)>|
  double required = 0.0;       // 3 sqrt(M)(2 phi + theta + theta_m) + theta_m
  bool witness_ok = false;
  double slab_half_width = 0.0;  // (2 phi + theta + theta_m) / ||nu(f_t)||_2
  double ratio_bound = 0.0;      // per-cut volume shrink bound (when witness_ok)
};

struct VersionSpaceLevelAudit {
  int level = 0;
  std::vector<VersionSpaceCut> cuts;
  double cumulative_ratio_bound = 1.0;  // product of per-cut bounds
  double cut_count_bound = 0.0;         // M ln(zeta/(2 phi)) / ln(5/3)
  bool count_ok = true;   // cuts.size() <= cut_count_bound
  bool witnesses_ok = true;
};

struct VersionSpaceAudit {
  std::vector<VersionSpaceLevelAudit> levels;  // one per level 1..H
  bool pass() const {
    for (const auto& l : levels)
      if (!l.count_ok || !l.witnesses_ok) return false;
    return true;
  }
};

// Replays the slab cuts a finished run induced on each level's factorized
// version space. Diagnostic only: a failed witness flags the iteration rather
// than raising.
VersionSpaceAudit version_space_tracker(const std::vector<BellmanFactorization>& per_level,
                                        const OliveResult& trace, double phi, double theta,
                                        double theta_m, int bellman_rank, double norm_bound);

}  // namespace cdplab
