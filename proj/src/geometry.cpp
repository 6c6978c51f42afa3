#include "cdplab/geometry.hpp"

#include <cmath>

namespace cdplab {

namespace {

void check_beta(double beta, int dim) {
  if (dim < 1) throw std::invalid_argument("slab cut: dimension must be >= 1");
  if (!(beta > 0.0) || beta > 1.0 / std::sqrt(static_cast<double>(dim)) + 1e-15)
    throw std::invalid_argument("slab cut: beta must lie in (0, 1/sqrt(d)]");
}

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

CenteredEllipsoid mvee_slab_cut_unit(double beta, int dim) {
  check_beta(beta, dim);
  CenteredEllipsoid e;
  e.dim = dim;
  e.shape.assign(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim), 0.0);
  if (dim == 1) {
    // the enclosing ellipsoid of an interval is the interval itself
    e.shape[0] = beta * beta;
    e.log_det = 2.0 * std::log(beta);
    return e;
  }
  const double d = dim;
  const double sigma = (1.0 - d * beta * beta) / (1.0 - beta * beta);
  const double rho = d * (1.0 - beta * beta) / (d - 1.0);
  for (int i = 0; i < dim; ++i)
    e.shape[static_cast<std::size_t>(i * dim + i)] = i == 0 ? rho * (1.0 - sigma) : rho;
  // first eigenvalue rho(1-sigma) simplifies to d beta^2
  e.log_det = std::log(d * beta * beta) + (d - 1.0) * std::log(rho);
  return e;
}

double volume_ratio(double beta, int dim) {
  check_beta(beta, dim);
  if (dim == 1) return beta;
  const double d = dim;
  const double log_ratio = 0.5 * std::log(d) + std::log(beta) +
                           0.5 * (d - 1.0) * (std::log(d) - std::log(d - 1.0)) +
                           0.5 * (d - 1.0) * std::log1p(-beta * beta);
  return std::exp(log_ratio);
}

double slab_cut_ratio_bound(double kappa, double tau, int dim) {
  if (!(kappa > 0.0)) throw std::invalid_argument("slab_cut_ratio_bound: kappa must be > 0");
  if (tau < 0.0) throw std::invalid_argument("slab_cut_ratio_bound: tau must be >= 0");
  if (tau == 0.0) return 0.0;  // degenerate hyperplane cut
  return volume_ratio(tau / kappa, dim);
}

VersionSpaceAudit version_space_tracker(const std::vector<BellmanFactorization>& per_level,
                                        const OliveResult& trace, double phi, double theta,
                                        double theta_m, int bellman_rank, double norm_bound) {
  const int H = static_cast<int>(per_level.size());
  const double root_m = std::sqrt(static_cast<double>(bellman_rank));
  const double half_width = 2.0 * phi + theta + theta_m;
  const double required = 3.0 * root_m * half_width + theta_m;

  VersionSpaceAudit audit;
  audit.levels.resize(static_cast<std::size_t>(H));
  for (int h = 1; h <= H; ++h) {
    auto& level_audit = audit.levels[static_cast<std::size_t>(h - 1)];
    level_audit.level = h;
    level_audit.cut_count_bound =
        elimination_iteration_bound(1, bellman_rank, norm_bound, phi);
  }

  for (const auto& record : trace.records) {
    if (record.terminated || record.level < 1 || record.level > H) continue;
    const auto& fact = per_level[static_cast<std::size_t>(record.level - 1)];
    const auto& nu = fact.nu[static_cast<std::size_t>(record.chosen_index)];
    const auto& xi = fact.xi[static_cast<std::size_t>(record.chosen_index)];

    VersionSpaceCut cut;
    cut.t = record.t;
    cut.chosen_index = record.chosen_index;
    cut.witness = std::abs(dot(nu, xi));
    cut.required = required;
    cut.witness_ok = cut.witness >= required * (1.0 - 1e-12);
    const double nu_norm = l2_norm(nu);
    cut.slab_half_width = nu_norm > 0.0 ? half_width / nu_norm : 0.0;
    // the ratio bound needs tau/kappa <= 1/sqrt(dim); guaranteed when the
    // witness condition holds and dim matches the configured rank
    if (cut.witness_ok &&
        half_width / cut.witness <= 1.0 / std::sqrt(static_cast<double>(fact.dim)) + 1e-15)
      cut.ratio_bound = slab_cut_ratio_bound(cut.witness, half_width, fact.dim);

    auto& level_audit = audit.levels[static_cast<std::size_t>(record.level - 1)];
    if (!cut.witness_ok) level_audit.witnesses_ok = false;
    if (cut.ratio_bound > 0.0) level_audit.cumulative_ratio_bound *= cut.ratio_bound;
    level_audit.cuts.push_back(std::move(cut));
  }

  for (auto& level_audit : audit.levels)
    level_audit.count_ok =
        static_cast<double>(level_audit.cuts.size()) <= level_audit.cut_count_bound + 1e-12;

  return audit;
}

}  // namespace cdplab
