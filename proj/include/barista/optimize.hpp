#ifndef BARISTA_OPTIMIZE_HPP
#define BARISTA_OPTIMIZE_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "barista/core.hpp"
#include "barista/estimate.hpp"
#include "barista/random.hpp"
#include "barista/sample.hpp"

namespace barista {

/**
 * Searched coordinates of each family, in order:
 *   one-stage   (alpha)
 *   two-stage   (alpha2, alpha3, d2)
 *   three-stage (alpha1, alpha2, alpha3, d1, d2)
 */
std::vector<const char*> gene_names(FamilyTag family);

/// The shape (c = 1) for a gene vector; throws std::invalid_argument if
/// the genes do not form a valid model.
Params params_from_genes(FamilyTag family, std::span<const double> genes, double horizon);

std::vector<double> genes_of(FamilyTag family, const Params& p);

struct Bound {
  double lo = 0, hi = 0;
};

/// Evenly spaced values lo, ..., hi; a single step means just lo.
struct GridAxis {
  double lo = 0, hi = 0;
  std::size_t steps = 1;

  std::vector<double> values() const;
};

/**
 * Exhaustive search over the product of the axes (first axis outermost).
 * The first point attaining the maximum wins. Infeasible points are skipped;
 * if none is feasible, throws EstimationError.
 */
FitResult grid_search(const BidSample& sample, FamilyTag family,
                      std::span<const GridAxis> grid);

struct GaConfig {
  std::size_t population_size = 100;
  double elite_fraction = 0.10;
  std::size_t offspring_pairs = 50;
  std::size_t generations = 500;
  std::vector<Bound> bounds;          // one per gene
  std::vector<double> mutation_scale; // per gene; empty means kMutationFraction of each width
  Seed seed{0};

  static constexpr double kMutationFraction = 0.01;

  /// Throws std::invalid_argument if sizes or bounds are inconsistent.
  void validate(FamilyTag family) const;
};

/// A tight box around the reference regime, scaled to T:
/// [1,15] x [0.1,1] x [0.5,15] x [T/7, 5T/7] x [0, 0.01 T/7].
std::vector<Bound> reference_bounds(FamilyTag family, double horizon);

/// Broader default box for model selection, scaled to T.
std::vector<Bound> default_bounds(FamilyTag family, double horizon);

/**
 * Real-coded genetic algorithm maximizing the conditional log-likelihood.
 * Each generation the top elite_fraction of the population are parents;
 * offspring_pairs random parent pairs each yield two children by a
 * per-coordinate blend u a + (1 - u) b, followed by Gaussian mutation
 * clipped to the bounds. The next population is the best population_size
 * of parents and children, so the best individual never gets worse.
 */
FitResult ga_fit(const BidSample& sample, FamilyTag family, const GaConfig& cfg);

}  // namespace barista

#endif  // BARISTA_OPTIMIZE_HPP
