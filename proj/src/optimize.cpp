#include "barista/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace barista {

namespace {

constexpr double kMinusInf = -std::numeric_limits<double>::infinity();

std::size_t gene_count(FamilyTag family) {
  return std::size_t(free_parameter_count(family));
}

struct Individual {
  Eigen::VectorXd genes;
  double fitness = kMinusInf;
};

FitResult finish(const LoglikEvaluator& ll, FamilyTag family, Method method,
                 std::span<const double> genes, double fitness, double n) {
  FitResult r;
  r.family = family;
  r.method = method;
  const Params shape = params_from_genes(family, genes, ll.horizon());
  r.c_hat = estimate_c(shape, n);
  r.params = shape.with_c(r.c_hat);
  r.loglik = fitness;
  return r;
}

}  // namespace

std::vector<const char*> gene_names(FamilyTag family) {
  switch (family) {
    case FamilyTag::OneStage: return {"alpha"};
    case FamilyTag::TwoStage: return {"alpha2", "alpha3", "d2"};
    case FamilyTag::ThreeStage: return {"alpha1", "alpha2", "alpha3", "d1", "d2"};
  }
  return {};
}

Params params_from_genes(FamilyTag family, std::span<const double> g, double T) {
  if (g.size() != gene_count(family))
    throw std::invalid_argument(std::string("params_from_genes: ") + family_name(family) +
                                " takes " + std::to_string(gene_count(family)) + " genes");
  switch (family) {
    case FamilyTag::OneStage: return as_barista(OneStage{g[0], 1.0, T});
    case FamilyTag::TwoStage: return as_barista(TwoStage{g[0], g[1], g[2], 1.0, T});
    case FamilyTag::ThreeStage: return Params(g[0], g[1], g[2], g[3], g[4], 1.0, T);
  }
  throw std::invalid_argument("params_from_genes: unknown family");
}

std::vector<double> genes_of(FamilyTag family, const Params& p) {
  switch (family) {
    case FamilyTag::OneStage: return {p.alpha2()};
    case FamilyTag::TwoStage: return {p.alpha2(), p.alpha3(), p.d2()};
    case FamilyTag::ThreeStage: return {p.alpha1(), p.alpha2(), p.alpha3(), p.d1(), p.d2()};
  }
  return {};
}

std::vector<double> GridAxis::values() const {
  if (steps == 0) throw std::invalid_argument("grid axis with zero steps");
  if (!(lo <= hi)) throw std::invalid_argument("grid axis needs lo <= hi");
  std::vector<double> v(steps);
  for (std::size_t k = 0; k < steps; ++k)
    v[k] = steps == 1 ? lo : lo + (hi - lo) * double(k) / double(steps - 1);
  if (steps > 1) v.back() = hi;
  return v;
}

FitResult grid_search(const BidSample& sample, FamilyTag family,
                      std::span<const GridAxis> grid) {
  const std::size_t k = gene_count(family);
  if (grid.size() != k)
    throw std::invalid_argument(std::string("grid_search: ") + family_name(family) + " needs " +
                                std::to_string(k) + " axes");
  std::vector<std::vector<double>> axes;
  for (const auto& a : grid) axes.push_back(a.values());

  const LoglikEvaluator ll(sample);
  std::vector<std::size_t> idx(k, 0);
  std::vector<double> genes(k), best_genes;
  double best = kMinusInf;
  for (;;) {
    for (std::size_t j = 0; j < k; ++j) genes[j] = axes[j][idx[j]];
    try {
      const double f = ll(params_from_genes(family, genes, ll.horizon()));
      if (f > best) {
        best = f;
        best_genes = genes;
      }
    } catch (const std::invalid_argument&) {
      // infeasible point
    }
    // advance the last axis fastest
    std::size_t j = k;
    while (j > 0 && ++idx[j - 1] == axes[j - 1].size()) idx[--j] = 0;
    if (j == 0) break;
  }
  if (best_genes.empty())
    throw EstimationError("grid", "no feasible grid point with finite likelihood");
  return finish(ll, family, Method::Grid, best_genes, best, double(sample.size()));
}

void GaConfig::validate(FamilyTag family) const {
  const std::size_t k = gene_count(family);
  if (population_size < 2) throw std::invalid_argument("ga: population_size must be at least 2");
  if (!(elite_fraction > 0 && elite_fraction <= 1))
    throw std::invalid_argument("ga: elite_fraction must lie in (0, 1]");
  if (bounds.size() != k)
    throw std::invalid_argument(std::string("ga: ") + family_name(family) + " needs " +
                                std::to_string(k) + " bounds");
  for (const auto& b : bounds)
    if (!(b.lo < b.hi)) throw std::invalid_argument("ga: every bound needs lo < hi");
  if (!mutation_scale.empty() && mutation_scale.size() != k)
    throw std::invalid_argument("ga: mutation_scale needs one entry per gene");
  for (double s : mutation_scale)
    if (!(s >= 0)) throw std::invalid_argument("ga: mutation_scale must be nonnegative");
}

std::vector<Bound> reference_bounds(FamilyTag family, double T) {
  const double w = T / 7;
  switch (family) {
    case FamilyTag::OneStage: return {{0.1, 15}};
    case FamilyTag::TwoStage: return {{0.1, 1}, {0.5, 15}, {0, 0.01 * w}};
    case FamilyTag::ThreeStage:
      return {{1, 15}, {0.1, 1}, {0.5, 15}, {1 * w, 5 * w}, {0, 0.01 * w}};
  }
  return {};
}

std::vector<Bound> default_bounds(FamilyTag family, double T) {
  const double w = T / 7;
  switch (family) {
    case FamilyTag::OneStage: return {{0.05, 15}};
    case FamilyTag::TwoStage: return {{0.05, 2}, {0.05, 15}, {0, 0.01 * w}};
    case FamilyTag::ThreeStage:
      return {{0.05, 15}, {0.05, 2}, {0.05, 15}, {0, 5 * w}, {0, 0.01 * w}};
  }
  return {};
}

FitResult ga_fit(const BidSample& sample, FamilyTag family, const GaConfig& cfg) {
  cfg.validate(family);
  const std::size_t k = gene_count(family);
  const LoglikEvaluator ll(sample);
  Rng rng(cfg.seed);

  Eigen::VectorXd lo(k), hi(k), sigma(k);
  for (std::size_t j = 0; j < k; ++j) {
    lo(j) = cfg.bounds[j].lo;
    hi(j) = cfg.bounds[j].hi;
    sigma(j) = cfg.mutation_scale.empty() ? GaConfig::kMutationFraction * (hi(j) - lo(j))
                                          : cfg.mutation_scale[j];
  }
  auto evaluate = [&](Individual& ind) {
    try {
      const double f = ll(params_from_genes(family, {ind.genes.data(), k}, ll.horizon()));
      ind.fitness = std::isnan(f) ? kMinusInf : f;
    } catch (const std::invalid_argument&) {
      ind.fitness = kMinusInf;
    }
  };
  auto by_fitness = [](const Individual& a, const Individual& b) { return a.fitness > b.fitness; };

  std::vector<Individual> pop(cfg.population_size);
  for (auto& ind : pop) {
    ind.genes.resize(k);
    for (std::size_t j = 0; j < k; ++j) ind.genes(j) = rng.uniform(lo(j), hi(j));
    evaluate(ind);
  }
  std::stable_sort(pop.begin(), pop.end(), by_fitness);

  const std::size_t elite = std::clamp<std::size_t>(
      std::size_t(std::llround(cfg.elite_fraction * double(cfg.population_size))), 1,
      cfg.population_size);
  std::vector<double> history{pop.front().fitness};
  history.reserve(cfg.generations + 1);

  std::vector<Individual> next;
  for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
    next.assign(pop.begin(), pop.begin() + std::ptrdiff_t(elite));
    for (std::size_t pair = 0; pair < cfg.offspring_pairs; ++pair) {
      const auto& a = pop[rng.index(elite)].genes;
      const auto& b = pop[rng.index(elite)].genes;
      Individual c1, c2;
      c1.genes.resize(k);
      c2.genes.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        const double u = rng.uniform();
        c1.genes(j) = u * a(j) + (1 - u) * b(j);
        c2.genes(j) = (1 - u) * a(j) + u * b(j);
      }
      for (auto* c : {&c1, &c2}) {
        for (std::size_t j = 0; j < k; ++j)
          c->genes(j) = std::clamp(c->genes(j) + sigma(j) * rng.normal(), lo(j), hi(j));
        evaluate(*c);
        next.push_back(std::move(*c));
      }
    }
    std::stable_sort(next.begin(), next.end(), by_fitness);
    if (next.size() > cfg.population_size) next.resize(cfg.population_size);
    pop.swap(next);
    history.push_back(pop.front().fitness);
  }

  const Individual& best = pop.front();
  if (!std::isfinite(best.fitness))
    throw EstimationError("ga", "no individual with finite likelihood inside the bounds");
  FitResult r = finish(ll, family, Method::GA, {best.genes.data(), k}, best.fitness,
                       double(sample.size()));
  r.fitness_history = std::move(history);
  return r;
}

}  // namespace barista
