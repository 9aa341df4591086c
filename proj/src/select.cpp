#include "barista/select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace barista {

namespace {

FitResult fit_one_stage(const BidSample& sample) {
  const auto m = mle_nhpp1(sample);
  FitResult r;
  r.family = FamilyTag::OneStage;
  r.method = Method::ClosedForm;
  r.params = as_barista(OneStage{m.alpha, m.c, sample.horizon()});
  r.c_hat = m.c;
  r.loglik = loglik(sample, r.params);
  return r;
}

// Small grid in the larger family centred on the smaller fit's embedding,
// which is itself a grid point whenever it lies inside the bounds.
FitResult refine_around(const BidSample& sample, FamilyTag family,
                        const std::vector<Bound>& bounds, const Params& embedded) {
  const auto centre = genes_of(family, embedded);
  std::vector<GridAxis> axes;
  for (std::size_t j = 0; j < centre.size(); ++j) {
    const double lo = bounds[j].lo, hi = bounds[j].hi;
    const double half = 0.05 * (hi - lo);
    const double c = std::clamp(centre[j], lo, hi);
    const double room = std::min({half, c - lo, hi - c});
    if (room > 0)
      axes.push_back({c - room, c + room, 5});
    else if (c == lo)
      axes.push_back({c, c + half, 3});
    else
      axes.push_back({c - half, c, 3});
  }
  return grid_search(sample, family, axes);
}

LrTest compare(const BidSample& sample, const FitResult& small, FitResult& big,
               const std::vector<Bound>& big_bounds) {
  LrTest t;
  if (big.loglik < small.loglik) {
    FitResult local = refine_around(sample, big.family, big_bounds, small.params);
    if (local.loglik > big.loglik) {
      big = std::move(local);
      t.refined = true;
    }
  }
  const LrStatistic s = lr_statistic(small.loglik, big.loglik);
  t.statistic = s.value;
  t.flagged = s.flagged;
  t.p_value = chi2_sf_2df(s.value);
  return t;
}

}  // namespace

LrStatistic lr_statistic(double ll_small, double ll_big) {
  const double raw = -2 * (ll_small - ll_big);
  return {std::max(raw, 0.0), raw < -1e-6};
}

double chi2_sf_2df(double x) {
  if (!(x >= 0)) throw std::domain_error("chi2_sf_2df: negative statistic");
  return std::exp(-x / 2);
}

SelectionConfig SelectionConfig::defaults(double horizon, Seed seed) {
  SelectionConfig cfg;
  cfg.two_stage.bounds = default_bounds(FamilyTag::TwoStage, horizon);
  cfg.two_stage.seed = derive(seed, 2);
  cfg.three_stage.bounds = default_bounds(FamilyTag::ThreeStage, horizon);
  cfg.three_stage.seed = derive(seed, 3);
  return cfg;
}

SelectionResult select_model(const BidSample& sample, const SelectionConfig& cfg) {
  if (!(cfg.alpha_level > 0 && cfg.alpha_level < 1))
    throw std::invalid_argument("select: alpha_level must lie in (0, 1)");
  SelectionResult r;
  r.alpha_level = cfg.alpha_level;
  r.fits.push_back(fit_one_stage(sample));
  r.fits.push_back(ga_fit(sample, FamilyTag::TwoStage, cfg.two_stage));
  r.lr_12 = compare(sample, r.fits[0], r.fits[1], cfg.two_stage.bounds);
  if (!(r.lr_12.p_value < cfg.alpha_level)) {
    r.chosen = FamilyTag::OneStage;
    return r;
  }
  r.fits.push_back(ga_fit(sample, FamilyTag::ThreeStage, cfg.three_stage));
  r.lr_23 = compare(sample, r.fits[1], r.fits[2], cfg.three_stage.bounds);
  r.chosen = r.lr_23->p_value < cfg.alpha_level ? FamilyTag::ThreeStage : FamilyTag::TwoStage;
  return r;
}

}  // namespace barista
