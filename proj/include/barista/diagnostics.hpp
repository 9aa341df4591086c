#ifndef BARISTA_DIAGNOSTICS_HPP
#define BARISTA_DIAGNOSTICS_HPP

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "barista/core.hpp"
#include "barista/sample.hpp"

namespace barista {

struct KsResult {
  double d_statistic = 0;
  double p_value = 1;
  double n_effective = 0;
};

/// P(K > lambda) for the Kolmogorov distribution, series cut at 100 terms.
double kolmogorov_sf(double lambda);

/// p-value for a KS distance d at effective size n, using Stephens'
/// finite-n scaling (sqrt(n) + 0.12 + 0.11/sqrt(n)) d.
double ks_pvalue(double d, double n_effective);

KsResult ks_one_sample(const BidSample& sample, const Params& p);
KsResult ks_one_sample(const BidSample& sample, const std::function<double(double)>& cdf);

/// Two-sample test; n_effective = na nb / (na + nb).
KsResult ks_two_sample(const BidSample& a, const BidSample& b);

/// (observed, reference) quantile pairs.
struct QqData {
  std::vector<std::pair<double, double>> pairs;
};

/// Order statistics against model quantiles at (i - 0.5)/n.
QqData qq_points(const BidSample& sample, const Params& reference);

/**
 * Quantiles of both samples at (i - 0.5)/m, m = min(na, nb), with linear
 * interpolation between order statistics. Equal sizes give the order
 * statistics themselves.
 */
QqData qq_points(const BidSample& sample, const BidSample& reference);

/// Events in the final window (T - w, T], rescaled to [0, 1).
struct WindowEcdf {
  double window = 0;
  BidSample rescaled;

  /// Fraction of window events at or below rescaled position u.
  double operator()(double u) const;
};

WindowEcdf reverse_time_ecdf(const BidSample& sample, double window);

/**
 * (1 - F(T - t theta)) / (1 - F(T - t)) for the one-stage cdf with exponent
 * alpha, which equals theta^alpha whatever t is.
 */
double self_similarity_ratio(double alpha, double theta, double t, double horizon);

}  // namespace barista

#endif  // BARISTA_DIAGNOSTICS_HPP
