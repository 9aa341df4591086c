#include "barista/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace barista {

double kolmogorov_sf(double lambda) {
  if (!(lambda > 0)) return 1.0;
  double sum = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double ks_pvalue(double d, double n) {
  const double rn = std::sqrt(n);
  return kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d);
}

KsResult ks_one_sample(const BidSample& sample, const std::function<double(double)>& F) {
  if (sample.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  const auto& x = sample.times();
  const double n = double(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size();) {
    // a run of ties moves the ecdf once, from i/n to end/n
    std::size_t end = i + 1;
    while (end < x.size() && x[end] == x[i]) ++end;
    const double f = F(x[i]);
    d = std::max({d, double(end) / n - f, f - double(i) / n});
    i = end;
  }
  return {d, ks_pvalue(d, n), n};
}

KsResult ks_one_sample(const BidSample& sample, const Params& p) {
  if (sample.horizon() != p.horizon())
    throw std::invalid_argument("ks_one_sample: sample and model horizons differ");
  return ks_one_sample(sample, [&p](double t) { return cdf(p, t); });
}

KsResult ks_two_sample(const BidSample& a, const BidSample& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  const auto& x = a.times();
  const auto& y = b.times();
  const double na = double(x.size()), nb = double(y.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  return {d, ks_pvalue(d, ne), ne};
}

QqData qq_points(const BidSample& sample, const Params& reference) {
  if (sample.empty()) throw std::invalid_argument("qq_points: empty sample");
  const auto& x = sample.times();
  const double n = double(x.size());
  QqData q;
  q.pairs.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    q.pairs.emplace_back(x[i], inverse_cdf(reference, (double(i) + 0.5) / n));
  return q;
}

namespace {

// Quantile i of m, at probability (i + 0.5)/m; order statistic k (0-based)
// of x sits at (k + 0.5)/n.
double interpolated_quantile(const std::vector<double>& x, std::size_t i, std::size_t m) {
  const double h = (double(i) + 0.5) * double(x.size()) / double(m) - 0.5;
  if (h <= 0) return x.front();
  const auto k = std::size_t(std::floor(h));
  if (k + 1 >= x.size()) return x.back();
  const double frac = h - double(k);
  return frac == 0 ? x[k] : x[k] + frac * (x[k + 1] - x[k]);
}

}  // namespace

QqData qq_points(const BidSample& sample, const BidSample& reference) {
  if (sample.empty() || reference.empty()) throw std::invalid_argument("qq_points: empty sample");
  const std::vector<double> x(sample.times().begin(), sample.times().end());
  const std::vector<double> y(reference.times().begin(), reference.times().end());
  const std::size_t m = std::min(x.size(), y.size());
  QqData q;
  q.pairs.reserve(m);
  for (std::size_t i = 0; i < m; ++i)
    q.pairs.emplace_back(interpolated_quantile(x, i, m), interpolated_quantile(y, i, m));
  return q;
}

double WindowEcdf::operator()(double u) const {
  const auto& x = rescaled.times();
  return double(std::upper_bound(x.begin(), x.end(), u) - x.begin()) / double(x.size());
}

WindowEcdf reverse_time_ecdf(const BidSample& sample, double w) {
  const double T = sample.horizon();
  if (!(w > 0 && w <= T)) throw std::domain_error("reverse_time_ecdf: need 0 < w <= T");
  const double start = T - w;
  std::vector<double> u;
  for (double x : sample.times()) {
    if (w < T ? x > start : x >= 0) {
      const double v = (x - start) / w;
      u.push_back(std::min(v, std::nextafter(1.0, 0.0)));
    }
  }
  if (u.empty()) throw std::invalid_argument("reverse_time_ecdf: no events in the window");
  return {w, BidSample(std::move(u), 1.0)};
}

double self_similarity_ratio(double alpha, double theta, double t, double T) {
  if (!(t > 0 && t <= T)) throw std::domain_error("self_similarity_ratio: need 0 < t <= T");
  if (!(theta >= 0 && theta <= 1)) throw std::domain_error("self_similarity_ratio: need theta in [0, 1]");
  const Params p = as_barista(OneStage{alpha, 1.0, T});
  return survival(p, T - t * theta) / survival(p, T - t);
}

}  // namespace barista
