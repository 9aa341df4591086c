#include "barista/simulate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace barista {

namespace {

// Keeps a draw strictly below T; a uniform of exactly 1 - 2^-53 can land on T
// after rounding.
double below_horizon(double x, double horizon) {
  return x < horizon ? x : std::nextafter(horizon, 0.0);
}

}  // namespace

BidSample sample_fixed_n(const Params& p, std::size_t n, Seed seed) {
  Rng rng(seed);
  std::vector<double> times(n);
  for (auto& t : times) t = below_horizon(inverse_cdf(p, rng.uniform()), p.horizon());
  return BidSample(std::move(times), p.horizon());
}

BidSample sample_poisson_count(const Params& p, Seed seed) {
  Rng rng(seed);
  const auto n = rng.poisson(mean_count(p, p.horizon()));
  return sample_fixed_n(p, static_cast<std::size_t>(n), derive(seed, 1));
}

double sample_geometric_uniform(double a, double b, double alpha, Rng& rng) {
  if (!(a < b)) throw std::domain_error("sample_geometric_uniform: need a < b");
  if (!(alpha > 0 && alpha <= 1))
    throw std::domain_error("sample_geometric_uniform: need 0 < alpha <= 1");
  double x = rng.uniform(a, b);
  for (std::uint64_t attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    if (rng.bernoulli(alpha)) return x;
    x = rng.uniform(x, b);
  }
  throw std::runtime_error("sample_geometric_uniform: attempt cap reached");
}

double sample_geometric_uniform(double a, double b, double alpha, Seed seed) {
  Rng rng(seed);
  return sample_geometric_uniform(a, b, alpha, rng);
}

BidderStrategy::BidderStrategy(double lambda, double alpha2, double alpha3,
                               double d, double horizon)
    : lambda_(lambda), alpha2_(alpha2), alpha3_(alpha3), d_(d), horizon_(horizon) {
  if (!(horizon > 0)) throw std::invalid_argument("BidderStrategy: horizon must be positive");
  if (!(lambda > 0)) throw std::invalid_argument("BidderStrategy: lambda must be positive");
  if (!(alpha2 > 0 && alpha2 <= alpha3 && alpha3 <= 1))
    throw std::invalid_argument("BidderStrategy: need 0 < alpha2 <= alpha3 <= 1");
  if (!(d >= 0 && d <= horizon))
    throw std::invalid_argument("BidderStrategy: need 0 <= d <= T");
}

double BidderStrategy::success_probability() const {
  return 1 - std::pow(d_ / horizon_, alpha2_) * (1 - alpha2_ / alpha3_);
}

Params BidderStrategy::implied_params() const {
  // intensity lambda T pi f(t) with f the bid-time density of a successful
  // bidder; on [0, T - d) that is lambda alpha2 (1 - t/T)^(alpha2 - 1).
  const double c = lambda_ * alpha2_;
  if (d_ == 0) return as_barista(OneStage{alpha2_, c, horizon_});
  // every bidder lands in the final window at once
  if (d_ == horizon_) return as_barista(OneStage{alpha3_, c, horizon_});
  return as_barista(TwoStage{alpha2_, alpha3_, d_, c, horizon_});
}

BidSample simulate_bidder_strategy(const BidderStrategy& s, Seed seed) {
  Rng rng(seed);
  const double T = s.horizon();
  const double last_start = T - s.d();
  const auto bidders = rng.poisson(s.lambda() * T);
  std::vector<double> bids;
  bids.reserve(static_cast<std::size_t>(s.expected_bids() * 1.2) + 16);
  for (std::uint64_t i = 0; i < bidders; ++i) {
    double x = rng.uniform(0.0, T);  // arrival, the first potential bid time
    bool in_final = false;
    bool done = false;
    for (std::uint64_t attempt = 1; attempt <= kMaxAttempts; ++attempt) {
      if (!in_final && s.d() > 0 && x > last_start) {
        in_final = true;
        if (!rng.bernoulli(s.alpha2() / s.alpha3())) {
          done = true;  // departs without bidding
          break;
        }
      }
      if (rng.bernoulli(in_final ? s.alpha3() : s.alpha2())) {
        bids.push_back(below_horizon(x, T));
        done = true;
        break;
      }
      x = rng.uniform(x, T);
    }
    if (!done) throw std::runtime_error("simulate_bidder_strategy: attempt cap reached");
  }
  return BidSample(std::move(bids), T);
}

BidSample simulate_uniform_rebid(double lambda, double horizon, Seed seed) {
  if (!(lambda > 0 && horizon > 0))
    throw std::invalid_argument("simulate_uniform_rebid: lambda and horizon must be positive");
  Rng rng(seed);
  const auto bidders = rng.poisson(lambda * horizon);
  std::vector<double> bids(bidders);
  for (auto& b : bids) {
    const double arrival = rng.uniform(0.0, horizon);
    b = below_horizon(rng.uniform(arrival, horizon), horizon);
  }
  return BidSample(std::move(bids), horizon);
}

double uniform_rebid_intensity(double lambda, double horizon, double t) {
  if (!(t >= 0 && t < horizon)) {
    std::ostringstream os;
    os << "uniform_rebid_intensity: time " << t << " outside [0, " << horizon << ")";
    throw std::domain_error(os.str());
  }
  return -lambda * std::log1p(-t / horizon);
}

}  // namespace barista
