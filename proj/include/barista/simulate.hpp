#ifndef BARISTA_SIMULATE_HPP
#define BARISTA_SIMULATE_HPP

#include <cstddef>
#include <cstdint>

#include "barista/core.hpp"
#include "barista/random.hpp"
#include "barista/sample.hpp"

namespace barista {

/// n event times by inversion of the cdf, sorted.
BidSample sample_fixed_n(const Params& p, std::size_t n, Seed seed);

/// N ~ Poisson(m(T)) event times: a realization of the process on [0, T].
BidSample sample_poisson_count(const Params& p, Seed seed);

/// Attempt cap for the geometric stopping index.
inline constexpr std::uint64_t kMaxAttempts = 1'000'000;

/**
 * X_1 ~ U(a, b), X_{k+1} ~ U(X_k, b), stopped at an independent
 * geometric(alpha) index M; returns X_M. P(X_M > s) = (1 - (s-a)/(b-a))^alpha.
 * The stopping coin is flipped once per attempt. Throws std::runtime_error
 * after kMaxAttempts.
 */
double sample_geometric_uniform(double a, double b, double alpha, Rng& rng);
double sample_geometric_uniform(double a, double b, double alpha, Seed seed);

/**
 * Poisson(lambda) bidder arrivals on [0, T], each walking the
 * geometric-uniform rebid scheme: bid with probability alpha2 at each
 * potential time up to T - d. The first potential time after T - d is
 * reached at most once per bidder; there the bidder leaves with probability
 * 1 - alpha2/alpha3, otherwise keeps walking with bid probability alpha3.
 */
class BidderStrategy {
 public:
  BidderStrategy(double lambda, double alpha2, double alpha3, double d,
                 double horizon);

  /// The single-stage variant (d = 0, alpha3 = alpha2).
  static BidderStrategy single_stage(double lambda, double alpha, double horizon) {
    return BidderStrategy(lambda, alpha, alpha, 0.0, horizon);
  }

  double lambda() const { return lambda_; }
  double alpha2() const { return alpha2_; }
  double alpha3() const { return alpha3_; }
  double d() const { return d_; }
  double horizon() const { return horizon_; }

  /// Probability that a bidder ends up placing a bid,
  /// 1 - (d/T)^alpha2 (1 - alpha2/alpha3).
  double success_probability() const;

  /// Expected number of bids, lambda T pi.
  double expected_bids() const { return lambda_ * horizon_ * success_probability(); }

  /// The process the bids form: one stage if d = 0 or d = T, else two stages.
  Params implied_params() const;

 private:
  double lambda_, alpha2_, alpha3_, d_, horizon_;
};

BidSample simulate_bidder_strategy(const BidderStrategy& strategy, Seed seed);

/**
 * Poisson(lambda) bidder arrivals on [0, T), each placing one bid uniformly
 * on the remainder of the auction.
 */
BidSample simulate_uniform_rebid(double lambda, double horizon, Seed seed);

/// lambda ln(T / (T - t)), the bid intensity of simulate_uniform_rebid.
double uniform_rebid_intensity(double lambda, double horizon, double t);

}  // namespace barista

#endif  // BARISTA_SIMULATE_HPP
