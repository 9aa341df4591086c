#ifndef BARISTA_ESTIMATE_HPP
#define BARISTA_ESTIMATE_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "barista/core.hpp"
#include "barista/random.hpp"
#include "barista/sample.hpp"

namespace barista {

/// Failure of an estimation step; stage() names the step ("stage1",
/// "changepoints", "bootstrap", ...).
class EstimationError : public std::runtime_error {
 public:
  EstimationError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class Method { QuickCrude, Grid, GA, ClosedForm };

const char* method_name(Method m);

/// (alpha1, alpha2, alpha3, d1, d2, c), the order used for standard errors.
using ParamArray = Eigen::Matrix<double, 6, 1>;

ParamArray to_array(const Params& p);

struct FitResult {
  FamilyTag family = FamilyTag::ThreeStage;
  Params params{1, 1, 1, 0, 0, 1, 1};
  double loglik = 0;
  Method method = Method::QuickCrude;
  std::optional<ParamArray> stderrs;
  double c_hat = 0;
  /// Best-so-far fitness per generation (GA only), starting with the
  /// initial population.
  std::vector<double> fitness_history;
};

using CdfFn = std::function<double(double)>;

/// Fraction of events <= t. Throws std::invalid_argument on an empty sample.
double ecdf(const BidSample& sample, double t);

/**
 * Exponent of the stage containing the reverse-time offsets s < t from a
 * cdf F, comparing its increments over [T - t, T - sqrt(st)] and
 * [T - sqrt(st), T - s]:
 *   alpha = 2 ln(dF_outer / dF_inner) / ln(t / s).
 * Throws EstimationError if either increment is zero or they differ in sign.
 */
double qc_alpha(const CdfFn& F, double horizon, double t, double s);

/// A span of forward time [lo, hi].
struct Window {
  double lo = 0, hi = 0;
};

/// qc_alpha on the forward window [lo, hi], i.e. t = T - lo, s = T - hi.
double qc_alpha(const CdfFn& F, double horizon, Window w);

/// ln(R(t3) / R(t3p)) / ln((T - t3) / (T - t3p)) with R = 1 - F.
double qc_alpha3_survival(const CdfFn& F, double horizon, double t3, double t3p);

/// Times assumed to lie in stage 1 (t1), stage 2 (t2p < t2) and stage 3 (t3).
struct SafePoints {
  double t1 = 0, t2p = 0, t2 = 0, t3 = 0;
};

struct Changepoints {
  double d1 = 0, d2 = 0;
};

/**
 * Changepoints recovered from cdf increments given the three exponents.
 * The stage-1 mass at t1 relative to the stage-2 increment over [t2p, t2]
 * pins (1 - d1/T)^(a2 - a1); the survival at t3 relative to the same
 * increment pins (d2/T)^(a2 - a3).
 */
Changepoints qc_changepoints(const CdfFn& F, const Eigen::Vector3d& alphas,
                             const SafePoints& safe, double horizon);

struct QcConfig {
  Window stage1;          // inside [0, d1]
  Window stage2;          // inside [d1, T - d2]
  Window stage3;          // two points in [T - d2, T)
  SafePoints safe;
  /// Exponents for the changepoint step; the estimated ones if unset.
  std::optional<Eigen::Vector3d> changepoint_alphas;

  /// Throws std::invalid_argument unless every window is ordered and in [0, T].
  void validate(double horizon) const;
};

/// Full quick-and-crude pipeline on the empirical cdf; method QuickCrude.
FitResult qc_fit(const BidSample& sample, const QcConfig& cfg);

// Conditional log-likelihood ------------------------------------------------

/// Counts and sums of ln(1 - x/T) by stage for given changepoints.
struct StageStats {
  double n = 0, n1 = 0, n3 = 0;
  double S1 = 0, S2 = 0, S3 = 0;
};

/**
 * Log-likelihood of the event times given their count, with prefix sums so
 * every evaluation after construction costs O(log n). Stage membership
 * follows the density: [0, d1), [d1, T - d2), [T - d2, T).
 */
class LoglikEvaluator {
 public:
  explicit LoglikEvaluator(const BidSample& sample);

  double horizon() const { return horizon_; }
  std::size_t size() const { return times_.size(); }

  StageStats stats(double d1, double d2) const;

  double operator()(const Params& p) const;
  /// Gradient in (alpha1, alpha2, alpha3) at fixed changepoints.
  Eigen::Vector3d gradient(const Params& p) const;
  Eigen::Matrix3d hessian(const Params& p) const;

 private:
  void check(const Params& p) const;

  std::vector<double> times_;
  std::vector<double> prefix_;  // prefix_[k] = sum of ln(1 - x_i/T), i < k
  double horizon_;
};

double loglik(const BidSample& sample, const Params& p);
Eigen::Vector3d loglik_gradient(const BidSample& sample, const Params& p);
Eigen::Matrix3d loglik_hessian(const BidSample& sample, const Params& p);

/// dC/d(alpha1, alpha2, alpha3) of the normalization constant, closed form.
Eigen::Vector3d normalization_gradient(const Params& p);

/**
 * Damped Newton ascent of the log-likelihood in the exponents the family
 * leaves free, changepoints held fixed. Tied exponents (a1 = a2 in the two
 * stage family, all three in the one stage family) move together. Falls
 * back to gradient steps where the Hessian is not negative definite.
 */
Params refine_alphas(const LoglikEvaluator& ll, const Params& start,
                     FamilyTag family, int max_iterations = 100);

struct OneStageMle {
  double alpha = 0, c = 0;
};

/// alpha = -n / sum ln(1 - x/T), c = n alpha / T.
OneStageMle mle_nhpp1(const BidSample& sample);

/// n / h(theta), the scale estimate given the shape; c of `shape` is ignored.
double estimate_c(const Params& shape, double n);

using Fitter = std::function<FitResult(const BidSample&)>;

/**
 * Per-parameter standard deviations over B refits on resampled event times
 * (with replacement). Replicate r uses derive(seed, r). Throws
 * EstimationError if more than 20% of refits fail.
 */
ParamArray bootstrap_se(const BidSample& sample, const Fitter& fitter,
                        std::size_t B, Seed seed);

}  // namespace barista

#endif  // BARISTA_ESTIMATE_HPP
