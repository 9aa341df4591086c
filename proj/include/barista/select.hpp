#ifndef BARISTA_SELECT_HPP
#define BARISTA_SELECT_HPP

#include <optional>
#include <vector>

#include "barista/core.hpp"
#include "barista/estimate.hpp"
#include "barista/optimize.hpp"
#include "barista/sample.hpp"

namespace barista {

struct LrStatistic {
  double value = 0;
  /// The raw statistic was below -1e-6 before clamping.
  bool flagged = false;
};

/// -2 (ll_small - ll_big), clamped at zero.
LrStatistic lr_statistic(double ll_small, double ll_big);

/// Upper tail of the chi-square law with 2 degrees of freedom, exp(-x/2).
double chi2_sf_2df(double x);

struct LrTest {
  double statistic = 0;
  double p_value = 1;
  bool flagged = false;
  /// The larger model's fit was redone by a local grid search because it
  /// came out less likely than the smaller one.
  bool refined = false;
};

struct SelectionConfig {
  GaConfig two_stage;
  GaConfig three_stage;
  double alpha_level = 0.05;

  /// GA defaults with default_bounds for each family.
  static SelectionConfig defaults(double horizon, Seed seed);
};

struct SelectionResult {
  FamilyTag chosen = FamilyTag::OneStage;
  /// Fits in order of complexity; only the families that were reached.
  std::vector<FitResult> fits;
  LrTest lr_12;
  std::optional<LrTest> lr_23;
  double alpha_level = 0.05;
};

/**
 * Forward selection: fit one stage (closed form) and two stages (GA), test;
 * if the two-stage model is significantly better, fit three stages and test
 * again. The chosen family is the last one accepted.
 */
SelectionResult select_model(const BidSample& sample, const SelectionConfig& cfg);

}  // namespace barista

#endif  // BARISTA_SELECT_HPP
