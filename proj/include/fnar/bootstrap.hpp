#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fnar/fnar.hpp"
#include "fnar/netfactors.hpp"

namespace fnar {

struct BootstrapOptions {
  int iterations = 1000;
  std::uint64_t seed = 0;
  /// Two-sided percentile interval level.
  double level = 0.95;
  /// Options forwarded to every re-estimation.
  FitOptions fit_options;
};

/// Coefficient draws from full re-estimations on resampled panels, plus the
/// aggregates derived from them. Rows of `draws` keep iteration order;
/// failed iterations are excluded and counted.
struct BootstrapResult {
  int iterations = 0;
  int failures = 0;
  std::uint64_t seed = 0;
  double level = 0.95;
  Matrix draws;   // successful iterations x (r + 2N)
  Vector means;   // column means of draws
  Vector lower;   // percentile order statistics, per coefficient
  Vector upper;
  std::vector<std::string> names;
};

/// Order-statistic quantile of a draw column: the ceil(q * n)-th smallest
/// value, clamped to the available range. No interpolation.
double draw_quantile(Vector draws, double q);

/// Failure budget: more than 1% of iterations failing to re-estimate is a
/// hard error rather than a quietly thinner sample.
void check_bootstrap_failures(int failures, int iterations);

/// Residual bootstrap of the coefficient distribution. Each iteration
/// rebuilds the weight panel from the fitted common component plus residual
/// tensors redrawn across periods with replacement (slices stay intact, so
/// cross-sectional dependence survives), re-estimates the factors, aligns
/// their signs with the original loadings, simulates the endogenous panel
/// from the fitted coefficients with Gaussian innovations at the fitted
/// covariance starting from the actual first observation, and re-estimates
/// the model. Deterministic under the seed; iterations use independent
/// streams. Node-specific fits are not supported.
BootstrapResult run_bootstrap(const WeightPanel& panel, const PanelSeries& y,
                              const FactorModel& model, const FnarFit& fit,
                              const BootstrapOptions& options = {});

}  // namespace fnar
