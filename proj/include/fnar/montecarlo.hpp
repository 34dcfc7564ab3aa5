#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fnar/fnar.hpp"
#include "fnar/netfactors.hpp"

namespace fnar {

/// Recipe for a synthetic panel with a known factor structure and known
/// autoregressive dynamics. Loadings are orthogonal with squared column
/// norms loading_strength[k] * n_layers, so the factors stay pervasive as
/// the layer count grows; factor tensors are sample-orthonormalized, which
/// puts the truth in exactly the frame the estimator reports (up to signs).
struct SyntheticSpec {
  Index n_nodes = 10;
  Index n_layers = 20;
  int r = 2;
  Index n_periods = 200;

  /// Per-factor strength, strictly decreasing, positive. Empty: evenly
  /// spaced from 2 down to 1.
  Vector loading_strength;
  /// AR(1) coefficient of the raw factor process across periods, |.| < 1.
  double factor_ar = 0.0;
  /// Entry scale of the idiosyncratic weight noise.
  double noise_scale = 0.15;
  /// AR(1) correlation of the noise across the layer index, |.| < 1.
  double noise_layer_ar = 0.0;

  Vector beta;   // empty: 0.2 for every factor
  Vector rho;    // empty: 0.3 for every node
  Vector alpha;  // empty: zeros
  /// Innovation scale; per-node scales multiply it, equicorrelation in
  /// [0, 1) correlates innovations across nodes.
  double innovation_sd = 0.2;
  Vector innovation_scales;  // empty: ones
  double innovation_cross = 0.0;

  std::uint64_t seed = 1;
};

struct SyntheticData {
  WeightPanel panel;    // weights only; synthetic panels carry no flow records
  PanelSeries series;   // simulated endogenous panel, aligned with the weights
  FactorModel truth;    // generating loadings, eigenvalues, and factor tensors
  Vector beta, rho, alpha;
  Matrix sigma_nu;      // innovation covariance used for the simulation
};

/// Draw one synthetic data set. Deterministic under the seed; independent
/// sub-streams drive loadings, factors, weight noise, and innovations, so
/// changing the network size leaves the simulated series untouched when
/// beta is zero. Rejects dynamics whose mean transition has spectral
/// radius >= 1.
SyntheticData generate(const SyntheticSpec& spec);

/// Symmetric square root of a covariance matrix: Cholesky when positive
/// definite, otherwise an eigenvalue square root with negative eigenvalues
/// clamped to zero.
Matrix covariance_sqrt(const Matrix& sigma);

/// Simulate the autoregression forward from y0 over the factor path:
/// row 0 is y0, row t draws an innovation sigma_sqrt * z and applies the
/// recursion with factors[t-1]. Throws if the series diverges.
Matrix simulate_values(const std::vector<Tensor3>& factors, const Vector& beta,
                       const Vector& rho, const Vector& alpha, const Matrix& sigma_sqrt,
                       const Vector& y0, std::mt19937_64& rng);

/// Sign-aligned loading distance (1/sqrt(m)) * ||estimated - truth * J||_F.
double loading_alignment_error(const FactorModel& estimated, const FactorModel& truth);

/// Sign-aligned factor distance sqrt((1/T) sum_t ||Fhat_t - J o F_t||_F^2).
double factor_alignment_error(const FactorModel& estimated, const FactorModel& truth);

/// Grid driver shared by the convergence experiments. Cells either cross
/// layer_sizes with period_counts or zip them pairwise; each cell re-draws
/// `replications` independent data sets from `base` with the cell's sizes.
struct RateExperimentConfig {
  SyntheticSpec base;
  std::vector<Index> layer_sizes;    // strictly increasing
  std::vector<Index> period_counts;  // strictly increasing
  bool cross_product = true;         // false: zip the two lists pairwise
  int replications = 50;
};

struct RateCell {
  Index n_layers = 0;
  Index n_periods = 0;
  double loading_error = 0.0;  // median over replications
  double factor_error = 0.0;
};

struct RateTable {
  std::vector<RateCell> cells;
  /// Log-log slopes of the median errors: vs periods at the largest layer
  /// count, vs layers at the largest period count. NaN when undefined.
  double loading_slope_vs_periods = 0.0;
  double factor_slope_vs_periods = 0.0;
  double loading_slope_vs_layers = 0.0;
  double factor_slope_vs_layers = 0.0;
};

/// Median sign-aligned loading and factor errors over the grid, with
/// log-log slope summaries. Deterministic under base.seed.
RateTable loading_rate_experiment(const RateExperimentConfig& config);

struct CoefficientRateCell {
  Index n_layers = 0;
  Index n_periods = 0;
  /// Median distance between the estimated coefficients (factors estimated
  /// from the noisy panel) and the sign-aligned truth.
  double theta_error = 0.0;
  /// Same fit given the true factors, against the plain truth.
  double oracle_error = 0.0;
  /// Median distance between the two fits, after sign alignment.
  double estimation_gap = 0.0;
};

struct CoefficientRateTable {
  std::vector<CoefficientRateCell> cells;
};

/// Convergence of the autoregression coefficients when the factors must be
/// estimated: the target flips the network coefficients by the realized
/// loading signs, everything else is compared directly.
CoefficientRateTable coefficient_rate_experiment(const RateExperimentConfig& config);

/// Ordinary least-squares slope of log(y) on log(x). NaN when fewer than
/// two points or any value is non-positive.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace fnar
