#pragma once

#include <string>
#include <vector>

#include "fnar/netfactors.hpp"

namespace fnar {

/// Endogenous panel on the same calendar as the factor model it is fit
/// against: one row per period, one column per node.
struct PanelSeries {
  std::vector<std::string> periods;
  std::vector<std::string> nodes;
  Matrix values;  // T x N

  Index n_periods() const { return values.rows(); }
  Index n_nodes() const { return values.cols(); }
};

enum class Estimator { ols, sur };

struct FitOptions {
  /// Feasible-GLS passes for the SUR estimator: 1 is one-step (weighting
  /// matrix from OLS residuals), larger values iterate the weighting.
  int sur_iterations = 1;
  /// Residual covariance divisor T* = T_reg - r/N - 2 (possibly fractional)
  /// when true; the plain regression sample size T_reg when false.
  bool paper_dof = true;
  /// Ridge added to a near-singular weighting matrix, relative to tr/N.
  double ridge_rel = 1e-8;
  /// Conditioning limit on the weighting matrix after the ridge.
  double max_condition = 1e12;
};

/// Fitted network autoregression. The pooled form has one beta per factor;
/// the heterogeneous form has one beta per factor and node. rho and alpha
/// are always per node.
struct FnarFit {
  Estimator estimator = Estimator::ols;
  bool heterogeneous = false;
  int r = 0;
  Vector beta;        // r (pooled form; empty when heterogeneous)
  Matrix beta_het;    // N x r (heterogeneous form; empty when pooled)
  Vector rho;         // N
  Vector alpha;       // N
  Vector beta_se;
  Matrix beta_het_se;
  Vector rho_se;
  Vector alpha_se;
  Matrix sigma_nu;    // N x N innovation covariance of the final residuals
  Matrix residuals;   // (T-1) x N, row s is the innovation at period s+1
  double dof_divisor = 0.0;  // divisor used in sigma_nu
  std::vector<std::string> nodes;

  /// Pooled coefficient vector (beta, rho, alpha), length r + 2N.
  Vector theta() const;
};

/// Names matching the pooled theta() layout: beta[1..r] (1-based factor
/// index), then rho[node], then alpha[node].
std::vector<std::string> coefficient_names(int r, const std::vector<std::string>& nodes);

/// Regressor block of one period for the pooled model: the k-th column is
/// F_k y, then diag(y), then the identity, giving N x (r + 2N).
Matrix build_design(const Vector& y_lag, const Tensor3& factors_lag);

/// Pooled least squares via the accumulated normal equations.
FnarFit fit_ols(const PanelSeries& y, const FactorModel& model,
                const FitOptions& options = {});

/// Pooled generalized least squares with a caller-supplied innovation
/// covariance. Near-singular weighting gets a relative ridge; conditioning
/// beyond options.max_condition is an error.
FnarFit fit_gls(const PanelSeries& y, const FactorModel& model, const Matrix& sigma,
                const FitOptions& options = {});

/// Feasible GLS: weighting from OLS residual covariance, then
/// options.sur_iterations GLS passes with re-estimated weighting.
FnarFit fit_sur(const PanelSeries& y, const FactorModel& model,
                const FitOptions& options = {});

/// Node-specific factor coefficients (beta_{k,i}), estimated per equation
/// for OLS or jointly for SUR.
FnarFit fit_heterogeneous(const PanelSeries& y, const FactorModel& model,
                          Estimator estimator, const FitOptions& options = {});

/// Map pooled factor coefficients back to layer space: b = U diag(mu)^{-1}
/// beta, which satisfies b' U = beta' exactly under the loading
/// normalization U'U = diag(mu).
Vector rescale_to_layers(const FnarFit& fit, const FactorModel& model);

/// One-step-ahead conditional mean given the last observation and the
/// factor tensor dated with it.
Vector forecast_one_step(const FnarFit& fit, const Vector& y_last,
                         const Tensor3& factors_last);

}  // namespace fnar
