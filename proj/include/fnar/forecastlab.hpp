#pragma once

#include <string>
#include <vector>

#include "fnar/fnar.hpp"
#include "fnar/netfactors.hpp"

namespace fnar {

/// Recursive one-step evaluation windows: the first window trains on
/// periods [0, first_train_end] and forecasts first_train_end + 1, then the
/// training end advances one period at a time through last_train_end.
struct WindowPlan {
  Index first_train_end = 0;
  Index last_train_end = 0;
  Index step = 1;     // only one-period steps are supported
  Index horizon = 1;  // only one-step-ahead forecasts are supported
};

enum class ForecastModel { fnar, ar1, pc_ar, lasso_var, minnesota_bvar };

std::string forecast_model_name(ForecastModel model);

/// Univariate regression of y_t on (1, y_{t-1}). A constant series has no
/// identifiable slope; the fit falls back to the sample mean and flags it.
struct Ar1Fit {
  double rho = 0.0;
  double alpha = 0.0;
  double resid_sd = 0.0;
  bool fallback_mean = false;
};

Ar1Fit fit_ar1(const Vector& series);
double forecast_ar1(const Ar1Fit& fit, double last);

/// Each node regressed on its own lag and the lagged leading principal
/// components of the training block.
struct PcArFit {
  Vector intercept;       // N
  Vector own_lag;         // N
  Matrix pc_coef;         // N x k
  Matrix pc_weights;      // k x N, component rows
  Vector pc_center;       // N, training means removed before projection
  Vector pc_eigenvalues;  // all N covariance eigenvalues, descending
};

PcArFit fit_pc_ar(const Matrix& training, int n_components = 4);
Vector forecast_pc_ar(const PcArFit& fit, const Vector& y_last);

struct LassoOptions {
  int cv_folds = 10;
  int grid_size = 50;
  double grid_floor = 1e-3;  // smallest grid point relative to lambda_max
  double tol = 1e-7;         // coordinate-change tolerance, standardized scale
  int max_iter = 100000;
};

/// L1-penalized least squares with an unpenalized intercept, solved by
/// coordinate descent on standardized predictors:
///   min (1/2T) ||y - a - X b||^2 + lambda ||b||_1.
/// Returns (intercept, slopes). Constant predictor columns get slope zero.
struct LassoCoefficients {
  double intercept = 0.0;
  Vector slopes;
};

LassoCoefficients lasso_regression(const Matrix& x, const Vector& y, double lambda,
                                   double tol = 1e-7, int max_iter = 100000);

/// Smallest penalty that zeroes every slope; the top of the search grid.
double lasso_lambda_max(const Matrix& x, const Vector& y);

/// First-order VAR with one L1-penalized regression per equation. The
/// penalty is chosen per equation by K-fold cross validation on contiguous
/// time blocks over a log-spaced grid, ties resolved toward the stronger
/// penalty.
struct LassoVarFit {
  Matrix coef;       // N x N, row i holds equation i's slopes on y_{t-1}
  Vector intercept;  // N
  Vector lambda;     // chosen penalty per equation
};

LassoVarFit fit_lasso_var(const Matrix& training, const LassoOptions& options = {});
Vector forecast_lasso_var(const LassoVarFit& fit, const Vector& y_last);

struct BvarOptions {
  double tightness = 0.1;
  double cross_weight = 1.0;
  /// Prior mean of each equation's own-lag coefficient.
  double prior_own_mean = 0.0;
};

/// First-order VAR posterior means under an independent-Gaussian shrinkage
/// prior: own-lag variance tightness^2, cross terms scaled by
/// (cross_weight * sigma_i / sigma_j)^2, near-diffuse intercepts, with the
/// residual scales sigma taken from univariate autoregressions.
struct BvarFit {
  Matrix coef;       // N x N
  Vector intercept;  // N
  Vector sigma;      // per-node residual scales used by the prior
};

BvarFit fit_minnesota_bvar(const Matrix& training, const BvarOptions& options = {});
Vector forecast_bvar(const BvarFit& fit, const Vector& y_last);

/// Equal-accuracy test on two forecast-error series under squared loss.
/// The statistic is the mean loss differential (first minus second) over
/// its standard error, so negative values favor the first series; the
/// variance is lag-0 by default, Bartlett-weighted up to hac_lags
/// otherwise. A zero-variance differential has no sampling distribution
/// and is reported as undefined: p = 1 on an exactly zero mean ("equal"),
/// p = 0 otherwise.
struct DmResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool undefined = false;
};

DmResult diebold_mariano(const Vector& errors_a, const Vector& errors_b,
                         int hac_lags = 0);

struct ForecastConfig {
  int pc_components = 4;
  LassoOptions lasso;
  BvarOptions bvar;
  Estimator fnar_estimator = Estimator::sur;
  int dm_hac_lags = 0;
};

/// Everything run_comparison measured. Models appear in a fixed canonical
/// order whatever order was requested; forecast_errors[m] row w holds the
/// window-w errors (actual minus forecast) of model m.
struct ForecastReport {
  std::vector<ForecastModel> models;
  std::vector<std::string> model_names;
  std::vector<std::string> nodes;
  Index first_train_end = 0;
  Index last_train_end = 0;
  Index n_windows = 0;
  std::vector<Matrix> forecast_errors;  // per model: n_windows x N
  Matrix mse;                           // models x N
  Matrix mse_ratio;                     // models x N, relative to ar1 (NaN without ar1)
  /// dm[model][node]: the model's losses minus fnar's, so positive
  /// statistics favor fnar. Undefined entries when fnar is absent or the
  /// window count is below ten.
  std::vector<std::vector<DmResult>> dm;
};

/// Recursive pseudo-out-of-sample comparison. Every window re-fits each
/// requested model on training rows only (periods up to the training end)
/// and forecasts the next period; no fit ever sees its target or anything
/// after it. The factor series is the frozen full-sample extraction, by
/// design. DM entries are undefined when fnar is absent or there are fewer
/// than ten windows.
ForecastReport run_comparison(const PanelSeries& y, const FactorModel& model,
                              const WindowPlan& plan,
                              std::vector<ForecastModel> models,
                              const ForecastConfig& config = {});

/// Same comparison without an FNAR entry (no factor model required).
ForecastReport run_comparison(const PanelSeries& y, const WindowPlan& plan,
                              std::vector<ForecastModel> models,
                              const ForecastConfig& config = {});

}  // namespace fnar
