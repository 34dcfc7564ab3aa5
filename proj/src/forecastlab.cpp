#include "fnar/forecastlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fnar {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double soft_threshold(double u, double lambda) {
  if (u > lambda) return u - lambda;
  if (u < -lambda) return u + lambda;
  return 0.0;
}

/// Centered, unit-sample-sd predictor columns. Constant columns get scale
/// zero and are excluded from the fit.
struct Standardized {
  Matrix z;
  Vector center;
  Vector scale;
  double y_center = 0.0;
  Vector yc;
};

Standardized standardize(const Matrix& x, const Vector& y) {
  const Index t = x.rows();
  Standardized s;
  s.center = x.colwise().mean();
  s.z = x.rowwise() - s.center.transpose();
  s.scale.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double sd = std::sqrt(s.z.col(j).squaredNorm() / static_cast<double>(t));
    if (sd <= 1e-12 * (1.0 + std::abs(s.center(j)))) {
      s.scale(j) = 0.0;
      s.z.col(j).setZero();
    } else {
      s.scale(j) = sd;
      s.z.col(j) /= sd;
    }
  }
  s.y_center = y.mean();
  s.yc = y.array() - s.y_center;
  return s;
}

/// Coordinate descent on standardized data; b is on the standardized scale.
Vector descend(const Standardized& s, double lambda, double tol, int max_iter) {
  const Index t = s.z.rows();
  const Index p = s.z.cols();
  Vector b = Vector::Zero(p);
  Vector resid = s.yc;
  for (int iter = 0; iter < max_iter; ++iter) {
    double worst = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (s.scale(j) == 0.0) continue;
      const double u = b(j) + s.z.col(j).dot(resid) / static_cast<double>(t);
      const double next = soft_threshold(u, lambda);
      if (next != b(j)) {
        resid += s.z.col(j) * (b(j) - next);
        worst = std::max(worst, std::abs(next - b(j)));
        b(j) = next;
      }
    }
    if (worst <= tol) return b;
  }
  throw NumericError("lasso_regression: coordinate descent did not converge in " +
                     std::to_string(max_iter) + " sweeps");
}

LassoCoefficients unstandardize(const Standardized& s, const Vector& b) {
  LassoCoefficients out;
  out.slopes.resize(b.size());
  for (Index j = 0; j < b.size(); ++j)
    out.slopes(j) = s.scale(j) == 0.0 ? 0.0 : b(j) / s.scale(j);
  out.intercept = s.y_center - out.slopes.dot(s.center);
  return out;
}

void check_lasso_options(const LassoOptions& o) {
  if (o.cv_folds < 2) throw InvalidInput("lasso: cv_folds must be at least 2");
  if (o.grid_size < 2) throw InvalidInput("lasso: grid_size must be at least 2");
  if (!(o.grid_floor > 0.0) || !(o.grid_floor < 1.0))
    throw InvalidInput("lasso: grid_floor must lie in (0, 1)");
  if (!(o.tol > 0.0)) throw InvalidInput("lasso: tolerance must be positive");
  if (o.max_iter < 1) throw InvalidInput("lasso: max_iter must be at least 1");
}

}  // namespace

std::string forecast_model_name(ForecastModel model) {
  switch (model) {
    case ForecastModel::fnar: return "fnar";
    case ForecastModel::ar1: return "ar1";
    case ForecastModel::pc_ar: return "pc_ar";
    case ForecastModel::lasso_var: return "lasso_var";
    case ForecastModel::minnesota_bvar: return "minnesota_bvar";
  }
  throw InvalidInput("forecast_model_name: unknown model");
}

Ar1Fit fit_ar1(const Vector& series) {
  const Index t = series.size();
  if (t < 3)
    throw InvalidInput("fit_ar1: need at least 3 observations, got " + std::to_string(t));
  const Index h = t - 1;
  const auto x = series.head(h);
  const auto y = series.tail(h);
  const double xbar = x.mean();
  const double ybar = y.mean();
  const Vector xc = x.array() - xbar;
  const double sxx = xc.squaredNorm();
  const double magnitude = x.cwiseAbs().maxCoeff();

  Ar1Fit fit;
  if (sxx <= 1e-24 * static_cast<double>(h) * (1.0 + magnitude * magnitude)) {
    fit.fallback_mean = true;
    fit.rho = 0.0;
    fit.alpha = series.mean();
    fit.resid_sd =
        h > 1 ? std::sqrt((y.array() - fit.alpha).square().sum() / static_cast<double>(h - 1))
              : 0.0;
    return fit;
  }
  fit.rho = xc.dot(y) / sxx;
  fit.alpha = ybar - fit.rho * xbar;
  const Vector resid = y.array() - fit.alpha - fit.rho * x.array();
  fit.resid_sd = h > 2 ? std::sqrt(resid.squaredNorm() / static_cast<double>(h - 2)) : 0.0;
  return fit;
}

double forecast_ar1(const Ar1Fit& fit, double last) { return fit.alpha + fit.rho * last; }

PcArFit fit_pc_ar(const Matrix& training, int n_components) {
  const Index t = training.rows();
  const Index n = training.cols();
  if (n < 1) throw InvalidInput("fit_pc_ar: empty training block");
  if (n_components < 0) throw InvalidInput("fit_pc_ar: n_components must be nonnegative");
  if (n_components > n)
    throw InvalidInput("fit_pc_ar: n_components exceeds the node count");
  if (t <= n_components + 2)
    throw InvalidInput("fit_pc_ar: training window of " + std::to_string(t) +
                       " periods is too short for " + std::to_string(n_components) +
                       " components");
  const int k = n_components;

  PcArFit fit;
  fit.pc_center = training.colwise().mean();
  const Matrix centered = training.rowwise() - fit.pc_center.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(t);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericError("fit_pc_ar: covariance eigendecomposition failed");
  fit.pc_eigenvalues = eig.eigenvalues().reverse();

  Matrix vectors(n, k);
  for (int j = 0; j < k; ++j) {
    Vector v = eig.eigenvectors().col(n - 1 - j);
    Index top;
    v.cwiseAbs().maxCoeff(&top);
    if (v(top) < 0.0) v = -v;
    vectors.col(j) = v;
  }
  if (k > 0) {
    const double head = fit.pc_eigenvalues(0);
    if (!(head > 0.0) || fit.pc_eigenvalues(k - 1) <= 1e-12 * head)
      throw NumericError("fit_pc_ar: training covariance rank is below the component count");
  }
  fit.pc_weights = vectors.transpose();
  const Matrix scores = centered * vectors;  // t x k

  const Index h = t - 1;
  const Index p = k + 2;
  Matrix design(h, p);
  design.col(0).setOnes();
  if (k > 0) design.rightCols(k) = scores.topRows(h);

  fit.intercept.resize(n);
  fit.own_lag.resize(n);
  fit.pc_coef.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    design.col(1) = training.col(i).head(h);
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < p)
      throw NumericError("fit_pc_ar: rank-deficient regressors for node column " +
                         std::to_string(i));
    const Vector coef = qr.solve(training.col(i).tail(h));
    fit.intercept(i) = coef(0);
    fit.own_lag(i) = coef(1);
    if (k > 0) fit.pc_coef.row(i) = coef.tail(k).transpose();
  }
  return fit;
}

Vector forecast_pc_ar(const PcArFit& fit, const Vector& y_last) {
  if (y_last.size() != fit.pc_center.size())
    throw InvalidInput("forecast_pc_ar: observation length does not match the fit");
  Vector pred = fit.intercept + fit.own_lag.cwiseProduct(y_last);
  if (fit.pc_coef.cols() > 0)
    pred += fit.pc_coef * (fit.pc_weights * (y_last - fit.pc_center));
  return pred;
}

double lasso_lambda_max(const Matrix& x, const Vector& y) {
  if (y.size() != x.rows()) throw InvalidInput("lasso_lambda_max: row count mismatch");
  if (x.rows() < 2) throw InvalidInput("lasso_lambda_max: need at least 2 rows");
  const Standardized s = standardize(x, y);
  double best = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    if (s.scale(j) == 0.0) continue;
    best = std::max(best, std::abs(s.z.col(j).dot(s.yc)) / static_cast<double>(x.rows()));
  }
  return best;
}

LassoCoefficients lasso_regression(const Matrix& x, const Vector& y, double lambda,
                                   double tol, int max_iter) {
  if (y.size() != x.rows()) throw InvalidInput("lasso_regression: row count mismatch");
  if (x.rows() < 2) throw InvalidInput("lasso_regression: need at least 2 rows");
  if (!(lambda >= 0.0)) throw InvalidInput("lasso_regression: penalty must be nonnegative");
  if (!(tol > 0.0)) throw InvalidInput("lasso_regression: tolerance must be positive");
  if (max_iter < 1) throw InvalidInput("lasso_regression: max_iter must be at least 1");
  const Standardized s = standardize(x, y);
  return unstandardize(s, descend(s, lambda, tol, max_iter));
}

LassoVarFit fit_lasso_var(const Matrix& training, const LassoOptions& options) {
  check_lasso_options(options);
  const Index t = training.rows();
  const Index n = training.cols();
  if (n < 1) throw InvalidInput("fit_lasso_var: empty training block");
  if (t < options.cv_folds + 2)
    throw InvalidInput("fit_lasso_var: training window of " + std::to_string(t) +
                       " periods is too short for " + std::to_string(options.cv_folds) +
                       "-fold cross validation");
  const Index h = t - 1;
  const Matrix x = training.topRows(h);
  const Matrix resp = training.bottomRows(h);
  const int folds = options.cv_folds;
  const int grid = options.grid_size;

  LassoVarFit fit;
  fit.coef.resize(n, n);
  fit.intercept.resize(n);
  fit.lambda.resize(n);

  for (Index i = 0; i < n; ++i) {
    const Vector yi = resp.col(i);
    const double lmax = lasso_lambda_max(x, yi);
    Vector lambdas(grid);
    for (int l = 0; l < grid; ++l)
      lambdas(l) =
          lmax * std::pow(options.grid_floor, static_cast<double>(l) / (grid - 1));

    Vector cv_sse = Vector::Zero(grid);
    for (int f = 0; f < folds; ++f) {
      const Index lo = h * f / folds;
      const Index hi = h * (f + 1) / folds;
      const Index held = hi - lo;
      const Index kept = h - held;
      Matrix xtr(kept, n);
      Vector ytr(kept);
      xtr.topRows(lo) = x.topRows(lo);
      ytr.head(lo) = yi.head(lo);
      xtr.bottomRows(h - hi) = x.bottomRows(h - hi);
      ytr.tail(h - hi) = yi.tail(h - hi);
      const Standardized s = standardize(xtr, ytr);
      for (int l = 0; l < grid; ++l) {
        const LassoCoefficients c =
            unstandardize(s, descend(s, lambdas(l), options.tol, options.max_iter));
        const Vector pred =
            (x.middleRows(lo, held) * c.slopes).array() + c.intercept;
        cv_sse(l) += (yi.segment(lo, held) - pred).squaredNorm();
      }
    }

    int best = 0;
    for (int l = 1; l < grid; ++l)
      if (cv_sse(l) < cv_sse(best)) best = l;

    const LassoCoefficients chosen =
        lasso_regression(x, yi, lambdas(best), options.tol, options.max_iter);
    fit.coef.row(i) = chosen.slopes.transpose();
    fit.intercept(i) = chosen.intercept;
    fit.lambda(i) = lambdas(best);
  }
  return fit;
}

Vector forecast_lasso_var(const LassoVarFit& fit, const Vector& y_last) {
  if (y_last.size() != fit.coef.cols())
    throw InvalidInput("forecast_lasso_var: observation length does not match the fit");
  return fit.intercept + fit.coef * y_last;
}

BvarFit fit_minnesota_bvar(const Matrix& training, const BvarOptions& options) {
  if (!(options.tightness >= 0.0))
    throw InvalidInput("fit_minnesota_bvar: tightness must be nonnegative");
  if (!(options.cross_weight > 0.0))
    throw InvalidInput("fit_minnesota_bvar: cross_weight must be positive");
  const Index t = training.rows();
  const Index n = training.cols();
  if (n < 1) throw InvalidInput("fit_minnesota_bvar: empty training block");
  if (t < n + 3)
    throw InvalidInput("fit_minnesota_bvar: training window of " + std::to_string(t) +
                       " periods is too short for " + std::to_string(n) + " nodes");

  BvarFit fit;
  fit.sigma.resize(n);
  for (Index i = 0; i < n; ++i) {
    fit.sigma(i) = fit_ar1(training.col(i)).resid_sd;
    if (!(fit.sigma(i) > 0.0))
      throw NumericError("fit_minnesota_bvar: degenerate residual scale for node column " +
                         std::to_string(i));
  }

  fit.coef.resize(n, n);
  fit.intercept.resize(n);
  if (options.tightness == 0.0) {
    fit.coef = Matrix::Constant(n, n, 0.0);
    fit.coef.diagonal().setConstant(options.prior_own_mean);
    fit.intercept.setZero();
    return fit;
  }

  const Index h = t - 1;
  const Index p = n + 1;
  Matrix design(h, p);
  design.col(0).setOnes();
  design.rightCols(n) = training.topRows(h);
  const Matrix gram = design.transpose() * design;

  for (Index i = 0; i < n; ++i) {
    Vector prior_mean = Vector::Zero(p);
    prior_mean(1 + i) = options.prior_own_mean;
    Vector prior_var(p);
    prior_var(0) = std::pow(100.0 * options.tightness * fit.sigma(i), 2);
    for (Index j = 0; j < n; ++j)
      prior_var(1 + j) =
          j == i ? options.tightness * options.tightness
                 : std::pow(options.tightness * options.cross_weight * fit.sigma(i) /
                                fit.sigma(j),
                            2);

    const double noise = fit.sigma(i) * fit.sigma(i);
    Matrix a = gram / noise;
    a.diagonal() += prior_var.cwiseInverse();
    const Vector rhs = design.transpose() * training.col(i).tail(h) / noise +
                       prior_mean.cwiseQuotient(prior_var);
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() != Eigen::Success)
      throw NumericError("fit_minnesota_bvar: posterior system is not solvable");
    const Vector coef = ldlt.solve(rhs);
    if (!coef.allFinite())
      throw NumericError("fit_minnesota_bvar: non-finite posterior mean");
    fit.intercept(i) = coef(0);
    fit.coef.row(i) = coef.tail(n).transpose();
  }
  return fit;
}

Vector forecast_bvar(const BvarFit& fit, const Vector& y_last) {
  if (y_last.size() != fit.coef.cols())
    throw InvalidInput("forecast_bvar: observation length does not match the fit");
  return fit.intercept + fit.coef * y_last;
}

DmResult diebold_mariano(const Vector& errors_a, const Vector& errors_b, int hac_lags) {
  const Index h = errors_a.size();
  if (errors_b.size() != h)
    throw InvalidInput("diebold_mariano: error series lengths differ");
  if (h < 10)
    throw InvalidInput("diebold_mariano: need at least 10 forecast errors, got " +
                       std::to_string(h));
  if (hac_lags < 0 || hac_lags >= h)
    throw InvalidInput("diebold_mariano: lag truncation must lie in [0, length)");

  const Vector d = errors_a.array().square() - errors_b.array().square();
  const double dbar = d.mean();
  const Vector dc = d.array() - dbar;
  const double ht = static_cast<double>(h);
  double v = dc.squaredNorm() / ht;
  for (int l = 1; l <= hac_lags; ++l) {
    const double gamma = dc.tail(h - l).dot(dc.head(h - l)) / ht;
    v += 2.0 * (1.0 - static_cast<double>(l) / (hac_lags + 1)) * gamma;
  }

  DmResult result;
  if (v <= 0.0) {
    result.undefined = true;
    if (dbar == 0.0) {
      result.statistic = 0.0;
      result.p_value = 1.0;
    } else {
      result.statistic = dbar > 0.0 ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
      result.p_value = 0.0;
    }
    return result;
  }
  result.statistic = dbar / std::sqrt(v / ht);
  result.p_value = std::erfc(std::abs(result.statistic) / std::sqrt(2.0));
  return result;
}

namespace {

std::vector<ForecastModel> canonical_models(std::vector<ForecastModel> models) {
  if (models.empty()) throw InvalidInput("run_comparison: empty model set");
  std::sort(models.begin(), models.end());
  models.erase(std::unique(models.begin(), models.end()), models.end());
  return models;
}

}  // namespace

ForecastReport run_comparison(const PanelSeries& y, const FactorModel& model,
                              const WindowPlan& plan, std::vector<ForecastModel> models,
                              const ForecastConfig& config) {
  const Index tt = y.n_periods();
  const Index n = y.n_nodes();
  if (plan.step != 1) throw InvalidInput("run_comparison: only one-period steps are supported");
  if (plan.horizon != 1)
    throw InvalidInput("run_comparison: only one-step-ahead forecasts are supported");
  if (plan.first_train_end < 2)
    throw InvalidInput("run_comparison: first training window must end at period 2 or later");
  if (plan.last_train_end < plan.first_train_end)
    throw InvalidInput("run_comparison: window plan ends before it starts");
  if (plan.last_train_end + 1 >= tt)
    throw InvalidInput("run_comparison: last window's target lies beyond the series");

  ForecastReport report;
  report.models = canonical_models(std::move(models));
  for (ForecastModel m : report.models)
    report.model_names.push_back(forecast_model_name(m));
  report.nodes = y.nodes;
  report.first_train_end = plan.first_train_end;
  report.last_train_end = plan.last_train_end;
  report.n_windows = plan.last_train_end - plan.first_train_end + 1;

  const bool has_fnar =
      std::find(report.models.begin(), report.models.end(), ForecastModel::fnar) !=
      report.models.end();
  if (has_fnar && model.n_periods() <= plan.last_train_end)
    throw InvalidInput("run_comparison: factor model does not cover the window plan");

  const std::size_t n_models = report.models.size();
  report.forecast_errors.assign(n_models, Matrix(report.n_windows, n));

  for (Index w = 0; w < report.n_windows; ++w) {
    const Index train_end = plan.first_train_end + w;
    const Matrix training = y.values.topRows(train_end + 1);
    const Vector y_last = training.row(train_end).transpose();
    const Vector target = y.values.row(train_end + 1).transpose();

    for (std::size_t mi = 0; mi < n_models; ++mi) {
      Vector pred(n);
      switch (report.models[mi]) {
        case ForecastModel::fnar: {
          PanelSeries ys;
          ys.nodes = y.nodes;
          ys.periods.assign(y.periods.begin(), y.periods.begin() + train_end + 1);
          ys.values = training;
          FactorModel ms = model;
          ms.factors.assign(model.factors.begin(), model.factors.begin() + train_end + 1);
          ms.periods.assign(model.periods.begin(), model.periods.begin() + train_end + 1);
          const FnarFit fit = config.fnar_estimator == Estimator::sur
                                  ? fit_sur(ys, ms)
                                  : fit_ols(ys, ms);
          pred = forecast_one_step(fit, y_last, ms.factors.back());
          break;
        }
        case ForecastModel::ar1: {
          for (Index i = 0; i < n; ++i)
            pred(i) = forecast_ar1(fit_ar1(training.col(i)), y_last(i));
          break;
        }
        case ForecastModel::pc_ar:
          pred = forecast_pc_ar(fit_pc_ar(training, config.pc_components), y_last);
          break;
        case ForecastModel::lasso_var:
          pred = forecast_lasso_var(fit_lasso_var(training, config.lasso), y_last);
          break;
        case ForecastModel::minnesota_bvar:
          pred = forecast_bvar(fit_minnesota_bvar(training, config.bvar), y_last);
          break;
      }
      report.forecast_errors[mi].row(w) = (target - pred).transpose();
    }
  }

  report.mse.resize(n_models, n);
  for (std::size_t mi = 0; mi < n_models; ++mi)
    report.mse.row(mi) = report.forecast_errors[mi].colwise().squaredNorm() /
                         static_cast<double>(report.n_windows);

  const auto ar1_pos =
      std::find(report.models.begin(), report.models.end(), ForecastModel::ar1);
  report.mse_ratio = Matrix::Constant(n_models, n, kNan);
  if (ar1_pos != report.models.end()) {
    const Index base = ar1_pos - report.models.begin();
    for (std::size_t mi = 0; mi < n_models; ++mi)
      report.mse_ratio.row(mi) =
          report.mse.row(mi).cwiseQuotient(report.mse.row(base));
  }

  DmResult blank;
  blank.statistic = kNan;
  blank.p_value = kNan;
  blank.undefined = true;
  report.dm.assign(n_models, std::vector<DmResult>(n, blank));
  if (has_fnar && report.n_windows >= 10) {
    const Index fpos = std::find(report.models.begin(), report.models.end(),
                                 ForecastModel::fnar) -
                       report.models.begin();
    for (std::size_t mi = 0; mi < n_models; ++mi)
      for (Index i = 0; i < n; ++i)
        report.dm[mi][i] =
            diebold_mariano(report.forecast_errors[mi].col(i),
                            report.forecast_errors[fpos].col(i), config.dm_hac_lags);
  }
  return report;
}

ForecastReport run_comparison(const PanelSeries& y, const WindowPlan& plan,
                              std::vector<ForecastModel> models,
                              const ForecastConfig& config) {
  if (std::find(models.begin(), models.end(), ForecastModel::fnar) != models.end())
    throw InvalidInput("run_comparison: fnar requested without a factor model");
  const FactorModel unused;
  return run_comparison(y, unused, plan, std::move(models), config);
}

}  // namespace fnar
