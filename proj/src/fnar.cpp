#include "fnar/fnar.hpp"

#include <cmath>

namespace fnar {

namespace {

void check_alignment(const PanelSeries& y, const FactorModel& model) {
  const Index t_count = y.n_periods();
  const Index n = y.n_nodes();
  if (t_count != model.n_periods())
    throw InvalidInput("fit: series has " + std::to_string(t_count) +
                       " periods but the factor model has " +
                       std::to_string(model.n_periods()));
  if (t_count < 3) throw InvalidInput("fit: need at least three periods");
  if (model.factors.empty() || model.factors.front().dim(1) != n ||
      model.factors.front().dim(2) != n)
    throw InvalidInput("fit: factor tensors do not match the number of nodes");
  if (!y.periods.empty() && !model.periods.empty()) {
    for (Index t = 0; t < t_count; ++t)
      if (y.periods[t] != model.periods[t])
        throw InvalidInput("fit: period mismatch at position " + std::to_string(t) +
                           ": " + y.periods[t] + " vs " + model.periods[t]);
  }
  if (!y.nodes.empty() && !model.nodes.empty()) {
    for (Index i = 0; i < n; ++i)
      if (y.nodes[i] != model.nodes[i])
        throw InvalidInput("fit: node mismatch at position " + std::to_string(i) + ": " +
                           y.nodes[i] + " vs " + model.nodes[i]);
  }
}

/// Stacked design and response over the regression sample t = 1..T-1.
struct StackedSystem {
  Matrix x;  // (T-1)*N x p
  Vector y;  // (T-1)*N
};

StackedSystem stack_pooled(const PanelSeries& series, const FactorModel& model) {
  const Index t_count = series.n_periods();
  const Index n = series.n_nodes();
  const Index p = model.r + 2 * n;
  StackedSystem s;
  s.x.resize((t_count - 1) * n, p);
  s.y.resize((t_count - 1) * n);
  for (Index t = 1; t < t_count; ++t) {
    s.x.middleRows((t - 1) * n, n) =
        build_design(series.values.row(t - 1).transpose(), model.factors[t - 1]);
    s.y.segment((t - 1) * n, n) = series.values.row(t).transpose();
  }
  return s;
}

void check_full_rank(const Matrix& stacked, const std::vector<std::string>& names,
                     const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  const Index rank = qr.rank();
  if (rank >= stacked.cols()) return;
  const auto perm = qr.colsPermutation().indices();
  std::string cols;
  for (Index k = rank; k < stacked.cols(); ++k) {
    if (!cols.empty()) cols += ", ";
    cols += names[perm[k]];
  }
  throw NumericError(std::string(what) + ": design is rank deficient (rank " +
                     std::to_string(rank) + " of " + std::to_string(stacked.cols()) +
                     "); dependent columns: " + cols);
}

/// Symmetric inverse of the weighting matrix, with a relative ridge when
/// near-singular. Errors if the conditioning stays beyond the limit.
Matrix invert_weighting(const Matrix& sigma, const FitOptions& options) {
  const Index n = sigma.rows();
  if (sigma.cols() != n) throw InvalidInput("weighting matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  Matrix work = sigma;
  if (!(lo > 0.0) || hi > options.max_condition * lo) {
    const double ridge = options.ridge_rel * sigma.trace() / double(n);
    if (!(ridge > 0.0))
      throw NumericError("weighting matrix is singular with zero trace");
    work.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<Matrix> es2(work);
    lo = es2.eigenvalues().minCoeff();
    hi = es2.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi > options.max_condition * lo)
      throw NumericError("weighting matrix condition number exceeds the limit");
  }
  Eigen::LLT<Matrix> llt(work);
  if (llt.info() != Eigen::Success)
    throw NumericError("weighting matrix is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(n, n));
  inv = ((inv + inv.transpose()) * 0.5).eval();
  return inv;
}

double residual_divisor(Index t_reg, int r, Index n, bool paper_dof,
                        bool heterogeneous) {
  double t_star;
  if (!paper_dof)
    t_star = double(t_reg);
  else if (heterogeneous)
    t_star = double(t_reg) - double(r + 2);
  else
    t_star = double(t_reg) - double(r) / double(n) - 2.0;
  if (t_star <= 0.0)
    throw NumericError("sample too short for the residual covariance divisor");
  return t_star;
}

}  // namespace

Vector FnarFit::theta() const {
  if (heterogeneous)
    throw InvalidInput("theta: heterogeneous fits have no pooled coefficient vector");
  Vector out(beta.size() + rho.size() + alpha.size());
  out << beta, rho, alpha;
  return out;
}

std::vector<std::string> coefficient_names(int r, const std::vector<std::string>& nodes) {
  std::vector<std::string> names;
  names.reserve(r + 2 * nodes.size());
  for (int k = 1; k <= r; ++k) names.push_back("beta[" + std::to_string(k) + "]");
  for (const auto& n : nodes) names.push_back("rho[" + n + "]");
  for (const auto& n : nodes) names.push_back("alpha[" + n + "]");
  return names;
}

Matrix build_design(const Vector& y_lag, const Tensor3& factors_lag) {
  const Index n = y_lag.size();
  const Index r = factors_lag.dim(3);
  if (factors_lag.dim(1) != n || factors_lag.dim(2) != n)
    throw InvalidInput("build_design: factor tensor does not match the series length");
  Matrix x(n, r + 2 * n);
  for (Index k = 0; k < r; ++k) x.col(k) = factors_lag.slice(k) * y_lag;
  x.middleCols(r, n) = Matrix(y_lag.asDiagonal());
  x.middleCols(r + n, n) = Matrix::Identity(n, n);
  return x;
}

namespace {

/// Shared pooled solver. With omega_inv == nullptr this is ordinary least
/// squares; otherwise GLS with the given (already inverted) weighting. Both
/// run the same accumulation and LDLT solve, so GLS with a spherical
/// weighting reproduces OLS coefficients exactly.
FnarFit pooled_fit(const PanelSeries& series, const FactorModel& model,
                   const Matrix* omega_inv, Estimator tag, const FitOptions& options) {
  check_alignment(series, model);
  const Index t_count = series.n_periods();
  const Index n = series.n_nodes();
  const int r = model.r;
  const Index p = r + 2 * n;
  const Index t_reg = t_count - 1;
  if (t_reg * n < p)
    throw InvalidInput("fit: fewer observations than coefficients");

  const auto names = coefficient_names(
      r, model.nodes.empty() ? std::vector<std::string>(n, "?") : model.nodes);
  const StackedSystem s = stack_pooled(series, model);
  check_full_rank(s.x, names, "fit");

  Matrix a = Matrix::Zero(p, p);
  Vector b = Vector::Zero(p);
  for (Index t = 0; t < t_reg; ++t) {
    const auto x_t = s.x.middleRows(t * n, n);
    const auto y_t = s.y.segment(t * n, n);
    if (omega_inv) {
      const Matrix wx = (*omega_inv) * x_t;
      a += x_t.transpose() * wx;
      b += wx.transpose() * y_t;
    } else {
      const Matrix wx = x_t;
      a += x_t.transpose() * wx;
      b += wx.transpose() * y_t;
    }
  }

  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("fit: normal equations could not be factorized");
  const Vector theta = ldlt.solve(b);

  FnarFit fit;
  fit.estimator = tag;
  fit.heterogeneous = false;
  fit.r = r;
  fit.nodes = model.nodes;
  fit.beta = theta.head(r);
  fit.rho = theta.segment(r, n);
  fit.alpha = theta.tail(n);

  fit.residuals.resize(t_reg, n);
  for (Index t = 0; t < t_reg; ++t)
    fit.residuals.row(t) =
        (s.y.segment(t * n, n) - s.x.middleRows(t * n, n) * theta).transpose();

  fit.dof_divisor = residual_divisor(t_reg, r, n, options.paper_dof, false);
  fit.sigma_nu = fit.residuals.transpose() * fit.residuals / fit.dof_divisor;

  const Matrix a_inv = ldlt.solve(Matrix::Identity(p, p));
  Vector se(p);
  if (omega_inv) {
    se = a_inv.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    const double dof = double(t_reg * n - p);
    const double sigma2 = fit.residuals.squaredNorm() / dof;
    se = (sigma2 * a_inv.diagonal().cwiseMax(0.0)).cwiseSqrt();
  }
  fit.beta_se = se.head(r);
  fit.rho_se = se.segment(r, n);
  fit.alpha_se = se.tail(n);
  return fit;
}

}  // namespace

FnarFit fit_ols(const PanelSeries& y, const FactorModel& model,
                const FitOptions& options) {
  return pooled_fit(y, model, nullptr, Estimator::ols, options);
}

FnarFit fit_gls(const PanelSeries& y, const FactorModel& model, const Matrix& sigma,
                const FitOptions& options) {
  if (sigma.rows() != y.n_nodes() || sigma.cols() != y.n_nodes())
    throw InvalidInput("fit_gls: weighting matrix has the wrong shape");
  const Matrix omega_inv = invert_weighting(sigma, options);
  return pooled_fit(y, model, &omega_inv, Estimator::sur, options);
}

FnarFit fit_sur(const PanelSeries& y, const FactorModel& model,
                const FitOptions& options) {
  if (options.sur_iterations < 1)
    throw InvalidInput("fit_sur: needs at least one GLS pass");
  FnarFit fit = fit_ols(y, model, options);
  for (int pass = 0; pass < options.sur_iterations; ++pass)
    fit = fit_gls(y, model, fit.sigma_nu, options);
  return fit;
}

FnarFit fit_heterogeneous(const PanelSeries& y, const FactorModel& model,
                          Estimator estimator, const FitOptions& options) {
  check_alignment(y, model);
  const Index t_count = y.n_periods();
  const Index n = y.n_nodes();
  const int r = model.r;
  const Index q = r + 2;  // per-equation coefficients
  const Index t_reg = t_count - 1;
  if (t_reg < q + 1)
    throw InvalidInput("fit_heterogeneous: sample too short for r + 2 coefficients");

  // Per-equation designs z_i: rows t = 1..T-1 of (F_k(i,:) y, y_i, 1).
  std::vector<Matrix> z(n, Matrix(t_reg, q));
  Matrix resp(t_reg, n);
  for (Index t = 1; t < t_count; ++t) {
    const Vector y_lag = y.values.row(t - 1).transpose();
    const Tensor3& f = model.factors[t - 1];
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < r; ++k) z[i](t - 1, k) = f.slice(k).row(i) * y_lag;
      z[i](t - 1, r) = y_lag[i];
      z[i](t - 1, r + 1) = 1.0;
    }
    resp.row(t - 1) = y.values.row(t);
  }

  const auto node_name = [&](Index i) {
    return model.nodes.empty() ? "node" + std::to_string(i) : model.nodes[i];
  };
  for (Index i = 0; i < n; ++i) {
    std::vector<std::string> names;
    for (int k = 1; k <= r; ++k)
      names.push_back("beta[" + std::to_string(k) + ", " + node_name(i) + "]");
    names.push_back("rho[" + node_name(i) + "]");
    names.push_back("alpha[" + node_name(i) + "]");
    check_full_rank(z[i], names, "fit_heterogeneous");
  }

  FnarFit fit;
  fit.estimator = estimator;
  fit.heterogeneous = true;
  fit.r = r;
  fit.nodes = model.nodes;
  fit.beta_het.resize(n, r);
  fit.beta_het_se.resize(n, r);
  fit.rho.resize(n);
  fit.alpha.resize(n);
  fit.rho_se.resize(n);
  fit.alpha_se.resize(n);
  fit.residuals.resize(t_reg, n);

  const auto fill_equation = [&](Index i, const Vector& coef, const Vector& se) {
    fit.beta_het.row(i) = coef.head(r).transpose();
    fit.rho[i] = coef[r];
    fit.alpha[i] = coef[r + 1];
    fit.beta_het_se.row(i) = se.head(r).transpose();
    fit.rho_se[i] = se[r];
    fit.alpha_se[i] = se[r + 1];
    fit.residuals.col(i) = resp.col(i) - z[i] * coef;
  };

  if (estimator == Estimator::ols) {
    for (Index i = 0; i < n; ++i) {
      const Matrix a = z[i].transpose() * z[i];
      Eigen::LDLT<Matrix> ldlt(a);
      const Vector coef = ldlt.solve(z[i].transpose() * resp.col(i));
      const Matrix a_inv = ldlt.solve(Matrix::Identity(q, q));
      Vector resid = resp.col(i) - z[i] * coef;
      const double sigma2 = resid.squaredNorm() / double(t_reg - q);
      const Vector se = (sigma2 * a_inv.diagonal().cwiseMax(0.0)).cwiseSqrt();
      fill_equation(i, coef, se);
    }
  } else {
    // Weighting from the per-equation OLS residuals, then one or more joint
    // GLS passes over the block design.
    FnarFit ols = fit_heterogeneous(y, model, Estimator::ols, options);
    Matrix sigma = ols.sigma_nu;
    Matrix joint_cov;
    Vector coef_joint;
    for (int pass = 0; pass < std::max(1, options.sur_iterations); ++pass) {
      const Matrix omega_inv = invert_weighting(sigma, options);
      // Cross-moment blocks C_ij = z_i' z_j; the joint information is
      // A[(i),(j)] = omega_inv(i,j) C_ij.
      Matrix a = Matrix::Zero(n * q, n * q);
      Vector b = Vector::Zero(n * q);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          if (omega_inv(i, j) == 0.0) continue;
          a.block(i * q, j * q, q, q) = omega_inv(i, j) * (z[i].transpose() * z[j]);
        }
        Vector weighted = Vector::Zero(t_reg);
        for (Index j = 0; j < n; ++j) weighted += omega_inv(i, j) * resp.col(j);
        b.segment(i * q, q) = z[i].transpose() * weighted;
      }
      Eigen::LDLT<Matrix> ldlt(a);
      if (ldlt.info() != Eigen::Success)
        throw NumericError("fit_heterogeneous: joint normal equations failed");
      coef_joint = ldlt.solve(b);
      joint_cov = ldlt.solve(Matrix::Identity(n * q, n * q));

      Matrix resid(t_reg, n);
      for (Index i = 0; i < n; ++i)
        resid.col(i) = resp.col(i) - z[i] * coef_joint.segment(i * q, q);
      const double divisor = residual_divisor(t_reg, r, n, options.paper_dof, true);
      sigma = resid.transpose() * resid / divisor;
    }
    for (Index i = 0; i < n; ++i) {
      const Vector coef = coef_joint.segment(i * q, q);
      const Vector se =
          joint_cov.diagonal().segment(i * q, q).cwiseMax(0.0).cwiseSqrt();
      fill_equation(i, coef, se);
    }
  }

  fit.dof_divisor = residual_divisor(t_reg, r, n, options.paper_dof, true);
  fit.sigma_nu = fit.residuals.transpose() * fit.residuals / fit.dof_divisor;
  return fit;
}

Vector rescale_to_layers(const FnarFit& fit, const FactorModel& model) {
  if (fit.heterogeneous)
    throw InvalidInput("rescale_to_layers: defined for the pooled form only");
  if (fit.r != model.r)
    throw InvalidInput("rescale_to_layers: fit and model rank differ");
  return model.loadings * model.eigenvalues.cwiseInverse().asDiagonal() * fit.beta;
}

Vector forecast_one_step(const FnarFit& fit, const Vector& y_last,
                         const Tensor3& factors_last) {
  const Index n = y_last.size();
  if (factors_last.dim(1) != n || factors_last.dim(2) != n)
    throw InvalidInput("forecast_one_step: factor tensor does not match the series");
  if (factors_last.dim(3) != fit.r)
    throw InvalidInput("forecast_one_step: factor rank does not match the fit");
  if (fit.rho.size() != n)
    throw InvalidInput("forecast_one_step: fit was estimated on a different panel");

  Vector network = Vector::Zero(n);
  if (fit.heterogeneous) {
    for (Index k = 0; k < fit.r; ++k) {
      const Vector fy = factors_last.slice(k) * y_last;
      network += fit.beta_het.col(k).cwiseProduct(fy);
    }
  } else {
    for (Index k = 0; k < fit.r; ++k)
      network += fit.beta[k] * (factors_last.slice(k) * y_last);
  }
  return network + fit.rho.cwiseProduct(y_last) + fit.alpha;
}

}  // namespace fnar
