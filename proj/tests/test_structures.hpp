#pragma once

#include <random>
#include <string>
#include <vector>

#include "fnar/fnar.hpp"
#include "fnar/netfactors.hpp"
#include "fnar/netweights.hpp"
#include "test_util.hpp"

namespace testutil {

// ── Synthetic canonical factor structure ────────────────────────────────────
// W_t = F_t x_3 U with U = V M^{1/2} for an orthonormal V and factor tensors
// normalized in sample, so the principal components of the layer Gram
// coincide with (U, F) up to column signs and exact-recovery targets are
// well defined.

struct Structured {
  fnar::WeightPanel panel;
  fnar::Matrix loadings;               // m x r truth
  std::vector<fnar::Tensor3> factors;  // truth, normalized in sample
  fnar::Vector mu;                     // Gram eigenvalues
};

inline void flip_to_convention(fnar::Matrix& v) {
  for (fnar::Index k = 0; k < v.cols(); ++k) {
    fnar::Index arg = 0;
    for (fnar::Index i = 1; i < v.rows(); ++i)
      if (std::abs(v(i, k)) > std::abs(v(arg, k))) arg = i;
    if (v(arg, k) < 0.0) v.col(k) = -v.col(k);
  }
}

/// Independent Gram accumulation by explicit loops (no library calls).
inline fnar::Matrix loop_gram(const std::vector<fnar::Tensor3>& xs) {
  const fnar::Index m = xs.front().dim(3);
  fnar::Matrix g = fnar::Matrix::Zero(m, m);
  for (const auto& x : xs)
    for (fnar::Index a = 0; a < m; ++a)
      for (fnar::Index b = 0; b < m; ++b) {
        double s = 0.0;
        for (fnar::Index i = 0; i < x.dim(1); ++i)
          for (fnar::Index j = 0; j < x.dim(2); ++j) s += x(i, j, a) * x(i, j, b);
        g(a, b) += s;
      }
  return g / double(xs.size());
}

inline Structured structured_panel(std::mt19937& rng, fnar::Index n, fnar::Index m,
                                   fnar::Index t_count, const fnar::Vector& mu,
                                   double noise_sd) {
  using fnar::Index;
  using fnar::Matrix;
  using fnar::Tensor3;
  const Index r = mu.size();

  Matrix g = random_matrix(rng, m, r);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix v = qr.householderQ() * Matrix::Identity(m, r);
  flip_to_convention(v);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Tensor3> raw;
  for (Index t = 0; t < t_count; ++t) {
    Tensor3 x(n, n, r);
    for (Index k = 0; k < r; ++k)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (i != j) x(i, j, k) = gauss(rng);
    raw.push_back(std::move(x));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(loop_gram(raw));
  const Matrix s_inv_half = es.eigenvectors() *
                            es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose();

  Structured out;
  out.mu = mu;
  out.loadings = v * mu.cwiseSqrt().asDiagonal();
  for (Index i = 0; i < n; ++i) out.panel.nodes.push_back("n" + std::to_string(i));
  for (Index k = 0; k < m; ++k) out.panel.layers.push_back("l" + std::to_string(k));
  for (Index t = 0; t < t_count; ++t)
    out.panel.periods.push_back("t" + std::to_string(t));

  for (Index t = 0; t < t_count; ++t) {
    Tensor3 f = mode_mul(raw[t], 3, s_inv_half);
    Tensor3 w = mode_mul(f, 3, out.loadings);
    if (noise_sd > 0.0) {
      for (Index l = 0; l < m; ++l)
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < n; ++j)
            if (i != j) w(i, j, l) += noise_sd * gauss(rng);
    }
    out.factors.push_back(std::move(f));
    out.panel.weights.push_back(std::move(w));
  }
  return out;
}

/// Diagonal sign alignment between an estimate and the truth.
inline fnar::Matrix sign_align(const fnar::Matrix& estimated, const fnar::Matrix& truth) {
  fnar::Matrix j = fnar::Matrix::Zero(truth.cols(), truth.cols());
  for (fnar::Index k = 0; k < truth.cols(); ++k)
    j(k, k) = estimated.col(k).dot(truth.col(k)) >= 0.0 ? 1.0 : -1.0;
  return j;
}

inline fnar::WeightPanel gaussian_panel(std::mt19937& rng, fnar::Index n, fnar::Index m,
                                        fnar::Index t_count) {
  fnar::WeightPanel panel;
  for (fnar::Index i = 0; i < n; ++i) panel.nodes.push_back("n" + std::to_string(i));
  for (fnar::Index k = 0; k < m; ++k) panel.layers.push_back("l" + std::to_string(k));
  for (fnar::Index t = 0; t < t_count; ++t) {
    panel.periods.push_back("t" + std::to_string(t));
    panel.weights.push_back(random_tensor(rng, n, n, m));
  }
  return panel;
}

// ── Autoregression test inputs ──────────────────────────────────────────────

/// Factor model with random zero-diagonal factor tensors, scaled so that
/// F y stays O(1). Good enough for exercising the regression code; the
/// loading block is filled but plays no role in fitting.
inline fnar::FactorModel fake_model(std::mt19937& rng, fnar::Index n, int r,
                                    fnar::Index t_count, double scale = 0.5) {
  using fnar::Index;
  fnar::FactorModel model;
  model.r = r;
  model.loadings = random_matrix(rng, std::max<Index>(r + 1, 2), r);
  model.eigenvalues = fnar::Vector::LinSpaced(r, r, 1);
  for (Index i = 0; i < n; ++i) model.nodes.push_back("n" + std::to_string(i));
  for (Index k = 0; k < model.loadings.rows(); ++k)
    model.layers.push_back("l" + std::to_string(k));
  std::normal_distribution<double> gauss(0.0, scale / std::sqrt(double(n)));
  for (Index t = 0; t < t_count; ++t) {
    model.periods.push_back("t" + std::to_string(t));
    fnar::Tensor3 f(n, n, r);
    for (Index k = 0; k < r; ++k)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (i != j) f(i, j, k) = gauss(rng);
    model.factors.push_back(std::move(f));
  }
  return model;
}

/// Simulate y_t = (sum_k beta_k F_{k,t-1} + diag(rho)) y_{t-1} + alpha + nu_t
/// with nu ~ N(0, sigma). Pass a zero matrix for a noiseless path.
inline fnar::PanelSeries simulate_fnar_series(std::mt19937& rng,
                                              const fnar::FactorModel& model,
                                              const fnar::Vector& beta,
                                              const fnar::Vector& rho,
                                              const fnar::Vector& alpha,
                                              const fnar::Matrix& sigma) {
  using fnar::Index;
  const Index n = model.factors.front().dim(1);
  const Index t_count = model.n_periods();
  fnar::Matrix chol = fnar::Matrix::Zero(n, n);
  if (sigma.size() > 0 && sigma.cwiseAbs().maxCoeff() > 0.0)
    chol = Eigen::LLT<fnar::Matrix>(sigma).matrixL();

  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise = [&]() {
    fnar::Vector z(n);
    for (Index i = 0; i < n; ++i) z[i] = gauss(rng);
    return fnar::Vector(chol * z);
  };

  fnar::PanelSeries series;
  series.periods = model.periods;
  series.nodes = model.nodes;
  series.values.resize(t_count, n);
  fnar::Vector y = alpha + noise();
  series.values.row(0) = y.transpose();
  for (Index t = 1; t < t_count; ++t) {
    fnar::Vector next = rho.cwiseProduct(y) + alpha + noise();
    for (Index k = 0; k < int(beta.size()); ++k)
      next += beta[k] * (model.factors[t - 1].slice(k) * y);
    y = next;
    series.values.row(t) = y.transpose();
  }
  return series;
}

}  // namespace testutil
