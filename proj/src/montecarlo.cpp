#include "fnar/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace fnar {

namespace {

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

std::uint64_t cell_seed(std::uint64_t base, Index layers, Index periods, int rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(base & 0xffffffffu),
                    static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(layers), static_cast<std::uint32_t>(periods),
                    static_cast<std::uint32_t>(rep)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

std::vector<std::string> numbered(const char* prefix, Index count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

SyntheticSpec resolved(const SyntheticSpec& in) {
  SyntheticSpec s = in;
  if (s.loading_strength.size() == 0)
    s.loading_strength = s.r == 1 ? Vector(Vector::Constant(1, 2.0))
                                  : Vector(Vector::LinSpaced(s.r, 2.0, 1.0));
  if (s.beta.size() == 0) s.beta = Vector::Constant(s.r, 0.2);
  if (s.rho.size() == 0) s.rho = Vector::Constant(s.n_nodes, 0.3);
  if (s.alpha.size() == 0) s.alpha = Vector::Zero(s.n_nodes);
  if (s.innovation_scales.size() == 0) s.innovation_scales = Vector::Ones(s.n_nodes);
  return s;
}

void validate(const SyntheticSpec& s) {
  if (s.n_nodes < 2) throw InvalidInput("generate: need at least two nodes");
  if (s.r < 1) throw InvalidInput("generate: rank must be positive");
  if (s.n_layers <= s.r)
    throw InvalidInput("generate: need more layers than factors");
  if (s.n_periods < 3) throw InvalidInput("generate: need at least three periods");
  if (s.loading_strength.size() != s.r)
    throw InvalidInput("generate: loading_strength must have one entry per factor");
  for (Index k = 0; k < s.loading_strength.size(); ++k) {
    if (!(s.loading_strength[k] > 0.0))
      throw InvalidInput("generate: loading_strength must be positive");
    if (k > 0 && !(s.loading_strength[k] < s.loading_strength[k - 1]))
      throw InvalidInput("generate: loading_strength must be strictly decreasing");
  }
  if (!(std::abs(s.factor_ar) < 1.0))
    throw InvalidInput("generate: factor_ar must lie in (-1, 1)");
  if (!(s.noise_scale >= 0.0)) throw InvalidInput("generate: noise_scale must be >= 0");
  if (!(std::abs(s.noise_layer_ar) < 1.0))
    throw InvalidInput("generate: noise_layer_ar must lie in (-1, 1)");
  if (s.beta.size() != s.r) throw InvalidInput("generate: beta must have one entry per factor");
  if (s.rho.size() != s.n_nodes || s.alpha.size() != s.n_nodes ||
      s.innovation_scales.size() != s.n_nodes)
    throw InvalidInput("generate: rho, alpha, innovation_scales must have one entry per node");
  if (!(s.innovation_sd >= 0.0)) throw InvalidInput("generate: innovation_sd must be >= 0");
  if (s.innovation_scales.minCoeff() <= 0.0)
    throw InvalidInput("generate: innovation_scales must be positive");
  if (!(s.innovation_cross >= 0.0 && s.innovation_cross < 1.0))
    throw InvalidInput("generate: innovation_cross must lie in [0, 1)");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void validate_grid(const RateExperimentConfig& c) {
  if (c.layer_sizes.empty() || c.period_counts.empty())
    throw InvalidInput("rate experiment: empty grid axis");
  for (std::size_t i = 1; i < c.layer_sizes.size(); ++i)
    if (c.layer_sizes[i] <= c.layer_sizes[i - 1])
      throw InvalidInput("rate experiment: layer sizes must be strictly increasing");
  for (std::size_t i = 1; i < c.period_counts.size(); ++i)
    if (c.period_counts[i] <= c.period_counts[i - 1])
      throw InvalidInput("rate experiment: period counts must be strictly increasing");
  if (!c.cross_product && c.layer_sizes.size() != c.period_counts.size())
    throw InvalidInput("rate experiment: paired grid axes must have equal length");
  if (c.replications < 1)
    throw InvalidInput("rate experiment: need at least one replication");
}

std::vector<std::pair<Index, Index>> grid_cells(const RateExperimentConfig& c) {
  std::vector<std::pair<Index, Index>> cells;
  if (c.cross_product) {
    for (Index m : c.layer_sizes)
      for (Index t : c.period_counts) cells.emplace_back(m, t);
  } else {
    for (std::size_t i = 0; i < c.layer_sizes.size(); ++i)
      cells.emplace_back(c.layer_sizes[i], c.period_counts[i]);
  }
  return cells;
}

}  // namespace

Matrix covariance_sqrt(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols())
    throw InvalidInput("covariance_sqrt: matrix must be square");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return Matrix(llt.matrixL());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  if (es.info() != Eigen::Success)
    throw NumericError("covariance_sqrt: eigendecomposition failed");
  const Vector clamped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Matrix simulate_values(const std::vector<Tensor3>& factors, const Vector& beta,
                       const Vector& rho, const Vector& alpha, const Matrix& sigma_sqrt,
                       const Vector& y0, std::mt19937_64& rng) {
  if (factors.empty()) throw InvalidInput("simulate_values: no factor tensors");
  const Index n = factors[0].dim(1);
  const Index r = beta.size();
  if (factors[0].dim(2) != n || factors[0].dim(3) != r)
    throw InvalidInput("simulate_values: factor tensors must be N x N x r");
  if (rho.size() != n || alpha.size() != n || y0.size() != n ||
      sigma_sqrt.rows() != n || sigma_sqrt.cols() != n)
    throw InvalidInput("simulate_values: node dimensions disagree");

  const Index t_count = static_cast<Index>(factors.size());
  Matrix values(t_count, n);
  values.row(0) = y0.transpose();
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector y = y0, z(n);
  for (Index t = 1; t < t_count; ++t) {
    for (Index i = 0; i < n; ++i) z[i] = normal(rng);
    Vector next = alpha + rho.cwiseProduct(y) + sigma_sqrt * z;
    for (Index k = 0; k < r; ++k) next += beta[k] * (factors[t - 1].slice(k) * y);
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e12)
      throw NumericError("simulate_values: series diverged");
    values.row(t) = next.transpose();
    y = next;
  }
  return values;
}

SyntheticData generate(const SyntheticSpec& raw_spec) {
  const SyntheticSpec s = resolved(raw_spec);
  validate(s);
  const Index n = s.n_nodes, m = s.n_layers, t_count = s.n_periods;
  const int r = s.r;
  std::normal_distribution<double> normal(0.0, 1.0);

  // Loadings: orthonormal basis with the estimator's sign convention,
  // scaled so column k has squared norm loading_strength[k] * m.
  std::mt19937_64 rng_load = substream(s.seed, 1);
  Matrix basis(m, r);
  for (Index k = 0; k < r; ++k)
    for (Index l = 0; l < m; ++l) basis(l, k) = normal(rng_load);
  Eigen::HouseholderQR<Matrix> qr(basis);
  Matrix q = qr.householderQ() * Matrix::Identity(m, r);
  for (Index k = 0; k < r; ++k) {
    Index top = 0;
    q.col(k).cwiseAbs().maxCoeff(&top);
    if (q(top, k) < 0.0) q.col(k) *= -1.0;
  }
  const Vector mu = s.loading_strength * static_cast<double>(m);
  const Matrix loadings = q * mu.cwiseSqrt().asDiagonal();

  // Factor tensors: zero-diagonal Gaussian slices, optionally AR(1) across
  // periods, then rotated so the stacked sample Gram is the identity. That
  // puts the truth in the estimator's frame: noiseless panels are recovered
  // exactly up to column signs.
  std::mt19937_64 rng_fac = substream(s.seed, 2);
  std::vector<Tensor3> g(static_cast<std::size_t>(t_count), Tensor3(n, n, r));
  const double ar = s.factor_ar;
  const double ar_mix = std::sqrt(1.0 - ar * ar);
  for (Index t = 0; t < t_count; ++t)
    for (Index k = 0; k < r; ++k)
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) {
          if (i == j) continue;
          const double z = normal(rng_fac);
          g[t](i, j, k) = (t == 0) ? z : ar * g[t - 1](i, j, k) + ar_mix * z;
        }
  const Matrix gram = gram_mode3(g);
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <=
                                         1e-12 * std::max(es.eigenvalues().maxCoeff(), 0.0))
    throw NumericError("generate: factor draw is rank deficient");
  const Matrix inv_sqrt = es.eigenvectors() *
                          es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                          es.eigenvectors().transpose();
  std::vector<Tensor3> factors;
  factors.reserve(g.size());
  for (const Tensor3& gt : g) factors.push_back(mode_mul(gt, 3, inv_sqrt));

  // Weights: common component plus zero-diagonal noise, AR(1) across the
  // layer index so cross-layer correlation stays bounded.
  std::mt19937_64 rng_noise = substream(s.seed, 3);
  const double lar = s.noise_layer_ar;
  const double lar_mix = std::sqrt(1.0 - lar * lar);
  std::vector<Tensor3> weights;
  weights.reserve(factors.size());
  Matrix noise_prev(n, n), noise_cur(n, n);
  for (Index t = 0; t < t_count; ++t) {
    Tensor3 w = mode_mul(factors[static_cast<std::size_t>(t)], 3, loadings);
    if (s.noise_scale > 0.0) {
      for (Index k = 0; k < m; ++k) {
        for (Index j = 0; j < n; ++j)
          for (Index i = 0; i < n; ++i) {
            if (i == j) {
              noise_cur(i, j) = 0.0;
              continue;
            }
            const double z = s.noise_scale * normal(rng_noise);
            noise_cur(i, j) = (k == 0) ? z : lar * noise_prev(i, j) + lar_mix * z;
            w(i, j, k) += noise_cur(i, j);
          }
        noise_prev.swap(noise_cur);
      }
    }
    weights.push_back(std::move(w));
  }

  SyntheticData data;
  data.truth.r = r;
  data.truth.loadings = loadings;
  data.truth.eigenvalues = mu;
  data.truth.factors = std::move(factors);
  data.truth.nodes = numbered("n", n);
  data.truth.layers = numbered("l", m);
  data.truth.periods = numbered("t", t_count);

  data.panel.nodes = data.truth.nodes;
  data.panel.layers = data.truth.layers;
  data.panel.periods = data.truth.periods;
  data.panel.weights = std::move(weights);

  // Stability of the mean transition.
  Matrix mean_trans = Matrix(s.rho.asDiagonal());
  for (Index k = 0; k < r; ++k) {
    Matrix fbar = Matrix::Zero(n, n);
    for (const Tensor3& f : data.truth.factors) fbar += f.slice(k);
    mean_trans += (s.beta[k] / static_cast<double>(t_count)) * fbar;
  }
  Eigen::EigenSolver<Matrix> trans_eigs(mean_trans, false);
  const double radius = trans_eigs.eigenvalues().cwiseAbs().maxCoeff();
  if (radius >= 1.0)
    throw InvalidInput("generate: unstable dynamics, mean transition spectral radius " +
                       std::to_string(radius));

  const Vector scaled = s.innovation_sd * s.innovation_scales;
  Matrix sigma_nu = (1.0 - s.innovation_cross) *
                    Matrix(scaled.cwiseAbs2().asDiagonal());
  sigma_nu += s.innovation_cross * (scaled * scaled.transpose());
  const Matrix sigma_sqrt = covariance_sqrt(sigma_nu);

  std::mt19937_64 rng_y = substream(s.seed, 4);
  Vector z0(n);
  for (Index i = 0; i < n; ++i) z0[i] = normal(rng_y);
  const Vector y0 = s.alpha + sigma_sqrt * z0;
  data.series.values =
      simulate_values(data.truth.factors, s.beta, s.rho, s.alpha, sigma_sqrt, y0, rng_y);
  data.series.periods = data.truth.periods;
  data.series.nodes = data.truth.nodes;

  data.beta = s.beta;
  data.rho = s.rho;
  data.alpha = s.alpha;
  data.sigma_nu = std::move(sigma_nu);
  return data;
}

double loading_alignment_error(const FactorModel& estimated, const FactorModel& truth) {
  const Vector signs = sign_alignment(estimated.loadings, truth.loadings);
  const Matrix diff = estimated.loadings - truth.loadings * signs.asDiagonal();
  return diff.norm() / std::sqrt(static_cast<double>(truth.loadings.rows()));
}

double factor_alignment_error(const FactorModel& estimated, const FactorModel& truth) {
  if (estimated.factors.size() != truth.factors.size())
    throw InvalidInput("factor_alignment_error: period counts differ");
  if (estimated.factors.empty()) throw InvalidInput("factor_alignment_error: no factors");
  const Vector signs = sign_alignment(estimated.loadings, truth.loadings);
  double acc = 0.0;
  for (std::size_t t = 0; t < truth.factors.size(); ++t) {
    if (!estimated.factors[t].same_dims(truth.factors[t]))
      throw InvalidInput("factor_alignment_error: factor shapes differ");
    for (Index k = 0; k < signs.size(); ++k)
      acc += (estimated.factors[t].slice(k) - signs[k] * truth.factors[t].slice(k))
                 .squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(truth.factors.size()));
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (x.size() != y.size() || x.size() < 2) return nan;
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return nan;
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) return nan;
  return sxy / sxx;
}

RateTable loading_rate_experiment(const RateExperimentConfig& config) {
  validate_grid(config);
  RateTable table;
  for (const auto& [layers, periods] : grid_cells(config)) {
    std::vector<double> load_errs, fac_errs;
    load_errs.reserve(static_cast<std::size_t>(config.replications));
    fac_errs.reserve(static_cast<std::size_t>(config.replications));
    for (int rep = 0; rep < config.replications; ++rep) {
      SyntheticSpec s = config.base;
      s.n_layers = layers;
      s.n_periods = periods;
      s.seed = cell_seed(config.base.seed, layers, periods, rep);
      const SyntheticData data = generate(s);
      const FactorEstimate est = estimate_factor_model(data.panel, s.r);
      load_errs.push_back(loading_alignment_error(est.model, data.truth));
      fac_errs.push_back(factor_alignment_error(est.model, data.truth));
    }
    table.cells.push_back({layers, periods, median(load_errs), median(fac_errs)});
  }

  const Index max_m = config.layer_sizes.back();
  const Index max_t = config.period_counts.back();
  std::vector<double> ts, load_t, fac_t, ms, load_m, fac_m;
  for (const RateCell& c : table.cells) {
    if (c.n_layers == max_m) {
      ts.push_back(static_cast<double>(c.n_periods));
      load_t.push_back(c.loading_error);
      fac_t.push_back(c.factor_error);
    }
    if (c.n_periods == max_t) {
      ms.push_back(static_cast<double>(c.n_layers));
      load_m.push_back(c.loading_error);
      fac_m.push_back(c.factor_error);
    }
  }
  table.loading_slope_vs_periods = loglog_slope(ts, load_t);
  table.factor_slope_vs_periods = loglog_slope(ts, fac_t);
  table.loading_slope_vs_layers = loglog_slope(ms, load_m);
  table.factor_slope_vs_layers = loglog_slope(ms, fac_m);
  return table;
}

CoefficientRateTable coefficient_rate_experiment(const RateExperimentConfig& config) {
  validate_grid(config);
  CoefficientRateTable table;
  for (const auto& [layers, periods] : grid_cells(config)) {
    std::vector<double> theta_errs, oracle_errs, gaps;
    for (int rep = 0; rep < config.replications; ++rep) {
      SyntheticSpec s = config.base;
      s.n_layers = layers;
      s.n_periods = periods;
      s.seed = cell_seed(config.base.seed, layers, periods, rep);
      const SyntheticData data = generate(s);
      const FactorEstimate est = estimate_factor_model(data.panel, s.r);
      const FnarFit fit_est = fit_sur(data.series, est.model);
      const FnarFit fit_true = fit_sur(data.series, data.truth);
      const Vector signs = sign_alignment(est.model.loadings, data.truth.loadings);

      const Index n = data.series.n_nodes();
      Vector target(s.r + 2 * n);
      target << signs.cwiseProduct(data.beta), data.rho, data.alpha;
      theta_errs.push_back((fit_est.theta() - target).norm());

      Vector truth_theta(s.r + 2 * n);
      truth_theta << data.beta, data.rho, data.alpha;
      oracle_errs.push_back((fit_true.theta() - truth_theta).norm());

      Vector aligned_true_fit(s.r + 2 * n);
      aligned_true_fit << signs.cwiseProduct(fit_true.beta), fit_true.rho, fit_true.alpha;
      gaps.push_back((fit_est.theta() - aligned_true_fit).norm());
    }
    table.cells.push_back(
        {layers, periods, median(theta_errs), median(oracle_errs), median(gaps)});
  }
  return table;
}

}  // namespace fnar
