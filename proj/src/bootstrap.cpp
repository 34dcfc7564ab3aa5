#include "fnar/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fnar/montecarlo.hpp"

namespace fnar {

namespace {

std::mt19937_64 iteration_stream(std::uint64_t seed, int b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

}  // namespace

double draw_quantile(Vector draws, double q) {
  if (draws.size() == 0) throw InvalidInput("draw_quantile: no draws");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("draw_quantile: q must lie in [0, 1]");
  const Index n = draws.size();
  Index rank = static_cast<Index>(std::ceil(q * static_cast<double>(n)));
  rank = std::max<Index>(1, std::min(rank, n));
  std::nth_element(draws.data(), draws.data() + (rank - 1), draws.data() + n);
  return draws[rank - 1];
}

void check_bootstrap_failures(int failures, int iterations) {
  if (static_cast<long long>(failures) * 100 > iterations)
    throw NumericError("bootstrap: " + std::to_string(failures) + " of " +
                       std::to_string(iterations) +
                       " iterations failed to re-estimate");
}

BootstrapResult run_bootstrap(const WeightPanel& panel, const PanelSeries& y,
                              const FactorModel& model, const FnarFit& fit,
                              const BootstrapOptions& options) {
  if (options.iterations < 1)
    throw InvalidInput("run_bootstrap: iterations must be >= 1");
  if (!(options.level > 0.0 && options.level < 1.0))
    throw InvalidInput("run_bootstrap: level must lie in (0, 1)");
  if (fit.heterogeneous)
    throw InvalidInput("run_bootstrap: node-specific fits are not supported");
  const Index t_count = model.n_periods();
  const Index n = model.n_nodes();
  if (panel.n_periods() != t_count || y.n_periods() != t_count ||
      static_cast<Index>(panel.weights.size()) != t_count ||
      static_cast<Index>(model.factors.size()) != t_count)
    throw InvalidInput("run_bootstrap: period counts disagree");
  if (y.n_nodes() != n || panel.n_nodes() != n)
    throw InvalidInput("run_bootstrap: node counts disagree");
  if (fit.r != model.r) throw InvalidInput("run_bootstrap: fit and model ranks disagree");
  if (fit.rho.size() != n) throw InvalidInput("run_bootstrap: fit node count disagrees");

  // Fitted common component and idiosyncratic residuals of the weights.
  std::vector<Tensor3> common, resid;
  common.reserve(panel.weights.size());
  resid.reserve(panel.weights.size());
  for (Index t = 0; t < t_count; ++t) {
    common.push_back(mode_mul(model.factors[static_cast<std::size_t>(t)], 3, model.loadings));
    Tensor3 e = panel.weights[static_cast<std::size_t>(t)];
    e -= common.back();
    resid.push_back(std::move(e));
  }

  const Matrix sigma_sqrt = covariance_sqrt(fit.sigma_nu);
  const Vector y0 = y.values.row(0).transpose();
  const Index p = fit.r + 2 * n;

  Matrix draws(options.iterations, p);
  Index ok = 0;
  int failures = 0;

  WeightPanel panel_b;
  panel_b.nodes = panel.nodes;
  panel_b.layers = panel.layers;
  panel_b.periods = panel.periods;
  PanelSeries y_b;
  y_b.periods = y.periods;
  y_b.nodes = y.nodes;

  for (int b = 0; b < options.iterations; ++b) {
    std::mt19937_64 rng = iteration_stream(options.seed, b);
    std::uniform_int_distribution<Index> pick(0, t_count - 1);
    panel_b.weights.clear();
    panel_b.weights.reserve(static_cast<std::size_t>(t_count));
    for (Index t = 0; t < t_count; ++t) {
      panel_b.weights.push_back(common[static_cast<std::size_t>(t)]);
      panel_b.weights.back() += resid[static_cast<std::size_t>(pick(rng))];
    }
    try {
      FactorEstimate est = estimate_factor_model(panel_b, model.r);
      apply_factor_signs(est.model, sign_alignment(est.model.loadings, model.loadings));
      y_b.values = simulate_values(est.model.factors, fit.beta, fit.rho, fit.alpha,
                                   sigma_sqrt, y0, rng);
      const FnarFit refit = fit.estimator == Estimator::sur
                                ? fit_sur(y_b, est.model, options.fit_options)
                                : fit_ols(y_b, est.model, options.fit_options);
      draws.row(ok++) = refit.theta().transpose();
    } catch (const NumericError&) {
      ++failures;
    }
  }
  check_bootstrap_failures(failures, options.iterations);
  draws.conservativeResize(ok, p);

  BootstrapResult result;
  result.iterations = options.iterations;
  result.failures = failures;
  result.seed = options.seed;
  result.level = options.level;
  result.draws = std::move(draws);
  result.names = coefficient_names(fit.r, y.nodes);
  result.means = result.draws.colwise().mean().transpose();
  result.lower.resize(p);
  result.upper.resize(p);
  const double lo_q = (1.0 - options.level) / 2.0;
  const double hi_q = (1.0 + options.level) / 2.0;
  for (Index j = 0; j < p; ++j) {
    result.lower[j] = draw_quantile(result.draws.col(j), lo_q);
    result.upper[j] = draw_quantile(result.draws.col(j), hi_q);
  }
  return result;
}

}  // namespace fnar
