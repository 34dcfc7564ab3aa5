#include "fnar/netfactors.hpp"

#include <cmath>

namespace fnar {

namespace {

/// mat_3 of an N1 x N2 x m tensor without copying: (N1*N2) x m view.
Eigen::Map<const Matrix> stacked_view(const Tensor3& x) {
  return Eigen::Map<const Matrix>(x.data().data(), x.dim(1) * x.dim(2), x.dim(3));
}

/// Flip eigenvector columns so the largest-magnitude entry is positive;
/// first such entry wins on ties, making the convention deterministic.
void canonicalize_signs(Matrix& v) {
  for (Index k = 0; k < v.cols(); ++k) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < v.rows(); ++i) {
      const double a = std::abs(v(i, k));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (v(arg, k) < 0.0) v.col(k) = -v.col(k);
  }
}

}  // namespace

Matrix FactorModel::projection() const {
  Matrix p = loadings.transpose();
  for (Index k = 0; k < r; ++k) p.row(k) /= eigenvalues[k];
  return p;
}

Matrix gram_mode3(const std::vector<Tensor3>& tensors) {
  if (tensors.empty()) throw InvalidInput("gram_mode3: no tensors");
  const Index m = tensors.front().dim(3);
  Matrix gram = Matrix::Zero(m, m);
  for (const auto& x : tensors) {
    if (!x.same_dims(tensors.front()))
      throw InvalidInput("gram_mode3: tensors differ in shape");
    gram.selfadjointView<Eigen::Lower>().rankUpdate(stacked_view(x).transpose(), 1.0);
  }
  gram /= double(tensors.size());
  return gram.selfadjointView<Eigen::Lower>();
}

Matrix gram_mode3(const WeightPanel& panel) { return gram_mode3(panel.weights); }

FactorEstimate estimate_factor_model(const WeightPanel& panel, int r) {
  const Index m = panel.n_layers();
  const Index t_count = panel.n_periods();
  if (r < 1) throw InvalidInput("estimate_factor_model: rank must be at least 1");
  if (r > m)
    throw InvalidInput("estimate_factor_model: rank " + std::to_string(r) +
                       " exceeds the number of layers " + std::to_string(m));
  if (t_count < 1) throw InvalidInput("estimate_factor_model: empty panel");

  const Matrix gram = gram_mode3(panel);
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success)
    throw NumericError("estimate_factor_model: eigendecomposition failed");

  // Eigen returns ascending order; keep the top r, descending.
  Vector mu(r);
  Matrix v(m, r);
  for (Index k = 0; k < r; ++k) {
    mu[k] = es.eigenvalues()[m - 1 - k];
    v.col(k) = es.eigenvectors().col(m - 1 - k);
  }
  const double tol = 1e-12 * std::max(es.eigenvalues()[m - 1], 0.0);
  if (mu[r - 1] <= tol)
    throw NumericError("estimate_factor_model: rank " + std::to_string(r) +
                       " exceeds the numerical rank of the layer Gram");
  canonicalize_signs(v);

  FactorEstimate out;
  out.model.r = r;
  out.model.eigenvalues = mu;
  out.model.loadings = v * mu.cwiseSqrt().asDiagonal();
  out.model.nodes = panel.nodes;
  out.model.layers = panel.layers;
  out.model.periods = panel.periods;

  // Projection diag(mu)^{-1/2} V': factors inherit the sample normalization.
  Matrix proj = v.transpose();
  for (Index k = 0; k < r; ++k) proj.row(k) /= std::sqrt(mu[k]);

  out.model.factors.reserve(t_count);
  out.residuals.reserve(t_count);
  for (Index t = 0; t < t_count; ++t) {
    Tensor3 f = mode_mul(panel.weights[t], 3, proj);
    Tensor3 e = panel.weights[t];
    e -= mode_mul(f, 3, out.model.loadings);
    out.model.factors.push_back(std::move(f));
    out.residuals.push_back(std::move(e));
  }
  return out;
}

RankChoice select_rank(const WeightPanel& panel, int r_max) {
  const Index m = panel.n_layers();
  if (r_max < 1 || r_max > m - 1)
    throw InvalidInput("select_rank: r_max must lie in [1, m-1]");

  const Matrix gram = gram_mode3(panel);
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success)
    throw NumericError("select_rank: eigendecomposition failed");

  RankChoice choice;
  choice.eigenvalues = es.eigenvalues().reverse();
  const double top = std::max(choice.eigenvalues[0], 0.0);

  if (choice.eigenvalues[0] - choice.eigenvalues[m - 1] <= 1e-12 * top) {
    choice.rank = 1;
    choice.degenerate = true;
    choice.ratios = Vector::Zero(r_max);
    return choice;
  }

  const double floor = 1e-12 * top;
  choice.ratios = Vector(r_max);
  for (Index j = 0; j < r_max; ++j) {
    const double num = std::max(choice.eigenvalues[j], floor);
    const double den = std::max(choice.eigenvalues[j + 1], floor);
    choice.ratios[j] = num / den;
  }
  Index best = 0;
  for (Index j = 1; j < r_max; ++j)
    if (choice.ratios[j] > choice.ratios[best]) best = j;
  choice.rank = int(best) + 1;
  return choice;
}

VarianceShares variance_explained(const WeightPanel& panel, const FactorModel& model) {
  const Index t_count = panel.n_periods();
  if (model.n_periods() != t_count || model.n_layers() != panel.n_layers())
    throw InvalidInput("variance_explained: panel and model do not match");

  double denom = 0.0;
  for (const auto& w : panel.weights) denom += w.data().squaredNorm();
  if (denom <= 0.0) throw NumericError("variance_explained: panel has no variation");

  VarianceShares shares;
  shares.per_factor = Vector::Zero(model.r);
  for (Index k = 0; k < model.r; ++k) {
    const double load_ss = model.loadings.col(k).squaredNorm();
    double factor_ss = 0.0;
    for (const auto& f : model.factors) {
      const Index n1 = f.dim(1), n2 = f.dim(2);
      factor_ss +=
          Eigen::Map<const Matrix>(f.data().data() + k * n1 * n2, n1, n2).squaredNorm();
    }
    shares.per_factor[k] = load_ss * factor_ss / denom;
  }
  shares.total = shares.per_factor.sum();
  return shares;
}

std::optional<Vector> variance_explained_link(const WeightPanel& panel,
                                              const FactorModel& model, Index i,
                                              Index j) {
  if (i == j)
    throw InvalidInput("variance_explained_link: diagonal links are structurally zero");
  const Index n = panel.n_nodes();
  if (i < 0 || i >= n || j < 0 || j >= n)
    throw InvalidInput("variance_explained_link: node index out of range");

  double denom = 0.0;
  for (const auto& w : panel.weights)
    for (Index l = 0; l < panel.n_layers(); ++l) denom += w(i, j, l) * w(i, j, l);
  if (denom == 0.0) return std::nullopt;

  Vector shares = Vector::Zero(model.r);
  for (Index k = 0; k < model.r; ++k) {
    const double load_ss = model.loadings.col(k).squaredNorm();
    double f_ss = 0.0;
    for (const auto& f : model.factors) f_ss += f(i, j, k) * f(i, j, k);
    shares[k] = load_ss * f_ss / denom;
  }
  return shares;
}

RowSumStats factor_row_sums(const FactorModel& model) {
  const Index n = model.factors.empty() ? 0 : model.factors.front().dim(1);
  const Index t_count = static_cast<Index>(model.factors.size());
  if (n == 0 || t_count == 0) throw InvalidInput("factor_row_sums: empty model");

  RowSumStats stats;
  stats.common_row_sum = Vector::Zero(model.r);
  stats.avg_abs_row_sum = Vector::Zero(model.r);
  stats.avg_sq_row_sum = Vector::Zero(model.r);

  for (Index k = 0; k < model.r; ++k) {
    double mean = 0.0, lo = 1e300, hi = -1e300;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& f : model.factors)
      for (Index i = 0; i < n; ++i) {
        double s = 0.0, a = 0.0, q = 0.0;
        for (Index j = 0; j < f.dim(2); ++j) {
          const double v = f(i, j, k);
          s += v;
          a += std::abs(v);
          q += v * v;
        }
        mean += s;
        abs_sum += a;
        sq_sum += q;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    const double cells = double(n) * double(t_count);
    if (hi - lo > 1e-8)
      throw NumericError(
          "factor_row_sums: row sums are not constant across rows and periods "
          "(panel rows do not all sum to one)");
    stats.common_row_sum[k] = mean / cells;
    stats.avg_abs_row_sum[k] = abs_sum / cells;
    stats.avg_sq_row_sum[k] = sq_sum / cells;
  }
  return stats;
}

Matrix factor_sample_gram(const FactorModel& model) {
  return gram_mode3(model.factors);
}

Vector sign_alignment(const Matrix& estimated_loadings, const Matrix& reference_loadings) {
  if (estimated_loadings.rows() != reference_loadings.rows() ||
      estimated_loadings.cols() != reference_loadings.cols())
    throw InvalidInput("sign_alignment: loading shapes differ");
  Vector signs(estimated_loadings.cols());
  for (Index k = 0; k < estimated_loadings.cols(); ++k) {
    const double dot = estimated_loadings.col(k).dot(reference_loadings.col(k));
    signs[k] = dot < 0.0 ? -1.0 : 1.0;
  }
  return signs;
}

void apply_factor_signs(FactorModel& model, const Vector& signs) {
  if (signs.size() != model.loadings.cols())
    throw InvalidInput("apply_factor_signs: sign count does not match the rank");
  for (Index k = 0; k < signs.size(); ++k) {
    if (signs[k] == 1.0) continue;
    if (signs[k] != -1.0) throw InvalidInput("apply_factor_signs: signs must be +1 or -1");
    model.loadings.col(k) *= -1.0;
    for (auto& f : model.factors) f.slice(k) *= -1.0;
  }
}

}  // namespace fnar
