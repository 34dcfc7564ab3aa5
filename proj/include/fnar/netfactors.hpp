#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fnar/netweights.hpp"

namespace fnar {

/// Principal-component factor structure of a weight panel along the layer
/// mode. Loadings are scaled so that column k has squared norm equal to the
/// k-th Gram eigenvalue, which makes the factor tensors satisfy the sample
/// normalization (1/T) sum_t F_(3)t F_(3)t' = I_r by construction.
struct FactorModel {
  int r = 0;
  Matrix loadings;               // m x r
  Vector eigenvalues;            // length r, strictly descending
  std::vector<Tensor3> factors;  // T tensors, N x N x r, zero diagonals
  std::vector<std::string> nodes;
  std::vector<std::string> layers;
  std::vector<std::string> periods;

  Index n_nodes() const { return static_cast<Index>(nodes.size()); }
  Index n_layers() const { return static_cast<Index>(layers.size()); }
  Index n_periods() const { return static_cast<Index>(periods.size()); }

  /// The projection that produced the factors: r x m, rows scaled by
  /// 1/sqrt(eigenvalue). factors[t] = weights[t] x_3 projection().
  Matrix projection() const;
};

/// Mode-3 sample second-moment matrix (1/T) sum_t mat_3(W_t) mat_3(W_t)'.
Matrix gram_mode3(const std::vector<Tensor3>& tensors);
Matrix gram_mode3(const WeightPanel& panel);

struct FactorEstimate {
  FactorModel model;
  std::vector<Tensor3> residuals;  // W_t minus its rank-r reconstruction
};

/// Principal components of the layer-mode Gram. Eigenvector signs follow a
/// fixed convention (largest-magnitude entry positive), so results are
/// deterministic. Throws if r exceeds the numerical rank of the Gram.
FactorEstimate estimate_factor_model(const WeightPanel& panel, int r);

/// Eigenvalue-ratio rank choice: the argmax over j <= r_max of
/// mu_j / mu_{j+1}, with ties going to the smaller j and near-zero
/// denominators clamped so trailing noise eigenvalues cannot win. A flat
/// spectrum returns rank 1 with the degenerate flag set.
struct RankChoice {
  int rank = 1;
  bool degenerate = false;
  Vector eigenvalues;  // all m, descending
  Vector ratios;       // r_max entries
};

RankChoice select_rank(const WeightPanel& panel, int r_max);

/// Share of total panel variation captured by the reconstruction, overall
/// and factor by factor. Per-factor shares sum to the total because factor
/// slices are sample-orthogonal and loading columns orthogonal.
struct VarianceShares {
  double total = 0.0;
  Vector per_factor;
};

VarianceShares variance_explained(const WeightPanel& panel, const FactorModel& model);

/// Per-factor variance shares of one directed link (i, j) across layers and
/// periods. Empty when the link has no variation in the panel; throws for
/// i == j (diagonal links are structurally zero).
std::optional<Vector> variance_explained_link(const WeightPanel& panel,
                                              const FactorModel& model, Index i,
                                              Index j);

/// Row-sum diagnostics of the factor tensors. When every panel row sums to
/// one, each factor's rows share a single sum, constant across rows and
/// periods; this function verifies that (tolerance 1e-8) and reports it,
/// together with the average absolute row sum and average row sum of
/// squares (the latter equals 1/N under the sample normalization).
struct RowSumStats {
  Vector common_row_sum;    // r
  Vector avg_abs_row_sum;   // r
  Vector avg_sq_row_sum;    // r
};

RowSumStats factor_row_sums(const FactorModel& model);

/// (1/T) sum_t mat_3(F_t) mat_3(F_t)', which is I_r for estimated models.
Matrix factor_sample_gram(const FactorModel& model);

/// Per-column signs (+1/-1) that align `estimated` with `reference`:
/// sign of the dot product of matching loading columns, +1 on a tie.
/// Throws if the shapes differ.
Vector sign_alignment(const Matrix& estimated_loadings, const Matrix& reference_loadings);

/// Flip loading columns and factor slices by the given signs in place.
void apply_factor_signs(FactorModel& model, const Vector& signs);

}  // namespace fnar
