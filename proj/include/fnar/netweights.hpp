#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fnar/tensor3.hpp"

namespace fnar {

/// One directed bilateral flow observation for one layer and period.
struct FlowRecord {
  std::string period;
  std::string layer;
  std::string reporter;
  std::string partner;
  double value = 0.0;
};

/// Panel of network weight tensors: one N x N x m tensor per period, rows
/// normalized to unit sum (or all-zero for isolated nodes), zero diagonal.
/// When the panel was built from flow records, `flows` keeps the symmetric
/// pre-normalization bilateral totals so that flow-level transforms
/// (smoothing) can recompute weights afterwards.
struct WeightPanel {
  std::vector<std::string> nodes;
  std::vector<std::string> layers;
  std::vector<std::string> periods;
  std::vector<Tensor3> weights;
  std::vector<Tensor3> flows;
  /// isolated[t][i + N*k] != 0 when node i has no flows in layer k at period t.
  std::vector<std::vector<std::uint8_t>> isolated;

  Index n_nodes() const { return static_cast<Index>(nodes.size()); }
  Index n_layers() const { return static_cast<Index>(layers.size()); }
  Index n_periods() const { return static_cast<Index>(periods.size()); }
  bool has_flows() const { return !flows.empty(); }
  bool is_isolated(Index t, Index node, Index layer) const;
};

/// Missing-value completion rule: for every (layer, reporter, partner) key
/// that appears in the records, produce one record per period in `periods`,
/// carrying the last previously observed value forward; leading gaps take
/// the first subsequent observation. Keys never observed stay absent
/// (implicit zero downstream). Duplicate observations of a key-period are
/// summed before filling.
struct MissingPolicy {
  std::vector<std::string> periods;  // full period universe, in time order
};

std::vector<FlowRecord> fill_missing(const std::vector<FlowRecord>& records,
                                     const MissingPolicy& policy);

/// Build a weight panel from directed flow records. Each record adds its
/// value to the bilateral totals of both (reporter, partner) and
/// (partner, reporter), so pre-normalization flows are symmetric (in plus
/// out); weights are row shares of those totals. Self-loop records are
/// dropped. Unknown labels, negative or non-finite values throw.
WeightPanel build_symmetric_share_weights(const std::vector<FlowRecord>& records,
                                          const std::vector<std::string>& nodes,
                                          const std::vector<std::string>& layers,
                                          const std::vector<std::string>& periods);

/// Replace the flows of the named layers by their trailing moving average
/// over `window` periods (shorter prefix windows average what is available)
/// and renormalize those layers' weights. Requires the panel to carry flows.
WeightPanel moving_average_smooth(const WeightPanel& panel,
                                  const std::vector<std::string>& layer_names,
                                  int window);

/// Pairwise cosine similarity of layers, each layer seen as the stacked
/// vector of its weight entries across all periods. Layers with zero norm
/// give NaN rows/columns (similarity undefined).
Matrix cosine_similarity_matrix(const WeightPanel& panel);

/// Reindex the panel to a new period calendar: target period p gets a copy
/// of the tensor of `target_to_source[p]`. Every target must be mapped to
/// an existing source period.
struct FrequencyMap {
  std::vector<std::string> targets;  // new calendar, in time order
  std::vector<std::string> sources;  // same length; each must name a source period
};

WeightPanel expand_to_frequency(const WeightPanel& panel, const FrequencyMap& map);

/// Invariant scan used by tests and the ingest validation report.
struct PanelValidation {
  double max_row_sum_error = 0.0;   // |row sum - 1| over non-isolated rows
  double max_abs_diagonal = 0.0;
  double min_weight = 0.0;          // most negative entry (0 if none)
  Index isolated_rows = 0;
  bool ok(double tol) const {
    return max_row_sum_error <= tol && max_abs_diagonal == 0.0 && min_weight >= 0.0;
  }
};

PanelValidation validate_weight_panel(const WeightPanel& panel);

}  // namespace fnar
