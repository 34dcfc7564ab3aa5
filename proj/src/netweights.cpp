#include "fnar/netweights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <unordered_map>

namespace fnar {

namespace {

std::unordered_map<std::string, Index> index_of(const std::vector<std::string>& labels,
                                                const char* what) {
  std::unordered_map<std::string, Index> m;
  m.reserve(labels.size());
  for (Index i = 0; i < static_cast<Index>(labels.size()); ++i) {
    if (!m.emplace(labels[i], i).second)
      throw InvalidInput(std::string(what) + " labels contain a duplicate: " + labels[i]);
  }
  return m;
}

Index lookup(const std::unordered_map<std::string, Index>& m, const std::string& key,
             const char* what) {
  auto it = m.find(key);
  if (it == m.end())
    throw InvalidInput(std::string("unknown ") + what + ": " + key);
  return it->second;
}

void renormalize_layer(const Tensor3& flows, Tensor3& weights,
                       std::vector<std::uint8_t>& isolated, Index n, Index k) {
  for (Index i = 0; i < n; ++i) {
    double total = 0.0;
    for (Index j = 0; j < n; ++j) total += flows(i, j, k);
    if (total > 0.0) {
      for (Index j = 0; j < n; ++j) weights(i, j, k) = flows(i, j, k) / total;
      weights(i, i, k) = 0.0;
      isolated[i + n * k] = 0;
    } else {
      for (Index j = 0; j < n; ++j) weights(i, j, k) = 0.0;
      isolated[i + n * k] = 1;
    }
  }
}

}  // namespace

bool WeightPanel::is_isolated(Index t, Index node, Index layer) const {
  if (t < 0 || t >= n_periods() || node < 0 || node >= n_nodes() || layer < 0 ||
      layer >= n_layers())
    throw InvalidInput("is_isolated: index out of range");
  if (isolated.empty()) return false;
  return isolated[t][node + n_nodes() * layer] != 0;
}

std::vector<FlowRecord> fill_missing(const std::vector<FlowRecord>& records,
                                     const MissingPolicy& policy) {
  const auto period_idx = index_of(policy.periods, "period");
  const Index t_count = static_cast<Index>(policy.periods.size());
  if (t_count == 0) throw InvalidInput("fill_missing: empty period universe");

  // Key = (layer, reporter, partner); std::map keeps the output ordering
  // deterministic (lexicographic within each period).
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<std::vector<double>>> observed;
  for (const auto& r : records) {
    if (!std::isfinite(r.value))
      throw InvalidInput("fill_missing: non-finite value for " + r.reporter + "->" +
                         r.partner);
    const Index t = lookup(period_idx, r.period, "period");
    auto& s = observed[Key{r.layer, r.reporter, r.partner}];
    if (s.empty()) s.resize(t_count);
    s[t].push_back(r.value);
  }

  // Duplicates of one key-period are summed in value order, which makes the
  // result independent of the input record order.
  std::map<Key, std::vector<std::optional<double>>> series;
  for (auto& [key, slots] : observed) {
    auto& s = series[key];
    s.resize(t_count);
    for (Index t = 0; t < t_count; ++t) {
      if (slots[t].empty()) continue;
      std::sort(slots[t].begin(), slots[t].end());
      double total = 0.0;
      for (double v : slots[t]) total += v;
      s[t] = total;
    }
  }

  std::vector<FlowRecord> out;
  out.reserve(series.size() * t_count);
  for (auto& [key, s] : series) {
    // Forward fill, then pull the first observation back over the leading gap.
    std::optional<double> last;
    for (Index t = 0; t < t_count; ++t) {
      if (s[t])
        last = s[t];
      else
        s[t] = last;
    }
    std::optional<double> first;
    for (Index t = t_count - 1; t >= 0; --t) {
      if (!s[t])
        s[t] = first;
      else
        first = s[t];
    }
    for (Index t = 0; t < t_count; ++t) {
      if (!s[t]) continue;  // key never observed at all
      out.push_back(FlowRecord{policy.periods[t], std::get<0>(key), std::get<1>(key),
                               std::get<2>(key), *s[t]});
    }
  }

  // Period-major order: stable output independent of input order.
  std::stable_sort(out.begin(), out.end(),
                   [&](const FlowRecord& a, const FlowRecord& b) {
                     return period_idx.at(a.period) < period_idx.at(b.period);
                   });
  return out;
}

WeightPanel build_symmetric_share_weights(const std::vector<FlowRecord>& records,
                                          const std::vector<std::string>& nodes,
                                          const std::vector<std::string>& layers,
                                          const std::vector<std::string>& periods) {
  if (nodes.size() < 2) throw InvalidInput("weight panel needs at least two nodes");
  if (layers.empty() || periods.empty())
    throw InvalidInput("weight panel needs at least one layer and one period");

  const auto node_idx = index_of(nodes, "node");
  const auto layer_idx = index_of(layers, "layer");
  const auto period_idx = index_of(periods, "period");
  const Index n = static_cast<Index>(nodes.size());
  const Index m = static_cast<Index>(layers.size());
  const Index t_count = static_cast<Index>(periods.size());

  WeightPanel panel;
  panel.nodes = nodes;
  panel.layers = layers;
  panel.periods = periods;
  panel.flows.assign(t_count, Tensor3(n, n, m));
  panel.weights.assign(t_count, Tensor3(n, n, m));
  panel.isolated.assign(t_count, std::vector<std::uint8_t>(n * m, 0));

  // Accumulate in sorted cell order so the panel is bit-identical under any
  // permutation of the input records.
  std::vector<std::tuple<Index, Index, Index, Index, double>> cells;
  cells.reserve(records.size());
  for (const auto& r : records) {
    if (!std::isfinite(r.value))
      throw InvalidInput("flow value is not finite for " + r.reporter + "->" + r.partner);
    if (r.value < 0.0)
      throw InvalidInput("flow value is negative for " + r.reporter + "->" + r.partner);
    const Index i = lookup(node_idx, r.reporter, "node");
    const Index j = lookup(node_idx, r.partner, "node");
    const Index k = lookup(layer_idx, r.layer, "layer");
    const Index t = lookup(period_idx, r.period, "period");
    if (i == j) continue;  // self-loops carry no network information
    cells.emplace_back(t, k, i, j, r.value);
  }
  std::sort(cells.begin(), cells.end());
  for (const auto& [t, k, i, j, v] : cells) {
    panel.flows[t](i, j, k) += v;
    panel.flows[t](j, i, k) += v;
  }

  for (Index t = 0; t < t_count; ++t)
    for (Index k = 0; k < m; ++k)
      renormalize_layer(panel.flows[t], panel.weights[t], panel.isolated[t], n, k);
  return panel;
}

WeightPanel moving_average_smooth(const WeightPanel& panel,
                                  const std::vector<std::string>& layer_names,
                                  int window) {
  if (window < 1) throw InvalidInput("moving_average_smooth: window must be >= 1");
  if (!panel.has_flows())
    throw InvalidInput("moving_average_smooth: panel carries no raw flows");

  const auto layer_idx = index_of(panel.layers, "layer");
  std::vector<Index> targets;
  for (const auto& name : layer_names) targets.push_back(lookup(layer_idx, name, "layer"));

  const Index n = panel.n_nodes();
  const Index t_count = panel.n_periods();
  WeightPanel out = panel;
  for (Index t = 0; t < t_count; ++t) {
    const Index lo = std::max<Index>(0, t - window + 1);
    const double denom = double(t - lo + 1);
    for (Index k : targets) {
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
          double s = 0.0;
          for (Index u = lo; u <= t; ++u) s += panel.flows[u](i, j, k);
          out.flows[t](i, j, k) = s / denom;
        }
      renormalize_layer(out.flows[t], out.weights[t], out.isolated[t], n, k);
    }
  }
  return out;
}

Matrix cosine_similarity_matrix(const WeightPanel& panel) {
  const Index m = panel.n_layers();
  const Index n = panel.n_nodes();
  const Index t_count = panel.n_periods();

  // Gram of the stacked per-layer weight vectors (length N*N*T each).
  Matrix gram = Matrix::Zero(m, m);
  for (Index t = 0; t < t_count; ++t) {
    Matrix layer_cols(n * n, m);
    for (Index k = 0; k < m; ++k)
      layer_cols.col(k) = Eigen::Map<const Matrix>(panel.weights[t].slice(k).data(), n * n, 1);
    gram += layer_cols.transpose() * layer_cols;
  }

  Matrix sim(m, m);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) {
      const double na = gram(a, a), nb = gram(b, b);
      sim(a, b) = (na > 0.0 && nb > 0.0) ? gram(a, b) / std::sqrt(na * nb) : nan;
    }
  return sim;
}

WeightPanel expand_to_frequency(const WeightPanel& panel, const FrequencyMap& map) {
  if (map.targets.size() != map.sources.size())
    throw InvalidInput("expand_to_frequency: targets and sources differ in length");
  if (map.targets.empty()) throw InvalidInput("expand_to_frequency: empty target calendar");
  const auto period_idx = index_of(panel.periods, "period");
  index_of(map.targets, "target period");  // duplicate check

  WeightPanel out;
  out.nodes = panel.nodes;
  out.layers = panel.layers;
  out.periods = map.targets;
  for (std::size_t q = 0; q < map.targets.size(); ++q) {
    const Index t = lookup(period_idx, map.sources[q], "source period");
    out.weights.push_back(panel.weights[t]);
    if (panel.has_flows()) out.flows.push_back(panel.flows[t]);
    if (!panel.isolated.empty()) out.isolated.push_back(panel.isolated[t]);
  }
  return out;
}

PanelValidation validate_weight_panel(const WeightPanel& panel) {
  PanelValidation v;
  const Index n = panel.n_nodes();
  const Index m = panel.n_layers();
  for (Index t = 0; t < panel.n_periods(); ++t) {
    const Tensor3& w = panel.weights[t];
    if (w.dim(1) != n || w.dim(2) != n || w.dim(3) != m)
      throw InvalidInput("weight panel tensor dimensions do not match labels");
    for (Index k = 0; k < m; ++k) {
      for (Index i = 0; i < n; ++i) {
        v.max_abs_diagonal = std::max(v.max_abs_diagonal, std::abs(w(i, i, k)));
        double row_sum = 0.0, row_abs = 0.0;
        for (Index j = 0; j < n; ++j) {
          row_sum += w(i, j, k);
          row_abs += std::abs(w(i, j, k));
          v.min_weight = std::min(v.min_weight, w(i, j, k));
        }
        if (row_abs == 0.0)
          ++v.isolated_rows;
        else
          v.max_row_sum_error = std::max(v.max_row_sum_error, std::abs(row_sum - 1.0));
      }
    }
  }
  return v;
}

}  // namespace fnar
