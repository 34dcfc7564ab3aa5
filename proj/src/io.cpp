#include "fnar/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>
#include <unordered_set>

#include "fnar/fnar.hpp"

namespace fnar {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join_fields(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  return line;
}

std::string at_line(const std::string& path, int line) {
  return path + " line " + std::to_string(line);
}

double parse_double_field(const std::string& text, const std::string& path, int line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw IoError(at_line(path, line) + ": not a number: '" + text + "'");
  return value;
}

void expect_header(const CsvTable& table, const std::vector<std::string>& expected,
                   const std::string& path) {
  if (table.header != expected)
    throw IoError(at_line(path, 1) + ": expected header " + join_fields(expected) +
                  ", got " + join_fields(table.header));
}

/// Label-to-index map preserving the caller's order; duplicates rejected.
std::map<std::string, Index> index_by_label(const std::vector<std::string>& labels,
                                            const std::string& what,
                                            const std::string& context) {
  std::map<std::string, Index> index;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!index.emplace(labels[i], static_cast<Index>(i)).second)
      throw IoError(context + ": duplicate " + what + " label '" + labels[i] + "'");
  return index;
}

Index lookup(const std::map<std::string, Index>& index, const std::string& label,
             const std::string& what, const std::string& path, int line) {
  const auto it = index.find(label);
  if (it == index.end())
    throw IoError(at_line(path, line) + ": unknown " + what + " '" + label + "'");
  return it->second;
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key,
                                     const std::string& path) {
  if (!j.contains(key) || !j[key].is_array())
    throw IoError(path + ": missing or invalid '" + std::string(key) + "'");
  std::vector<std::string> out;
  for (const auto& item : j[key]) {
    if (!item.is_string())
      throw IoError(path + ": '" + std::string(key) + "' must hold strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

void write_tensor_csv(const std::string& path, const WeightPanel& panel,
                      const std::vector<Tensor3>& tensors) {
  std::vector<std::vector<std::string>> rows;
  for (Index t = 0; t < panel.n_periods(); ++t)
    for (Index k = 0; k < panel.n_layers(); ++k)
      for (Index i = 0; i < panel.n_nodes(); ++i)
        for (Index j = 0; j < panel.n_nodes(); ++j) {
          const double value = tensors[t](i, j, k);
          if (value != 0.0)
            rows.push_back({panel.periods[t], panel.layers[k], panel.nodes[i],
                            panel.nodes[j], format_double(value)});
        }
  write_csv_file(path, {"period", "layer", "row", "col", "value"}, rows);
}

void read_tensor_csv(const std::string& path, const WeightPanel& panel,
                     std::vector<Tensor3>& tensors) {
  const Index n = panel.n_nodes();
  const Index m = panel.n_layers();
  const auto periods = index_by_label(panel.periods, "period", path);
  const auto layers = index_by_label(panel.layers, "layer", path);
  const auto nodes = index_by_label(panel.nodes, "node", path);

  const CsvTable table = read_csv_file(path);
  expect_header(table, {"period", "layer", "row", "col", "value"}, path);
  std::unordered_set<long long> seen;
  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    const auto& fields = table.rows[row];
    const int line = table.line_numbers[row];
    const Index t = lookup(periods, fields[0], "period", path, line);
    const Index k = lookup(layers, fields[1], "layer", path, line);
    const Index i = lookup(nodes, fields[2], "node", path, line);
    const Index j = lookup(nodes, fields[3], "node", path, line);
    if (i == j)
      throw IoError(at_line(path, line) + ": diagonal entries are structurally zero");
    const long long cell = ((t * m + k) * n + i) * n + j;
    if (!seen.insert(cell).second)
      throw IoError(at_line(path, line) + ": duplicate cell");
    tensors[t](i, j, k) = parse_double_field(fields[4], path, line);
  }
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0.0 ? "inf" : "-inf";
  char buffer[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buffer, sizeof buffer, "%.*g", precision, value);
    if (std::strtod(buffer, nullptr) == value) break;
  }
  return buffer;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  CsvTable table;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      table.header = split_fields(line);
      have_header = true;
      continue;
    }
    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != table.header.size())
      throw IoError(at_line(path, lineno) + ": expected " +
                    std::to_string(table.header.size()) + " fields, got " +
                    std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(lineno);
  }
  if (!have_header) throw IoError(path + ": empty file");
  return table;
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << join_fields(header) << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw InvalidInput("write_csv_file: row width does not match the header");
    out << join_fields(row) << '\n';
  }
  if (!out.good()) throw IoError(path + ": write failed");
}

std::vector<FlowRecord> read_flow_csv(const std::string& path) {
  const CsvTable table = read_csv_file(path);
  expect_header(table, {"period", "layer", "reporter", "partner", "value"}, path);
  if (table.rows.empty()) throw IoError(path + ": no flow records");
  std::vector<FlowRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    const auto& fields = table.rows[row];
    records.push_back({fields[0], fields[1], fields[2], fields[3],
                       parse_double_field(fields[4], path, table.line_numbers[row])});
  }
  return records;
}

PanelSeries read_series_csv(const std::string& path) {
  const CsvTable table = read_csv_file(path);
  expect_header(table, {"period", "node", "value"}, path);
  if (table.rows.empty()) throw IoError(path + ": no observations");

  PanelSeries y;
  std::map<std::string, Index> periods, nodes;
  for (const auto& fields : table.rows) {
    if (periods.emplace(fields[0], static_cast<Index>(y.periods.size())).second)
      y.periods.push_back(fields[0]);
    if (nodes.emplace(fields[1], static_cast<Index>(y.nodes.size())).second)
      y.nodes.push_back(fields[1]);
  }

  const Index t = static_cast<Index>(y.periods.size());
  const Index n = static_cast<Index>(y.nodes.size());
  y.values.resize(t, n);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(t, n);
  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    const auto& fields = table.rows[row];
    const int line = table.line_numbers[row];
    const Index ti = periods.at(fields[0]);
    const Index ni = nodes.at(fields[1]);
    if (seen(ti, ni))
      throw IoError(at_line(path, line) + ": duplicate observation for period '" +
                    fields[0] + "', node '" + fields[1] + "'");
    seen(ti, ni) = 1;
    y.values(ti, ni) = parse_double_field(fields[2], path, line);
  }
  for (Index ti = 0; ti < t; ++ti)
    for (Index ni = 0; ni < n; ++ni)
      if (!seen(ti, ni))
        throw IoError(path + ": missing value for period '" + y.periods[ti] +
                      "', node '" + y.nodes[ni] + "'");
  return y;
}

void write_series_csv(const PanelSeries& y, const std::string& path) {
  if (y.values.rows() != static_cast<Index>(y.periods.size()) ||
      y.values.cols() != static_cast<Index>(y.nodes.size()))
    throw InvalidInput("write_series_csv: label counts do not match the value matrix");
  std::vector<std::vector<std::string>> rows;
  for (Index t = 0; t < y.n_periods(); ++t)
    for (Index i = 0; i < y.n_nodes(); ++i)
      rows.push_back({y.periods[t], y.nodes[i], format_double(y.values(t, i))});
  write_csv_file(path, {"period", "node", "value"}, rows);
}

void write_panel(const WeightPanel& panel, const std::string& dir) {
  if (panel.weights.size() != panel.periods.size())
    throw InvalidInput("write_panel: one weight tensor per period required");
  if (panel.has_flows() && panel.flows.size() != panel.periods.size())
    throw InvalidInput("write_panel: one flow tensor per period required");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory: " + ec.message());

  nlohmann::json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["nodes"] = panel.nodes;
  meta["layers"] = panel.layers;
  meta["periods"] = panel.periods;
  meta["has_flows"] = panel.has_flows();
  write_json_file(meta, dir + "/panel_meta.json");

  write_tensor_csv(dir + "/panel_weights.csv", panel, panel.weights);
  if (panel.has_flows()) write_tensor_csv(dir + "/panel_flows.csv", panel, panel.flows);
}

WeightPanel read_panel(const std::string& dir) {
  const std::string meta_path = dir + "/panel_meta.json";
  const nlohmann::json meta = read_json_file(meta_path);
  if (!meta.is_object()) throw IoError(meta_path + ": not a JSON object");
  if (!meta.contains("schema_version") || !meta["schema_version"].is_number_integer())
    throw IoError(meta_path + ": missing schema_version");
  if (meta["schema_version"].get<int>() != kSchemaVersion)
    throw IoError(meta_path + ": unsupported schema version " +
                  meta["schema_version"].dump());

  WeightPanel panel;
  panel.nodes = string_list(meta, "nodes", meta_path);
  panel.layers = string_list(meta, "layers", meta_path);
  panel.periods = string_list(meta, "periods", meta_path);
  if (!meta.contains("has_flows") || !meta["has_flows"].is_boolean())
    throw IoError(meta_path + ": missing has_flows");
  if (panel.nodes.empty() || panel.layers.empty() || panel.periods.empty())
    throw IoError(meta_path + ": empty node, layer, or period list");

  const Index n = panel.n_nodes();
  const Index m = panel.n_layers();
  const Index t = panel.n_periods();
  panel.weights.assign(t, Tensor3(n, n, m));
  read_tensor_csv(dir + "/panel_weights.csv", panel, panel.weights);
  if (meta["has_flows"].get<bool>()) {
    panel.flows.assign(t, Tensor3(n, n, m));
    read_tensor_csv(dir + "/panel_flows.csv", panel, panel.flows);
  }

  panel.isolated.assign(t, std::vector<std::uint8_t>(n * m, 0));
  for (Index ti = 0; ti < t; ++ti)
    for (Index k = 0; k < m; ++k)
      for (Index i = 0; i < n; ++i) {
        bool empty_row = true;
        for (Index j = 0; j < n && empty_row; ++j)
          if (panel.weights[ti](i, j, k) != 0.0) empty_row = false;
        panel.isolated[ti][i + n * k] = empty_row ? 1 : 0;
      }
  return panel;
}

nlohmann::json vector_json(const Vector& v) {
  nlohmann::json array = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) array.push_back(v(i));
  return array;
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json array = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    array.push_back(std::move(row));
  }
  return array;
}

nlohmann::json loadings_json(const FactorModel& model) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["r"] = model.r;
  j["nodes"] = model.nodes;
  j["layers"] = model.layers;
  j["periods"] = model.periods;
  j["eigenvalues"] = vector_json(model.eigenvalues);
  j["loadings"] = matrix_json(model.loadings);
  return j;
}

nlohmann::json fit_json(const FnarFit& fit) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["estimator"] = fit.estimator == Estimator::sur ? "sur" : "ols";
  j["heterogeneous"] = fit.heterogeneous;
  j["r"] = fit.r;
  j["nodes"] = fit.nodes;
  j["rho"] = vector_json(fit.rho);
  j["rho_se"] = vector_json(fit.rho_se);
  j["alpha"] = vector_json(fit.alpha);
  j["alpha_se"] = vector_json(fit.alpha_se);
  j["sigma_nu"] = matrix_json(fit.sigma_nu);
  j["dof_divisor"] = fit.dof_divisor;
  if (fit.heterogeneous) {
    j["beta_het"] = matrix_json(fit.beta_het);
    j["beta_het_se"] = matrix_json(fit.beta_het_se);
  } else {
    j["beta"] = vector_json(fit.beta);
    j["beta_se"] = vector_json(fit.beta_se);
    j["names"] = coefficient_names(fit.r, fit.nodes);
  }
  return j;
}

nlohmann::json bootstrap_json(const BootstrapResult& result) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["iterations"] = result.iterations;
  j["failures"] = result.failures;
  j["seed"] = result.seed;
  j["level"] = result.level;
  j["names"] = result.names;
  j["point"] = vector_json(result.means);
  j["lower"] = vector_json(result.lower);
  j["upper"] = vector_json(result.upper);
  return j;
}

nlohmann::json forecast_json(const ForecastReport& report) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["models"] = report.model_names;
  j["nodes"] = report.nodes;
  j["first_train_end"] = report.first_train_end;
  j["last_train_end"] = report.last_train_end;
  j["n_windows"] = report.n_windows;
  j["mse"] = matrix_json(report.mse);
  j["mse_ratio"] = matrix_json(report.mse_ratio);
  nlohmann::json dm = nlohmann::json::array();
  for (const auto& per_model : report.dm) {
    nlohmann::json row = nlohmann::json::array();
    for (const DmResult& cell : per_model)
      row.push_back({{"statistic", cell.statistic},
                     {"p_value", cell.p_value},
                     {"undefined", cell.undefined}});
    dm.push_back(std::move(row));
  }
  j["dm"] = std::move(dm);
  return j;
}

nlohmann::json rate_json(const RateTable& table) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  nlohmann::json cells = nlohmann::json::array();
  for (const RateCell& cell : table.cells)
    cells.push_back({{"n_layers", cell.n_layers},
                     {"n_periods", cell.n_periods},
                     {"loading_error", cell.loading_error},
                     {"factor_error", cell.factor_error}});
  j["cells"] = std::move(cells);
  j["loading_slope_vs_periods"] = table.loading_slope_vs_periods;
  j["factor_slope_vs_periods"] = table.factor_slope_vs_periods;
  j["loading_slope_vs_layers"] = table.loading_slope_vs_layers;
  j["factor_slope_vs_layers"] = table.factor_slope_vs_layers;
  return j;
}

nlohmann::json coefficient_rate_json(const CoefficientRateTable& table) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  nlohmann::json cells = nlohmann::json::array();
  for (const CoefficientRateCell& cell : table.cells)
    cells.push_back({{"n_layers", cell.n_layers},
                     {"n_periods", cell.n_periods},
                     {"theta_error", cell.theta_error},
                     {"oracle_error", cell.oracle_error},
                     {"estimation_gap", cell.estimation_gap}});
  j["cells"] = std::move(cells);
  return j;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out.good()) throw IoError(path + ": write failed");
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& error) {
    throw IoError(path + ": " + error.what());
  }
}

}  // namespace fnar
