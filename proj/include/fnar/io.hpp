#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fnar/bootstrap.hpp"
#include "fnar/forecastlab.hpp"
#include "fnar/montecarlo.hpp"
#include "fnar/netweights.hpp"

namespace fnar {

/// Version stamp carried by every JSON artifact and checked on read.
inline constexpr int kSchemaVersion = 1;

/// Thrown for file-system and file-format failures: unreadable paths,
/// malformed CSV or JSON, schema mismatches. Messages carry the path and,
/// for row-level problems, the 1-based line number.
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Plain comma-separated values: no quoting or escaping, one header row,
/// blank lines ignored. line_numbers maps each data row to its 1-based
/// position in the file.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
};

CsvTable read_csv_file(const std::string& path);
void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

/// Directed flow observations, header `period,layer,reporter,partner,value`.
/// Label order is first appearance; a file with no data rows is an error.
std::vector<FlowRecord> read_flow_csv(const std::string& path);

/// Endogenous panel, header `period,node,value`. Periods and nodes are
/// ordered by first appearance; the (period, node) grid must be complete
/// with no duplicates.
PanelSeries read_series_csv(const std::string& path);
void write_series_csv(const PanelSeries& y, const std::string& path);

/// Weight-panel bundle: a directory holding panel_meta.json plus
/// panel_weights.csv (and panel_flows.csv when flows are attached) with one
/// row per nonzero entry in (period, layer, row, col) order. Isolated rows
/// are recovered from all-zero weight rows, so the round trip is exact.
void write_panel(const WeightPanel& panel, const std::string& dir);
WeightPanel read_panel(const std::string& dir);

nlohmann::json vector_json(const Vector& v);
nlohmann::json matrix_json(const Matrix& m);

nlohmann::json loadings_json(const FactorModel& model);
nlohmann::json fit_json(const FnarFit& fit);
nlohmann::json bootstrap_json(const BootstrapResult& result);
nlohmann::json forecast_json(const ForecastReport& report);
nlohmann::json rate_json(const RateTable& table);
nlohmann::json coefficient_rate_json(const CoefficientRateTable& table);

/// Two-space indented dump with a trailing newline. Key order is the
/// library's sorted order, so identical values give identical bytes.
void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

}  // namespace fnar
