#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fnar/fnar.hpp"
#include "fnar/io.hpp"
#include "fnar/montecarlo.hpp"
#include "test_util.hpp"

using namespace fnar;
using testutil::max_abs_diff;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fnar_io_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void spit(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

bool message_contains(const IoError& error, const std::string& needle) {
  return std::string(error.what()).find(needle) != std::string::npos;
}

WeightPanel small_panel() {
  const std::vector<FlowRecord> records = {
      {"2020", "trade", "a", "b", 2.0}, {"2020", "trade", "a", "c", 1.0},
      {"2021", "trade", "a", "b", 3.0},
  };
  return build_symmetric_share_weights(records, {"a", "b", "c"}, {"trade"},
                                       {"2020", "2021"});
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.6) == "0.6");
  CHECK(format_double(2.0 / 3.0) == "0.6666666666666666");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-0.0) == "-0");
  CHECK(format_double(1e-300) == "1e-300");

  for (double value : {0.1, 1.0 / 3.0, 2.0 / 3.0, 1e-300, 6004799503160661.0,
                       -123456.789012345678, 5e-324}) {
    const std::string text = format_double(value);
    CHECK(std::strtod(text.c_str(), nullptr) == value);
  }
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-1.0 / 0.0) == "-inf");
}

TEST_CASE("csv reader handles headers, blanks, and malformed rows") {
  const auto dir = temp_dir("csv");

  CHECK_THROWS_AS(read_csv_file((dir / "absent.csv").string()), IoError);

  spit(dir / "empty.csv", "");
  CHECK_THROWS_AS(read_csv_file((dir / "empty.csv").string()), IoError);

  spit(dir / "header_only.csv", "a,b\n");
  const CsvTable bare = read_csv_file((dir / "header_only.csv").string());
  CHECK(bare.header == std::vector<std::string>{"a", "b"});
  CHECK(bare.rows.empty());

  spit(dir / "crlf.csv", "a,b\r\n1,2\r\n\r\n3,4\r\n");
  const CsvTable crlf = read_csv_file((dir / "crlf.csv").string());
  CHECK(crlf.rows.size() == 2);
  CHECK(crlf.rows[1] == std::vector<std::string>{"3", "4"});
  CHECK(crlf.line_numbers == std::vector<int>{2, 4});

  spit(dir / "ragged.csv", "a,b\n1,2\n1,2,3\n");
  try {
    read_csv_file((dir / "ragged.csv").string());
    FAIL("expected IoError");
  } catch (const IoError& error) {
    CHECK(message_contains(error, "line 3"));
    CHECK(message_contains(error, "expected 2 fields, got 3"));
  }
}

TEST_CASE("flow csv enforces its schema") {
  const auto dir = temp_dir("flows");

  spit(dir / "good.csv",
       "period,layer,reporter,partner,value\n"
       "2020,trade,a,b,2\n"
       "2020,trade,a,c,1.5\n");
  const auto records = read_flow_csv((dir / "good.csv").string());
  CHECK(records.size() == 2);
  CHECK(records[0].period == "2020");
  CHECK(records[0].reporter == "a");
  CHECK(records[1].value == 1.5);

  spit(dir / "bad_header.csv", "period,layer,from,to,value\n2020,t,a,b,1\n");
  try {
    read_flow_csv((dir / "bad_header.csv").string());
    FAIL("expected IoError");
  } catch (const IoError& error) {
    CHECK(message_contains(error, "expected header period,layer,reporter,partner,value"));
  }

  spit(dir / "bad_value.csv", "period,layer,reporter,partner,value\n2020,t,a,b,oops\n");
  try {
    read_flow_csv((dir / "bad_value.csv").string());
    FAIL("expected IoError");
  } catch (const IoError& error) {
    CHECK(message_contains(error, "line 2"));
    CHECK(message_contains(error, "not a number"));
  }

  spit(dir / "no_rows.csv", "period,layer,reporter,partner,value\n");
  CHECK_THROWS_AS(read_flow_csv((dir / "no_rows.csv").string()), IoError);
}

TEST_CASE("series csv keeps first-appearance order and demands a full grid") {
  const auto dir = temp_dir("series");

  spit(dir / "good.csv",
       "period,node,value\n"
       "q2,beta,2.5\n"
       "q2,alpha,1.5\n"
       "q1,alpha,1\n"
       "q1,beta,2\n");
  const PanelSeries y = read_series_csv((dir / "good.csv").string());
  CHECK(y.periods == std::vector<std::string>{"q2", "q1"});
  CHECK(y.nodes == std::vector<std::string>{"beta", "alpha"});
  CHECK(y.values(0, 0) == 2.5);  // (q2, beta)
  CHECK(y.values(1, 1) == 1.0);  // (q1, alpha)

  spit(dir / "duplicate.csv",
       "period,node,value\nq1,a,1\nq1,a,2\n");
  try {
    read_series_csv((dir / "duplicate.csv").string());
    FAIL("expected IoError");
  } catch (const IoError& error) {
    CHECK(message_contains(error, "line 3"));
    CHECK(message_contains(error, "duplicate observation"));
  }

  spit(dir / "gap.csv",
       "period,node,value\nq1,a,1\nq1,b,2\nq2,a,3\n");
  try {
    read_series_csv((dir / "gap.csv").string());
    FAIL("expected IoError");
  } catch (const IoError& error) {
    CHECK(message_contains(error, "missing value"));
    CHECK(message_contains(error, "'q2'"));
    CHECK(message_contains(error, "'b'"));
  }
}

TEST_CASE("series writer and reader round trip") {
  const auto dir = temp_dir("series_rt");
  SyntheticSpec spec;
  spec.n_nodes = 3;
  spec.n_layers = 6;
  spec.r = 1;
  spec.n_periods = 12;
  spec.seed = 41;
  const PanelSeries original = generate(spec).series;

  const std::string path = (dir / "series.csv").string();
  write_series_csv(original, path);
  const PanelSeries loaded = read_series_csv(path);
  CHECK(loaded.periods == original.periods);
  CHECK(loaded.nodes == original.nodes);
  CHECK(max_abs_diff(loaded.values, original.values) == 0.0);
}

TEST_CASE("panel bundle round trips exactly, isolated rows included") {
  const auto dir = temp_dir("panel_rt");
  const WeightPanel panel = small_panel();
  REQUIRE(panel.is_isolated(1, 2, 0));  // node c has no flows in 2021

  write_panel(panel, (dir / "bundle").string());
  const WeightPanel loaded = read_panel((dir / "bundle").string());

  CHECK(loaded.nodes == panel.nodes);
  CHECK(loaded.layers == panel.layers);
  CHECK(loaded.periods == panel.periods);
  REQUIRE(loaded.weights.size() == panel.weights.size());
  for (std::size_t t = 0; t < panel.weights.size(); ++t) {
    CHECK(max_abs_diff(loaded.weights[t], panel.weights[t]) == 0.0);
    CHECK(max_abs_diff(loaded.flows[t], panel.flows[t]) == 0.0);
  }
  CHECK(loaded.isolated == panel.isolated);

  // Re-serialization of the loaded panel is byte-identical.
  write_panel(loaded, (dir / "again").string());
  for (const char* file : {"panel_meta.json", "panel_weights.csv", "panel_flows.csv"})
    CHECK(slurp(dir / "bundle" / file) == slurp(dir / "again" / file));
}

TEST_CASE("panel bundle rejects corrupted inputs") {
  const auto base = temp_dir("panel_bad");
  const WeightPanel panel = small_panel();
  const std::string good = (base / "good").string();
  write_panel(panel, good);

  CHECK_THROWS_AS(read_panel((base / "missing").string()), IoError);

  auto copy_bundle = [&](const std::string& name) {
    const auto dst = base / name;
    std::filesystem::copy(good, dst);
    return dst;
  };

  {
    const auto dir = copy_bundle("version");
    nlohmann::json meta = read_json_file((dir / "panel_meta.json").string());
    meta["schema_version"] = kSchemaVersion + 1;
    write_json_file(meta, (dir / "panel_meta.json").string());
    try {
      read_panel(dir.string());
      FAIL("expected IoError");
    } catch (const IoError& error) {
      CHECK(message_contains(error, "unsupported schema version"));
    }
  }
  {
    const auto dir = copy_bundle("unknown_node");
    std::ofstream out(dir / "panel_weights.csv", std::ios::app);
    out << "2020,trade,zz,b,0.5\n";
    out.close();
    try {
      read_panel(dir.string());
      FAIL("expected IoError");
    } catch (const IoError& error) {
      CHECK(message_contains(error, "unknown node 'zz'"));
    }
  }
  {
    const auto dir = copy_bundle("duplicate_cell");
    std::ofstream out(dir / "panel_weights.csv", std::ios::app);
    out << "2020,trade,a,b,0.5\n";
    out.close();
    try {
      read_panel(dir.string());
      FAIL("expected IoError");
    } catch (const IoError& error) {
      CHECK(message_contains(error, "duplicate cell"));
    }
  }
  {
    const auto dir = copy_bundle("diagonal");
    std::ofstream out(dir / "panel_weights.csv", std::ios::app);
    out << "2020,trade,a,a,0.5\n";
    out.close();
    CHECK_THROWS_AS(read_panel(dir.string()), IoError);
  }
  {
    const auto dir = copy_bundle("broken_meta");
    spit(dir / "panel_meta.json", "{ not json");
    CHECK_THROWS_AS(read_panel(dir.string()), IoError);
  }
}

TEST_CASE("factor and fit artifacts carry the fitted values") {
  SyntheticSpec spec;
  spec.n_nodes = 4;
  spec.n_layers = 8;
  spec.r = 2;
  spec.n_periods = 40;
  spec.seed = 42;
  const SyntheticData d = generate(spec);
  const FactorEstimate est = estimate_factor_model(d.panel, 2);

  const nlohmann::json jl = loadings_json(est.model);
  CHECK(jl["schema_version"] == kSchemaVersion);
  CHECK(jl["r"] == 2);
  CHECK(jl["eigenvalues"].size() == 2);
  CHECK(jl["loadings"].size() == 8);
  CHECK(jl["loadings"][0].size() == 2);
  CHECK(jl["loadings"][3][1].get<double>() == est.model.loadings(3, 1));

  const FnarFit fit = fit_ols(d.series, est.model);
  const nlohmann::json jf = fit_json(fit);
  CHECK(jf["estimator"] == "ols");
  CHECK(jf["heterogeneous"] == false);
  CHECK(jf["beta"].size() == 2);
  CHECK(jf["beta"][0].get<double>() == fit.beta(0));
  CHECK(jf["rho"][3].get<double>() == fit.rho(3));
  CHECK(jf["names"].size() == fit.theta().size());
  CHECK(jf["sigma_nu"].size() == 4);

  const FnarFit het = fit_heterogeneous(d.series, est.model, Estimator::ols);
  const nlohmann::json jh = fit_json(het);
  CHECK(jh["heterogeneous"] == true);
  CHECK(jh["beta_het"].size() == 4);
  CHECK(jh.contains("beta") == false);
}

TEST_CASE("bootstrap and forecast artifacts carry the reported values") {
  SyntheticSpec spec;
  spec.n_nodes = 3;
  spec.n_layers = 6;
  spec.r = 1;
  spec.n_periods = 50;
  spec.seed = 43;
  const SyntheticData d = generate(spec);
  const FactorEstimate est = estimate_factor_model(d.panel, 1);
  const FnarFit fit = fit_ols(d.series, est.model);

  BootstrapOptions options;
  options.iterations = 4;
  options.seed = 7;
  const BootstrapResult boot = run_bootstrap(d.panel, d.series, est.model, fit, options);
  const nlohmann::json jb = bootstrap_json(boot);
  CHECK(jb["iterations"] == 4);
  CHECK(jb["seed"] == 7);
  CHECK(jb["point"].size() == boot.means.size());
  CHECK(jb["lower"][0].get<double>() == boot.lower(0));
  CHECK(jb["names"].size() == boot.names.size());

  WindowPlan plan;
  plan.first_train_end = 30;
  plan.last_train_end = 44;
  const ForecastReport report =
      run_comparison(d.series, est.model, plan, {ForecastModel::fnar, ForecastModel::ar1});
  const nlohmann::json jr = forecast_json(report);
  CHECK(jr["models"] == std::vector<std::string>{"fnar", "ar1"});
  CHECK(jr["n_windows"] == 15);
  CHECK(jr["mse"][1][2].get<double>() == report.mse(1, 2));
  CHECK(jr["mse_ratio"][1][0].get<double>() == 1.0);
  CHECK(jr["dm"][0][0]["undefined"] == true);
  CHECK(jr["dm"][1][0]["p_value"].get<double>() == report.dm[1][0].p_value);
}

TEST_CASE("rate tables serialize cell by cell and non-finite slopes become null") {
  RateTable table;
  table.cells = {{10, 100, 0.5, 0.25}, {20, 100, 0.35, 0.2}};
  table.loading_slope_vs_periods = -0.5;
  table.factor_slope_vs_periods = std::nan("");
  const nlohmann::json j = rate_json(table);
  CHECK(j["cells"].size() == 2);
  CHECK(j["cells"][1]["n_layers"] == 20);
  CHECK(j["cells"][0]["loading_error"] == 0.5);
  CHECK(j["loading_slope_vs_periods"] == -0.5);

  // Non-finite values have no JSON number form; they serialize as null.
  const auto dir = temp_dir("rates");
  write_json_file(j, (dir / "rates.json").string());
  const nlohmann::json back = read_json_file((dir / "rates.json").string());
  CHECK(back["factor_slope_vs_periods"].is_null());
  CHECK(back["loading_slope_vs_periods"] == -0.5);

  CoefficientRateTable coef;
  coef.cells = {{16, 200, 0.1, 0.05, 0.08}};
  const nlohmann::json jc = coefficient_rate_json(coef);
  CHECK(jc["cells"][0]["theta_error"] == 0.1);
  CHECK(jc["cells"][0]["estimation_gap"] == 0.08);
}

TEST_CASE("json files read back what was written") {
  const auto dir = temp_dir("json");
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["values"] = {1.5, 0.25, -3.0};
  j["label"] = "x";
  const std::string path = (dir / "x.json").string();
  write_json_file(j, path);
  CHECK(read_json_file(path) == j);

  // Identical content writes identical bytes.
  write_json_file(j, (dir / "y.json").string());
  CHECK(slurp(dir / "x.json") == slurp(dir / "y.json"));

  spit(dir / "broken.json", "{\"a\": ");
  try {
    read_json_file((dir / "broken.json").string());
    FAIL("expected IoError");
  } catch (const IoError& error) {
    CHECK(message_contains(error, "broken.json"));
  }
}

}  // TEST_SUITE
