#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fnar/bootstrap.hpp"
#include "fnar/fnar.hpp"
#include "fnar/forecastlab.hpp"
#include "fnar/io.hpp"
#include "fnar/montecarlo.hpp"
#include "fnar/netfactors.hpp"
#include "fnar/netweights.hpp"

using nlohmann::json;
using namespace fnar;

namespace {

// ---------------------------------------------------------------------------
// Logging (stderr, controlled by FNAR_LOG_LEVEL: error|warn|info|debug)

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("FNAR_LOG_LEVEL");
    if (!env) return 1;
    const std::string name(env);
    if (name == "error") return 0;
    if (name == "warn") return 1;
    if (name == "info") return 2;
    if (name == "debug") return 3;
    std::cerr << "[warn] unknown FNAR_LOG_LEVEL '" << name << "', using warn\n";
    return 1;
  }();
  return level;
}

void log_warn(const std::string& message) {
  if (log_level() >= 1) std::cerr << "[warn] " << message << "\n";
}

void log_info(const std::string& message) {
  if (log_level() >= 2) std::cerr << "[info] " << message << "\n";
}

// ---------------------------------------------------------------------------
// Config plumbing: strict key validation, typed accessors

[[noreturn]] void bad_config(const std::string& message) {
  throw InvalidInput("config: " + message);
}

void check_keys(const json& j, const std::string& context,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad_config(context + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) bad_config("unknown key '" + item.key() + "' in " + context);
  }
}

std::string get_string(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) bad_config(context + " requires '" + key + "'");
  if (!j[key].is_string()) bad_config(context + "." + key + " must be a string");
  return j[key].get<std::string>();
}

std::string opt_string(const json& j, const char* key, const std::string& context,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) bad_config(context + "." + key + " must be a string");
  return j[key].get<std::string>();
}

double opt_double(const json& j, const char* key, const std::string& context,
                  double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) bad_config(context + "." + key + " must be a number");
  return j[key].get<double>();
}

long long opt_integer(const json& j, const char* key, const std::string& context,
                      long long fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) bad_config(context + "." + key + " must be an integer");
  return j[key].get<long long>();
}

long long get_integer(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) bad_config(context + " requires '" + key + "'");
  if (!j[key].is_number_integer()) bad_config(context + "." + key + " must be an integer");
  return j[key].get<long long>();
}

bool opt_bool(const json& j, const char* key, const std::string& context, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) bad_config(context + "." + key + " must be a boolean");
  return j[key].get<bool>();
}

std::vector<std::string> get_string_list(const json& j, const char* key,
                                         const std::string& context) {
  if (!j.contains(key)) bad_config(context + " requires '" + key + "'");
  if (!j[key].is_array()) bad_config(context + "." + key + " must be an array");
  std::vector<std::string> out;
  for (const auto& item : j[key]) {
    if (!item.is_string()) bad_config(context + "." + key + " must hold strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

Vector opt_vector(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) return Vector();
  if (!j[key].is_array()) bad_config(context + "." + key + " must be an array");
  Vector out(j[key].size());
  Index i = 0;
  for (const auto& item : j[key]) {
    if (!item.is_number()) bad_config(context + "." + key + " must hold numbers");
    out(i++) = item.get<double>();
  }
  return out;
}

std::vector<Index> opt_index_list(const json& j, const char* key,
                                  const std::string& context,
                                  std::vector<Index> fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_array()) bad_config(context + "." + key + " must be an array");
  std::vector<Index> out;
  for (const auto& item : j[key]) {
    if (!item.is_number_integer()) bad_config(context + "." + key + " must hold integers");
    out.push_back(item.get<Index>());
  }
  return out;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const json config = read_json_file(path);
  check_keys(config, "top level",
             {"flows_csv", "endogenous_csv", "panel_dir", "output_dir", "nodes",
              "layers", "periods", "r", "r_max", "estimator", "heterogeneous",
              "smoothing", "frequency_map", "bootstrap", "forecast", "simulate",
              "seed"});
  return config;
}

// Rank request: a fixed integer or "auto" (eigenvalue-ratio selection).
std::optional<int> parse_rank(const json& config) {
  if (!config.contains("r")) return std::nullopt;
  if (config["r"].is_number_integer()) {
    const int r = config["r"].get<int>();
    if (r < 1) bad_config("r must be a positive integer or \"auto\"");
    return r;
  }
  if (config["r"].is_string() && config["r"].get<std::string>() == "auto")
    return std::nullopt;
  bad_config("r must be a positive integer or \"auto\"");
}

int resolve_rank(const json& config, const WeightPanel& panel) {
  const std::optional<int> fixed = parse_rank(config);
  if (fixed) return *fixed;
  const long long fallback = std::min<long long>(panel.n_layers() - 1, 10);
  const int r_max =
      static_cast<int>(opt_integer(config, "r_max", "top level", fallback));
  const RankChoice choice = select_rank(panel, r_max);
  if (choice.degenerate)
    log_warn("rank selection saw a flat spectrum; using rank " +
             std::to_string(choice.rank));
  log_info("selected rank " + std::to_string(choice.rank) + " by eigenvalue ratio");
  return choice.rank;
}

Estimator parse_estimator(const json& config) {
  const std::string name = opt_string(config, "estimator", "top level", "sur");
  if (name == "ols") return Estimator::ols;
  if (name == "sur") return Estimator::sur;
  bad_config("estimator must be \"ols\" or \"sur\"");
}

std::uint64_t resolve_seed(const json& config, const std::optional<std::uint64_t>& cli) {
  if (cli) return *cli;
  if (!config.contains("seed")) return 1;
  if (!config["seed"].is_number_unsigned() && !config["seed"].is_number_integer())
    bad_config("seed must be a nonnegative integer");
  const long long seed = config["seed"].get<long long>();
  if (seed < 0) bad_config("seed must be a nonnegative integer");
  return static_cast<std::uint64_t>(seed);
}

std::string resolve_out_dir(const json& config, const std::string& cli_out) {
  std::string dir = cli_out.empty()
                        ? opt_string(config, "output_dir", "top level", "")
                        : cli_out;
  if (dir.empty()) bad_config("no output directory (set output_dir or pass --out)");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory: " + ec.message());
  return dir;
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces

WeightPanel load_panel(const json& config) {
  return read_panel(get_string(config, "panel_dir", "top level"));
}

/// Endogenous series with columns reordered to the panel's node order.
PanelSeries load_series(const json& config, const WeightPanel& panel) {
  PanelSeries y = read_series_csv(get_string(config, "endogenous_csv", "top level"));
  if (y.nodes == panel.nodes) return y;
  const std::set<std::string> have(y.nodes.begin(), y.nodes.end());
  const std::set<std::string> want(panel.nodes.begin(), panel.nodes.end());
  if (have != want)
    bad_config("endogenous nodes do not match the panel's node set");
  Matrix reordered(y.values.rows(), y.values.cols());
  for (std::size_t i = 0; i < panel.nodes.size(); ++i) {
    const auto at = std::find(y.nodes.begin(), y.nodes.end(), panel.nodes[i]);
    reordered.col(static_cast<Index>(i)) =
        y.values.col(at - y.nodes.begin());
  }
  y.nodes = panel.nodes;
  y.values = std::move(reordered);
  log_info("reordered endogenous columns to the panel's node order");
  return y;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_ingest(const json& config, const std::string& out_dir) {
  const std::string flows_path = get_string(config, "flows_csv", "top level");
  const std::vector<std::string> nodes = get_string_list(config, "nodes", "top level");
  const std::vector<std::string> layers = get_string_list(config, "layers", "top level");

  // Validate the optional blocks before touching any data.
  std::vector<std::string> smooth_layers;
  int smooth_window = 0;
  if (config.contains("smoothing")) {
    const json& smoothing = config["smoothing"];
    check_keys(smoothing, "smoothing", {"layers", "window"});
    smooth_layers = get_string_list(smoothing, "layers", "smoothing");
    smooth_window = static_cast<int>(get_integer(smoothing, "window", "smoothing"));
  }
  FrequencyMap frequency;
  if (config.contains("frequency_map")) {
    const json& mapping = config["frequency_map"];
    check_keys(mapping, "frequency_map", {"targets", "sources"});
    frequency.targets = get_string_list(mapping, "targets", "frequency_map");
    frequency.sources = get_string_list(mapping, "sources", "frequency_map");
  }

  const std::vector<FlowRecord> records = read_flow_csv(flows_path);

  // Duplicate (period, layer, reporter, partner) rows are legal and summed;
  // surface them because they usually signal an upstream join problem.
  std::map<std::array<std::string, 4>, int> multiplicity;
  for (const FlowRecord& record : records)
    ++multiplicity[{record.period, record.layer, record.reporter, record.partner}];
  long long duplicates = 0;
  for (const auto& [key, count] : multiplicity)
    if (count > 1) duplicates += count - 1;
  if (duplicates > 0)
    log_warn(std::to_string(duplicates) + " duplicate flow rows were summed");

  std::vector<std::string> periods;
  if (config.contains("periods")) {
    periods = get_string_list(config, "periods", "top level");
  } else {
    std::set<std::string> seen;
    for (const FlowRecord& record : records)
      if (seen.insert(record.period).second) periods.push_back(record.period);
  }

  const std::vector<FlowRecord> filled = fill_missing(records, {periods});
  WeightPanel panel = build_symmetric_share_weights(filled, nodes, layers, periods);

  if (!smooth_layers.empty()) {
    panel = moving_average_smooth(panel, smooth_layers, smooth_window);
    log_info("smoothed " + std::to_string(smooth_layers.size()) + " layers, window " +
             std::to_string(smooth_window));
  }

  if (!frequency.targets.empty()) {
    panel = expand_to_frequency(panel, frequency);
    log_info("expanded panel to " + std::to_string(panel.n_periods()) + " periods");
  }

  write_panel(panel, out_dir + "/panel");

  const PanelValidation validation = validate_weight_panel(panel);
  json report;
  report["schema_version"] = kSchemaVersion;
  report["flows_read"] = records.size();
  report["duplicate_rows_summed"] = duplicates;
  report["nodes"] = panel.nodes;
  report["layers"] = panel.layers;
  report["periods"] = panel.periods;
  report["validation"] = {{"max_row_sum_error", validation.max_row_sum_error},
                          {"max_abs_diagonal", validation.max_abs_diagonal},
                          {"min_weight", validation.min_weight},
                          {"isolated_rows", validation.isolated_rows}};
  report["layer_similarity"] = matrix_json(cosine_similarity_matrix(panel));
  write_json_file(report, out_dir + "/ingest_report.json");
  log_info("panel written to " + out_dir + "/panel");
}

void cmd_factors(const json& config, const std::string& out_dir) {
  const WeightPanel panel = load_panel(config);
  const int r = resolve_rank(config, panel);
  const FactorEstimate est = estimate_factor_model(panel, r);
  const FactorModel& model = est.model;

  write_json_file(loadings_json(model), out_dir + "/loadings.json");

  // One CSV per period, indexed by position with the label inside.
  const std::string factor_dir = out_dir + "/factors";
  std::error_code ec;
  std::filesystem::create_directories(factor_dir, ec);
  if (ec) throw IoError(factor_dir + ": cannot create directory: " + ec.message());
  const int width = static_cast<int>(std::to_string(panel.n_periods() - 1).size());
  std::vector<std::string> header = {"period", "row", "col"};
  for (int k = 0; k < r; ++k) header.push_back("f" + std::to_string(k + 1));
  for (Index t = 0; t < panel.n_periods(); ++t) {
    std::vector<std::vector<std::string>> rows;
    for (Index i = 0; i < panel.n_nodes(); ++i)
      for (Index j = 0; j < panel.n_nodes(); ++j) {
        std::vector<std::string> row = {panel.periods[t], panel.nodes[i],
                                        panel.nodes[j]};
        for (int k = 0; k < r; ++k)
          row.push_back(format_double(model.factors[t](i, j, k)));
        rows.push_back(std::move(row));
      }
    char name[32];
    std::snprintf(name, sizeof name, "factor_%0*lld.csv", width,
                  static_cast<long long>(t));
    write_csv_file(factor_dir + "/" + name, header, rows);
  }

  const VarianceShares shares = variance_explained(panel, model);
  std::vector<std::vector<std::string>> variance_rows;
  for (int k = 0; k < r; ++k)
    variance_rows.push_back(
        {"f" + std::to_string(k + 1), format_double(shares.per_factor(k))});
  variance_rows.push_back({"total", format_double(shares.total)});
  write_csv_file(out_dir + "/variance.csv", {"component", "share"}, variance_rows);

  const RowSumStats stats = factor_row_sums(model);
  std::vector<std::vector<std::string>> sum_rows;
  for (int k = 0; k < r; ++k)
    sum_rows.push_back({"f" + std::to_string(k + 1),
                        format_double(stats.common_row_sum(k)),
                        format_double(stats.avg_abs_row_sum(k)),
                        format_double(stats.avg_sq_row_sum(k))});
  write_csv_file(out_dir + "/row_sums.csv",
                 {"component", "common_row_sum", "avg_abs_row_sum", "avg_sq_row_sum"},
                 sum_rows);

  // Top 10 directed links per factor by explained variance share.
  std::vector<std::vector<std::string>> link_rows;
  for (int k = 0; k < r; ++k) {
    std::vector<std::tuple<double, Index, Index>> ranked;
    for (Index i = 0; i < panel.n_nodes(); ++i)
      for (Index j = 0; j < panel.n_nodes(); ++j) {
        if (i == j) continue;
        const auto link = variance_explained_link(panel, model, i, j);
        if (link) ranked.emplace_back((*link)(k), i, j);
      }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    });
    const std::size_t keep = std::min<std::size_t>(10, ranked.size());
    for (std::size_t rank = 0; rank < keep; ++rank) {
      const auto& [share, i, j] = ranked[rank];
      link_rows.push_back({"f" + std::to_string(k + 1), std::to_string(rank + 1),
                           panel.nodes[i], panel.nodes[j], format_double(share)});
    }
  }
  write_csv_file(out_dir + "/top_links.csv",
                 {"component", "rank", "row", "col", "share"}, link_rows);
}

FnarFit fit_from_config(const json& config, const PanelSeries& y,
                        const FactorModel& model) {
  const Estimator estimator = parse_estimator(config);
  const bool heterogeneous = opt_bool(config, "heterogeneous", "top level", false);
  if (heterogeneous) return fit_heterogeneous(y, model, estimator);
  return estimator == Estimator::sur ? fit_sur(y, model) : fit_ols(y, model);
}

void cmd_estimate(const json& config, const std::string& out_dir) {
  const WeightPanel panel = load_panel(config);
  const PanelSeries y = load_series(config, panel);
  const int r = resolve_rank(config, panel);
  const FactorEstimate est = estimate_factor_model(panel, r);
  const FnarFit fit = fit_from_config(config, y, est.model);

  json artifact = fit_json(fit);
  if (!fit.heterogeneous)
    artifact["layer_coefficients"] = vector_json(rescale_to_layers(fit, est.model));
  write_json_file(artifact, out_dir + "/estimate.json");
}

void cmd_bootstrap(const json& config, const std::string& out_dir, std::uint64_t seed) {
  if (opt_bool(config, "heterogeneous", "top level", false))
    bad_config("bootstrap supports the pooled fit only");
  BootstrapOptions options;
  options.seed = seed;
  if (config.contains("bootstrap")) {
    const json& boot = config["bootstrap"];
    check_keys(boot, "bootstrap", {"B", "seed", "level"});
    options.iterations = static_cast<int>(opt_integer(boot, "B", "bootstrap", 1000));
    options.level = opt_double(boot, "level", "bootstrap", 0.95);
    const long long own = opt_integer(boot, "seed", "bootstrap", -1);
    if (own >= 0) options.seed = static_cast<std::uint64_t>(own);
  }

  const WeightPanel panel = load_panel(config);
  const PanelSeries y = load_series(config, panel);
  const int r = resolve_rank(config, panel);
  const FactorEstimate est = estimate_factor_model(panel, r);
  const FnarFit fit = fit_from_config(config, y, est.model);
  const BootstrapResult result = run_bootstrap(panel, y, est.model, fit, options);
  if (result.failures > 0)
    log_warn(std::to_string(result.failures) + " bootstrap iterations failed");

  write_json_file(bootstrap_json(result), out_dir + "/bootstrap.json");
  std::vector<std::vector<std::string>> rows;
  for (Index b = 0; b < result.draws.rows(); ++b) {
    std::vector<std::string> row;
    for (Index p = 0; p < result.draws.cols(); ++p)
      row.push_back(format_double(result.draws(b, p)));
    rows.push_back(std::move(row));
  }
  write_csv_file(out_dir + "/draws.csv", result.names, rows);
}

ForecastModel parse_model_name(const std::string& name) {
  if (name == "fnar") return ForecastModel::fnar;
  if (name == "ar1") return ForecastModel::ar1;
  if (name == "pc_ar") return ForecastModel::pc_ar;
  if (name == "lasso_var") return ForecastModel::lasso_var;
  if (name == "minnesota_bvar") return ForecastModel::minnesota_bvar;
  bad_config("unknown forecast model '" + name + "'");
}

void cmd_forecast(const json& config, const std::string& out_dir) {
  if (opt_bool(config, "heterogeneous", "top level", false))
    bad_config("forecast uses the pooled fit only");
  if (!config.contains("forecast")) bad_config("forecast command requires 'forecast'");
  const json& fc = config["forecast"];
  check_keys(fc, "forecast",
             {"plan", "models", "pc_components", "lasso", "bvar", "dm_hac_lags"});
  if (!fc.contains("plan")) bad_config("forecast requires 'plan'");
  const json& plan_json = fc["plan"];
  check_keys(plan_json, "forecast.plan", {"first_train_end", "last_train_end"});
  WindowPlan plan;
  plan.first_train_end = get_integer(plan_json, "first_train_end", "forecast.plan");
  plan.last_train_end = get_integer(plan_json, "last_train_end", "forecast.plan");

  std::vector<ForecastModel> models;
  if (fc.contains("models"))
    for (const std::string& name : get_string_list(fc, "models", "forecast"))
      models.push_back(parse_model_name(name));
  else
    models = {ForecastModel::fnar, ForecastModel::ar1, ForecastModel::pc_ar,
              ForecastModel::lasso_var, ForecastModel::minnesota_bvar};

  ForecastConfig settings;
  settings.fnar_estimator = parse_estimator(config);
  settings.pc_components =
      static_cast<int>(opt_integer(fc, "pc_components", "forecast", 4));
  settings.dm_hac_lags = static_cast<int>(opt_integer(fc, "dm_hac_lags", "forecast", 0));
  if (fc.contains("lasso")) {
    const json& lasso = fc["lasso"];
    check_keys(lasso, "forecast.lasso",
               {"cv_folds", "grid_size", "grid_floor", "tol", "max_iter"});
    settings.lasso.cv_folds =
        static_cast<int>(opt_integer(lasso, "cv_folds", "forecast.lasso", 10));
    settings.lasso.grid_size =
        static_cast<int>(opt_integer(lasso, "grid_size", "forecast.lasso", 50));
    settings.lasso.grid_floor = opt_double(lasso, "grid_floor", "forecast.lasso", 1e-3);
    settings.lasso.tol = opt_double(lasso, "tol", "forecast.lasso", 1e-7);
    settings.lasso.max_iter =
        static_cast<int>(opt_integer(lasso, "max_iter", "forecast.lasso", 100000));
  }
  if (fc.contains("bvar")) {
    const json& bvar = fc["bvar"];
    check_keys(bvar, "forecast.bvar", {"tightness", "cross_weight", "prior_own_mean"});
    settings.bvar.tightness = opt_double(bvar, "tightness", "forecast.bvar", 0.1);
    settings.bvar.cross_weight = opt_double(bvar, "cross_weight", "forecast.bvar", 1.0);
    settings.bvar.prior_own_mean =
        opt_double(bvar, "prior_own_mean", "forecast.bvar", 0.0);
  }

  const WeightPanel panel = load_panel(config);
  const PanelSeries y = load_series(config, panel);
  const bool needs_model =
      std::find(models.begin(), models.end(), ForecastModel::fnar) != models.end();

  ForecastReport report;
  if (needs_model) {
    const int r = resolve_rank(config, panel);
    const FactorEstimate est = estimate_factor_model(panel, r);
    report = run_comparison(y, est.model, plan, models, settings);
  } else {
    report = run_comparison(y, plan, models, settings);
  }

  write_json_file(forecast_json(report), out_dir + "/forecast.json");

  std::vector<std::vector<std::string>> mse_rows;
  for (std::size_t m = 0; m < report.models.size(); ++m)
    for (Index i = 0; i < static_cast<Index>(report.nodes.size()); ++i)
      mse_rows.push_back({report.model_names[m], report.nodes[i],
                          format_double(report.mse(m, i)),
                          format_double(report.mse_ratio(m, i))});
  write_csv_file(out_dir + "/forecast_mse.csv", {"model", "node", "mse", "mse_ratio"},
                 mse_rows);

  std::vector<std::vector<std::string>> error_rows;
  for (std::size_t m = 0; m < report.models.size(); ++m)
    for (Index w = 0; w < report.n_windows; ++w)
      for (Index i = 0; i < static_cast<Index>(report.nodes.size()); ++i)
        error_rows.push_back({report.model_names[m], std::to_string(w),
                              report.nodes[i],
                              format_double(report.forecast_errors[m](w, i))});
  write_csv_file(out_dir + "/forecast_errors.csv", {"model", "window", "node", "error"},
                 error_rows);
}

void cmd_simulate(const json& config, const std::string& out_dir, std::uint64_t seed) {
  RateExperimentConfig experiment;
  experiment.base.n_nodes = 10;
  experiment.base.r = 2;
  experiment.base.noise_scale = 0.03;
  experiment.base.seed = seed;
  experiment.layer_sizes = {20, 40, 80};
  experiment.period_counts = {100, 400, 1600};
  experiment.replications = 50;
  std::string kind = "loading";

  if (config.contains("simulate")) {
    const json& sim = config["simulate"];
    check_keys(sim, "simulate",
               {"experiment", "n_nodes", "r", "noise_scale", "innovation_sd",
                "factor_ar", "noise_layer_ar", "innovation_cross", "beta", "rho",
                "alpha", "loading_strength", "innovation_scales", "layer_sizes",
                "period_counts", "cross_product", "replications"});
    kind = opt_string(sim, "experiment", "simulate", "loading");
    if (kind != "loading" && kind != "coefficient")
      bad_config("simulate.experiment must be \"loading\" or \"coefficient\"");
    experiment.base.n_nodes =
        static_cast<Index>(opt_integer(sim, "n_nodes", "simulate", 10));
    experiment.base.r = static_cast<int>(opt_integer(sim, "r", "simulate", 2));
    experiment.base.noise_scale = opt_double(sim, "noise_scale", "simulate", 0.03);
    experiment.base.innovation_sd =
        opt_double(sim, "innovation_sd", "simulate", experiment.base.innovation_sd);
    experiment.base.factor_ar = opt_double(sim, "factor_ar", "simulate", 0.0);
    experiment.base.noise_layer_ar = opt_double(sim, "noise_layer_ar", "simulate", 0.0);
    experiment.base.innovation_cross =
        opt_double(sim, "innovation_cross", "simulate", 0.0);
    experiment.base.beta = opt_vector(sim, "beta", "simulate");
    experiment.base.rho = opt_vector(sim, "rho", "simulate");
    experiment.base.alpha = opt_vector(sim, "alpha", "simulate");
    experiment.base.loading_strength = opt_vector(sim, "loading_strength", "simulate");
    experiment.base.innovation_scales =
        opt_vector(sim, "innovation_scales", "simulate");
    experiment.layer_sizes =
        opt_index_list(sim, "layer_sizes", "simulate", experiment.layer_sizes);
    experiment.period_counts =
        opt_index_list(sim, "period_counts", "simulate", experiment.period_counts);
    experiment.cross_product = opt_bool(sim, "cross_product", "simulate", true);
    experiment.replications =
        static_cast<int>(opt_integer(sim, "replications", "simulate", 50));
  }

  if (kind == "coefficient") {
    const CoefficientRateTable table = coefficient_rate_experiment(experiment);
    write_json_file(coefficient_rate_json(table), out_dir + "/rates.json");
    std::vector<std::vector<std::string>> rows;
    for (const CoefficientRateCell& cell : table.cells)
      rows.push_back({std::to_string(cell.n_layers), std::to_string(cell.n_periods),
                      format_double(cell.theta_error), format_double(cell.oracle_error),
                      format_double(cell.estimation_gap)});
    write_csv_file(out_dir + "/rates.csv",
                   {"n_layers", "n_periods", "theta_error", "oracle_error",
                    "estimation_gap"},
                   rows);
    return;
  }

  const RateTable table = loading_rate_experiment(experiment);
  write_json_file(rate_json(table), out_dir + "/rates.json");
  std::vector<std::vector<std::string>> rows;
  for (const RateCell& cell : table.cells)
    rows.push_back({std::to_string(cell.n_layers), std::to_string(cell.n_periods),
                    format_double(cell.loading_error),
                    format_double(cell.factor_error)});
  write_csv_file(out_dir + "/rates.csv",
                 {"n_layers", "n_periods", "loading_error", "factor_error"}, rows);
  log_info("loading error slope vs periods: " +
           format_double(table.loading_slope_vs_periods));
}

void emit_error(const std::string& type, const std::string& message) {
  json j;
  j["error"] = {{"type", type}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factor network autoregression toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_value = 0;
  std::vector<CLI::Option*> seed_options;

  const auto add_common = [&](CLI::App* sub, bool config_required) {
    CLI::Option* config =
        sub->add_option("--config", config_path, "JSON run configuration");
    if (config_required) config->required();
    sub->add_option("--out", out_override, "Output directory (overrides output_dir)");
    seed_options.push_back(
        sub->add_option("--seed", seed_value, "Master seed (overrides config)"));
  };

  CLI::App* ingest =
      app.add_subcommand("ingest", "Build a weight panel from flow records");
  add_common(ingest, true);
  CLI::App* factors =
      app.add_subcommand("factors", "Extract network factors from a panel");
  add_common(factors, true);
  CLI::App* estimate =
      app.add_subcommand("estimate", "Fit the network autoregression");
  add_common(estimate, true);
  CLI::App* bootstrap_cmd =
      app.add_subcommand("bootstrap", "Residual bootstrap confidence intervals");
  add_common(bootstrap_cmd, true);
  CLI::App* forecast =
      app.add_subcommand("forecast", "Recursive out-of-sample model comparison");
  add_common(forecast, true);
  CLI::App* simulate =
      app.add_subcommand("simulate", "Synthetic-panel rate experiments");
  add_common(simulate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    if (error.get_exit_code() == 0) return app.exit(error);
    emit_error("config", error.what());
    return 2;
  }

  std::optional<std::uint64_t> cli_seed;
  for (const CLI::Option* option : seed_options)
    if (option->count() > 0) cli_seed = seed_value;

  try {
    const json config = load_config(config_path);
    const std::uint64_t seed = resolve_seed(config, cli_seed);
    const std::string out_dir = resolve_out_dir(config, out_override);
    if (*ingest) cmd_ingest(config, out_dir);
    if (*factors) cmd_factors(config, out_dir);
    if (*estimate) cmd_estimate(config, out_dir);
    if (*bootstrap_cmd) cmd_bootstrap(config, out_dir, seed);
    if (*forecast) cmd_forecast(config, out_dir);
    if (*simulate) cmd_simulate(config, out_dir, seed);
    return 0;
  } catch (const IoError& error) {
    emit_error("io", error.what());
    return 2;
  } catch (const InvalidInput& error) {
    emit_error("config", error.what());
    return 2;
  } catch (const nlohmann::json::exception& error) {
    emit_error("config", error.what());
    return 2;
  } catch (const NumericError& error) {
    emit_error("numeric", error.what());
    return 3;
  } catch (const std::exception& error) {
    emit_error("internal", error.what());
    return 1;
  }
}
