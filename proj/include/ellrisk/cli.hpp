#pragma once

// Batch command-line surface: ingest, fit, stress, matrix, synth.
//
// Settings resolve in order defaults < --config JSON < ELLRISK_<KEY>
// environment variables < command-line flags. Paths inside a config file are
// relative to that file's directory.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ellrisk/estimation.hpp"
#include "ellrisk/io.hpp"
#include "ellrisk/stress.hpp"
#include "ellrisk/synthetic.hpp"

namespace ellrisk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kSuccess = 0, kInputError = 2, kNumericalError = 3, kPartialFailure = 4 };

struct RunConfig {
  std::string prices;
  std::string sectors;
  std::string out = "out";
  std::string panel;  // default <out>/panel.csv
  std::string model;  // default <out>/model.json
  std::string dist = "normal";
  std::optional<double> nu;
  double q = 0.95;
  std::string stress_policy = "empirical-var";
  std::vector<std::string> measures = {"L", "MI", "THETA", "DELTA", "B", "TVR", "COVAR"};
  std::uint64_t seed = 42;
  std::string eq_l_form = "literal";
  unsigned threads = 1;
  std::string dataset_id;

  fs::path out_dir() const { return out; }
  fs::path panel_path() const { return panel.empty() ? out_dir() / "panel.csv" : fs::path(panel); }
  fs::path groups_path() const {
    fs::path p = panel_path();
    return p.replace_filename(p.stem().string() + "_groups.csv");
  }
  fs::path model_path() const { return model.empty() ? out_dir() / "model.json" : fs::path(model); }
};

/// Keys accepted in config files, as environment variables (ELLRISK_ + upper
/// case) and as --flags (dashes for underscores).
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {"prices", "sectors", "out",   "panel",         "model",
                                                "dist",   "nu",      "q",     "stress_policy", "measures",
                                                "seed",   "eq_l_form", "threads", "dataset_id"};
  return keys;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = io::detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_number(const std::string& key, const std::string& v) {
  const auto parsed = io::detail::parse_number(io::detail::trim(v));
  if (!parsed) throw Error(ErrorCode::InvalidParameters, key + ": '" + v + "' is not a number");
  return *parsed;
}

/// Applies one textual setting (from the environment or a flag).
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "prices") cfg.prices = value;
  else if (key == "sectors") cfg.sectors = value;
  else if (key == "out") cfg.out = value;
  else if (key == "panel") cfg.panel = value;
  else if (key == "model") cfg.model = value;
  else if (key == "dist") cfg.dist = value;
  else if (key == "nu") cfg.nu = to_number(key, value);
  else if (key == "q") cfg.q = to_number(key, value);
  else if (key == "stress_policy") cfg.stress_policy = value;
  else if (key == "measures") cfg.measures = split_list(value);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_number(key, value));
  else if (key == "eq_l_form") cfg.eq_l_form = value;
  else if (key == "threads") cfg.threads = static_cast<unsigned>(to_number(key, value));
  else if (key == "dataset_id") cfg.dataset_id = value;
  else throw Error(ErrorCode::InvalidParameters, "unknown setting '" + key + "'");
}

inline void apply_config_file(RunConfig& cfg, const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, path.string() + ": config must be a JSON object");
  const fs::path base = path.parent_path();
  auto rel = [&](const json& v) {
    const fs::path p = v.get<std::string>();
    return (p.is_absolute() || base.empty() ? p : base / p).lexically_normal().string();
  };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "prices" || key == "sectors" || key == "out" || key == "panel" || key == "model") {
        apply_setting(cfg, key, rel(value));
      } else if (key == "measures" && value.is_array()) {
        cfg.measures = value.get<std::vector<std::string>>();
      } else if (key == "stress_policy" && value.is_string() && value.get<std::string>().rfind("explicit:", 0) == 0) {
        cfg.stress_policy = "explicit:" + rel(json(value.get<std::string>().substr(9)));
      } else if (value.is_string()) {
        apply_setting(cfg, key, value.get<std::string>());
      } else if (value.is_number()) {
        apply_setting(cfg, key, io::format_double(value.get<double>()));
      } else if (value.is_null()) {
        if (key == "nu") cfg.nu.reset();
      } else {
        throw Error(ErrorCode::ParseError, path.string() + ": unsupported value for '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline void apply_environment(RunConfig& cfg) {
  for (const auto& key : config_keys()) {
    std::string name = "ELLRISK_";
    for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(name.c_str())) apply_setting(cfg, key, v);
  }
}

inline void validate(const RunConfig& cfg) {
  require_quantile(cfg.q);
  if (cfg.measures.empty()) throw Error(ErrorCode::InvalidParameters, "no measures requested");
  for (const auto& m : cfg.measures) parse_measure(m);
  if (cfg.dist != "normal" && cfg.dist != "student_t")
    throw Error(ErrorCode::InvalidParameters, "dist must be 'normal' or 'student_t'");
  if (cfg.eq_l_form != "literal" && cfg.eq_l_form != "deviation")
    throw Error(ErrorCode::InvalidParameters, "eq_l_form must be 'literal' or 'deviation'");
  if (cfg.nu && !(*cfg.nu > 2.0)) throw Error(ErrorCode::InvalidNu, "nu must exceed 2");
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json optional_number(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

inline std::string csv_cell(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? io::format_double(*v) : std::string();
}

inline std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  return out;
}

}  // namespace detail

/// Loads the cached panel and its group map.
inline ReturnPanel load_panel(const RunConfig& cfg) {
  const fs::path groups = cfg.groups_path();
  return io::read_panel_cache(cfg.panel_path(), fs::exists(groups) ? std::optional<fs::path>(groups) : std::nullopt);
}

inline void require_aligned(const EllipticalModel& model, const ReturnPanel& panel) {
  if (model.labels() != panel.tickers)
    throw Error(ErrorCode::DimensionMismatch, "model labels do not match the panel tickers; refit the model");
}

inline StressPolicy make_policy(const RunConfig& cfg, const EllipticalModel& model, const ReturnPanel& panel) {
  StressPolicy policy;
  const std::string& s = cfg.stress_policy;
  if (s == "empirical-var") {
    require_aligned(model, panel);
    policy = StressPolicy::empirical(panel, cfg.q);
  } else if (s == "parametric-var") {
    policy = StressPolicy::parametric(cfg.q);
  } else if (s == "uniform" || s.rfind("uniform:", 0) == 0) {
    policy = StressPolicy::uniform(s == "uniform" ? 1.0 : detail::to_number("stress_policy", s.substr(8)), cfg.q);
  } else if (s.rfind("explicit:", 0) == 0) {
    const auto table = io::read_losses_csv(s.substr(9));
    Vector losses(model.dim());
    std::string missing;
    for (Eigen::Index i = 0; i < model.dim(); ++i) {
      const auto it = table.find(model.labels()[static_cast<std::size_t>(i)]);
      if (it == table.end()) {
        missing += (missing.empty() ? "" : ", ") + model.labels()[static_cast<std::size_t>(i)];
        continue;
      }
      losses(i) = it->second;
    }
    if (!missing.empty()) throw Error(ErrorCode::UnmappedTicker, "explicit stress file lacks: " + missing);
    policy = StressPolicy::explicit_losses(std::move(losses), cfg.q);
  } else {
    throw Error(ErrorCode::InvalidParameters,
                "stress_policy must be empirical-var, parametric-var, uniform[:c] or explicit:<file>");
  }
  policy.loss_form = cfg.eq_l_form == "deviation" ? LossForm::Deviation : LossForm::Literal;
  return policy;
}

inline json run_metadata(const RunConfig& cfg, const EllipticalModel& model) {
  json meta;
  meta["q"] = cfg.q;
  meta["kind"] = model.kind().name();
  meta["nu"] = model.kind().is_student_t() ? json(model.kind().nu()) : json(nullptr);
  meta["dataset_id"] = cfg.dataset_id;
  meta["stress_policy"] = cfg.stress_policy;
  meta["eq_l_form"] = cfg.eq_l_form;
  meta["seed"] = cfg.seed;
  return meta;
}

inline int cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  if (cfg.prices.empty()) throw Error(ErrorCode::InvalidParameters, "ingest needs a prices file");
  if (cfg.sectors.empty()) throw Error(ErrorCode::InvalidParameters, "ingest needs a sectors file");
  const io::PriceTable table = io::read_prices_csv(cfg.prices);
  ReturnPanel panel;
  panel.tickers = table.tickers;
  panel.dates.assign(table.dates.begin() + 1, table.dates.end());
  panel.returns = log_returns(table.prices, table.tickers, table.dates);
  panel.groups = io::read_sectors_csv(cfg.sectors);
  const GroupIndex groups = group_indices(panel);

  json summary;
  summary["T"] = panel.periods();
  summary["p"] = panel.width();
  summary["date_range"] = {table.dates.front(), table.dates.back()};
  summary["dropped_columns"] = table.dropped;
  json sizes = json::object();
  for (const auto& [name, idx] : groups.groups) sizes[name] = idx.size();
  summary["groups"] = sizes;
  std::vector<std::string> warnings = groups.warnings;
  for (const auto& d : table.dropped) warnings.push_back("dropped column " + d + " (missing prices)");
  summary["warnings"] = warnings;

  io::write_file_atomic(cfg.panel_path(), io::panel_cache_csv(panel));
  io::write_file_atomic(cfg.groups_path(), io::sectors_csv(panel.tickers, panel.groups));
  io::write_file_atomic(cfg.out_dir() / "ingest_summary.json", detail::dump(summary));
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  log << "ingested T=" << panel.periods() << " p=" << panel.width() << " groups=" << groups.groups.size() << "\n";
  return kSuccess;
}

inline int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  const ReturnPanel panel = load_panel(cfg);
  const EllipticalModel model =
      cfg.dist == "student_t" ? fit_student_t(panel, cfg.nu) : fit_gaussian(panel);
  io::FitProvenance prov;
  prov.periods = static_cast<long>(panel.periods());
  if (!panel.dates.empty()) {
    prov.first_date = panel.dates.front();
    prov.last_date = panel.dates.back();
  }
  prov.input_hash = io::fnv1a_hex(io::read_file(cfg.panel_path()));
  io::write_file_atomic(cfg.model_path(), detail::dump(io::model_to_json(model, prov)));

  Eigen::SelfAdjointEigenSolver<Matrix> eig(model.omega(), Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  log << "fitted " << model.kind().name();
  if (model.kind().is_student_t()) log << " nu=" << model.kind().nu();
  log << " p=" << model.dim() << " condition_number=" << ev(ev.size() - 1) / ev(0) << "\n";
  return kSuccess;
}

namespace detail {

inline IndexList resolve_group(const GroupIndex& groups, const std::string& name, const IndexList& other) {
  if (name == "rest") {
    IndexList rest;
    for (const auto& [g, idx] : groups.groups) rest.insert(rest.end(), idx.begin(), idx.end());
    std::erase_if(rest, [&](std::size_t i) { return std::find(other.begin(), other.end(), i) != other.end(); });
    std::sort(rest.begin(), rest.end());
    return rest;
  }
  const auto it = groups.groups.find(name);
  if (it == groups.groups.end()) throw Error(ErrorCode::InvalidParameters, "unknown group '" + name + "'");
  return it->second;
}

}  // namespace detail

inline int cmd_stress(const RunConfig& cfg, const std::string& stressor, const std::string& stressed,
                      std::ostream& log) {
  if (stressor == "rest" && stressed == "rest")
    throw Error(ErrorCode::InvalidParameters, "stressor and stressed cannot both be 'rest'");
  const ReturnPanel panel = load_panel(cfg);
  const EllipticalModel model = io::read_model(cfg.model_path()).model;
  const GroupIndex groups = group_indices(panel);
  IndexList idx_x, idx_y;
  if (stressor == "rest") {
    idx_y = detail::resolve_group(groups, stressed, {});
    idx_x = detail::resolve_group(groups, stressor, idx_y);
  } else {
    idx_x = detail::resolve_group(groups, stressor, {});
    idx_y = detail::resolve_group(groups, stressed, idx_x);
  }
  const StressPolicy policy = make_policy(cfg, model, panel);
  const StressReport rep = stress_pair(model, idx_x, idx_y, policy);

  json j;
  j["stressor"] = stressor;
  j["stressed"] = stressed;
  j["metadata"] = run_metadata(cfg, model);
  json stress = json::array();
  for (std::size_t k = 0; k < idx_x.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    stress.push_back({{"ticker", model.labels()[idx_x[k]]}, {"loss", rep.scenario.losses(r)}, {"x", rep.scenario.x(r)}});
  }
  j["stress"] = stress;
  j["d2x"] = rep.d2x;
  json shift = json::array();
  for (std::size_t k = 0; k < idx_y.size(); ++k)
    shift.push_back({{"ticker", model.labels()[idx_y[k]]}, {"shift", rep.shift(static_cast<Eigen::Index>(k))}});
  j["centroid_shift"] = shift;
  json measures = json::object();
  for (const char* name : {"L", "MI", "THETA", "DELTA", "BETA", "B", "TVR"}) {
    const auto it = rep.values.find(name);
    measures[name] = it == rep.values.end() ? json(nullptr) : detail::optional_number(it->second);
  }
  j["measures"] = measures;
  j["errors"] = rep.errors;
  const fs::path path =
      cfg.out_dir() / ("stress_" + detail::safe_name(stressor) + "__" + detail::safe_name(stressed) + ".json");
  io::write_file_atomic(path, detail::dump(j));
  for (const auto& [name, msg] : rep.errors) log << "warning: " << name << ": " << msg << "\n";
  log << "wrote " << path.string() << "\n";
  return rep.errors.empty() ? kSuccess : kPartialFailure;
}

inline int cmd_matrix(const RunConfig& cfg, std::ostream& log) {
  const ReturnPanel panel = load_panel(cfg);
  const EllipticalModel model = io::read_model(cfg.model_path()).model;
  const GroupIndex gi = group_indices(panel);
  require_aligned(model, panel);
  const GroupList groups = to_group_list(gi.groups);
  const StressPolicy policy = make_policy(cfg, model, panel);
  std::vector<MeasureId> ids;
  for (const auto& m : cfg.measures) ids.push_back(parse_measure(m));

  const auto matrices = measure_matrices(model, groups, ids, policy, cfg.threads);
  const OneVsRest ovr = one_vs_rest(model, groups, ids, policy, cfg.threads);
  const json meta = run_metadata(cfg, model);

  std::size_t errored = 0;
  std::vector<std::pair<fs::path, std::string>> files;
  for (const auto& mm : matrices) {
    std::string csv = "stressor";
    for (const auto& c : mm.col_labels) csv += "," + c;
    csv += "\n";
    json values = json::array();
    for (std::size_t i = 0; i < mm.size(); ++i) {
      csv += mm.row_labels[i];
      json row = json::array();
      for (std::size_t j = 0; j < mm.size(); ++j) {
        csv += "," + detail::csv_cell(mm.at(i, j));
        row.push_back(detail::optional_number(mm.at(i, j)));
      }
      csv += "\n";
      values.push_back(row);
    }
    json cell_errors = json::array();
    for (const auto& [cell, msg] : mm.cell_errors)
      cell_errors.push_back({{"row", mm.row_labels[cell.first]}, {"col", mm.col_labels[cell.second]}, {"error", msg}});
    errored += mm.cell_errors.size();
    json j = {{"measure", mm.measure_name}, {"rows", mm.row_labels}, {"cols", mm.col_labels},
              {"values", values},          {"metadata", meta},     {"cell_errors", cell_errors}};
    files.emplace_back(cfg.out_dir() / ("matrix_" + mm.measure_name + ".csv"), csv);
    files.emplace_back(cfg.out_dir() / ("matrix_" + mm.measure_name + ".json"), detail::dump(j));
  }

  std::string ovr_csv = "group";
  for (auto id : ids) ovr_csv += "," + to_string(id) + "_group_to_rest," + to_string(id) + "_rest_to_group";
  ovr_csv += "\n";
  for (std::size_t g = 0; g < ovr.groups.size(); ++g) {
    ovr_csv += ovr.groups[g];
    for (std::size_t m = 0; m < ids.size(); ++m)
      ovr_csv += "," + detail::csv_cell(ovr.group_to_rest[g][m]) + "," + detail::csv_cell(ovr.rest_to_group[g][m]);
    ovr_csv += "\n";
  }
  files.emplace_back(cfg.out_dir() / "one_vs_rest.csv", ovr_csv);
  errored += ovr.errors.size();

  auto find = [&](MeasureId id) -> const MeasureMatrix* {
    for (std::size_t m = 0; m < ids.size(); ++m)
      if (ids[m] == id) return &matrices[m];
    return nullptr;
  };
  json corr = json::object();
  const MeasureMatrix* mi = find(MeasureId::MI);
  for (auto id : {MeasureId::L, MeasureId::THETA, MeasureId::DELTA}) {
    const MeasureMatrix* other = find(id);
    if (mi && other) corr[to_string(id) + "_vs_MI"] = detail::optional_number(cross_measure_correlation(*other, *mi));
  }
  json diag = {{"correlations", corr}, {"errored_cells", errored}, {"one_vs_rest_errors", ovr.errors},
               {"metadata", meta}};
  files.emplace_back(cfg.out_dir() / "diagnostics.json", detail::dump(diag));

  for (const auto& [path, content] : files) io::write_file_atomic(path, content);
  log << "wrote " << files.size() << " files to " << cfg.out_dir().string() << "\n";
  if (errored) log << "warning: " << errored << " cells failed; see cell_errors in the JSON outputs\n";
  return errored ? kPartialFailure : kSuccess;
}

inline int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  SyntheticSpec spec;
  spec.seed = cfg.seed;
  const SyntheticDataset data = generate_synthetic(spec);
  io::write_file_atomic(cfg.out_dir() / "prices.csv", io::prices_csv(data.dates, data.tickers, data.prices));
  io::write_file_atomic(cfg.out_dir() / "sectors.csv", io::sectors_csv(data.tickers, data.groups));
  io::write_file_atomic(cfg.out_dir() / "truth_model.json",
                        detail::dump(io::model_to_json(data.truth, {spec.periods, "", "", "generator"})));
  log << "wrote synthetic panel (" << data.prices.rows() << " prices x " << data.tickers.size() << " tickers) to "
      << cfg.out_dir().string() << "\n";
  return kSuccess;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"Elliptical stress testing and systemic-risk measures"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::string stressor, stressed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    for (const auto& key : config_keys()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags[key] = v; },
                                            "override '" + key + "' (env ELLRISK_" + [&] {
                                              std::string u;
                                              for (char c : key) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                                              return u;
                                            }() + ")");
    }
  };
  auto* ingest = app.add_subcommand("ingest", "parse prices and sectors, cache log-returns");
  auto* fit = app.add_subcommand("fit", "fit a Normal or Student-t model to the cached panel");
  auto* stress = app.add_subcommand("stress", "evaluate every measure for one stressor/stressed pair");
  auto* matrix = app.add_subcommand("matrix", "group-by-group measure matrices and one-vs-rest vectors");
  auto* synth = app.add_subcommand("synth", "write the synthetic benchmark panel");
  for (auto* sub : {ingest, fit, stress, matrix, synth}) add_common(sub);
  stress->add_option("--stressor", stressor, "stressing group (or 'rest')")->required();
  stress->add_option("--stressed", stressed, "stressed group (or 'rest')")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, log, log);
    return rc == 0 ? kSuccess : kInputError;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) detail::apply_config_file(cfg, config_path);
    detail::apply_environment(cfg);
    for (const auto& [key, value] : flags) detail::apply_setting(cfg, key, value);
    detail::validate(cfg);
    if (ingest->parsed()) return cmd_ingest(cfg, log);
    if (fit->parsed()) return cmd_fit(cfg, log);
    if (stress->parsed()) return cmd_stress(cfg, stressor, stressed, log);
    if (matrix->parsed()) return cmd_matrix(cfg, log);
    return cmd_synth(cfg, log);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kNumericalError : kInputError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace ellrisk::cli
