#pragma once

// CSV and JSON file formats used by the command-line tool.
//
//   prices CSV   date,<ticker>...   one row per date, header mandatory
//   sectors CSV  ticker,group
//   panel cache  "# ellrisk-panel v1" line, then date,<ticker>... of log-returns
//   model JSON   {version, kind, nu?, labels, mu, omega, fitted_from}

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "ellrisk/estimation.hpp"
#include "ellrisk/model.hpp"

namespace ellrisk::io {

using nlohmann::json;

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kPanelHeader = "# ellrisk-panel v1";

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

/// FNV-1a 64-bit digest, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

inline std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) return std::nullopt;
  return v;
}

inline std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

/// Lines of a text file with line endings stripped; skips a UTF-8 BOM.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::string text = read_file(path);
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

struct PriceTable {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Matrix prices;
  std::vector<std::string> dropped;  // columns removed for missing values
};

/// Parses a prices CSV. Columns with any missing value are dropped; a
/// non-positive or malformed price is an error naming its line.
inline PriceTable read_prices_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "empty file");
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 2 || detail::trim(header[0]) != "date")
    throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "header must start with 'date' and name at least one ticker");
  std::vector<std::string> tickers;
  for (std::size_t c = 1; c < header.size(); ++c) {
    tickers.push_back(detail::trim(header[c]));
    if (tickers.back().empty())
      throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "empty ticker name in column " + std::to_string(c + 1));
  }
  {
    std::set<std::string> unique(tickers.begin(), tickers.end());
    if (unique.size() != tickers.size())
      throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "duplicate ticker names");
  }

  std::vector<std::string> dates;
  std::vector<std::vector<std::optional<double>>> rows;
  std::vector<bool> missing(tickers.size(), false);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto cells = detail::split_csv_line(lines[ln]);
    if (cells.size() != header.size())
      throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "expected " + std::to_string(header.size()) +
                                             " fields, found " + std::to_string(cells.size()));
    const std::string date = detail::trim(cells[0]);
    if (date.size() != 10 || date[4] != '-' || date[7] != '-')
      throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "date '" + date + "' is not ISO-8601 (YYYY-MM-DD)");
    if (!dates.empty() && date <= dates.back())
      throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "dates must be strictly increasing");
    std::vector<std::optional<double>> row(tickers.size());
    for (std::size_t c = 0; c < tickers.size(); ++c) {
      const std::string cell = detail::trim(cells[c + 1]);
      if (detail::is_missing(cell)) {
        missing[c] = true;
        continue;
      }
      const auto v = detail::parse_number(cell);
      if (!v) throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "cannot parse '" + cell + "' for " + tickers[c]);
      if (!(*v > 0.0) || !std::isfinite(*v))
        throw Error(ErrorCode::NonPositivePrice, detail::at_line(path, ln + 1) + "price " + cell + " for " + tickers[c] + " on " + date);
      row[c] = v;
    }
    dates.push_back(date);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw Error(ErrorCode::ParseError, path.string() + ": need at least two price rows");

  PriceTable table;
  table.dates = std::move(dates);
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < tickers.size(); ++c) {
    if (missing[c]) {
      table.dropped.push_back(tickers[c]);
    } else {
      kept.push_back(c);
      table.tickers.push_back(tickers[c]);
    }
  }
  table.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < kept.size(); ++k)
      table.prices(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = *rows[r][kept[k]];
  return table;
}

/// ticker -> group from a two-column CSV with header "ticker,group".
inline std::map<std::string, std::string> read_sectors_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "empty file");
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() != 2 || detail::trim(header[0]) != "ticker" || detail::trim(header[1]) != "group")
    throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "header must be 'ticker,group'");
  std::map<std::string, std::string> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto cells = detail::split_csv_line(lines[ln]);
    if (cells.size() != 2)
      throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "expected 2 fields");
    const std::string ticker = detail::trim(cells[0]);
    const std::string group = detail::trim(cells[1]);
    if (ticker.empty() || group.empty())
      throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "empty ticker or group");
    if (!out.emplace(ticker, group).second)
      throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "ticker " + ticker + " listed twice");
  }
  return out;
}

/// Per-ticker loss overrides from a "ticker,loss" CSV.
inline std::map<std::string, double> read_losses_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || detail::trim(lines[0]) != "ticker,loss")
    throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "header must be 'ticker,loss'");
  std::map<std::string, double> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto cells = detail::split_csv_line(lines[ln]);
    const auto v = cells.size() == 2 ? detail::parse_number(detail::trim(cells[1])) : std::nullopt;
    if (!v) throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "expected ticker,number");
    out[detail::trim(cells[0])] = *v;
  }
  return out;
}

inline std::string prices_csv(const std::vector<std::string>& dates, const std::vector<std::string>& tickers,
                              const Matrix& values) {
  std::string out = "date";
  for (const auto& t : tickers) out += "," + t;
  out += "\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += dates[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < values.cols(); ++c) out += "," + format_double(values(r, c));
    out += "\n";
  }
  return out;
}

inline std::string sectors_csv(const std::vector<std::string>& tickers,
                               const std::map<std::string, std::string>& groups) {
  std::string out = "ticker,group\n";
  for (const auto& t : tickers) {
    const auto it = groups.find(t);
    if (it != groups.end()) out += t + "," + it->second + "\n";
  }
  return out;
}

inline std::string panel_cache_csv(const ReturnPanel& panel) {
  return std::string(kPanelHeader) + "\n" + prices_csv(panel.dates, panel.tickers, panel.returns);
}

/// Reads a panel cache; the optional groups file restores the ticker map.
inline ReturnPanel read_panel_cache(const std::filesystem::path& path,
                                    const std::optional<std::filesystem::path>& groups_path = std::nullopt) {
  auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != kPanelHeader)
    throw Error(ErrorCode::ParseError, detail::at_line(path, 1) + "missing '" + kPanelHeader + "' header");
  const auto header = detail::split_csv_line(lines.at(1));
  ReturnPanel panel;
  for (std::size_t c = 1; c < header.size(); ++c) panel.tickers.push_back(header[c]);
  std::vector<std::vector<double>> rows;
  for (std::size_t ln = 2; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cells = detail::split_csv_line(lines[ln]);
    if (cells.size() != header.size())
      throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "wrong field count");
    panel.dates.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto v = detail::parse_number(cells[c]);
      if (!v) throw Error(ErrorCode::ParseError, detail::at_line(path, ln + 1) + "bad number '" + cells[c] + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  panel.returns.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(panel.tickers.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      panel.returns(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (groups_path) panel.groups = read_sectors_csv(*groups_path);
  return panel;
}

/// Provenance recorded next to a fitted model.
struct FitProvenance {
  long periods = 0;
  std::string first_date;
  std::string last_date;
  std::string input_hash;
};

inline json model_to_json(const EllipticalModel& model, const FitProvenance& provenance) {
  json j;
  j["version"] = kModelSchemaVersion;
  j["kind"] = model.kind().name();
  if (model.kind().is_student_t()) j["nu"] = model.kind().nu();
  j["labels"] = model.labels();
  j["mu"] = std::vector<double>(model.mu().data(), model.mu().data() + model.mu().size());
  json omega = json::array();
  for (Eigen::Index r = 0; r < model.dim(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(model.dim()));
    for (Eigen::Index c = 0; c < model.dim(); ++c) row[static_cast<std::size_t>(c)] = model.omega()(r, c);
    omega.push_back(row);
  }
  j["omega"] = std::move(omega);
  j["fitted_from"] = {{"T", provenance.periods},
                      {"date_range", {provenance.first_date, provenance.last_date}},
                      {"input_hash", provenance.input_hash}};
  return j;
}

struct LoadedModel {
  EllipticalModel model;
  FitProvenance provenance;
};

inline LoadedModel model_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kModelSchemaVersion)
      throw Error(ErrorCode::ParseError, "unsupported model schema version");
    const std::string kind_name = j.at("kind").get<std::string>();
    DistributionKind kind = DistributionKind::normal();
    if (kind_name == "student_t") {
      kind = DistributionKind::student_t(j.at("nu").get<double>());
    } else if (kind_name != "normal") {
      throw Error(ErrorCode::ParseError, "unknown model kind '" + kind_name + "'");
    }
    const auto labels = j.at("labels").get<std::vector<std::string>>();
    const auto mu_values = j.at("mu").get<std::vector<double>>();
    const auto rows = j.at("omega").get<std::vector<std::vector<double>>>();
    const auto p = static_cast<Eigen::Index>(mu_values.size());
    Vector mu = Eigen::Map<const Vector>(mu_values.data(), p);
    Matrix omega(p, p);
    if (static_cast<Eigen::Index>(rows.size()) != p)
      throw Error(ErrorCode::DimensionMismatch, "omega row count does not match mu");
    for (Eigen::Index r = 0; r < p; ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != p)
        throw Error(ErrorCode::DimensionMismatch, "omega row length does not match mu");
      for (Eigen::Index c = 0; c < p; ++c) omega(r, c) = rows[r][c];
    }
    FitProvenance prov;
    if (j.contains("fitted_from")) {
      const auto& f = j.at("fitted_from");
      prov.periods = f.value("T", 0L);
      if (f.contains("date_range") && f["date_range"].size() == 2) {
        prov.first_date = f["date_range"][0].get<std::string>();
        prov.last_date = f["date_range"][1].get<std::string>();
      }
      prov.input_hash = f.value("input_hash", std::string());
    }
    return {EllipticalModel(std::move(mu), std::move(omega), kind, labels), prov};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model file: ") + e.what());
  }
}

inline LoadedModel read_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace ellrisk::io
