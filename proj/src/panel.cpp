#include "evnet/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "evnet/error.hpp"
#include "evnet/format.hpp"

namespace evnet {

namespace {

using KeyIndex = std::map<std::pair<std::string, int>, std::size_t>;

KeyIndex index_records(std::span<const PanelRecord> records) {
  KeyIndex index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(std::pair{records[i].zip, records[i].year}, i);
  return index;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto field = trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
    fields.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

void check_record(const PanelRecord& r, std::size_t row, std::vector<RowIssue>& issues) {
  auto fail = [&](const char* column, std::string message) {
    issues.push_back({row, column, std::move(message)});
  };
  auto finite = [&](const char* column, double v) {
    if (!std::isfinite(v)) {
      fail(column, "non-finite value");
      return false;
    }
    return true;
  };
  auto non_negative = [&](const char* column, double v) {
    if (finite(column, v) && v < 0.0) fail(column, "must be >= 0, got " + format_number(v));
  };
  auto positive = [&](const char* column, double v) {
    if (finite(column, v) && v <= 0.0) fail(column, "must be > 0, got " + format_number(v));
  };
  if (r.zip.empty()) fail("zip", "empty region identifier");
  non_negative("ev_sales", r.ev_sales);
  non_negative("ev_stock", r.ev_stock);
  non_negative("station_stock", r.station_stock);
  non_negative("parking_lots", r.parking_lots);
  non_negative("white_pop", r.white_pop);
  non_negative("asian_pop", r.asian_pop);
  positive("avg_ev_price", r.avg_ev_price);
  positive("median_income", r.median_income);
  positive("oil_price", r.oil_price);
  if (finite("rebate_pct", r.rebate_pct) && (r.rebate_pct < 0.0 || r.rebate_pct > 1.0))
    fail("rebate_pct", "must lie in [0, 1], got " + format_number(r.rebate_pct));
}

nlohmann::json issues_to_json(const std::vector<RowIssue>& issues) {
  auto arr = nlohmann::json::array();
  for (const auto& issue : issues) arr.push_back({{"row", issue.row}, {"column", issue.column}, {"message", issue.message}});
  return arr;
}

struct NumberedRecord {
  PanelRecord record;
  std::size_t row;
};

}  // namespace

const std::vector<std::string>& canonical_columns() {
  static const std::vector<std::string> cols = {
      "zip",        "year",      "ev_sales",  "ev_stock",  "station_stock", "avg_ev_price",
      "median_income", "white_pop", "asian_pop", "oil_price", "parking_lots", "rebate_pct"};
  return cols;
}

Schema Schema::canonical() {
  Schema s;
  for (const auto& c : canonical_columns()) s.columns[c] = c;
  return s;
}

Schema Schema::from_json(const nlohmann::json& j) {
  Schema s = canonical();
  if (j.contains("columns")) {
    for (const auto& [field, header] : j.at("columns").items()) {
      if (!s.columns.contains(field))
        throw Error(ErrorCode::Schema, "unknown canonical column '" + field + "' in schema sidecar",
                    {{"column", field}});
      s.columns[field] = header.get<std::string>();
    }
  }
  if (j.contains("extra_columns")) s.extra_columns = j.at("extra_columns").get<std::vector<std::string>>();
  return s;
}

Schema Schema::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open schema file " + path.string(), {{"path", path.string()}});
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("malformed schema sidecar: ") + e.what(), {{"path", path.string()}});
  }
}

const std::string& Schema::header_for(const std::string& field) const { return columns.at(field); }

double SaturationBounds::normalize(double raw) const {
  if (degenerate()) return 0.0;
  return std::clamp((raw - raw_min) / (raw_max - raw_min), 0.0, 1.0);
}

double saturation_ratio(double lag_ev_stock, double lag_station_stock, double epsilon) {
  return std::log1p(lag_ev_stock) / std::max(std::log1p(lag_station_stock), epsilon);
}

double compute_burden(double avg_ev_price, double median_income) {
  if (!(median_income > 0.0))
    throw Error(ErrorCode::Domain, "burden requires positive median income",
                {{"median_income", median_income}});
  return avg_ev_price / median_income;
}

double compute_burden(const PanelRecord& record) {
  return compute_burden(record.avg_ev_price, record.median_income);
}

double compute_install_base(double sales, double delta, double prev_stock) {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw Error(ErrorCode::Domain, "survival fraction delta must lie in [0, 1]", {{"delta", delta}});
  if (sales < 0.0 || prev_stock < 0.0)
    throw Error(ErrorCode::Domain, "sales and previous stock must be non-negative",
                {{"sales", sales}, {"prev_stock", prev_stock}});
  return sales + delta * prev_stock;
}

SaturationResult compute_saturation(std::span<const PanelRecord> records, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::Domain, "saturation epsilon must be positive", {{"epsilon", epsilon}});
  const auto index = index_records(records);
  SaturationResult out;
  out.values.resize(records.size());
  out.bounds.epsilon = epsilon;
  std::vector<double> raw(records.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = index.find({records[i].zip, records[i].year - 1});
    if (it == index.end()) continue;
    const auto& lag = records[it->second];
    raw[i] = saturation_ratio(lag.ev_stock, lag.station_stock, epsilon);
    if (!any) {
      out.bounds.raw_min = out.bounds.raw_max = raw[i];
      any = true;
    }
    out.bounds.raw_min = std::min(out.bounds.raw_min, raw[i]);
    out.bounds.raw_max = std::max(out.bounds.raw_max, raw[i]);
    out.values[i] = 0.0;
  }
  if (!any) throw Error(ErrorCode::EmptyResult, "no record has a lagged year; saturation is undefined");
  for (std::size_t i = 0; i < records.size(); ++i)
    if (out.values[i]) out.values[i] = out.bounds.normalize(raw[i]);
  return out;
}

std::vector<std::optional<double>> compute_instrument(std::span<const PanelRecord> records) {
  std::map<int, double> station_total;
  for (const auto& r : records) station_total[r.year] += r.station_stock;
  if (station_total.empty()) return {};
  const int first_year = station_total.begin()->first;

  std::set<int> missing;
  for (const auto& [year, total] : station_total)
    if (year != first_year && !station_total.contains(year - 1)) missing.insert(year);
  if (!missing.empty())
    throw Error(ErrorCode::LagUnavailable, "lagged station totals unavailable for some years",
                {{"years", std::vector<int>(missing.begin(), missing.end())}});

  std::map<int, std::vector<std::size_t>> by_year;
  for (std::size_t i = 0; i < records.size(); ++i) by_year[records[i].year].push_back(i);

  std::vector<std::optional<double>> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.year == first_year) continue;
    // Explicit exclusion sum: the zip's own lagged stock never enters the arithmetic.
    double external = 0.0;
    for (std::size_t j : by_year.at(r.year - 1))
      if (records[j].zip != r.zip) external += records[j].station_stock;
    out[i] = r.parking_lots * external;
  }
  return out;
}

// Shared by from_records and load_panel: validate, dedupe, sort and derive.
static void assemble(std::vector<NumberedRecord> numbered, std::vector<RowIssue> issues, const PanelOptions& options,
                     std::vector<PanelRecord>& records, std::vector<std::optional<DerivedRecord>>& derived,
                     std::vector<int>& years, std::vector<std::string>& zips, SaturationBounds& bounds,
                     std::vector<RowIssue>& rejected) {
  if (!(options.delta >= 0.0 && options.delta <= 1.0))
    throw Error(ErrorCode::Domain, "survival fraction delta must lie in [0, 1]", {{"delta", options.delta}});

  for (const auto& nr : numbered) check_record(nr.record, nr.row, issues);
  if (!issues.empty()) {
    if (!options.lenient) {
      throw Error(ErrorCode::Validation, "panel contains invalid rows (first: row " +
                                             std::to_string(issues.front().row) + ", " + issues.front().column +
                                             ": " + issues.front().message + ")",
                  {{"issues", issues_to_json(issues)}});
    }
    std::set<std::size_t> bad;
    for (const auto& issue : issues) bad.insert(issue.row);
    std::erase_if(numbered, [&](const NumberedRecord& nr) { return bad.contains(nr.row); });
    rejected = std::move(issues);
  }

  std::map<std::pair<std::string, int>, std::size_t> seen;
  for (const auto& nr : numbered) {
    auto [it, inserted] = seen.emplace(std::pair{nr.record.zip, nr.record.year}, nr.row);
    if (!inserted)
      throw Error(ErrorCode::Uniqueness,
                  "duplicate (zip, year) = (" + nr.record.zip + ", " + std::to_string(nr.record.year) +
                      ") at rows " + std::to_string(it->second) + " and " + std::to_string(nr.row),
                  {{"zip", nr.record.zip}, {"year", nr.record.year}, {"rows", {it->second, nr.row}}});
  }

  std::stable_sort(numbered.begin(), numbered.end(), [](const auto& a, const auto& b) {
    return std::tie(a.record.zip, a.record.year) < std::tie(b.record.zip, b.record.year);
  });
  records.clear();
  records.reserve(numbered.size());
  for (auto& nr : numbered) records.push_back(std::move(nr.record));

  std::set<int> year_set;
  std::set<std::string> zip_set;
  for (const auto& r : records) {
    year_set.insert(r.year);
    zip_set.insert(r.zip);
  }
  years.assign(year_set.begin(), year_set.end());
  zips.assign(zip_set.begin(), zip_set.end());

  derived.assign(records.size(), std::nullopt);
  const auto index = index_records(records);
  bool any_lag = false;
  for (const auto& r : records) any_lag = any_lag || index.contains({r.zip, r.year - 1});
  if (!any_lag) return;

  const auto saturation = compute_saturation(records, options.saturation_epsilon);
  const auto instrument = compute_instrument(records);
  bounds = saturation.bounds;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = index.find({records[i].zip, records[i].year - 1});
    if (it == index.end()) continue;
    const auto& lag = records[it->second];
    derived[i] = DerivedRecord{compute_burden(records[i]), *saturation.values[i], instrument[i].value_or(0.0),
                               lag.ev_stock, lag.station_stock};
  }
}

Panel Panel::from_records(std::vector<PanelRecord> records, const PanelOptions& options) {
  std::vector<NumberedRecord> numbered;
  numbered.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) numbered.push_back({std::move(records[i]), i + 1});
  Panel panel;
  panel.options_ = options;
  assemble(std::move(numbered), {}, options, panel.records_, panel.derived_, panel.years_, panel.zips_,
           panel.bounds_, panel.rejected_);
  return panel;
}

std::size_t Panel::derived_count() const {
  return static_cast<std::size_t>(std::count_if(derived_.begin(), derived_.end(), [](const auto& d) { return d.has_value(); }));
}

std::optional<std::size_t> Panel::find(const std::string& zip, int year) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), std::pair{zip, year}, [](const PanelRecord& r, const auto& key) {
    return std::tie(r.zip, r.year) < std::tie(key.first, key.second);
  });
  if (it == records_.end() || it->zip != zip || it->year != year) return std::nullopt;
  return static_cast<std::size_t>(it - records_.begin());
}

Panel load_panel(std::istream& in, const Schema& schema, const PanelOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Schema, "empty panel input: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);
  auto column_of = [&](const std::string& field, const std::string& name) {
    auto it = position.find(name);
    if (it == position.end())
      throw Error(ErrorCode::Schema, "missing column '" + name + "'", {{"column", name}, {"field", field}});
    return it->second;
  };
  std::map<std::string, std::size_t> col;
  for (const auto& field : canonical_columns()) col[field] = column_of(field, schema.header_for(field));
  std::vector<std::pair<std::string, std::size_t>> extra_cols;
  for (const auto& name : schema.extra_columns) extra_cols.emplace_back(name, column_of(name, name));

  std::vector<NumberedRecord> numbered;
  std::vector<RowIssue> issues;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      issues.push_back({row, "", "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size())});
      continue;
    }
    PanelRecord r;
    bool ok = true;
    auto number = [&](const std::string& field) {
      auto v = parse_double(fields[col.at(field)]);
      if (!v) {
        issues.push_back({row, field, "not a number: '" + fields[col.at(field)] + "'"});
        ok = false;
        return 0.0;
      }
      return *v;
    };
    r.zip = fields[col.at("zip")];
    const double year = number("year");
    if (ok && year != std::floor(year)) {
      issues.push_back({row, "year", "year must be an integer"});
      ok = false;
    }
    r.year = static_cast<int>(year);
    r.ev_sales = number("ev_sales");
    r.ev_stock = number("ev_stock");
    r.station_stock = number("station_stock");
    r.avg_ev_price = number("avg_ev_price");
    r.median_income = number("median_income");
    r.white_pop = number("white_pop");
    r.asian_pop = number("asian_pop");
    r.oil_price = number("oil_price");
    r.parking_lots = number("parking_lots");
    r.rebate_pct = number("rebate_pct");
    for (const auto& [name, idx] : extra_cols) {
      auto v = parse_double(fields[idx]);
      if (!v) {
        issues.push_back({row, name, "not a number: '" + fields[idx] + "'"});
        ok = false;
      } else {
        r.extras[name] = *v;
      }
    }
    if (ok) numbered.push_back({std::move(r), row});
  }

  Panel panel;
  panel.options_ = options;
  assemble(std::move(numbered), std::move(issues), options, panel.records_, panel.derived_, panel.years_,
           panel.zips_, panel.bounds_, panel.rejected_);
  return panel;
}

Panel load_panel(const std::filesystem::path& path, const Schema& schema, const PanelOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open panel file " + path.string(), {{"path", path.string()}});
  return load_panel(in, schema, options);
}

void write_panel_csv(std::ostream& out, std::span<const PanelRecord> records, int significant_digits) {
  const auto& cols = canonical_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  auto num = [&](double v) { return format_number(v, significant_digits); };
  for (const auto& r : records) {
    out << r.zip << ',' << r.year << ',' << num(r.ev_sales) << ',' << num(r.ev_stock) << ','
        << num(r.station_stock) << ',' << num(r.avg_ev_price) << ',' << num(r.median_income) << ','
        << num(r.white_pop) << ',' << num(r.asian_pop) << ',' << num(r.oil_price) << ','
        << num(r.parking_lots) << ',' << num(r.rebate_pct) << '\n';
  }
}

}  // namespace evnet
