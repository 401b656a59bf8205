#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace evnet {

// One zip-code-year observation as it appears in the input CSV.
struct PanelRecord {
  std::string zip;
  int year = 0;
  double ev_sales = 0.0;       // new EV registrations in the year
  double ev_stock = 0.0;       // cumulative install base Q
  double station_stock = 0.0;  // cumulative public Level 2 stations E
  double avg_ev_price = 0.0;
  double median_income = 0.0;
  double white_pop = 0.0;
  double asian_pop = 0.0;
  double oil_price = 0.0;
  double parking_lots = 0.0;
  double rebate_pct = 0.0;  // charger rebate as a fraction of install cost
  std::map<std::string, double> extras;  // schema-extension covariates
};

// Engineered regressors; only defined when the zip has a record for year - 1.
struct DerivedRecord {
  double burden = 0.0;
  double saturation = 0.0;
  double instrument = 0.0;
  double lag_ev_stock = 0.0;
  double lag_station_stock = 0.0;
};

struct RowIssue {
  std::size_t row = 0;  // 1-based data row (the header is row 0)
  std::string column;
  std::string message;
};

// Canonical field name -> CSV header name.
struct Schema {
  std::map<std::string, std::string> columns;
  std::vector<std::string> extra_columns;

  static Schema canonical();
  // Sidecar format: {"columns": {"canonical": "header", ...}, "extra_columns": [...]}
  static Schema from_json(const nlohmann::json& j);
  static Schema from_file(const std::filesystem::path& path);

  const std::string& header_for(const std::string& field) const;
};

// Canonical header order of the CSV interchange format.
const std::vector<std::string>& canonical_columns();

struct PanelOptions {
  double delta = 0.95;
  double saturation_epsilon = 1e-6;
  bool lenient = false;
};

struct SaturationBounds {
  double raw_min = 0.0;
  double raw_max = 0.0;
  double epsilon = 1e-6;

  bool degenerate() const { return !(raw_max > raw_min); }
  // min-max normalisation with the frozen bounds; degenerate bounds map to 0.
  // Values outside the bounds are clamped to [0, 1].
  double normalize(double raw) const;
};

// Raw demand-gap ratio log1p(Q) / max(log1p(E), epsilon).
double saturation_ratio(double lag_ev_stock, double lag_station_stock, double epsilon);

double compute_burden(const PanelRecord& record);
double compute_burden(double avg_ev_price, double median_income);

double compute_install_base(double sales, double delta, double prev_stock);

struct SaturationResult {
  std::vector<std::optional<double>> values;  // aligned with the input records
  SaturationBounds bounds;
};

SaturationResult compute_saturation(std::span<const PanelRecord> records, double epsilon);

// parking_lots(z) * sum over z' != z of station_stock(z', t - 1).
std::vector<std::optional<double>> compute_instrument(std::span<const PanelRecord> records);

// Validated, immutable zip-year panel with derived regressors.
class Panel {
 public:
  static Panel from_records(std::vector<PanelRecord> records, const PanelOptions& options = {});

  std::size_t size() const { return records_.size(); }
  const std::vector<PanelRecord>& records() const { return records_; }
  const std::vector<std::optional<DerivedRecord>>& derived() const { return derived_; }
  const std::vector<int>& years() const { return years_; }
  const std::vector<std::string>& zips() const { return zips_; }
  const SaturationBounds& saturation_bounds() const { return bounds_; }
  const PanelOptions& options() const { return options_; }
  // Rows dropped in lenient mode.
  const std::vector<RowIssue>& rejected() const { return rejected_; }

  std::size_t derived_count() const;
  std::optional<std::size_t> find(const std::string& zip, int year) const;

 private:
  friend Panel load_panel(std::istream&, const Schema&, const PanelOptions&);

  std::vector<PanelRecord> records_;
  std::vector<std::optional<DerivedRecord>> derived_;
  std::vector<int> years_;
  std::vector<std::string> zips_;
  SaturationBounds bounds_;
  PanelOptions options_;
  std::vector<RowIssue> rejected_;
};

Panel load_panel(const std::filesystem::path& path, const Schema& schema = Schema::canonical(),
                 const PanelOptions& options = {});
Panel load_panel(std::istream& in, const Schema& schema = Schema::canonical(),
                 const PanelOptions& options = {});

// Writes the canonical CSV schema. significant_digits <= 0 means round-trip precision.
void write_panel_csv(std::ostream& out, std::span<const PanelRecord> records,
                     int significant_digits = 6);

}  // namespace evnet
