#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evnet/dynamics.hpp"
#include "evnet/estimator.hpp"
#include "evnet/panel.hpp"

namespace evnet {

// Incentive scenario: multipliers on the baseline purchase rebate (demand
// channel) and on the EVCS rebate percentage (supply channel), active inside
// [window_start, window_end].
struct Scenario {
  std::string name = "baseline";
  double demand_rebate_multiplier = 1.0;
  double supply_rebate_multiplier = 1.0;
  int window_start = 2024;
  int window_end = 2035;
  double baseline_purchase_rebate = 7500.0;

  void validate() const;
  bool in_window(int year) const { return year >= window_start && year <= window_end; }

  // {name, demand_rebate_multiplier, supply_rebate_multiplier, window:[start,end], baseline_purchase_rebate}
  static Scenario from_json(const nlohmann::json& j);
  static Scenario from_file(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

// Level 2 charger cost: linear through two anchor points, floored.
struct ChargerCostPath {
  int anchor_year = 2018;
  double anchor_cost = 7500.0;
  int second_year = 2020;
  double second_cost = 6000.0;
  double floor_cost = 3000.0;

  double cost(int year) const;
};

inline constexpr double kDefaultFleet2045 = 6.22e6;
inline constexpr double kDefaultAnnualSales2045 = 437000.0;
inline constexpr double kDefaultTurnover = kDefaultAnnualSales2045 / kDefaultFleet2045;

struct FleetHistoryPoint {
  double population = 0.0;
  double vehicles = 0.0;
  std::optional<double> sales;  // total new-vehicle sales, when known
};

// Vehicles = slope * population + intercept over a projected population path.
struct FleetProjection {
  double slope = 0.0;
  double intercept = 0.0;
  std::map<int, double> population_path;
  double turnover_fraction = kDefaultTurnover;

  bool covers(int year) const { return population_path.contains(year); }
  double vehicles(int year) const;
  double annual_sales(int year) const { return turnover_fraction * vehicles(year); }
};

FleetProjection project_fleet(std::span<const FleetHistoryPoint> history, std::map<int, double> future_population);

// Constant-fleet projection used when no population data is supplied.
FleetProjection constant_fleet(double vehicles, int first_year, int last_year, double turnover = kDefaultTurnover);

struct AdjustedExogenous {
  Exogenous values;
  bool in_window = false;
  bool rebate_clamped = false;
};

// Inside the window the purchase-rebate increment beyond the baseline lowers
// the effective EV price and the EVCS rebate share is scaled (clamped to
// [0, 1]); outside the window the baseline values are returned unchanged.
AdjustedExogenous apply_scenario(const Scenario& scenario, int year, const Exogenous& base);

// Zip-level panel year collapsed to one county: counts are summed, oil price
// and rebate share averaged, and burden inputs chosen so the county burden is
// the income-weighted mean of zip burdens.
struct CountySnapshot {
  MarketState state;
  Exogenous exog;
};
CountySnapshot aggregate_county(const Panel& panel, int year);

// County-level seed used when no zip panel is available:
// {"pre_seed": state, "seed": state, "exogenous": {...}, "saturation_bounds": {"raw_min", "raw_max"},
//  optional "delta", "burden_form"}, where a state is {year, sales, ev_stock, station_stock}.
struct CountyFixture {
  MarketState pre_seed;
  MarketState seed;
  Exogenous exog;
  SaturationBounds saturation_bounds;
  std::optional<double> delta;
  std::optional<BurdenForm> burden_form;

  static CountyFixture from_json(const nlohmann::json& j);
  static CountyFixture from_file(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

struct ForecastOptions {
  std::optional<int> seed_year;  // defaults to the final panel year
  double delta = 0.95;
  BurdenForm burden_form = BurdenForm::Linear;
  ChargerCostPath charger_cost;
  std::map<int, double> oil_path;  // overrides the held last-observed oil price
  SolverOptions solver;
};

// Everything a scenario run needs: calibrated structural equations, the
// observed seed-year state and the baseline exogenous path.
struct ForecastSetup {
  MarketState seed;
  MarketState pre_seed;  // year before the seed, used for saturation at calibration
  EstimationResult demand;
  EstimationResult supply;
  Exogenous seed_exog;
  double charger_rebate_amount = 0.0;  // currency per charger implied at the seed year
  std::map<int, double> oil_path;
  ChargerCostPath charger_cost;
  StepOptions step;
  double delta = 0.95;
  double reduced_form_c = 0.0;
  double reduced_form_k = 0.0;

  Exogenous baseline(int year) const;
};

// Replaces both intercepts so that the seed year is reproduced exactly.
ForecastSetup calibrate_forecast(const MarketState& pre_seed, const MarketState& seed, const Exogenous& seed_exog,
                                 const EstimationResult& demand, const EstimationResult& supply,
                                 const SaturationBounds& saturation_scale, const ForecastOptions& options = {});
// Uses options.delta and options.burden_form as given; the fixture's optional
// delta and burden_form are defaults for callers to merge into the options.
ForecastSetup calibrate_forecast(const CountyFixture& fixture, const EstimationResult& demand,
                                 const EstimationResult& supply, const ForecastOptions& options = {});
ForecastSetup prepare_forecast(const Panel& panel, const EstimationResult& demand, const EstimationResult& supply,
                               const ForecastOptions& options = {});

struct Trajectory {
  std::string scenario;
  int window_start = 0;
  int window_end = 0;
  std::vector<MarketState> states;
  std::vector<double> ev_share;
  std::vector<int> share_above_one;  // years flagged, not clamped
  std::vector<int> rebate_clamped;   // years where the EVCS rebate share hit 1
};

Trajectory forecast_scenario(const Scenario& scenario, const ForecastSetup& setup, const FleetProjection& projection,
                             int horizon_end);
Trajectory forecast_scenario(const Scenario& scenario, const Panel& panel, const EstimationResult& demand,
                             const EstimationResult& supply, const FleetProjection& projection, int horizon_end,
                             const ForecastOptions& options = {});

struct ScenarioSummary {
  std::string scenario;
  int window_end = 0;
  std::optional<double> post_window_drop;  // (s[end] - s[end+1]) / s[end]
};

struct ComparisonReport {
  std::vector<int> years;
  std::vector<const Trajectory*> trajectories;
  std::vector<ScenarioSummary> summaries;

  const ScenarioSummary& summary(const std::string& scenario) const;
  void write_csv(std::ostream& out, int significant_digits = 6) const;
  void write_drop_csv(std::ostream& out, int significant_digits = 6) const;
  nlohmann::ordered_json to_json(int significant_digits = 6) const;
};

// Trajectories must share the same years; the report points into them.
ComparisonReport compare_scenarios(std::span<const Trajectory> trajectories);

}  // namespace evnet
