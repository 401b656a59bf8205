#include "evnet/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "evnet/error.hpp"
#include "evnet/format.hpp"

namespace evnet {

void Scenario::validate() const {
  if (!(demand_rebate_multiplier >= 0.0) || !(supply_rebate_multiplier >= 0.0))
    throw Error(ErrorCode::Domain, "scenario multipliers must be non-negative",
                {{"scenario", name},
                 {"demand_rebate_multiplier", demand_rebate_multiplier},
                 {"supply_rebate_multiplier", supply_rebate_multiplier}});
  if (window_start > window_end)
    throw Error(ErrorCode::Domain, "policy window start must not exceed its end",
                {{"scenario", name}, {"window", {window_start, window_end}}});
  if (!(baseline_purchase_rebate >= 0.0))
    throw Error(ErrorCode::Domain, "baseline purchase rebate must be non-negative",
                {{"scenario", name}, {"baseline_purchase_rebate", baseline_purchase_rebate}});
}

Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.name = j.value("name", s.name);
    s.demand_rebate_multiplier = j.value("demand_rebate_multiplier", s.demand_rebate_multiplier);
    s.supply_rebate_multiplier = j.value("supply_rebate_multiplier", s.supply_rebate_multiplier);
    if (j.contains("window")) {
      const auto w = j.at("window").get<std::vector<int>>();
      if (w.size() != 2) throw Error(ErrorCode::Schema, "scenario window must be [start, end]", {{"window", j.at("window")}});
      s.window_start = w[0];
      s.window_end = w[1];
    }
    s.baseline_purchase_rebate = j.value("baseline_purchase_rebate", s.baseline_purchase_rebate);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

Scenario Scenario::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scenario file " + path.string(), {{"path", path.string()}});
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema, std::string("scenario file is not valid JSON: ") + e.what(), {{"path", path.string()}});
  }
}

nlohmann::ordered_json Scenario::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["demand_rebate_multiplier"] = demand_rebate_multiplier;
  j["supply_rebate_multiplier"] = supply_rebate_multiplier;
  j["window"] = {window_start, window_end};
  j["baseline_purchase_rebate"] = baseline_purchase_rebate;
  return j;
}

double ChargerCostPath::cost(int year) const {
  const double slope = (second_cost - anchor_cost) / static_cast<double>(second_year - anchor_year);
  return std::max(floor_cost, anchor_cost + slope * static_cast<double>(year - anchor_year));
}

double FleetProjection::vehicles(int year) const {
  auto it = population_path.find(year);
  if (it == population_path.end())
    throw Error(ErrorCode::Alignment, "fleet projection does not cover year " + std::to_string(year), {{"year", year}});
  return slope * it->second + intercept;
}

FleetProjection project_fleet(std::span<const FleetHistoryPoint> history, std::map<int, double> future_population) {
  if (history.size() < 2)
    throw Error(ErrorCode::SingularFit, "fleet projection needs at least two history points",
                {{"points", history.size()}});
  double mean_p = 0.0, mean_v = 0.0;
  for (const auto& h : history) {
    mean_p += h.population;
    mean_v += h.vehicles;
  }
  mean_p /= static_cast<double>(history.size());
  mean_v /= static_cast<double>(history.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& h : history) {
    sxx += (h.population - mean_p) * (h.population - mean_p);
    sxy += (h.population - mean_p) * (h.vehicles - mean_v);
  }
  if (!(sxx > 0.0))
    throw Error(ErrorCode::SingularFit, "fleet history needs distinct populations", {{"points", history.size()}});

  FleetProjection f;
  f.slope = sxy / sxx;
  f.intercept = mean_v - f.slope * mean_p;
  f.population_path = std::move(future_population);

  double turnover = 0.0;
  int with_sales = 0;
  for (const auto& h : history) {
    if (h.sales && h.vehicles > 0.0) {
      turnover += *h.sales / h.vehicles;
      ++with_sales;
    }
  }
  f.turnover_fraction = with_sales > 0 ? turnover / with_sales : kDefaultTurnover;
  if (!(f.turnover_fraction > 0.0 && f.turnover_fraction < 1.0))
    throw Error(ErrorCode::Domain, "turnover fraction must lie in (0, 1)", {{"turnover_fraction", f.turnover_fraction}});
  for (const auto& [year, pop] : f.population_path) {
    if (!(f.vehicles(year) > 0.0))
      throw Error(ErrorCode::Domain, "projected vehicle count is not positive",
                  {{"year", year}, {"population", pop}, {"vehicles", f.vehicles(year)}});
  }
  return f;
}

FleetProjection constant_fleet(double vehicles, int first_year, int last_year, double turnover) {
  FleetProjection f;
  f.slope = 0.0;
  f.intercept = vehicles;
  f.turnover_fraction = turnover;
  for (int y = first_year; y <= last_year; ++y) f.population_path[y] = 0.0;
  return f;
}

AdjustedExogenous apply_scenario(const Scenario& scenario, int year, const Exogenous& base) {
  scenario.validate();
  AdjustedExogenous out{base, scenario.in_window(year), false};
  if (!out.in_window) return out;

  // Only the rebate increment beyond the baseline moves the price; the
  // observed price already reflects the baseline rebate.
  const double extra = scenario.baseline_purchase_rebate * (scenario.demand_rebate_multiplier - 1.0);
  out.values.avg_ev_price = base.avg_ev_price - extra;
  if (!(out.values.avg_ev_price > 0.0))
    throw Error(ErrorCode::ScenarioInfeasible, "scenario drives the effective EV price to zero or below",
                {{"scenario", scenario.name}, {"year", year}, {"price", out.values.avg_ev_price}});

  const double scaled = base.rebate_pct * scenario.supply_rebate_multiplier;
  out.values.rebate_pct = std::clamp(scaled, 0.0, 1.0);
  out.rebate_clamped = out.values.rebate_pct != scaled;
  return out;
}

CountySnapshot aggregate_county(const Panel& panel, int year) {
  CountySnapshot c;
  c.state.year = year;
  std::size_t n = 0;
  double income = 0.0, price = 0.0, oil = 0.0, rebate = 0.0;
  for (const auto& r : panel.records()) {
    if (r.year != year) continue;
    ++n;
    c.state.sales += r.ev_sales;
    c.state.ev_stock += r.ev_stock;
    c.state.station_stock += r.station_stock;
    c.exog.white_pop += r.white_pop;
    c.exog.asian_pop += r.asian_pop;
    c.exog.parking_lots += r.parking_lots;
    income += r.median_income;
    price += r.avg_ev_price;
    oil += r.oil_price;
    rebate += r.rebate_pct;
  }
  if (n == 0) throw Error(ErrorCode::LagUnavailable, "panel has no records for year " + std::to_string(year), {{"years", {year}}});
  const double count = static_cast<double>(n);
  // sum(I * B) / sum(I) = sum(AP) / sum(I): mean price over mean income.
  c.exog.median_income = income / count;
  c.exog.avg_ev_price = price / count;
  c.exog.oil_price = oil / count;
  c.exog.rebate_pct = rebate / count;
  return c;
}

Exogenous ForecastSetup::baseline(int year) const {
  Exogenous x = seed_exog;
  x.saturation.reset();
  if (!oil_path.empty()) {
    auto it = oil_path.upper_bound(year);
    if (it != oil_path.begin()) x.oil_price = std::prev(it)->second;
  }
  x.rebate_pct = std::clamp(charger_rebate_amount / charger_cost.cost(year), 0.0, 1.0);
  return x;
}

namespace {

// Published tables omit intercepts; calibration supplies them.
EstimationResult with_intercept(EstimationResult r) {
  if (r.has(kInterceptName)) return r;
  const Eigen::Index k = r.coefficients.size();
  r.names.push_back(kInterceptName);
  r.coefficients.conservativeResize(k + 1);
  r.coefficients[k] = 0.0;
  r.std_errors.conservativeResize(k + 1);
  r.std_errors[k] = 0.0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k + 1, k + 1);
  if (r.covariance.rows() == k && r.covariance.cols() == k) cov.topLeftCorner(k, k) = r.covariance;
  r.covariance = std::move(cov);
  return r;
}

}  // namespace

ForecastSetup calibrate_forecast(const MarketState& pre_seed, const MarketState& seed, const Exogenous& seed_exog,
                                 const EstimationResult& demand_in, const EstimationResult& supply_in,
                                 const SaturationBounds& saturation_scale, const ForecastOptions& options) {
  const EstimationResult demand = with_intercept(demand_in);
  const EstimationResult supply = with_intercept(supply_in);
  if (!(options.delta >= 0.0 && options.delta <= 1.0))
    throw Error(ErrorCode::Domain, "survival fraction delta must lie in [0, 1]", {{"delta", options.delta}});
  if (seed.year != pre_seed.year + 1)
    throw Error(ErrorCode::Alignment, "pre-seed state must be the year before the seed",
                {{"seed_year", seed.year}, {"pre_seed_year", pre_seed.year}});
  if (!(seed.sales > 0.0))
    throw Error(ErrorCode::Domain, "calibration requires positive seed-year sales", {{"sales", seed.sales}});
  check_structural_coefficients(demand, supply, options.burden_form);

  ForecastSetup f;
  f.seed = seed;
  f.pre_seed = pre_seed;
  f.seed_exog = seed_exog;
  f.seed_exog.saturation.reset();
  f.demand = demand;
  f.supply = supply;
  f.delta = options.delta;
  f.oil_path = options.oil_path;
  f.charger_cost = options.charger_cost;
  f.charger_rebate_amount = seed_exog.rebate_pct * options.charger_cost.cost(seed.year);
  f.step.saturation_scale = saturation_scale;
  f.step.burden_form = options.burden_form;
  f.step.solver = options.solver;

  using namespace demand_cols;
  using namespace supply_cols;
  const double sat = simulated_saturation(pre_seed, f.seed_exog, f.step);
  const double supply_fit = supply.coefficient(kEvStock) * log_count(seed.ev_stock) +
                            supply.coefficient(kParking) * log_count(seed_exog.parking_lots) +
                            supply.coefficient(kSaturation) * sat + supply.coefficient(kRebate) * seed_exog.rebate_pct;
  f.supply.set_coefficient(kInterceptName, log_count(seed.station_stock) - supply_fit);

  const double burden = seed_exog.burden();
  const bool linear = options.burden_form == BurdenForm::Linear;
  const double demand_fit = demand.coefficient(kStations) * log_count(seed.station_stock) +
                            demand.coefficient(kOil) * std::log(seed_exog.oil_price) +
                            demand.coefficient(kWhite) * log_count(seed_exog.white_pop) +
                            demand.coefficient(kAsian) * log_count(seed_exog.asian_pop) +
                            demand.coefficient(linear ? kBurden : kLogBurden) * (linear ? burden : std::log(burden));
  f.demand.set_coefficient(kInterceptName, log_count(seed.sales) - demand_fit);

  f.reduced_form_k = demand.coefficient(kStations) * supply.coefficient(kEvStock);
  f.reduced_form_c = calibrate_constant(seed.sales, pre_seed.ev_stock, f.reduced_form_k, options.delta);
  for (auto* r : {&f.demand, &f.supply}) {
    r->metadata["calibrated_intercept"] = true;
    r->metadata["seed_year"] = seed.year;
  }
  return f;
}

namespace {

MarketState state_from_json(const nlohmann::json& j) {
  MarketState s;
  s.year = j.at("year").get<int>();
  s.sales = j.at("sales").get<double>();
  s.ev_stock = j.at("ev_stock").get<double>();
  s.station_stock = j.at("station_stock").get<double>();
  return s;
}

nlohmann::ordered_json state_to_json(const MarketState& s) {
  nlohmann::ordered_json j;
  j["year"] = s.year;
  j["sales"] = s.sales;
  j["ev_stock"] = s.ev_stock;
  j["station_stock"] = s.station_stock;
  return j;
}

}  // namespace

CountyFixture CountyFixture::from_json(const nlohmann::json& j) {
  CountyFixture f;
  try {
    f.pre_seed = state_from_json(j.at("pre_seed"));
    f.seed = state_from_json(j.at("seed"));
    const auto& x = j.at("exogenous");
    f.exog.oil_price = x.at("oil_price").get<double>();
    f.exog.white_pop = x.at("white_pop").get<double>();
    f.exog.asian_pop = x.at("asian_pop").get<double>();
    f.exog.avg_ev_price = x.at("avg_ev_price").get<double>();
    f.exog.median_income = x.at("median_income").get<double>();
    f.exog.parking_lots = x.at("parking_lots").get<double>();
    f.exog.rebate_pct = x.at("rebate_pct").get<double>();
    const auto& b = j.at("saturation_bounds");
    f.saturation_bounds.raw_min = b.at("raw_min").get<double>();
    f.saturation_bounds.raw_max = b.at("raw_max").get<double>();
    f.saturation_bounds.epsilon = b.value("epsilon", f.saturation_bounds.epsilon);
    if (j.contains("delta")) f.delta = j.at("delta").get<double>();
    if (j.contains("burden_form")) {
      const auto form = j.at("burden_form").get<std::string>();
      if (form == "linear") f.burden_form = BurdenForm::Linear;
      else if (form == "log") f.burden_form = BurdenForm::Log;
      else throw Error(ErrorCode::Schema, "burden_form must be 'linear' or 'log'", {{"burden_form", form}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("malformed county fixture: ") + e.what());
  }
  if (!(f.exog.oil_price > 0.0 && f.exog.avg_ev_price > 0.0 && f.exog.median_income > 0.0))
    throw Error(ErrorCode::Domain, "county fixture prices and income must be positive");
  if (!(f.exog.rebate_pct >= 0.0 && f.exog.rebate_pct <= 1.0))
    throw Error(ErrorCode::Domain, "county fixture rebate_pct must lie in [0, 1]", {{"rebate_pct", f.exog.rebate_pct}});
  return f;
}

CountyFixture CountyFixture::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open county fixture " + path.string(), {{"path", path.string()}});
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema, std::string("county fixture is not valid JSON: ") + e.what(), {{"path", path.string()}});
  }
}

nlohmann::ordered_json CountyFixture::to_json() const {
  nlohmann::ordered_json j;
  j["pre_seed"] = state_to_json(pre_seed);
  j["seed"] = state_to_json(seed);
  j["exogenous"] = {{"oil_price", exog.oil_price},       {"white_pop", exog.white_pop},
                    {"asian_pop", exog.asian_pop},       {"avg_ev_price", exog.avg_ev_price},
                    {"median_income", exog.median_income}, {"parking_lots", exog.parking_lots},
                    {"rebate_pct", exog.rebate_pct}};
  j["saturation_bounds"] = {{"raw_min", saturation_bounds.raw_min},
                            {"raw_max", saturation_bounds.raw_max},
                            {"epsilon", saturation_bounds.epsilon}};
  if (delta) j["delta"] = *delta;
  if (burden_form) j["burden_form"] = *burden_form == BurdenForm::Linear ? "linear" : "log";
  return j;
}

ForecastSetup calibrate_forecast(const CountyFixture& fixture, const EstimationResult& demand,
                                 const EstimationResult& supply, const ForecastOptions& options) {
  return calibrate_forecast(fixture.pre_seed, fixture.seed, fixture.exog, demand, supply, fixture.saturation_bounds,
                            options);
}

ForecastSetup prepare_forecast(const Panel& panel, const EstimationResult& demand, const EstimationResult& supply,
                               const ForecastOptions& options) {
  if (panel.years().empty()) throw Error(ErrorCode::EmptyResult, "panel is empty");
  const int seed_year = options.seed_year.value_or(panel.years().back());
  const auto seed = aggregate_county(panel, seed_year);
  const auto pre = aggregate_county(panel, seed_year - 1);
  return calibrate_forecast(pre.state, seed.state, seed.exog, demand, supply, panel.saturation_bounds(), options);
}

Trajectory forecast_scenario(const Scenario& scenario, const ForecastSetup& setup, const FleetProjection& projection,
                             int horizon_end) {
  scenario.validate();
  const int years = horizon_end - setup.seed.year;
  if (years < 0)
    throw Error(ErrorCode::Domain, "horizon ends before the seed year",
                {{"seed_year", setup.seed.year}, {"horizon_end", horizon_end}});
  for (int y = setup.seed.year; y <= horizon_end; ++y)
    if (!projection.covers(y))
      throw Error(ErrorCode::Alignment, "fleet projection does not cover year " + std::to_string(y), {{"year", y}});

  Trajectory t;
  t.scenario = scenario.name;
  t.window_start = scenario.window_start;
  t.window_end = scenario.window_end;
  auto path = [&](int year) {
    auto adjusted = apply_scenario(scenario, year, setup.baseline(year));
    if (adjusted.rebate_clamped) t.rebate_clamped.push_back(year);
    return adjusted.values;
  };
  t.states = simulate_horizon(setup.seed, years, setup.demand, setup.supply, path, setup.delta, setup.step);
  t.ev_share.reserve(t.states.size());
  for (const auto& s : t.states) {
    const double share = s.ev_stock / projection.vehicles(s.year);
    if (share > 1.0) t.share_above_one.push_back(s.year);
    t.ev_share.push_back(share);
  }
  return t;
}

Trajectory forecast_scenario(const Scenario& scenario, const Panel& panel, const EstimationResult& demand,
                             const EstimationResult& supply, const FleetProjection& projection, int horizon_end,
                             const ForecastOptions& options) {
  return forecast_scenario(scenario, prepare_forecast(panel, demand, supply, options), projection, horizon_end);
}

const ScenarioSummary& ComparisonReport::summary(const std::string& scenario) const {
  for (const auto& s : summaries)
    if (s.scenario == scenario) return s;
  throw Error(ErrorCode::SpecMismatch, "no scenario named '" + scenario + "' in the report", {{"scenario", scenario}});
}

ComparisonReport compare_scenarios(std::span<const Trajectory> trajectories) {
  ComparisonReport report;
  if (trajectories.empty()) return report;
  for (const auto& s : trajectories.front().states) report.years.push_back(s.year);
  for (const auto& t : trajectories) {
    std::vector<int> years;
    for (const auto& s : t.states) years.push_back(s.year);
    if (years != report.years)
      throw Error(ErrorCode::Alignment, "scenario trajectories cover different years",
                  {{"scenario", t.scenario},
                   {"expected", {report.years.front(), report.years.back()}},
                   {"got", years.empty() ? nlohmann::json::array() : nlohmann::json{years.front(), years.back()}}});
    report.trajectories.push_back(&t);

    ScenarioSummary summary{t.scenario, t.window_end, std::nullopt};
    const MarketState* at_end = nullptr;
    const MarketState* after = nullptr;
    for (const auto& s : t.states) {
      if (s.year == t.window_end) at_end = &s;
      if (s.year == t.window_end + 1) after = &s;
    }
    if (at_end && after && at_end->sales > 0.0) summary.post_window_drop = (at_end->sales - after->sales) / at_end->sales;
    report.summaries.push_back(summary);
  }
  return report;
}

void ComparisonReport::write_csv(std::ostream& out, int digits) const {
  out << "year";
  for (const auto* t : trajectories) out << ',' << t->scenario << "_sales," << t->scenario << "_ev_stock," << t->scenario << "_station_stock," << t->scenario << "_ev_share";
  out << '\n';
  for (std::size_t i = 0; i < years.size(); ++i) {
    out << years[i];
    for (const auto* t : trajectories) {
      const auto& s = t->states[i];
      out << ',' << format_number(s.sales, digits) << ',' << format_number(s.ev_stock, digits) << ','
          << format_number(s.station_stock, digits) << ',' << format_number(t->ev_share[i], digits);
    }
    out << '\n';
  }
}

void ComparisonReport::write_drop_csv(std::ostream& out, int digits) const {
  out << "scenario,window_end,post_window_drop\n";
  for (const auto& s : summaries) {
    out << s.scenario << ',' << s.window_end << ',';
    if (s.post_window_drop) out << format_number(*s.post_window_drop, digits);
    out << '\n';
  }
}

nlohmann::ordered_json ComparisonReport::to_json(int digits) const {
  nlohmann::ordered_json j;
  j["years"] = years;
  auto scenarios = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto* t = trajectories[k];
    nlohmann::ordered_json s;
    s["name"] = t->scenario;
    s["window"] = {t->window_start, t->window_end};
    s["post_window_drop"] = summaries[k].post_window_drop
                                ? nlohmann::ordered_json(round_significant(*summaries[k].post_window_drop, digits))
                                : nlohmann::ordered_json(nullptr);
    s["trajectory"] = trajectory_json(t->states, t->ev_share, digits);
    s["share_above_one"] = t->share_above_one;
    s["rebate_clamped_years"] = t->rebate_clamped;
    scenarios.push_back(s);
  }
  j["scenarios"] = scenarios;
  return j;
}

}  // namespace evnet
