#include "evnet/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evnet/dynamics.hpp"
#include "evnet/error.hpp"
#include "evnet/estimator.hpp"
#include "evnet/format.hpp"
#include "evnet/manifest.hpp"
#include "evnet/modelspec.hpp"
#include "evnet/panel.hpp"
#include "evnet/policy.hpp"
#include "evnet/synth.hpp"

namespace evnet {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Common {
  std::string out_dir;
  bool full_precision = false;
  int digits() const { return full_precision ? 0 : 6; }
};

std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : kDefaultOutDir;
}

BurdenForm parse_burden(const std::string& text) {
  if (text == "linear") return BurdenForm::Linear;
  if (text == "log") return BurdenForm::Log;
  throw Error(ErrorCode::Usage, "burden form must be 'linear' or 'log'", {{"burden", text}});
}

const char* burden_name(BurdenForm form) { return form == BurdenForm::Linear ? "linear" : "log"; }

std::string read_text(const std::string& path, std::istream& in) {
  std::ostringstream buf;
  if (path == "-") {
    buf << in.rdbuf();
  } else {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path, {{"path", path}});
    buf << f.rdbuf();
  }
  return buf.str();
}

template <class Json = nlohmann::json>
Json parse_json_text(const std::string& text, const std::string& label) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema, label + " is not valid JSON: " + e.what(), {{"input", label}});
  }
}

// Header-keyed numeric CSV; cells may be empty.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

NumericTable parse_numeric_csv(const std::string& text, const std::string& label) {
  NumericTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    ++row;
    if (cells.size() > t.header.size())
      throw Error(ErrorCode::Schema, label + ": too many fields", {{"input", label}, {"row", row}});
    std::vector<std::optional<double>> values(t.header.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].empty()) continue;
      try {
        std::size_t used = 0;
        values[i] = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::Schema, label + ": not a number '" + cells[i] + "'",
                    {{"input", label}, {"row", row}, {"column", t.header[i]}});
      }
    }
    t.rows.push_back(std::move(values));
  }
  if (t.header.empty()) throw Error(ErrorCode::Schema, label + " is empty", {{"input", label}});
  return t;
}

std::size_t require_column(const NumericTable& t, const std::string& name, const std::string& label) {
  auto c = t.column(name);
  if (!c) throw Error(ErrorCode::Schema, label + ": missing column '" + name + "'", {{"input", label}, {"column", name}});
  return *c;
}

int year_of(const std::optional<double>& v, const std::string& label) {
  if (!v || *v != std::floor(*v)) throw Error(ErrorCode::Schema, label + ": year must be an integer", {{"input", label}});
  return static_cast<int>(*v);
}

std::map<int, double> parse_oil_path(const std::string& text) {
  const auto t = parse_numeric_csv(text, "oil path");
  const auto y = require_column(t, "year", "oil path");
  const auto p = require_column(t, "oil_price", "oil path");
  std::map<int, double> out;
  for (const auto& r : t.rows) {
    if (!r[p] || !(*r[p] > 0.0)) throw Error(ErrorCode::Domain, "oil path prices must be positive");
    out[year_of(r[y], "oil path")] = *r[p];
  }
  return out;
}

// year,population[,vehicles[,sales]]: rows with vehicles form the history the
// fleet regression is fitted on; every row's population enters the path.
FleetProjection parse_population(const std::string& text) {
  const auto t = parse_numeric_csv(text, "population");
  const auto y = require_column(t, "year", "population");
  const auto p = require_column(t, "population", "population");
  const auto v = t.column("vehicles");
  const auto s = t.column("sales");
  std::vector<FleetHistoryPoint> history;
  std::map<int, double> path;
  for (const auto& r : t.rows) {
    if (!r[p]) throw Error(ErrorCode::Schema, "population: every row needs a population");
    path[year_of(r[y], "population")] = *r[p];
    if (v && r[*v]) history.push_back({*r[p], *r[*v], s ? r[*s] : std::nullopt});
  }
  return project_fleet(history, std::move(path));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string(), {{"path", dir.string()}});
}

struct Outputs {
  fs::path dir;
  RunManifest manifest;

  void write(const std::string& name, const std::string& content) {
    ensure_dir(dir);
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string(), {{"path", (dir / name).string()}});
    f << content;
    manifest.output_hashes[name] = sha256_hex(content);
  }
  void finish() {
    ensure_dir(dir);
    manifest.write(dir / (manifest.command + "-manifest.json"));
  }
};

std::pair<EstimationResult, EstimationResult> coefficients_from_json(const nlohmann::ordered_json& j) {
  if (!j.contains("demand") || !j.contains("supply"))
    throw Error(ErrorCode::Schema, "coefficient file needs 'demand' and 'supply' objects");
  return {estimation_from_json(j.at("demand")), estimation_from_json(j.at("supply"))};
}

ojson solver_config(const SolverOptions& s) {
  return {{"tol", s.tol}, {"max_iter", s.max_iter}, {"damping", s.damping}};
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string panel;
  std::string method = "gmm";
  std::string schema;
  std::string burden = "linear";
  std::string covariance = "hc0";
  std::string format = "json";
  bool lenient = false;
  double delta = 0.95;
  int gmm_steps = 2;
};

ojson panel_summary(const Panel& panel) {
  ojson j;
  j["records"] = panel.size();
  j["estimation_rows"] = panel.derived_count();
  j["zips"] = panel.zips().size();
  j["years"] = panel.years();
  j["saturation_bounds"] = {{"raw_min", panel.saturation_bounds().raw_min},
                            {"raw_max", panel.saturation_bounds().raw_max}};
  auto rejected = ojson::array();
  for (const auto& r : panel.rejected()) rejected.push_back({{"row", r.row}, {"column", r.column}, {"message", r.message}});
  j["rejected_rows"] = rejected;
  return j;
}

Panel load_panel_input(const std::string& path, const std::string& schema_path, bool lenient, double delta,
                       std::istream& in, RunManifest& manifest) {
  const std::string text = read_text(path, in);
  manifest.input_hashes["panel"] = sha256_hex(text);
  Schema schema = Schema::canonical();
  if (!schema_path.empty()) {
    const std::string s = read_text(schema_path, in);
    manifest.input_hashes["schema"] = sha256_hex(s);
    schema = Schema::from_json(parse_json_text(s, "schema"));
  }
  std::istringstream stream(text);
  return load_panel(stream, schema, PanelOptions{delta, PanelOptions{}.saturation_epsilon, lenient});
}

ModelOptions model_options(const std::string& burden, const std::string& covariance, int gmm_steps) {
  ModelOptions o;
  o.burden_form = parse_burden(burden);
  if (covariance == "hc0") o.fit.covariance = CovarianceKind::HC0;
  else if (covariance == "hc1") o.fit.covariance = CovarianceKind::HC1;
  else throw Error(ErrorCode::Usage, "covariance must be 'hc0' or 'hc1'", {{"covariance", covariance}});
  o.gmm_steps = gmm_steps;
  return o;
}

int run_estimate(const EstimateArgs& a, const Common& c, std::istream& in, std::ostream& out) {
  Outputs o{c.out_dir, {}};
  o.manifest.command = "estimate";
  const auto method = parse_estimator(a.method);
  const auto opts = model_options(a.burden, a.covariance, a.gmm_steps);
  const Panel panel = load_panel_input(a.panel, a.schema, a.lenient, a.delta, in, o.manifest);
  const auto demand = estimate_demand(panel, method, opts);
  const auto supply = estimate_supply(panel, method, opts);

  ojson j;
  j["demand"] = to_json(demand, c.digits());
  j["supply"] = to_json(supply, c.digits());
  j["panel"] = panel_summary(panel);
  const std::string json_text = j.dump(2) + "\n";

  const std::string label = to_string(method);
  std::string tables = format_table({{label, &demand}}, "Demand: " + demand.response_name) + "\n" +
                       format_table({{label, &supply}}, "Supply: " + supply.response_name);
  o.write("estimates.json", json_text);
  o.write("tables.txt", tables);
  o.manifest.config = {{"method", label},
                       {"delta", a.delta},
                       {"burden_form", a.burden},
                       {"covariance", a.covariance},
                       {"gmm_steps", a.gmm_steps},
                       {"lenient", a.lenient},
                       {"weak_instrument_f", opts.fit.weak_instrument_f},
                       {"max_condition", opts.fit.max_condition},
                       {"significant_digits", c.digits()}};
  o.finish();
  out << (a.format == "text" ? tables : json_text);
  return 0;
}

// ---------------------------------------------------------------- simulate / forecast shared

struct ForecastInputs {
  std::string panel;
  std::string county;
  std::string coefficients;
  std::string schema;
  std::string method = "gmm";
  std::string burden;
  std::string oil_path;
  std::string population;
  std::optional<double> delta;
  std::optional<int> seed_year;
  int horizon_end = 2045;
  bool lenient = false;
};

struct Prepared {
  ForecastSetup setup;
  FleetProjection fleet;
  std::optional<std::pair<EstimationResult, EstimationResult>> estimated;
};

Prepared prepare(const ForecastInputs& a, const Common& c, std::istream& in, RunManifest& manifest) {
  if (a.panel.empty() == a.county.empty())
    throw Error(ErrorCode::Usage, "exactly one of --panel or --county is required");

  std::optional<CountyFixture> county;
  if (!a.county.empty()) {
    const std::string text = read_text(a.county, in);
    manifest.input_hashes["county"] = sha256_hex(text);
    county = CountyFixture::from_json(parse_json_text(text, "county fixture"));
  }

  ForecastOptions opts;
  opts.delta = a.delta.value_or(county && county->delta ? *county->delta : 0.95);
  opts.burden_form = !a.burden.empty() ? parse_burden(a.burden)
                                       : (county && county->burden_form ? *county->burden_form : BurdenForm::Linear);
  opts.seed_year = a.seed_year;
  if (!a.oil_path.empty()) {
    const std::string text = read_text(a.oil_path, in);
    manifest.input_hashes["oil_path"] = sha256_hex(text);
    opts.oil_path = parse_oil_path(text);
  }

  Prepared p;
  std::optional<Panel> panel;
  if (!a.panel.empty()) panel = load_panel_input(a.panel, a.schema, a.lenient, opts.delta, in, manifest);

  EstimationResult demand, supply;
  if (!a.coefficients.empty()) {
    const std::string text = read_text(a.coefficients, in);
    manifest.input_hashes["coefficients"] = sha256_hex(text);
    std::tie(demand, supply) = coefficients_from_json(parse_json_text<nlohmann::ordered_json>(text, "coefficients"));
  } else if (panel) {
    ModelOptions mo;
    mo.burden_form = opts.burden_form;
    const auto method = parse_estimator(a.method);
    demand = estimate_demand(*panel, method, mo);
    supply = estimate_supply(*panel, method, mo);
    p.estimated = std::pair{demand, supply};
  } else {
    throw Error(ErrorCode::Usage, "--county requires --coefficients");
  }

  if (county) {
    if (a.seed_year && *a.seed_year != county->seed.year)
      throw Error(ErrorCode::Usage, "--seed-year does not match the county fixture",
                  {{"seed_year", *a.seed_year}, {"fixture_seed_year", county->seed.year}});
    p.setup = calibrate_forecast(*county, demand, supply, opts);
  } else {
    p.setup = prepare_forecast(*panel, demand, supply, opts);
  }

  if (!a.population.empty()) {
    const std::string text = read_text(a.population, in);
    manifest.input_hashes["population"] = sha256_hex(text);
    p.fleet = parse_population(text);
  } else {
    p.fleet = constant_fleet(kDefaultFleet2045, p.setup.seed.year, a.horizon_end);
  }

  manifest.config = {{"delta", opts.delta},
                     {"seed_year", p.setup.seed.year},
                     {"horizon_end", a.horizon_end},
                     {"burden_form", burden_name(opts.burden_form)},
                     {"solver", solver_config(opts.solver)},
                     {"charger_cost", {{"anchor", {opts.charger_cost.anchor_year, opts.charger_cost.anchor_cost}},
                                       {"second", {opts.charger_cost.second_year, opts.charger_cost.second_cost}},
                                       {"floor", opts.charger_cost.floor_cost}}},
                     {"fleet", a.population.empty() ? "constant" : "projected"},
                     {"significant_digits", c.digits()}};
  if (p.estimated) manifest.config["method"] = a.method;
  return p;
}

void add_forecast_options(CLI::App* cmd, ForecastInputs& a) {
  cmd->add_option("--panel", a.panel, "Zip-year panel CSV ('-' reads stdin)");
  cmd->add_option("--county", a.county, "County seed fixture JSON (instead of --panel)");
  cmd->add_option("--coefficients", a.coefficients, "Coefficient JSON with 'demand' and 'supply' objects");
  cmd->add_option("--schema", a.schema, "Column mapping sidecar JSON for the panel");
  cmd->add_option("--method", a.method, "Estimator used when no coefficients are given")
      ->check(CLI::IsMember({"ols", "tsls", "gmm"}));
  cmd->add_option("--burden", a.burden, "Burden regressor form")->check(CLI::IsMember({"linear", "log"}));
  cmd->add_option("--delta", a.delta, "Annual survival fraction of the install base");
  cmd->add_option("--seed-year", a.seed_year, "Year whose observed state seeds the forecast");
  cmd->add_option("--horizon-end", a.horizon_end, "Last simulated year");
  cmd->add_option("--oil-path", a.oil_path, "CSV year,oil_price overriding the held oil price");
  cmd->add_option("--population", a.population, "CSV year,population[,vehicles[,sales]] for the fleet projection");
  cmd->add_flag("--lenient", a.lenient, "Drop invalid panel rows instead of failing");
}

// ---------------------------------------------------------------- simulate

int run_simulate(const ForecastInputs& a, const std::string& mode, const Common& c, std::istream& in,
                 std::ostream& out) {
  Outputs o{c.out_dir, {}};
  o.manifest.command = "simulate";
  const auto p = prepare(a, c, in, o.manifest);
  const int years = a.horizon_end - p.setup.seed.year;
  if (years < 0) throw Error(ErrorCode::Usage, "--horizon-end precedes the seed year");
  for (int y = p.setup.seed.year; y <= a.horizon_end; ++y)
    if (!p.fleet.covers(y)) throw Error(ErrorCode::Alignment, "population does not cover year " + std::to_string(y));

  std::vector<MarketState> states;
  if (mode == "reduced") {
    DynamicsParams params{p.setup.reduced_form_c, p.setup.reduced_form_k, p.setup.delta};
    params.tol = p.setup.step.solver.tol;
    params.max_iter = p.setup.step.solver.max_iter;
    states = simulate_reduced_form(params, p.setup.seed, years);
  } else {
    states = simulate_horizon(p.setup.seed, years, p.setup.demand, p.setup.supply,
                              [&](int year) { return p.setup.baseline(year); }, p.setup.delta, p.setup.step);
  }
  std::vector<double> share;
  for (const auto& s : states) share.push_back(s.ev_stock / p.fleet.vehicles(s.year));
  std::ostringstream csv;
  write_trajectory_csv(csv, states, share, c.digits());
  o.write("trajectory.csv", csv.str());
  o.manifest.config["mode"] = mode;
  if (mode == "reduced") o.manifest.config["reduced_form"] = {{"c", p.setup.reduced_form_c}, {"k", p.setup.reduced_form_k}};
  o.finish();
  out << csv.str();
  return 0;
}

// ---------------------------------------------------------------- forecast

int run_forecast(const ForecastInputs& a, const std::vector<std::string>& scenario_paths, const Common& c,
                 std::istream& in, std::ostream& out) {
  Outputs o{c.out_dir, {}};
  o.manifest.command = "forecast";
  std::vector<Scenario> scenarios;
  for (const auto& path : scenario_paths) {
    const std::string text = read_text(path, in);
    auto s = Scenario::from_json(parse_json_text(text, "scenario " + path));
    o.manifest.input_hashes["scenario:" + s.name] = sha256_hex(text);
    scenarios.push_back(std::move(s));
  }
  if (scenarios.empty()) scenarios.push_back(Scenario{});
  std::set<std::string> names;
  for (const auto& s : scenarios)
    if (!names.insert(s.name).second)
      throw Error(ErrorCode::Usage, "scenario names must be unique", {{"scenario", s.name}});

  const auto p = prepare(a, c, in, o.manifest);

  std::vector<std::future<Trajectory>> jobs;
  for (const auto& s : scenarios)
    jobs.push_back(std::async(std::launch::async, [&p, &s, &a] { return forecast_scenario(s, p.setup, p.fleet, a.horizon_end); }));
  std::vector<Trajectory> trajectories;
  for (auto& j : jobs) trajectories.push_back(j.get());
  const auto report = compare_scenarios(trajectories);

  std::ostringstream csv, drops;
  report.write_csv(csv, c.digits());
  report.write_drop_csv(drops, c.digits());
  ojson j = report.to_json(c.digits());
  auto sc = ojson::array();
  for (const auto& s : scenarios) sc.push_back(s.to_json());
  j["scenario_definitions"] = sc;
  j["seed"] = {{"year", p.setup.seed.year},
               {"sales", round_significant(p.setup.seed.sales, c.digits())},
               {"ev_stock", round_significant(p.setup.seed.ev_stock, c.digits())},
               {"station_stock", round_significant(p.setup.seed.station_stock, c.digits())}};
  if (p.estimated) {
    j["estimates"] = {{"demand", to_json(p.estimated->first, c.digits())},
                      {"supply", to_json(p.estimated->second, c.digits())}};
  }
  o.write("comparison.csv", csv.str());
  o.write("drops.csv", drops.str());
  o.write("comparison.json", j.dump(2) + "\n");
  auto names_json = ojson::array();
  for (const auto& s : scenarios) names_json.push_back(s.name);
  o.manifest.config["scenarios"] = names_json;
  o.finish();
  out << csv.str() << '\n' << drops.str();
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_zips, n_years, first_year;
  std::optional<double> rho, noise_sd, delta;
  std::string burden;
};

int run_synth(const SynthArgs& a, const Common& c, std::istream& in, std::ostream& out) {
  Outputs o{c.out_dir, {}};
  o.manifest.command = "synth";
  SynthConfig cfg;
  if (!a.config.empty()) {
    const std::string text = read_text(a.config, in);
    o.manifest.input_hashes["config"] = sha256_hex(text);
    cfg = SynthConfig::from_json(parse_json_text(text, "synth config"));
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.n_zips) cfg.n_zips = *a.n_zips;
  if (a.n_years) cfg.n_years = *a.n_years;
  if (a.first_year) cfg.first_year = *a.first_year;
  if (a.rho) cfg.endogeneity_rho = *a.rho;
  if (a.noise_sd) cfg.noise_sd = *a.noise_sd;
  if (a.delta) cfg.delta = *a.delta;
  if (!a.burden.empty()) cfg.burden_form = parse_burden(a.burden);

  const Panel panel = generate_panel(cfg);
  std::ostringstream csv;
  write_panel_csv(csv, panel.records(), c.digits());
  o.manifest.config = cfg.to_json();
  o.manifest.config["significant_digits"] = c.digits();
  o.manifest.output_hashes["stdout"] = sha256_hex(csv.str());
  o.finish();
  out << csv.str();
  return 0;
}

// ---------------------------------------------------------------- describe

int run_describe(const std::string& burden, const Common& c, std::ostream& out) {
  Outputs o{c.out_dir, {}};
  o.manifest.command = "describe";
  ModelOptions mo;
  mo.burden_form = parse_burden(burden);
  const SolverOptions solver;
  const PanelOptions panel;
  const FitOptions fit;
  const ChargerCostPath cost;
  const Scenario baseline;

  ojson j;
  j["tool_version"] = tool_version();
  j["model"] = describe(mo);
  j["panel_columns"] = canonical_columns();
  j["defaults"] = {{"delta", panel.delta},
                   {"saturation_epsilon", panel.saturation_epsilon},
                   {"solver", solver_config(solver)},
                   {"weak_instrument_f", fit.weak_instrument_f},
                   {"gmm_max_condition", fit.max_condition},
                   {"gmm_steps", mo.gmm_steps},
                   {"covariance", "hc0"},
                   {"significant_digits", 6},
                   {"policy_window", {baseline.window_start, baseline.window_end}},
                   {"baseline_purchase_rebate", baseline.baseline_purchase_rebate},
                   {"charger_cost", {{"anchor", {cost.anchor_year, cost.anchor_cost}},
                                     {"second", {cost.second_year, cost.second_cost}},
                                     {"floor", cost.floor_cost}}},
                   {"fleet_vehicles", kDefaultFleet2045},
                   {"turnover_fraction", kDefaultTurnover},
                   {"output_dir_env", kOutDirEnv}};
  j["synth_defaults"] = SynthConfig{}.to_json();
  o.manifest.config = {{"burden_form", burden}};
  const std::string text = j.dump(2) + "\n";
  o.manifest.output_hashes["stdout"] = sha256_hex(text);
  o.finish();
  out << text;
  return 0;
}

void emit_error(std::ostream& err, std::string_view code, const std::string& message, const nlohmann::json& context) {
  nlohmann::json j = {{"code", std::string(code)}, {"message", message}, {"context", context}};
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"EV and charging-station market toolkit"};
  app.name(args.empty() ? "evnet" : fs::path(args.front()).filename().string());
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  common.out_dir = default_out_dir();
  app.add_option("--out", common.out_dir, std::string("Output directory (default $") + kOutDirEnv + " or " + kDefaultOutDir + ")");
  app.add_flag("--full-precision", common.full_precision, "Write round-trip precision instead of 6 significant digits");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate the demand and supply equations from a panel");
  estimate->add_option("--panel", est.panel, "Zip-year panel CSV ('-' reads stdin)")->required();
  estimate->add_option("--method", est.method, "Estimator")->check(CLI::IsMember({"ols", "tsls", "gmm"}));
  estimate->add_option("--schema", est.schema, "Column mapping sidecar JSON");
  estimate->add_option("--burden", est.burden, "Burden regressor form")->check(CLI::IsMember({"linear", "log"}));
  estimate->add_option("--covariance", est.covariance, "Robust covariance")->check(CLI::IsMember({"hc0", "hc1"}));
  estimate->add_option("--gmm-steps", est.gmm_steps, "GMM steps")->check(CLI::IsMember({1, 2}));
  estimate->add_option("--delta", est.delta, "Annual survival fraction of the install base");
  estimate->add_option("--format", est.format, "Standard output format")->check(CLI::IsMember({"json", "text"}));
  estimate->add_flag("--lenient", est.lenient, "Drop invalid rows instead of failing");

  ForecastInputs sim_in;
  std::string mode = "structural";
  auto* simulate = app.add_subcommand("simulate", "Simulate the baseline trajectory from coefficients and a seed state");
  add_forecast_options(simulate, sim_in);
  simulate->add_option("--mode", mode, "Coupled structural stepper or the reduced-form recursion")
      ->check(CLI::IsMember({"structural", "reduced"}));

  ForecastInputs fc_in;
  std::vector<std::string> scenario_paths;
  auto* forecast = app.add_subcommand("forecast", "Compare incentive scenarios");
  add_forecast_options(forecast, fc_in);
  forecast->add_option("--scenario", scenario_paths, "Scenario JSON (repeatable)");

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic panel with known coefficients");
  synth->add_option("--config", syn.config, "Synth config JSON");
  synth->add_option("--seed", syn.seed, "RNG seed");
  synth->add_option("--n-zips", syn.n_zips, "Number of zips");
  synth->add_option("--n-years", syn.n_years, "Number of years");
  synth->add_option("--first-year", syn.first_year, "First panel year");
  synth->add_option("--rho", syn.rho, "Endogeneity correlation in [-1, 1]");
  synth->add_option("--noise-sd", syn.noise_sd, "Error scale");
  synth->add_option("--delta", syn.delta, "Annual survival fraction");
  synth->add_option("--burden", syn.burden, "Burden regressor form")->check(CLI::IsMember({"linear", "log"}));

  std::string describe_burden = "linear";
  auto* describe_cmd = app.add_subcommand("describe", "Print the model specification and defaults");
  describe_cmd->add_option("--burden", describe_burden, "Burden regressor form")->check(CLI::IsMember({"linear", "log"}));

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("evnet");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    emit_error(err, to_string(ErrorCode::Usage), e.what(), {{"parser", e.get_name()}});
    return 2;
  }

  try {
    if (*estimate) return run_estimate(est, common, in, out);
    if (*simulate) return run_simulate(sim_in, mode, common, in, out);
    if (*forecast) return run_forecast(fc_in, scenario_paths, common, in, out);
    if (*synth) return run_synth(syn, common, in, out);
    if (*describe_cmd) return run_describe(describe_burden, common, out);
  } catch (const Error& e) {
    err << e.to_json().dump() << '\n';
    return e.code() == ErrorCode::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    emit_error(err, "internal", e.what(), nlohmann::json::object());
    return 1;
  }
  return 2;
}

}  // namespace evnet
