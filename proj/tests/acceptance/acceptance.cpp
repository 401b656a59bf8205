// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: evnet_acceptance [criterion...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evnet/cli.hpp"
#include "evnet/dynamics.hpp"
#include "evnet/error.hpp"
#include "evnet/estimator.hpp"
#include "evnet/modelspec.hpp"
#include "evnet/panel.hpp"
#include "evnet/policy.hpp"
#include "evnet/synth.hpp"

using namespace evnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr int kReplications = 500;
constexpr double kCoverageMin = 0.99;
constexpr double kBiasRateMin = 0.95;
constexpr double kRecoveryRuntimeS = 60.0;
constexpr double kGmmTslsTol = 1e-8;
constexpr double kSelfInstrumentTol = 1e-10;
constexpr double kFixedPointRelTol = 1e-9;
constexpr double kStructuralRelTol = 0.005;
constexpr int kStructuralYears = 30;
constexpr double kScenarioRuntimeS = 5.0;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

fs::path data_dir() { return EVNET_TEST_DATA_DIR; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------- 1

Outcome iv_recovery() {
  Outcome o;
  const auto t0 = Clock::now();
  const SynthConfig base;
  std::map<std::string, int> covered;
  int bias = 0, failures = 0;
  for (int rep = 0; rep < kReplications; ++rep) {
    SynthConfig cfg = base;
    cfg.seed = 1 + static_cast<std::uint64_t>(rep);
    try {
      const Panel panel = generate_panel(cfg);
      for (auto kind : {EstimatorKind::TSLS, EstimatorKind::GMM}) {
        const auto demand = estimate_demand(panel, kind);
        const auto supply = estimate_supply(panel, kind);
        const std::string tag = to_string(kind) + " ";
        for (const auto& [name, truth] : cfg.true_demand_coeffs)
          covered[tag + "demand " + name] += std::abs(demand.coefficient(name) - truth) <= 3 * demand.std_error(name);
        for (const auto& [name, truth] : cfg.true_supply_coeffs)
          covered[tag + "supply " + name] += std::abs(supply.coefficient(name) - truth) <= 3 * supply.std_error(name);
      }
      const double ols = estimate_demand(panel, EstimatorKind::OLS).coefficient(demand_cols::kStations);
      const double iv = estimate_demand(panel, EstimatorKind::TSLS).coefficient(demand_cols::kStations);
      bias += ols > iv;
    } catch (const Error& e) {
      ++failures;
      o.note(std::string("replication ") + std::to_string(rep) + " failed: " + e.what());
    }
  }
  const double elapsed = seconds_since(t0);
  int worst = kReplications;
  std::string worst_name;
  for (const auto& [name, count] : covered)
    if (count < worst) {
      worst = count;
      worst_name = name;
    }
  o.require(failures == 0, "every replication estimates");
  o.require(worst >= kCoverageMin * kReplications, "coverage >= 99% for every coefficient");
  o.require(bias >= kBiasRateMin * kReplications, "OLS station elasticity above TSLS in >= 95%");
  o.require(elapsed < kRecoveryRuntimeS, "runtime < 60 s");
  o.note("min coverage " + std::to_string(worst) + "/" + std::to_string(kReplications) + " (" + worst_name + ")");
  o.note("OLS > TSLS " + std::to_string(bias) + "/" + std::to_string(kReplications));
  o.note("runtime " + fmt(elapsed, 3) + " s");
  return o;
}

// ---------------------------------------------------------------- 2

Outcome just_identified() {
  Outcome o;
  double gmm_gap = 0.0, self_gap = 0.0;
  for (std::uint64_t seed : {1u, 7u, 42u, 1234u, 99999u}) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Panel panel = generate_panel(cfg);
    for (const bool demand : {true, false}) {
      const auto design = demand ? build_demand_design(panel) : build_supply_design(panel);
      const auto endog = demand ? demand_spec().endogenous : supply_spec().endogenous;
      const auto tsls = fit_tsls(design, endog);
      const auto gmm = fit_gmm(design, endog, 2);
      gmm_gap = std::max(gmm_gap, (gmm.coefficients - tsls.coefficients).cwiseAbs().maxCoeff());

      DesignMatrix self = design;
      self.instruments = design.regressors;
      self.instrument_names = design.regressor_names;
      for (auto& name : self.instrument_names)
        if (std::find(endog.begin(), endog.end(), name) != endog.end()) name = "copy of " + name;
      const auto ols = fit_ols(self);
      const auto iv = fit_tsls(self, endog);
      self_gap = std::max(self_gap, (ols.coefficients - iv.coefficients).cwiseAbs().maxCoeff());
    }
  }
  o.require(gmm_gap <= kGmmTslsTol, "GMM vs TSLS within 1e-8");
  o.require(self_gap <= kSelfInstrumentTol, "instrument = regressor TSLS vs OLS within 1e-10");
  o.note("max |GMM - TSLS| " + fmt(gmm_gap, 3));
  o.note("max |TSLS(self) - OLS| " + fmt(self_gap, 3));
  return o;
}

// ---------------------------------------------------------------- 3

double bisection_oracle(double c, double k, double d) {
  auto f = [&](double s) { return s - std::exp(c + k * std::log(s + d)); };
  double lo = std::exp(c) * (d > 0 ? std::pow(d, k) : 0.0);
  double hi = std::exp(c) * std::pow(d + 1e6, k);
  while (f(hi) < 0) hi *= 2;
  for (int i = 0; i < 2000 && lo < hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Outcome fixed_point() {
  Outcome o;
  const std::vector<double> cs{-2.0, -0.75, 0.5, 1.75, 3.0};
  const std::vector<double> ks{0.0, 0.1, 0.18, 0.5, 0.9};
  const std::vector<double> deltas{0.9, 1.0};
  const std::vector<double> prevs{0.0, 1e2, 1e4, 1e6};
  int cases = 0, bad = 0;
  double worst = 0.0;
  for (double c : cs)
    for (double k : ks)
      for (double d : deltas)
        for (double prev : prevs) {
          ++cases;
          const DynamicsParams p{.c = c, .k = k, .delta = d};
          const double s = solve_annual_fixed_point(p, prev).sales;
          const double oracle = bisection_oracle(c, k, d * prev);
          const double rel = std::abs(s - oracle) / oracle;
          worst = std::max(worst, rel);
          bad += !(rel <= kFixedPointRelTol);
        }
  o.require(cases >= 100, "at least 100 grid cases");
  o.require(bad == 0, "solver matches the bisection oracle to 1e-9");
  o.note(std::to_string(cases) + " cases, max rel err " + fmt(worst, 3));

  int trips = 0, trip_bad = 0;
  double trip_worst = 0.0;
  for (double observed : {1.0, 250.0, 1.2e5, 3e6})
    for (double k : ks)
      for (double d : deltas)
        for (double prev : prevs) {
          ++trips;
          const DynamicsParams p{.c = calibrate_constant(observed, prev, k, d), .k = k, .delta = d};
          const auto sol = solve_annual_fixed_point(p, prev);
          // A relative residual below tol bounds the root error by tol / (1 - k).
          const double g_obs = std::exp(p.c + k * std::log(observed + d * prev));
          const double rel = std::abs(sol.sales - observed) / observed;
          trip_worst = std::max(trip_worst, rel);
          trip_bad += !(sol.residual <= p.tol * sol.sales && std::abs(g_obs - observed) <= p.tol * observed &&
                        rel <= p.tol / (1.0 - k));
        }
  o.require(trip_bad == 0, "calibrate -> solve round trip within tol");
  o.note(std::to_string(trips) + " round trips, max rel err " + fmt(trip_worst, 3));
  return o;
}

// ---------------------------------------------------------------- 4 and 5 shared

struct County {
  CountyFixture fixture;
  EstimationResult demand, supply;
  ForecastOptions options;
};

County load_county(const std::string& coefficients, BurdenForm form) {
  County c;
  c.fixture = CountyFixture::from_file(data_dir() / "la_county.json");
  const auto j = nlohmann::ordered_json::parse(read_file(data_dir() / coefficients));
  c.demand = estimation_from_json(j.at("demand"));
  c.supply = estimation_from_json(j.at("supply"));
  c.options.delta = c.fixture.delta.value_or(0.95);
  c.options.burden_form = form;
  return c;
}

Outcome structural_vs_reduced() {
  Outcome o;
  // Published linear-burden tables; auxiliaries frozen at the seed year.
  const County c = load_county("published_coefficients.json", BurdenForm::Linear);
  const ForecastSetup setup = calibrate_forecast(c.fixture, c.demand, c.supply, c.options);
  const double k = c.demand.coefficient(demand_cols::kStations) * c.supply.coefficient(supply_cols::kEvStock);
  o.require(std::abs(k - 0.3583 * 0.4992) < 1e-15, "k = 0.3583 x 0.4992");

  Exogenous frozen = setup.seed_exog;
  frozen.saturation = simulated_saturation(setup.pre_seed, setup.seed_exog, setup.step);
  const auto structural = simulate_horizon(setup.seed, kStructuralYears, setup.demand, setup.supply,
                                           [&](int) { return frozen; }, setup.delta, setup.step);
  const DynamicsParams params{.c = setup.reduced_form_c, .k = k, .delta = setup.delta};
  const auto reduced = simulate_reduced_form(params, setup.seed, kStructuralYears);

  double worst = 0.0;
  for (int i = 1; i <= kStructuralYears; ++i)
    worst = std::max(worst, std::abs(structural[i].sales - reduced[i].sales) / reduced[i].sales);
  o.require(worst <= kStructuralRelTol, "sales agree within 0.5% every year");
  o.note("30 years, max rel gap " + fmt(worst, 3));
  return o;
}

Outcome scenarios() {
  Outcome o;
  const County c = load_county("published_coefficients_log_burden.json", BurdenForm::Log);
  const ForecastSetup setup = calibrate_forecast(c.fixture, c.demand, c.supply, c.options);

  // Fleet regression on population history and projection.
  std::vector<FleetHistoryPoint> history;
  std::map<int, double> future;
  std::istringstream csv(read_file(data_dir() / "la_population.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string year, pop, vehicles;
    std::getline(ss, year, ',');
    std::getline(ss, pop, ',');
    std::getline(ss, vehicles, ',');
    future[std::stoi(year)] = std::stod(pop);
    if (!vehicles.empty()) history.push_back({std::stod(pop), std::stod(vehicles), std::nullopt});
  }
  const FleetProjection fleet = project_fleet(history, future);
  o.require(std::abs(fleet.vehicles(2045) / 6.22e6 - 1.0) < 1e-6, "fleet projection 6.22M in 2045");
  o.require(std::abs(fleet.annual_sales(2045) / 437000.0 - 1.0) < 1e-6, "annual sales 437k in 2045");

  const std::vector<std::string> files{"baseline.json", "demand_91.json", "supply_100.json", "combined_60_66.json"};
  std::vector<Trajectory> runs;
  double slowest = 0.0;
  for (const auto& f : files) {
    const auto scenario = Scenario::from_file(data_dir() / "scenarios" / f);
    o.require(scenario.baseline_purchase_rebate == 7500.0, "baseline purchase rebate $7,500");
    const auto t0 = Clock::now();
    runs.push_back(forecast_scenario(scenario, setup, fleet, 2045));
    slowest = std::max(slowest, seconds_since(t0));
  }
  const auto report = compare_scenarios(runs);
  auto at = [&](std::size_t run, int year) -> const MarketState& { return runs[run].states[year - setup.seed.year]; };
  auto share = [&](std::size_t run, int year) { return runs[run].ev_share[year - setup.seed.year]; };

  const double base_share = share(0, 2045);
  const double demand_sales = at(1, 2035).sales;
  const double demand_share = share(1, 2045);
  const double combined_share = share(3, 2045);
  const double demand_drop = *report.summary("demand_91").post_window_drop;
  const double supply_drop = *report.summary("supply_100").post_window_drop;

  o.require(base_share < 0.50, "baseline 2045 share < 0.50");
  o.require(demand_sales >= 340000 && demand_sales <= 410000, "demand-only 2035 sales in [340k, 410k]");
  o.require(demand_share >= 0.68 && demand_share <= 0.78, "demand-only 2045 share in [0.68, 0.78]");
  o.require(combined_share >= 0.75 && combined_share <= 0.87, "combined 2045 share in [0.75, 0.87]");
  o.require(supply_drop < demand_drop, "supply-only drop < demand-only drop");
  o.require(slowest < kScenarioRuntimeS, "< 5 s per scenario");
  o.note("baseline share " + fmt(base_share) + ", demand 2035 sales " + fmt(demand_sales, 6) + ", demand share " +
         fmt(demand_share) + ", combined share " + fmt(combined_share) + ", drops supply " + fmt(supply_drop) +
         " < demand " + fmt(demand_drop) + ", slowest " + fmt(slowest, 2) + " s");
  return o;
}

// ---------------------------------------------------------------- 6

Outcome invariants() {
  Outcome o;
  int checked = 0;

  // Saturation bounds and instrument exclusion on synthetic panels.
  bool sat_ok = true, excl_ok = true;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Panel panel = generate_panel(cfg);
    double lo = 1.0, hi = 0.0;
    for (const auto& d : panel.derived())
      if (d) {
        sat_ok &= d->saturation >= 0.0 && d->saturation <= 1.0;
        lo = std::min(lo, d->saturation);
        hi = std::max(hi, d->saturation);
      }
    sat_ok &= panel.saturation_bounds().degenerate() || (lo == 0.0 && hi == 1.0);

    const auto& records = panel.records();
    const auto base = compute_instrument(records);
    const std::size_t target = static_cast<std::size_t>(seed * 37) % records.size();
    const auto own_lag = panel.find(records[target].zip, records[target].year - 1);
    if (!own_lag) continue;
    auto perturbed = records;
    perturbed[*own_lag].station_stock = perturbed[*own_lag].station_stock * 3.0 + 17.0;
    const auto after = compute_instrument(perturbed);
    excl_ok &= after[target] == base[target];
    // Other zips in the same year must see the change.
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].year == records[target].year && records[i].zip != records[target].zip && records[i].parking_lots > 0)
        excl_ok &= after[i] != base[i];
    ++checked;
  }
  o.require(sat_ok, "saturation in [0, 1] with attained bounds");
  o.require(excl_ok, "own lagged stations never move own instrument");

  // Install-base conservation in both simulators.
  const County c = load_county("published_coefficients_log_burden.json", BurdenForm::Log);
  const ForecastSetup setup = calibrate_forecast(c.fixture, c.demand, c.supply, c.options);
  // The stored stock must be the recursion evaluated bit for bit; recovering
  // s_t by subtraction is exact up to the rounding of that subtraction.
  bool recursion = true, identity_holds = true;
  double worst_gap = 0.0;
  auto conserved = [&](const std::vector<MarketState>& path, double delta) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      recursion &= path[i].ev_stock == compute_install_base(path[i].sales, delta, path[i - 1].ev_stock);
      const double gap = std::abs(path[i].ev_stock - delta * path[i - 1].ev_stock - path[i].sales);
      worst_gap = std::max(worst_gap, gap / path[i].ev_stock);
      identity_holds &= gap <= 4.0 * std::numeric_limits<double>::epsilon() * path[i].ev_stock;
    }
  };
  for (double delta : {0.9, 0.97, 1.0}) {
    conserved(simulate_horizon(setup.seed, 22, setup.demand, setup.supply,
                               [&](int y) { return setup.baseline(y); }, delta, setup.step),
              delta);
    conserved(simulate_reduced_form({.c = setup.reduced_form_c, .k = setup.reduced_form_k, .delta = delta}, setup.seed,
                                    22),
              delta);
  }
  o.require(recursion, "Q_t = s_t + delta Q_{t-1} stored exactly at every step");
  o.require(identity_holds, "Q_t - delta Q_{t-1} = s_t to rounding at every step");

  // Scenario identity and reversion.
  const auto fleet = constant_fleet(kDefaultFleet2045, setup.seed.year, 2045);
  const auto baseline = forecast_scenario(Scenario{}, setup, fleet, 2045);
  Scenario identity;
  identity.name = "identity";
  const auto same = forecast_scenario(identity, setup, fleet, 2045);
  bool identical = baseline.states.size() == same.states.size();
  for (std::size_t i = 0; identical && i < baseline.states.size(); ++i)
    identical = baseline.states[i].sales == same.states[i].sales &&
                baseline.states[i].ev_stock == same.states[i].ev_stock &&
                baseline.states[i].station_stock == same.states[i].station_stock &&
                baseline.ev_share[i] == same.ev_share[i];
  o.require(identical, "multiplier 1.0 reproduces the baseline bit for bit");

  bool reverts = true;
  for (double dm : {0.0, 1.6, 1.91, 2.5})
    for (double sm : {0.0, 1.66, 2.0}) {
      Scenario s;
      s.demand_rebate_multiplier = dm;
      s.supply_rebate_multiplier = sm;
      for (int year = s.window_end + 1; year <= 2045; ++year) {
        const Exogenous b = setup.baseline(year);
        const auto adj = apply_scenario(s, year, b);
        reverts &= !adj.in_window && adj.values.avg_ev_price == b.avg_ev_price &&
                   adj.values.rebate_pct == b.rebate_pct && adj.values.oil_price == b.oil_price &&
                   adj.values.median_income == b.median_income && adj.values.parking_lots == b.parking_lots &&
                   adj.values.white_pop == b.white_pop && adj.values.asian_pop == b.asian_pop;
      }
    }
  o.require(reverts, "exogenous values equal the baseline after the window");
  o.note(std::to_string(checked) + " exclusion perturbations, 6 conservation paths (max rel gap " + fmt(worst_gap, 3) +
         "), 12 reversion scenarios");
  return o;
}

// ---------------------------------------------------------------- 7

std::string cli(std::vector<std::string> args, const fs::path& out_dir, int* code = nullptr) {
  args.insert(args.begin(), {"evnet", "--out", out_dir.string()});
  std::istringstream in;
  std::ostringstream out, err;
  const int rc = run_cli(args, in, out, err);
  if (code) *code = rc;
  return out.str();
}

Outcome determinism() {
  Outcome o;
  const fs::path tmp = fs::temp_directory_path() / "evnet-acceptance";
  fs::remove_all(tmp);
  const auto first = cli({"synth", "--seed", "7"}, tmp / "a");
  const auto second = cli({"synth", "--seed", "7"}, tmp / "b");
  o.require(!first.empty() && first == second, "synth --seed 7 twice is byte-identical");

  auto data = [](const std::string& rel) { return (data_dir() / rel).string(); };
  struct Golden {
    std::string file;
    std::vector<std::string> args;
  };
  const std::vector<Golden> goldens{
      {"estimate_gmm.json", {"estimate", "--panel", data("synth_panel.csv"), "--method", "gmm"}},
      {"forecast_county.txt",
       {"forecast", "--county", data("la_county.json"), "--coefficients", data("published_coefficients_log_burden.json"),
        "--scenario", data("scenarios/baseline.json"), "--scenario", data("scenarios/combined_60_66.json")}},
      {"forecast_panel.txt",
       {"forecast", "--panel", data("synth_panel.csv"), "--method", "gmm", "--population", data("la_population.csv"),
        "--horizon-end", "2030", "--scenario", data("scenarios/baseline.json"), "--scenario",
        data("scenarios/demand_91.json")}},
  };
  for (const auto& g : goldens) {
    int code = -1;
    const auto a = cli(g.args, tmp / "c", &code);
    const auto b = cli(g.args, tmp / "d");
    o.require(code == 0, g.file + " pipeline exits 0");
    o.require(a == b, g.file + " repeat run identical");
    o.require(a == read_file(data_dir() / "golden" / g.file), g.file + " matches golden");
    for (const char* artifact : {"comparison.csv", "drops.csv", "comparison.json", "estimates.json", "tables.txt"})
      if (fs::exists(tmp / "c" / artifact))
        o.require(read_file(tmp / "c" / artifact) == read_file(tmp / "d" / artifact),
                  std::string(artifact) + " artifacts identical");
  }
  fs::remove_all(tmp);
  o.note(std::to_string(goldens.size()) + " golden pipelines");
  return o;
}

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "IV recovery on synthetic panels", iv_recovery},
      {2, "just-identified equivalence", just_identified},
      {3, "fixed-point correctness", fixed_point},
      {4, "structural / reduced-form agreement", structural_vs_reduced},
      {5, "scenario reproduction with published coefficients", scenarios},
      {6, "invariant suites", invariants},
      {7, "determinism and golden stability", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title;
    for (const auto& n : o.notes) std::cout << " | " << n;
    std::cout << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
