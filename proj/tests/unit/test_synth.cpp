#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "evnet/error.hpp"
#include "evnet/modelspec.hpp"
#include "evnet/synth.hpp"

using namespace evnet;

namespace {

std::string csv_of(const Panel& panel) {
  std::ostringstream out;
  write_panel_csv(out, panel.records(), 0);
  return out.str();
}

ErrorCode code_of(const SynthConfig& cfg) {
  try {
    generate_panel(cfg);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected evnet::Error");
  return ErrorCode::Usage;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("same seed gives byte-identical panels") {
  const SynthConfig cfg;
  CHECK(csv_of(generate_panel(cfg)) == csv_of(generate_panel(cfg)));
  SynthConfig other = cfg;
  other.seed = cfg.seed + 1;
  CHECK(csv_of(generate_panel(cfg)) != csv_of(generate_panel(other)));
}

TEST_CASE("generated panels pass the panel validator") {
  for (std::uint64_t seed : {1u, 7u, 99u}) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Panel panel = generate_panel(cfg);
    CHECK(panel.size() == 300);
    CHECK(panel.zips().size() == 50);
    CHECK(panel.years().size() == 6);
    CHECK(panel.derived_count() == 250);
    // Re-validating through the CSV loader is the oracle.
    std::istringstream in(csv_of(panel));
    const Panel reloaded = load_panel(in);
    CHECK(reloaded.size() == panel.size());
    CHECK(reloaded.saturation_bounds().raw_min == doctest::Approx(panel.saturation_bounds().raw_min).epsilon(1e-12));
    CHECK(reloaded.saturation_bounds().raw_max == doctest::Approx(panel.saturation_bounds().raw_max).epsilon(1e-12));
    double lo = 1, hi = 0;
    for (const auto& d : reloaded.derived())
      if (d) {
        lo = std::min(lo, d->saturation);
        hi = std::max(hi, d->saturation);
      }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
  }
}

TEST_CASE("parking lots are time invariant") {
  const Panel panel = generate_panel(SynthConfig{});
  for (const auto& r : panel.records()) {
    const auto first = panel.find(r.zip, panel.years().front());
    REQUIRE(first.has_value());
    CHECK(r.parking_lots == panel.records()[*first].parking_lots);
  }
}

TEST_CASE("noiseless, exogenous panels are recovered exactly by OLS") {
  SynthConfig cfg;
  cfg.endogeneity_rho = 0.0;
  cfg.noise_sd = 0.0;
  const Panel panel = generate_panel(cfg);
  const auto demand = estimate_demand(panel, EstimatorKind::OLS);
  const auto supply = estimate_supply(panel, EstimatorKind::OLS);
  for (const auto& [name, truth] : cfg.true_demand_coeffs) CHECK(std::abs(demand.coefficient(name) - truth) < 1e-6);
  for (const auto& [name, truth] : cfg.true_supply_coeffs) CHECK(std::abs(supply.coefficient(name) - truth) < 1e-6);
}

TEST_CASE("negative rho biases OLS above TSLS for the station elasticity") {
  int above = 0;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Panel panel = generate_panel(cfg);
    const double ols = estimate_demand(panel, EstimatorKind::OLS).coefficient("ln(Charging station)");
    const double iv = estimate_demand(panel, EstimatorKind::TSLS).coefficient("ln(Charging station)");
    above += ols > iv;
  }
  CHECK(above >= 36);
}

TEST_CASE("log burden form is supported") {
  SynthConfig cfg;
  cfg.burden_form = BurdenForm::Log;
  cfg.true_demand_coeffs.erase("EV_Burden");
  cfg.true_demand_coeffs["ln(EV_Burden)"] = -1.5;
  const Panel panel = generate_panel(cfg);
  const auto r = estimate_demand(panel, EstimatorKind::GMM, ModelOptions{.burden_form = BurdenForm::Log});
  CHECK(std::abs(r.coefficient("ln(EV_Burden)") + 1.5) < 3 * r.std_error("ln(EV_Burden)"));
}

TEST_CASE("configuration validation") {
  SynthConfig small;
  small.n_zips = 5;
  small.n_years = 6;
  CHECK(code_of(small) == ErrorCode::Domain);
  SynthConfig rho;
  rho.endogeneity_rho = 1.5;
  CHECK(code_of(rho) == ErrorCode::Domain);
  SynthConfig noise;
  noise.noise_sd = -1;
  CHECK(code_of(noise) == ErrorCode::Domain);
  SynthConfig explosive;
  explosive.true_demand_coeffs["ln(Charging station)"] = 2.0;
  CHECK(code_of(explosive) == ErrorCode::Domain);
  SynthConfig missing;
  missing.true_supply_coeffs.erase("Saturation");
  CHECK(code_of(missing) == ErrorCode::SpecMismatch);
}

TEST_CASE("config JSON round trip") {
  SynthConfig cfg;
  cfg.seed = 42;
  cfg.n_zips = 60;
  cfg.endogeneity_rho = -0.25;
  const auto back = SynthConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(csv_of(generate_panel(back)) == csv_of(generate_panel(cfg)));
}

TEST_CASE("TSLS error shrinks with sample size") {
  std::vector<double> small_err, large_err;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_zips = 200;  // 1,000 lagged observations
    small_err.push_back(std::abs(estimate_demand(generate_panel(cfg), EstimatorKind::TSLS).coefficient("ln(Charging station)") - 0.36));
    cfg.n_zips = 800;  // 4,000 lagged observations
    large_err.push_back(std::abs(estimate_demand(generate_panel(cfg), EstimatorKind::TSLS).coefficient("ln(Charging station)") - 0.36));
  }
  CHECK(median(large_err) < 0.5 * median(small_err));
}
