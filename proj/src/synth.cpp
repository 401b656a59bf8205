#include "evnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "evnet/dynamics.hpp"
#include "evnet/error.hpp"

namespace evnet {

std::map<std::string, double> SynthConfig::default_demand_truth() {
  using namespace demand_cols;
  return {{kInterceptName, 2.5}, {kStations, 0.36}, {kOil, 0.85}, {kWhite, 0.13}, {kAsian, 0.26}, {kBurden, -3.2}};
}

std::map<std::string, double> SynthConfig::default_supply_truth() {
  using namespace supply_cols;
  return {{kInterceptName, -2.0}, {kEvStock, 0.5}, {kParking, 1.0}, {kSaturation, 3.6}, {kRebate, 1.77}};
}

namespace {

std::vector<std::string> missing_names(const std::map<std::string, double>& coeffs, const EquationSpec& spec,
                                       const std::string& prefix) {
  std::vector<std::string> missing;
  if (!coeffs.contains(kInterceptName)) missing.push_back(prefix + kInterceptName);
  for (const auto& name : spec.regressors)
    if (!coeffs.contains(name)) missing.push_back(prefix + name);
  return missing;
}

// Portable draws: mt19937_64 output is fully specified, the standard
// distributions are not, so uniforms and normals are derived by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return z;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  double lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct Draws {
  // Indexed [zip][year].
  std::vector<double> parking;
  std::vector<std::vector<double>> white, asian, income, price, oil, rebate, demand_error, station_shock;
  std::vector<double> stock0, stations0, sales0;
};

Draws draw(const SynthConfig& c) {
  Rng rng(c.seed);
  const auto nz = static_cast<std::size_t>(c.n_zips), ny = static_cast<std::size_t>(c.n_years);
  Draws d;
  std::vector<double> oil_year(ny);
  for (auto& o : oil_year) o = 3.0 * std::exp(0.15 * rng.normal());

  auto grid = [&] { return std::vector<std::vector<double>>(nz, std::vector<double>(ny)); };
  d.white = grid(), d.asian = grid(), d.income = grid(), d.price = grid(), d.oil = grid(), d.rebate = grid();
  d.demand_error = grid(), d.station_shock = grid();
  const double rho = c.endogeneity_rho, idio = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (std::size_t z = 0; z < nz; ++z) {
    d.parking.push_back(rng.lognormal(4.0, 1.0));
    const double white = rng.lognormal(9.5, 0.6), asian = rng.lognormal(8.3, 0.8);
    const double income = rng.lognormal(std::log(75000.0), 0.25);
    d.stock0.push_back(rng.lognormal(6.5, 0.6));
    d.stations0.push_back(rng.lognormal(5.0, 0.5));
    d.sales0.push_back(d.stock0.back() * rng.uniform(0.1, 0.3));
    for (std::size_t t = 0; t < ny; ++t) {
      const double tt = static_cast<double>(t);
      d.white[z][t] = white * std::exp(0.02 * tt + 0.03 * rng.normal());
      d.asian[z][t] = asian * std::exp(0.03 * tt + 0.03 * rng.normal());
      d.income[z][t] = income * std::exp(0.02 * tt + 0.05 * rng.normal());
      d.price[z][t] = 45000.0 * std::exp(-0.02 * tt + 0.1 * rng.normal());
      d.oil[z][t] = oil_year[t] * std::exp(0.05 * rng.normal());
      const double trend = ny > 1 ? 0.25 + 0.5 * tt / static_cast<double>(ny - 1) : 0.5;
      d.rebate[z][t] = std::clamp(trend + rng.uniform(-0.15, 0.15), 0.0, 1.0);
      const double eta = rng.normal(), eps = rng.normal();
      d.demand_error[z][t] = c.noise_sd * (rho * eta + idio * eps);
      d.station_shock[z][t] = -c.noise_sd * eta;
    }
  }
  return d;
}

std::string zip_name(int z) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "Z%04d", z + 1);
  return buf;
}

std::vector<PanelRecord> simulate(const SynthConfig& c, const Draws& d, const SaturationBounds& bounds) {
  using namespace demand_cols;
  using namespace supply_cols;
  const auto& dc = c.true_demand_coeffs;
  const auto& sc = c.true_supply_coeffs;
  const bool linear = c.burden_form == BurdenForm::Linear;
  const double b_burden = dc.at(linear ? kBurden : kLogBurden);

  std::vector<PanelRecord> out;
  out.reserve(static_cast<std::size_t>(c.n_zips * c.n_years));
  for (int z = 0; z < c.n_zips; ++z) {
    const auto zi = static_cast<std::size_t>(z);
    double prev_stock = 0.0, prev_stations = 0.0;
    for (int t = 0; t < c.n_years; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      PanelRecord r;
      r.zip = zip_name(z);
      r.year = c.first_year + t;
      r.avg_ev_price = d.price[zi][ti];
      r.median_income = d.income[zi][ti];
      r.white_pop = d.white[zi][ti];
      r.asian_pop = d.asian[zi][ti];
      r.oil_price = d.oil[zi][ti];
      r.parking_lots = d.parking[zi];
      r.rebate_pct = d.rebate[zi][ti];
      if (t == 0) {
        r.ev_sales = d.sales0[zi];
        r.ev_stock = d.stock0[zi];
        r.station_stock = d.stations0[zi];
      } else {
        const double sat = bounds.normalize(saturation_ratio(prev_stock, prev_stations, bounds.epsilon));
        const double supply_shift = sc.at(kInterceptName) + sc.at(kParking) * log_count(r.parking_lots) +
                                    sc.at(kSaturation) * sat + sc.at(kRebate) * r.rebate_pct +
                                    d.station_shock[zi][ti];
        const double burden = compute_burden(r.avg_ev_price, r.median_income);
        const double demand_shift = dc.at(kInterceptName) + dc.at(kOil) * std::log(r.oil_price) +
                                    dc.at(kWhite) * log_count(r.white_pop) + dc.at(kAsian) * log_count(r.asian_pop) +
                                    b_burden * (linear ? burden : std::log(burden)) + d.demand_error[zi][ti];
        const double carried = c.delta * prev_stock;
        auto stations_at = [&](double s) {
          return std::expm1(supply_shift + sc.at(kEvStock) * log_count(s + carried));
        };
        auto g = [&](double s) { return std::expm1(demand_shift + dc.at(kStations) * log_count(stations_at(s))); };
        if (!(stations_at(0.0) >= 0.0) || !(g(0.0) >= 0.0))
          throw Error(ErrorCode::Domain, "synthetic configuration produces negative counts",
                      {{"zip", r.zip}, {"year", r.year}});
        const auto sol = solve_fixed_point(g, g(0.0), 0.0);
        r.ev_sales = sol.sales;
        r.ev_stock = compute_install_base(r.ev_sales, c.delta, prev_stock);
        r.station_stock = stations_at(r.ev_sales);
      }
      prev_stock = r.ev_stock;
      prev_stations = r.station_stock;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_zips < 2 || n_years < 2)
    throw Error(ErrorCode::Domain, "synthetic panel needs at least two zips and two years",
                {{"n_zips", n_zips}, {"n_years", n_years}});
  if (static_cast<long long>(n_zips) * (n_years - 1) < 50)
    throw Error(ErrorCode::Domain, "n_zips * (n_years - 1) must be at least 50",
                {{"n_zips", n_zips}, {"n_years", n_years}});
  if (!(std::abs(endogeneity_rho) <= 1.0))
    throw Error(ErrorCode::Domain, "endogeneity_rho must lie in [-1, 1]", {{"endogeneity_rho", endogeneity_rho}});
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
    throw Error(ErrorCode::Domain, "noise_sd must be a finite non-negative number", {{"noise_sd", noise_sd}});
  if (!(delta >= 0.0 && delta <= 1.0))
    throw Error(ErrorCode::Domain, "survival fraction delta must lie in [0, 1]", {{"delta", delta}});

  auto missing = missing_names(true_demand_coeffs, demand_spec(ModelOptions{.burden_form = burden_form, .fit = {}, .gmm_steps = 2}), "demand:");
  const auto supply_missing = missing_names(true_supply_coeffs, supply_spec(), "supply:");
  missing.insert(missing.end(), supply_missing.begin(), supply_missing.end());
  if (!missing.empty())
    throw Error(ErrorCode::SpecMismatch, "synthetic truth is missing coefficients", {{"missing", missing}});

  const double k = true_demand_coeffs.at(demand_cols::kStations) * true_supply_coeffs.at(supply_cols::kEvStock);
  if (!(k >= 0.0 && k < 1.0))
    throw Error(ErrorCode::Domain, "true coefficients are not contractive: k = beta_1 * alpha_1 must lie in [0, 1)",
                {{"k", k}});
}

Panel generate_panel(const SynthConfig& config) {
  config.validate();
  const Draws d = draw(config);
  const double eps = PanelOptions{}.saturation_epsilon;

  // Saturation is normalised by bounds taken over the generated panel itself.
  // Two anchor zips start at ratios just outside the range the others reach,
  // so the bounds are fixed by first-year values and every later ratio falls
  // strictly inside them.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t z = 2; z < d.stock0.size(); ++z) {
    const double r = saturation_ratio(d.stock0[z], d.stations0[z], eps);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (!(hi > lo)) lo = 1.0, hi = 2.0;
  constexpr int kMaxRounds = 50;
  constexpr double kMargin = 0.1;
  for (int round = 0; round < kMaxRounds; ++round) {
    const SaturationBounds bounds{lo * (1.0 - kMargin), hi * (1.0 + kMargin), eps};
    Draws anchored = d;
    for (std::size_t z = 0; z < 2; ++z) {
      const double r = z == 0 ? bounds.raw_min : bounds.raw_max;
      anchored.stock0[z] = std::expm1(r * log_count(anchored.stations0[z]));
      anchored.sales0[z] = std::min(anchored.sales0[z], anchored.stock0[z]);
    }
    auto records = simulate(config, anchored, bounds);
    const auto realised = compute_saturation(records, eps).bounds;
    if (realised.raw_min == bounds.raw_min && realised.raw_max == bounds.raw_max)
      return Panel::from_records(std::move(records), {config.delta, eps, false});
    lo = std::min(lo, realised.raw_min);
    hi = std::max(hi, realised.raw_max);
  }
  throw Error(ErrorCode::NonConvergence, "synthetic saturation bounds did not settle", {{"rounds", kMaxRounds}});
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.n_zips = j.value("n_zips", c.n_zips);
    c.n_years = j.value("n_years", c.n_years);
    c.first_year = j.value("first_year", c.first_year);
    if (j.contains("true_demand_coeffs"))
      c.true_demand_coeffs = j.at("true_demand_coeffs").get<std::map<std::string, double>>();
    if (j.contains("true_supply_coeffs"))
      c.true_supply_coeffs = j.at("true_supply_coeffs").get<std::map<std::string, double>>();
    c.endogeneity_rho = j.value("endogeneity_rho", c.endogeneity_rho);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.seed = j.value("seed", c.seed);
    c.delta = j.value("delta", c.delta);
    const std::string form = j.value("burden_form", std::string("linear"));
    if (form == "linear") c.burden_form = BurdenForm::Linear;
    else if (form == "log") c.burden_form = BurdenForm::Log;
    else throw Error(ErrorCode::Schema, "burden_form must be 'linear' or 'log'", {{"burden_form", form}});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("malformed synth config: ") + e.what());
  }
  return c;
}

nlohmann::ordered_json SynthConfig::to_json() const {
  nlohmann::ordered_json j;
  j["n_zips"] = n_zips;
  j["n_years"] = n_years;
  j["first_year"] = first_year;
  j["true_demand_coeffs"] = true_demand_coeffs;
  j["true_supply_coeffs"] = true_supply_coeffs;
  j["endogeneity_rho"] = endogeneity_rho;
  j["noise_sd"] = noise_sd;
  j["seed"] = seed;
  j["delta"] = delta;
  j["burden_form"] = burden_form == BurdenForm::Linear ? "linear" : "log";
  return j;
}

}  // namespace evnet
