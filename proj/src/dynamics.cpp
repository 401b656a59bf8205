#include "evnet/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "evnet/error.hpp"
#include "evnet/format.hpp"

namespace evnet {

void DynamicsParams::validate() const {
  if (!(k >= 0.0 && k < 1.0))
    throw Error(ErrorCode::Domain, "cross elasticity k must lie in [0, 1) for a contraction", {{"k", k}});
  if (!(delta >= 0.0 && delta <= 1.0))
    throw Error(ErrorCode::Domain, "survival fraction delta must lie in [0, 1]", {{"delta", delta}});
  if (!(tol > 0.0)) throw Error(ErrorCode::Domain, "tolerance must be positive", {{"tol", tol}});
  if (max_iter <= 0) throw Error(ErrorCode::Domain, "max_iter must be positive", {{"max_iter", max_iter}});
  if (!std::isfinite(c)) throw Error(ErrorCode::Domain, "constant c must be finite", {{"c", c}});
}

namespace {

double relative_residual(double s, double gs) {
  const double diff = std::abs(s - gs);
  return s == 0.0 ? (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()) : diff / std::abs(s);
}

}  // namespace

FixedPointSolution solve_fixed_point(const std::function<double(double)>& g, double start, double lower,
                                     const SolverOptions& options) {
  FixedPointSolution out;
  double s = std::max(start, lower);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const double w = options.damping;

  for (int it = 1; it <= options.max_iter; ++it) {
    const double gs = g(s);
    out.iterations = it;
    if (!std::isfinite(gs)) break;
    const double res = relative_residual(s, gs);
    if (res <= options.tol) {
      out.sales = s;
      out.residual = std::abs(s - gs);
      return out;
    }
    if (res < best * (1.0 - 1e-3)) {
      best = res;
      since_best = 0;
    } else if (++since_best > 50) {
      break;  // stalled
    }
    s = std::max(lower, (1.0 - w) * s + w * gs);
  }

  // Bisection on f(s) = s - g(s), increasing through the root.
  out.used_bisection = true;
  double lo = lower;
  double hi = std::max({2.0 * lower, 1.0, s});
  int grow = 0;
  while (hi - g(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 4000 || !std::isfinite(hi)) {
      throw Error(ErrorCode::NonConvergence, "could not bracket the fixed point",
                  {{"upper", hi}, {"iterations", out.iterations}});
    }
  }
  for (int it = 0; it < options.max_iter; ++it) {
    const double mid = (lo > 0.0 && hi / lo > 2.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    const double gm = g(mid);
    ++out.iterations;
    if (relative_residual(mid, gm) <= options.tol) {
      out.sales = mid;
      out.residual = std::abs(mid - gm);
      return out;
    }
    if (mid - gm < 0.0) lo = mid;
    else hi = mid;
    if (mid == lo && mid == hi) break;
    if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) {
      // The interval has collapsed to adjacent doubles; accept the better end.
      const double glo = g(lo), ghi = g(hi);
      const double pick = std::abs(lo - glo) <= std::abs(hi - ghi) ? lo : hi;
      const double gp = pick == lo ? glo : ghi;
      if (relative_residual(pick, gp) <= std::max(options.tol, 8.0 * std::numeric_limits<double>::epsilon())) {
        out.sales = pick;
        out.residual = std::abs(pick - gp);
        return out;
      }
      break;
    }
  }
  const double final_residual = std::abs(0.5 * (lo + hi) - g(0.5 * (lo + hi)));
  throw Error(ErrorCode::NonConvergence, "fixed-point iteration and bisection both failed to converge",
              {{"residual", final_residual}, {"iterations", out.iterations}, {"bracket", {lo, hi}}});
}

FixedPointSolution solve_annual_fixed_point(const DynamicsParams& params, double prev_stock) {
  params.validate();
  if (!(prev_stock >= 0.0))
    throw Error(ErrorCode::Domain, "previous stock must be non-negative", {{"prev_stock", prev_stock}});
  const double d = params.delta * prev_stock;
  const double c = params.c, k = params.k;
  auto g = [c, k, d](double s) { return std::exp(c + k * std::log(s + d)); };
  const double start = std::exp(c) * std::pow(d + 1.0, k);
  const double lower = d > 0.0 ? std::exp(c) * std::pow(d, k) : std::numeric_limits<double>::min();
  return solve_fixed_point(g, start, lower, {params.tol, params.max_iter, 0.5});
}

double calibrate_constant(double observed_sales, double prev_stock, double k, double delta) {
  if (!(observed_sales > 0.0))
    throw Error(ErrorCode::Domain, "calibration requires positive observed sales", {{"observed_sales", observed_sales}});
  if (!(prev_stock >= 0.0))
    throw Error(ErrorCode::Domain, "previous stock must be non-negative", {{"prev_stock", prev_stock}});
  return std::log(observed_sales) - k * std::log(observed_sales + delta * prev_stock);
}

std::vector<MarketState> simulate_reduced_form(const DynamicsParams& params, const MarketState& initial, int years) {
  params.validate();
  std::vector<MarketState> out{initial};
  out.reserve(static_cast<std::size_t>(std::max(years, 0)) + 1);
  for (int i = 0; i < years; ++i) {
    const auto& prev = out.back();
    const double s = solve_annual_fixed_point(params, prev.ev_stock).sales;
    out.push_back({prev.year + 1, s, compute_install_base(s, params.delta, prev.ev_stock), prev.station_stock});
  }
  return out;
}

double Exogenous::burden() const { return compute_burden(avg_ev_price, median_income); }

namespace {

struct Coefficients {
  double demand_const, stations, oil, white, asian, burden;
  double supply_const, ev_stock, parking, saturation, rebate;
};

Coefficients extract(const EstimationResult& demand, const EstimationResult& supply, BurdenForm form) {
  check_structural_coefficients(demand, supply, form);
  using namespace demand_cols;
  using namespace supply_cols;
  return {demand.coefficient(kInterceptName),
          demand.coefficient(kStations),
          demand.coefficient(kOil),
          demand.coefficient(kWhite),
          demand.coefficient(kAsian),
          demand.coefficient(form == BurdenForm::Linear ? kBurden : kLogBurden),
          supply.coefficient(kInterceptName),
          supply.coefficient(kEvStock),
          supply.coefficient(kParking),
          supply.coefficient(kSaturation),
          supply.coefficient(kRebate)};
}

void check_exogenous(const Exogenous& x) {
  if (!(x.oil_price > 0.0) || !(x.avg_ev_price > 0.0) || !(x.median_income > 0.0) || x.white_pop < 0.0 ||
      x.asian_pop < 0.0 || x.parking_lots < 0.0 || !std::isfinite(x.rebate_pct))
    throw Error(ErrorCode::Domain, "exogenous values must be positive where logged",
                {{"oil_price", x.oil_price},
                 {"avg_ev_price", x.avg_ev_price},
                 {"median_income", x.median_income},
                 {"white_pop", x.white_pop},
                 {"asian_pop", x.asian_pop},
                 {"parking_lots", x.parking_lots}});
}

}  // namespace

void check_structural_coefficients(const EstimationResult& demand, const EstimationResult& supply, BurdenForm form) {
  using namespace demand_cols;
  using namespace supply_cols;
  std::vector<std::string> missing;
  for (const char* name : {kStations, kOil, kWhite, kAsian, form == BurdenForm::Linear ? kBurden : kLogBurden, kInterceptName})
    if (!demand.has(name)) missing.push_back(std::string("demand:") + name);
  for (const char* name : {kEvStock, kParking, kSaturation, kRebate, kInterceptName})
    if (!supply.has(name)) missing.push_back(std::string("supply:") + name);
  if (!missing.empty())
    throw Error(ErrorCode::SpecMismatch, "estimation results lack coefficients required by the simulator",
                {{"missing", missing}});
}

double simulated_saturation(const MarketState& state, const Exogenous& exog, const StepOptions& options) {
  if (exog.saturation) return *exog.saturation;
  const auto& scale = options.saturation_scale;
  return scale.normalize(saturation_ratio(state.ev_stock, state.station_stock, scale.epsilon));
}

MarketState step_coupled_year(const MarketState& state, const EstimationResult& demand, const EstimationResult& supply,
                              const Exogenous& exog, double delta, const StepOptions& options) {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw Error(ErrorCode::Domain, "survival fraction delta must lie in [0, 1]", {{"delta", delta}});
  check_exogenous(exog);
  const auto b = extract(demand, supply, options.burden_form);

  const double burden = exog.burden();
  const double burden_term = options.burden_form == BurdenForm::Linear ? burden : std::log(burden);
  const double supply_base = b.supply_const + b.parking * log_count(exog.parking_lots) +
                             b.saturation * simulated_saturation(state, exog, options) + b.rebate * exog.rebate_pct;
  const double demand_base = b.demand_const + b.oil * std::log(exog.oil_price) + b.white * log_count(exog.white_pop) +
                             b.asian * log_count(exog.asian_pop) + b.burden * burden_term;
  const double carried = delta * state.ev_stock;

  // (1) station stock from the install base, (2) sales from station stock.
  auto stations = [&](double sales) {
    double target = std::expm1(supply_base + b.ev_stock * log_count(sales + carried));
    target = std::max(target, 0.0);
    return options.cumulative_stations ? std::max(target, state.station_stock) : target;
  };
  auto sales_map = [&](double sales) {
    return std::max(0.0, std::expm1(demand_base + b.stations * log_count(stations(sales))));
  };

  const auto sol = solve_fixed_point(sales_map, std::max(state.sales, 0.0), 0.0, options.solver);
  MarketState next;
  next.year = state.year + 1;
  next.sales = sol.sales;
  // (3) install-base update.
  next.ev_stock = compute_install_base(sol.sales, delta, state.ev_stock);
  next.station_stock = stations(sol.sales);
  return next;
}

std::vector<MarketState> simulate_horizon(const MarketState& initial, int years, const EstimationResult& demand,
                                          const EstimationResult& supply, const ExogenousPath& exog, double delta,
                                          const StepOptions& options) {
  if (years < 0) throw Error(ErrorCode::Domain, "horizon must be non-negative", {{"years", years}});
  check_structural_coefficients(demand, supply, options.burden_form);
  std::vector<MarketState> out{initial};
  out.reserve(static_cast<std::size_t>(years) + 1);
  for (int i = 0; i < years; ++i) {
    const int year = out.back().year + 1;
    try {
      out.push_back(step_coupled_year(out.back(), demand, supply, exog(year), delta, options));
    } catch (const Error& e) {
      auto ctx = e.context();
      ctx["year"] = year;
      throw Error(e.code(), "simulation failed in year " + std::to_string(year) + ": " + e.what(), ctx);
    }
  }
  return out;
}

std::vector<MarketState> simulate_horizon(const MarketState& initial, int years, const EstimationResult& demand,
                                          const EstimationResult& supply, std::span<const Exogenous> path,
                                          double delta, const StepOptions& options) {
  if (years < 0) throw Error(ErrorCode::Domain, "horizon must be non-negative", {{"years", years}});
  if (path.size() < static_cast<std::size_t>(years))
    throw Error(ErrorCode::Domain, "exogenous path does not cover the horizon",
                {{"years", years}, {"path_length", path.size()}, {"first_uncovered_year", initial.year + 1 + static_cast<int>(path.size())}});
  const int first = initial.year + 1;
  return simulate_horizon(initial, years, demand, supply,
                          [&](int year) { return path[static_cast<std::size_t>(year - first)]; }, delta, options);
}

void write_trajectory_csv(std::ostream& out, std::span<const MarketState> states, std::span<const double> ev_share,
                          int digits) {
  out << "year,sales,ev_stock,station_stock,ev_share\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    out << s.year << ',' << format_number(s.sales, digits) << ',' << format_number(s.ev_stock, digits) << ','
        << format_number(s.station_stock, digits) << ',';
    if (i < ev_share.size()) out << format_number(ev_share[i], digits);
    out << '\n';
  }
}

nlohmann::ordered_json trajectory_json(std::span<const MarketState> states, std::span<const double> ev_share,
                                       int digits) {
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    nlohmann::ordered_json row;
    row["year"] = s.year;
    row["sales"] = round_significant(s.sales, digits);
    row["ev_stock"] = round_significant(s.ev_stock, digits);
    row["station_stock"] = round_significant(s.station_stock, digits);
    if (i < ev_share.size()) row["ev_share"] = round_significant(ev_share[i], digits);
    arr.push_back(row);
  }
  return arr;
}

}  // namespace evnet
