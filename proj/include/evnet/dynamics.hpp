#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evnet/estimator.hpp"
#include "evnet/modelspec.hpp"
#include "evnet/panel.hpp"

namespace evnet {

// Reduced-form constants of the annual recursion
//   s_t = exp(c + k * log(s_t + delta * Q_{t-1})),  k = beta_1 * alpha_1.
struct DynamicsParams {
  double c = 0.0;
  double k = 0.0;
  double delta = 0.95;
  double tol = 1e-12;  // relative residual |s - g(s)| / s
  int max_iter = 10000;

  // Throws Domain unless 0 <= k < 1, 0 <= delta <= 1, tol > 0, max_iter > 0.
  void validate() const;
};

struct MarketState {
  int year = 0;
  double sales = 0.0;
  double ev_stock = 0.0;
  double station_stock = 0.0;
};

struct FixedPointSolution {
  double sales = 0.0;
  int iterations = 0;
  bool used_bisection = false;
  double residual = 0.0;  // |s - g(s)|
};

struct SolverOptions {
  double tol = 1e-12;
  int max_iter = 10000;
  double damping = 0.5;
};

// Solves s = g(s) on s >= lower for a map with g' < 1 near the root: damped
// iteration from `start`, falling back to bisection on s - g(s) when the
// iteration stalls. `lower` must satisfy lower <= g(lower).
FixedPointSolution solve_fixed_point(const std::function<double(double)>& g, double start, double lower,
                                     const SolverOptions& options = {});

FixedPointSolution solve_annual_fixed_point(const DynamicsParams& params, double prev_stock);

// c = log(s) - k * log(s + delta * prev_stock); requires s > 0.
double calibrate_constant(double observed_sales, double prev_stock, double k, double delta);

// Iterates the reduced-form recursion; station_stock is carried unchanged.
std::vector<MarketState> simulate_reduced_form(const DynamicsParams& params, const MarketState& initial, int years);

// Exogenous drivers for one simulated year.
struct Exogenous {
  double oil_price = 1.0;
  double white_pop = 0.0;
  double asian_pop = 0.0;
  double avg_ev_price = 1.0;
  double median_income = 1.0;
  double parking_lots = 0.0;
  double rebate_pct = 0.0;
  // Overrides the saturation recomputed from last year's stocks.
  std::optional<double> saturation;

  double burden() const;
};

struct StepOptions {
  SaturationBounds saturation_scale;  // frozen from the estimation panel
  BurdenForm burden_form = BurdenForm::Linear;
  // Station stock is cumulative: the supply equation sets a target level and
  // installed chargers are never removed.
  bool cumulative_stations = true;
  SolverOptions solver;
};

// Required coefficient names for the structural stepper; throws SpecMismatch listing every absent name.
void check_structural_coefficients(const EstimationResult& demand, const EstimationResult& supply,
                                   BurdenForm burden_form = BurdenForm::Linear);

// Saturation used by the stepper for the year after `state`.
double simulated_saturation(const MarketState& state, const Exogenous& exog, const StepOptions& options);

// One year of the coupled market. Within the year the supply equation is
// evaluated at the current install base Q_t = s_t + delta * Q_{t-1} and the
// demand equation at the resulting station stock; the alternation is
// iterated until s_t is a fixed point.
MarketState step_coupled_year(const MarketState& state, const EstimationResult& demand, const EstimationResult& supply,
                              const Exogenous& exog, double delta, const StepOptions& options = {});

using ExogenousPath = std::function<Exogenous(int year)>;

// Returns [initial, year+1, ..., year+years].
std::vector<MarketState> simulate_horizon(const MarketState& initial, int years, const EstimationResult& demand,
                                          const EstimationResult& supply, const ExogenousPath& exog, double delta,
                                          const StepOptions& options = {});
// path[i] drives year initial.year + 1 + i.
std::vector<MarketState> simulate_horizon(const MarketState& initial, int years, const EstimationResult& demand,
                                          const EstimationResult& supply, std::span<const Exogenous> path,
                                          double delta, const StepOptions& options = {});

// CSV: year,sales,ev_stock,station_stock,ev_share (share column empty when not supplied).
void write_trajectory_csv(std::ostream& out, std::span<const MarketState> states, std::span<const double> ev_share = {},
                          int significant_digits = 6);
nlohmann::ordered_json trajectory_json(std::span<const MarketState> states, std::span<const double> ev_share = {},
                                       int significant_digits = 6);

}  // namespace evnet
