#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evnet/estimator.hpp"
#include "evnet/panel.hpp"

namespace evnet {

// Column names follow the rows of the published regression tables.
namespace demand_cols {
inline constexpr const char* kResponse = "ln(EV sales)";
inline constexpr const char* kStations = "ln(Charging station)";
inline constexpr const char* kOil = "ln(oil_price)";
inline constexpr const char* kWhite = "ln(White Population)";
inline constexpr const char* kAsian = "ln(Asian Population)";
inline constexpr const char* kBurden = "EV_Burden";
inline constexpr const char* kLogBurden = "ln(EV_Burden)";
}  // namespace demand_cols

namespace supply_cols {
inline constexpr const char* kResponse = "ln(Charging station)";
inline constexpr const char* kEvStock = "ln(EV Stock)";
inline constexpr const char* kParking = "ln(parking lot)";
inline constexpr const char* kSaturation = "Saturation";
inline constexpr const char* kRebate = "Rebate Percentage";
}  // namespace supply_cols

inline constexpr const char* kInstrumentName = "P_zt";

enum class BurdenForm { Linear, Log };

struct ModelOptions {
  BurdenForm burden_form = BurdenForm::Linear;
  FitOptions fit;
  int gmm_steps = 2;
};

struct EquationSpec {
  std::string name;
  std::string response;
  std::vector<std::string> regressors;  // without the intercept
  std::vector<std::string> endogenous;
  std::vector<std::string> instruments;  // without the intercept
};

EquationSpec demand_spec(const ModelOptions& options = {});
EquationSpec supply_spec();

// Natural log with the log1p guard used for every count variable.
double log_count(double count);

DesignMatrix build_demand_design(const Panel& panel, const ModelOptions& options = {});
DesignMatrix build_supply_design(const Panel& panel);

EstimationResult estimate_demand(const Panel& panel, EstimatorKind method, const ModelOptions& options = {});
EstimationResult estimate_supply(const Panel& panel, EstimatorKind method, const ModelOptions& options = {});

// Bound columns per equation, for auditing the mapping.
nlohmann::ordered_json describe(const ModelOptions& options = {});

}  // namespace evnet
