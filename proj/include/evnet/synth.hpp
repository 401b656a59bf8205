#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "evnet/modelspec.hpp"
#include "evnet/panel.hpp"

namespace evnet {

// Synthetic zip-year market generated from known structural coefficients.
// Coefficient maps use the equation column names plus kInterceptName.
struct SynthConfig {
  int n_zips = 50;
  int n_years = 6;
  int first_year = 2015;
  std::map<std::string, double> true_demand_coeffs = default_demand_truth();
  std::map<std::string, double> true_supply_coeffs = default_supply_truth();
  // Correlation between the demand error and the latent shock that lowers the
  // station stock; a negative value pushes OLS station elasticities upward.
  double endogeneity_rho = -0.5;
  double noise_sd = 0.5;
  std::uint64_t seed = 7;
  double delta = 0.95;
  BurdenForm burden_form = BurdenForm::Linear;

  // Throws Domain (sizes, rho, noise, delta, k >= 1) or SpecMismatch (missing names).
  void validate() const;

  static std::map<std::string, double> default_demand_truth();
  static std::map<std::string, double> default_supply_truth();

  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

// Deterministic for a given config. The returned panel has passed the panel
// validator and its saturation bounds are the ones used during generation.
Panel generate_panel(const SynthConfig& config);

}  // namespace evnet
