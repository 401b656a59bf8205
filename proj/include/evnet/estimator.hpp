#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace evnet {

inline constexpr const char* kInterceptName = "const";

enum class EstimatorKind { OLS, TSLS, GMM };
enum class WeightMatrixKind { Identity, TwoStepRobust, NotApplicable };
enum class CovarianceKind { HC0, HC1 };

std::string to_string(EstimatorKind kind);
std::string to_string(WeightMatrixKind kind);
EstimatorKind parse_estimator(const std::string& text);

// Response, regressors and instruments with named columns. When the design
// carries an intercept it is an explicit trailing column named "const" in
// both the regressor and the instrument blocks.
struct DesignMatrix {
  std::string response_name;
  Eigen::VectorXd response;
  Eigen::MatrixXd regressors;
  std::vector<std::string> regressor_names;
  Eigen::MatrixXd instruments;
  std::vector<std::string> instrument_names;
  bool include_intercept = false;

  // Builds a design, appending the intercept column when requested.
  static DesignMatrix make(std::string response_name, Eigen::VectorXd response, Eigen::MatrixXd regressors,
                           std::vector<std::string> regressor_names, Eigen::MatrixXd instruments,
                           std::vector<std::string> instrument_names, bool include_intercept);

  std::size_t n() const { return static_cast<std::size_t>(response.size()); }
  std::size_t k() const { return static_cast<std::size_t>(regressors.cols()); }
  std::size_t m() const { return static_cast<std::size_t>(instruments.cols()); }
  std::ptrdiff_t regressor_index(const std::string& name) const;

  // Throws on shape mismatch, n <= k, non-finite entries or constant non-intercept regressors.
  void validate(bool instrumental) const;
};

struct FitOptions {
  CovarianceKind covariance = CovarianceKind::HC0;
  double weak_instrument_f = 10.0;
  // Two-step GMM refuses weight matrices whose condition estimate exceeds this.
  double max_condition = 1e12;
};

struct FirstStageDiagnostic {
  std::string endogenous;
  double f_statistic = 0.0;
  double partial_r_squared = 0.0;
};

struct EstimationResult {
  EstimatorKind estimator = EstimatorKind::OLS;
  WeightMatrixKind weight_matrix_kind = WeightMatrixKind::NotApplicable;
  std::string response_name;
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::MatrixXd covariance;
  double r_squared = 0.0;
  std::size_t n_obs = 0;
  std::vector<FirstStageDiagnostic> first_stage;
  std::vector<std::string> warnings;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  bool has(const std::string& name) const;
  double coefficient(const std::string& name) const;  // throws SpecMismatch when absent
  double std_error(const std::string& name) const;
  void set_coefficient(const std::string& name, double value);

  // Two-sided normal p-value of coefficient / robust SE.
  double p_value(const std::string& name) const;
};

EstimationResult fit_ols(const DesignMatrix& design, const FitOptions& options = {});
EstimationResult fit_tsls(const DesignMatrix& design, const std::vector<std::string>& endogenous,
                          const FitOptions& options = {});
EstimationResult fit_gmm(const DesignMatrix& design, const std::vector<std::string>& endogenous, int steps = 2,
                         const FitOptions& options = {});
EstimationResult fit(const DesignMatrix& design, EstimatorKind kind, const std::vector<std::string>& endogenous,
                     const FitOptions& options = {});

// {estimator, coefficients, std_errors, r_squared, n_obs, warnings, ...}.
// significant_digits <= 0 keeps full precision.
nlohmann::ordered_json to_json(const EstimationResult& result, int significant_digits = 6);
// The ordered overload keeps the coefficient order of the document.
EstimationResult estimation_from_json(const nlohmann::json& j);
EstimationResult estimation_from_json(const nlohmann::ordered_json& j);

// Side-by-side table in the layout of a regression report: coefficient with
// a star at p <= 0.05, robust SE in parentheses, then n and R^2.
std::string format_table(const std::vector<std::pair<std::string, const EstimationResult*>>& columns,
                         const std::string& title, int significant_digits = 4);

}  // namespace evnet
