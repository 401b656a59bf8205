#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace evnet {

enum class ErrorCode {
  Schema,
  Uniqueness,
  Validation,
  Domain,
  EmptyResult,
  LagUnavailable,
  SingularDesign,
  Conditioning,
  PipelineOrder,
  NonConvergence,
  SpecMismatch,
  ScenarioInfeasible,
  SingularFit,
  Alignment,
  Io,
  Usage,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code and a
// JSON context payload (row indices, column names, residuals, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        nlohmann::json context = nlohmann::json::object());

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& context() const noexcept { return context_; }

  // {code, message, context}
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json context_;
};

}  // namespace evnet
