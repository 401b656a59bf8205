#include "evnet/error.hpp"

namespace evnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Uniqueness: return "uniqueness";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::EmptyResult: return "empty_result";
    case ErrorCode::LagUnavailable: return "lag_unavailable";
    case ErrorCode::SingularDesign: return "singular_design";
    case ErrorCode::Conditioning: return "conditioning";
    case ErrorCode::PipelineOrder: return "pipeline_order";
    case ErrorCode::NonConvergence: return "non_convergence";
    case ErrorCode::SpecMismatch: return "spec_mismatch";
    case ErrorCode::ScenarioInfeasible: return "scenario_infeasible";
    case ErrorCode::SingularFit: return "singular_fit";
    case ErrorCode::Alignment: return "alignment";
    case ErrorCode::Io: return "io";
    case ErrorCode::Usage: return "usage";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message, nlohmann::json context)
    : std::runtime_error(message), code_(code), context_(std::move(context)) {}

nlohmann::json Error::to_json() const {
  nlohmann::json j;
  j["code"] = std::string(to_string(code_));
  j["message"] = what();
  j["context"] = context_;
  return j;
}

}  // namespace evnet
