#pragma once

#include <stdexcept>
#include <string>

namespace nullkirch {

enum class ErrorCode {
  DegenerateMetric,
  ProviderIncomplete,
  FrameConstructionFailure,
  GeneratorEscaped,
  FrameDriftFailure,
  FoliationDegenerate,
  ConjugateDegeneration,
  MaskedNode,
  TransportBlowup,
  IncompleteCone,
  SpecMismatch,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::ProviderIncomplete: return "ProviderIncomplete";
    case ErrorCode::FrameConstructionFailure: return "FrameConstructionFailure";
    case ErrorCode::GeneratorEscaped: return "GeneratorEscaped";
    case ErrorCode::FrameDriftFailure: return "FrameDriftFailure";
    case ErrorCode::FoliationDegenerate: return "FoliationDegenerate";
    case ErrorCode::ConjugateDegeneration: return "ConjugateDegeneration";
    case ErrorCode::MaskedNode: return "MaskedNode";
    case ErrorCode::TransportBlowup: return "TransportBlowup";
    case ErrorCode::IncompleteCone: return "IncompleteCone";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

// Single exception type for the engine; the code identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nullkirch
