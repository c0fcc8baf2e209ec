#include "archspace/error.hpp"

namespace archspace {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedParens: return "UnbalancedParens";
    case ErrorCode::UnknownModuleKind: return "UnknownModuleKind";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::EmptyValueList: return "EmptyValueList";
    case ErrorCode::HeterogeneousValueList: return "HeterogeneousValueList";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::UnexpectedToken: return "UnexpectedToken";
    case ErrorCode::NotInitialized: return "NotInitialized";
    case ErrorCode::AlreadyInitialized: return "AlreadyInitialized";
    case ErrorCode::AlreadySpecified: return "AlreadySpecified";
    case ErrorCode::NotSpecified: return "NotSpecified";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ShapeIncompatible: return "ShapeIncompatible";
    case ErrorCode::ShapeUnderflow: return "ShapeUnderflow";
    case ErrorCode::PathMismatch: return "PathMismatch";
    case ErrorCode::SampleFailed: return "SampleFailed";
    case ErrorCode::MalformedGraph: return "MalformedGraph";
    case ErrorCode::InconsistentShapes: return "InconsistentShapes";
    case ErrorCode::EvaluationFailed: return "EvaluationFailed";
    case ErrorCode::UnknownModel: return "UnknownModel";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(ErrorCode code, SourceSpan span, const std::string& message)
    : Error(code, std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message),
      span_(span),
      detail_(message) {}

std::string_view to_string(EvalFailure reason) {
  switch (reason) {
    case EvalFailure::ExitCode: return "exit_code";
    case EvalFailure::Timeout: return "timeout";
    case EvalFailure::Parse: return "parse";
    case EvalFailure::Spawn: return "spawn";
  }
  return "unknown";
}

EvaluationFailed::EvaluationFailed(EvalFailure reason, const std::string& detail, int exit_code)
    : Error(ErrorCode::EvaluationFailed, std::string(to_string(reason)) + ": " + detail),
      reason_(reason),
      exit_code_(exit_code) {}

}  // namespace archspace
