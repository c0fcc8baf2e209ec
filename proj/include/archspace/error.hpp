#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace archspace {

enum class ErrorCode {
  // Parsing.
  UnbalancedParens,
  UnknownModuleKind,
  ArityMismatch,
  EmptyValueList,
  HeterogeneousValueList,
  InvalidValue,
  DepthExceeded,
  UnexpectedToken,
  // Module state machine.
  NotInitialized,
  AlreadyInitialized,
  AlreadySpecified,
  NotSpecified,
  IndexOutOfRange,
  ShapeIncompatible,
  ShapeUnderflow,
  // Traversal.
  PathMismatch,
  SampleFailed,
  // Graph IR.
  MalformedGraph,
  InconsistentShapes,
  // Evaluation.
  EvaluationFailed,
  UnknownModel,
};

std::string_view to_string(ErrorCode code);

/// Base exception for everything raised by the library. Carries a stable code
/// so callers (the CLI in particular) can map failures to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// 1-based location of a parse error in the source text.
struct SourceSpan {
  int line = 1;
  int column = 1;
  int length = 1;

  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

class ParseError : public Error {
 public:
  ParseError(ErrorCode code, SourceSpan span, const std::string& message);

  const SourceSpan& span() const noexcept { return span_; }
  /// Message without the location prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  SourceSpan span_;
  std::string detail_;
};

enum class EvalFailure { ExitCode, Timeout, Parse, Spawn };

std::string_view to_string(EvalFailure reason);

class EvaluationFailed : public Error {
 public:
  EvaluationFailed(EvalFailure reason, const std::string& detail, int exit_code = 0);

  EvalFailure reason() const noexcept { return reason_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  EvalFailure reason_;
  int exit_code_;
};

}  // namespace archspace
