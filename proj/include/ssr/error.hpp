#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssr {

enum class ErrorCode {
  // gateway
  BackendUnavailable,
  MalformedResponse,
  BudgetExceeded,
  TransientFailure,
  // prompts
  MissingSlot,
  UnknownSlot,
  TagMissing,
  TagUnclosed,
  JsonNotFound,
  SchemaMismatch,
  EmptyDecomposition,
  NotAnInteger,
  OutOfRange,
  // engine
  DecompositionMismatch,
  AllUnparseable,
  // verify / taskgen
  Unparseable,
  IoError,
  InvalidGroundTruth,
  GenerationTimeout,
  // metrics / cli
  InsufficientParallelism,
  EmptyConfidences,
  DegenerateLabels,
  MissingBudget,
  SchemaVersionMismatch,
  ConfigError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library. `detail()` carries the
/// machine-checkable payload: the missing slot name, the offending JSON
/// path, the line number, the environment variable, and so on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail, const std::string& message = {})
      : std::runtime_error(compose(code, detail, message)),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  static std::string compose(ErrorCode code, const std::string& detail,
                             const std::string& message) {
    std::string out(to_string(code));
    if (!detail.empty()) out += "(" + detail + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::string detail_;
};

}  // namespace ssr
