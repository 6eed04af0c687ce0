#include "ssr/error.hpp"

namespace ssr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::TransientFailure: return "TransientFailure";
    case ErrorCode::MissingSlot: return "MissingSlot";
    case ErrorCode::UnknownSlot: return "UnknownSlot";
    case ErrorCode::TagMissing: return "TagMissing";
    case ErrorCode::TagUnclosed: return "TagUnclosed";
    case ErrorCode::JsonNotFound: return "JsonNotFound";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyDecomposition: return "EmptyDecomposition";
    case ErrorCode::NotAnInteger: return "NotAnInteger";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DecompositionMismatch: return "DecompositionMismatch";
    case ErrorCode::AllUnparseable: return "AllUnparseable";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidGroundTruth: return "InvalidGroundTruth";
    case ErrorCode::GenerationTimeout: return "GenerationTimeout";
    case ErrorCode::InsufficientParallelism: return "InsufficientParallelism";
    case ErrorCode::EmptyConfidences: return "EmptyConfidences";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::MissingBudget: return "MissingBudget";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace ssr
