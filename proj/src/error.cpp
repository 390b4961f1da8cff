#include "mutmod/error.hpp"

namespace mutmod {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedAgentId: return "MalformedAgentId";
    case ErrorCode::UnknownAgent: return "UnknownAgent";
    case ErrorCode::OrderExceeded: return "OrderExceeded";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ConflictingSpec: return "ConflictingSpec";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::ValueOutOfDomain: return "ValueOutOfDomain";
    case ErrorCode::TimestampRegression: return "TimestampRegression";
    case ErrorCode::KindSourceMismatch: return "KindSourceMismatch";
    case ErrorCode::PayloadOutOfDomain: return "PayloadOutOfDomain";
    case ErrorCode::MissingPayloadField: return "MissingPayloadField";
    case ErrorCode::EmptyBins: return "EmptyBins";
    case ErrorCode::NonMonotonicBins: return "NonMonotonicBins";
    case ErrorCode::InvalidScene: return "InvalidScene";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::RowNotNormalized: return "RowNotNormalized";
    case ErrorCode::MissingCpt: return "MissingCpt";
    case ErrorCode::DuplicateCpt: return "DuplicateCpt";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::MissingRow: return "MissingRow";
    case ErrorCode::ZeroProbabilityEvidence: return "ZeroProbabilityEvidence";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::UnknownVariableInCondition: return "UnknownVariableInCondition";
    case ErrorCode::ConditionSyntax: return "ConditionSyntax";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::UnknownProposal: return "UnknownProposal";
    case ErrorCode::AlreadyResolved: return "AlreadyResolved";
    case ErrorCode::Expired: return "Expired";
    case ErrorCode::NoHumanRecords: return "NoHumanRecords";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

}  // namespace mutmod
