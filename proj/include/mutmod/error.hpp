#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mutmod {

// Every failure the engine can raise. The C API maps these 1:1 onto
// mutmod_status values, so append only.
enum class ErrorCode {
  MalformedAgentId = 1,
  UnknownAgent,
  OrderExceeded,
  InvalidSpec,
  ConflictingSpec,
  UnknownVariable,
  ValueOutOfDomain,
  TimestampRegression,
  KindSourceMismatch,
  PayloadOutOfDomain,
  MissingPayloadField,
  EmptyBins,
  NonMonotonicBins,
  InvalidScene,
  CycleDetected,
  RowNotNormalized,
  MissingCpt,
  DuplicateCpt,
  UnknownNode,
  MissingRow,
  ZeroProbabilityEvidence,
  AllZeroWeights,
  InvalidArgument,
  MissingField,
  UnknownVariableInCondition,
  ConditionSyntax,
  WrongMode,
  UnknownProposal,
  AlreadyResolved,
  Expired,
  NoHumanRecords,
  MissingFeature,
  ParseError,
  ValidationError,
  IoError,
  UnknownType,
  SchemaViolation,
  BindFailure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mutmod
