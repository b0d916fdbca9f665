#pragma once

#include <stdexcept>
#include <string>

namespace lmtx {

enum class ErrorCode {
  // corpus
  MalformedRecord,
  EmptyFile,
  DuplicateExplicitId,
  EmptyLabelText,
  LabelIdOutOfRange,
  RowCountMismatch,
  SpecInfeasible,
  // encoder
  ZeroNorm,
  NonFiniteGradient,
  CorruptCheckpoint,
  VersionMismatch,
  // index
  NonUnitRow,
  StaleIndex,
  // teacher
  RemoteUnavailable,
  RemoteMalformedResponse,
  // trainer
  NoTrainingSignal,
  // eval
  EmptyTruth,
  MissingPredictions,
  // config / cli
  UnknownKey,
  TypeMismatch,
  MissingRequired,
  UsageError,
  // io
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace lmtx
