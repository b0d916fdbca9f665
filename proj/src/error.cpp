#include "lmtx/error.hpp"

namespace lmtx {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::DuplicateExplicitId: return "DuplicateExplicitId";
    case ErrorCode::EmptyLabelText: return "EmptyLabelText";
    case ErrorCode::LabelIdOutOfRange: return "LabelIdOutOfRange";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::SpecInfeasible: return "SpecInfeasible";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::NonUnitRow: return "NonUnitRow";
    case ErrorCode::StaleIndex: return "StaleIndex";
    case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
    case ErrorCode::RemoteMalformedResponse: return "RemoteMalformedResponse";
    case ErrorCode::NoTrainingSignal: return "NoTrainingSignal";
    case ErrorCode::EmptyTruth: return "EmptyTruth";
    case ErrorCode::MissingPredictions: return "MissingPredictions";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::MissingRequired: return "MissingRequired";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace lmtx
