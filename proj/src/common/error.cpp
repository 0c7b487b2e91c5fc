#include "fl/common/error.h"

namespace fl {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kOversizeMessage: return "OversizeMessage";
    case ErrorCode::kMalformedFrame: return "MalformedFrame";
    case ErrorCode::kStorageUnavailable: return "StorageUnavailable";
    case ErrorCode::kInvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kAlreadyExists: return "AlreadyExists";
    case ErrorCode::kInvalidWasm: return "InvalidWasm";
    case ErrorCode::kNoWorkerAvailable: return "NoWorkerAvailable";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kWorkerLost: return "WorkerLost";
    case ErrorCode::kGuestTrap: return "GuestTrap";
    case ErrorCode::kOutOfMemory: return "OutOfMemory";
    case ErrorCode::kAbiViolation: return "AbiViolation";
    case ErrorCode::kUnauthorized: return "Unauthorized";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kUnknownProcess: return "UnknownProcess";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace fl
