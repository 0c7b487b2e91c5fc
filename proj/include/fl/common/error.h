#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fl {

enum class ErrorCode {
  kInvalidArgument,
  kOversizeMessage,
  kMalformedFrame,
  kStorageUnavailable,
  kInvalidDescriptor,
  kNotFound,
  kAlreadyExists,
  kInvalidWasm,
  kNoWorkerAvailable,
  kTimeout,
  kWorkerLost,
  kGuestTrap,
  kOutOfMemory,
  kAbiViolation,
  kUnauthorized,
  kEmptyInput,
  kUnknownProcess,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fl
