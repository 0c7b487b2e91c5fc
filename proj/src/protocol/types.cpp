#include "fl/protocol/types.h"

#include "fl/common/error.h"

namespace fl {

bool IsValidName(std::string_view name) {
  if (name.empty() || name.size() > kMaxNameBytes) return false;
  // Dot-only names would alias directories in the file-backed store.
  if (name == "." || name == "..") return false;
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

bool HasWasmPreamble(std::string_view bytes) {
  static constexpr std::string_view kPreamble("\0asm\x01\0\0\0", 8);
  return bytes.size() >= kPreamble.size() && bytes.substr(0, kPreamble.size()) == kPreamble;
}

void ValidateDescriptor(const FunctionDescriptor& d, size_t max_wasm_bytes) {
  if (!d.id.IsValid()) {
    throw Error(ErrorCode::kInvalidDescriptor, "invalid function id '" + d.id.ToString() + "'");
  }
  if (!HasWasmPreamble(d.wasm_bytes)) {
    throw Error(ErrorCode::kInvalidDescriptor, "binary lacks the wasm preamble");
  }
  if (d.wasm_bytes.size() > max_wasm_bytes) {
    throw Error(ErrorCode::kInvalidDescriptor, "binary exceeds the configured size limit");
  }
  if (d.reserved_memory_mb < 1) {
    throw Error(ErrorCode::kInvalidDescriptor, "reserved memory must be at least 1 MiB");
  }
}

std::string_view PlatformErrorKindName(PlatformErrorKind kind) {
  switch (kind) {
    case PlatformErrorKind::kNoWorkerAvailable: return "NoWorkerAvailable";
    case PlatformErrorKind::kNotFound: return "NotFound";
    case PlatformErrorKind::kTimeout: return "Timeout";
    case PlatformErrorKind::kWorkerLost: return "WorkerLost";
    case PlatformErrorKind::kGuestTrap: return "GuestTrap";
    case PlatformErrorKind::kOutOfMemory: return "OutOfMemory";
    case PlatformErrorKind::kInvalidWasm: return "InvalidWasm";
  }
  return "Unknown";
}

}  // namespace fl
