#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <variant>

#include "fl/common/id128.h"

namespace fl {

inline constexpr size_t kMaxNameBytes = 128;
inline constexpr size_t kDefaultMaxWasmBytes = size_t{64} << 20;
inline constexpr size_t kMaxArgsBytes = size_t{8} << 20;
inline constexpr size_t kMaxAddressBytes = 253;

// Non-empty, at most 128 bytes, characters from [A-Za-z0-9_.-], not "." or "..".
bool IsValidName(std::string_view name);

struct FunctionId {
  std::string module_name;
  std::string function_name;

  bool IsValid() const {
    return IsValidName(module_name) && IsValidName(function_name);
  }
  std::string ToString() const { return module_name + "/" + function_name; }

  friend auto operator<=>(const FunctionId&, const FunctionId&) = default;
  friend bool operator==(const FunctionId&, const FunctionId&) = default;
};

struct FunctionIdHash {
  size_t operator()(const FunctionId& id) const noexcept {
    size_t h = std::hash<std::string>{}(id.module_name);
    return h ^ (std::hash<std::string>{}(id.function_name) + 0x9e3779b97f4a7c15ULL +
                (h << 6) + (h >> 2));
  }
};

// "\0asm" followed by version 1.
bool HasWasmPreamble(std::string_view bytes);

struct FunctionDescriptor {
  FunctionId id;
  std::string wasm_bytes;
  uint32_t reserved_memory_mb = 0;
  int64_t created_at = 0;
  int64_t updated_at = 0;

  friend bool operator==(const FunctionDescriptor&, const FunctionDescriptor&) = default;
};

// Throws Error(kInvalidDescriptor) naming the first violated invariant.
void ValidateDescriptor(const FunctionDescriptor& d,
                        size_t max_wasm_bytes = kDefaultMaxWasmBytes);

struct MetricsSample {
  WorkerId worker_id;
  uint64_t free_memory_mb = 0;
  uint32_t in_flight = 0;
  uint64_t cache_bytes = 0;
  int64_t taken_at = 0;

  friend bool operator==(const MetricsSample&, const MetricsSample&) = default;
};

struct DiscoveryAnnounce {
  WorkerId worker_id;
  std::string listen_address;  // host:port
  uint32_t capacity_mb = 0;
  uint64_t epoch = 0;

  friend bool operator==(const DiscoveryAnnounce&, const DiscoveryAnnounce&) = default;
};

struct InvocationEnvelope {
  CorrelationId correlation_id;
  FunctionId function_id;
  std::string args;  // JSON text
  int64_t deadline = 0;

  friend bool operator==(const InvocationEnvelope&, const InvocationEnvelope&) = default;
};

enum class PlatformErrorKind : uint8_t {
  kNoWorkerAvailable = 0,
  kNotFound = 1,
  kTimeout = 2,
  kWorkerLost = 3,
  kGuestTrap = 4,
  kOutOfMemory = 5,
  kInvalidWasm = 6,
};
inline constexpr uint8_t kPlatformErrorKindCount = 7;

std::string_view PlatformErrorKindName(PlatformErrorKind kind);

namespace outcome {

struct Ok {
  std::string payload;  // JSON text
  friend bool operator==(const Ok&, const Ok&) = default;
};

struct FunctionError {
  std::string message;
  friend bool operator==(const FunctionError&, const FunctionError&) = default;
};

struct PlatformError {
  PlatformErrorKind kind = PlatformErrorKind::kGuestTrap;
  std::string message;
  friend bool operator==(const PlatformError&, const PlatformError&) = default;
};

}  // namespace outcome

using InvocationOutcome =
    std::variant<outcome::Ok, outcome::FunctionError, outcome::PlatformError>;

inline InvocationOutcome MakePlatformError(PlatformErrorKind kind, std::string message) {
  return outcome::PlatformError{kind, std::move(message)};
}

}  // namespace fl
