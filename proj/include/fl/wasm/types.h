#pragma once

#include <cstdint>
#include <exception>
#include <string>
#include <string_view>
#include <vector>

namespace fl::wasm {

enum class ValType : uint8_t {
  kI32 = 0x7f,
  kI64 = 0x7e,
  kF32 = 0x7d,
  kF64 = 0x7c,
  kFuncRef = 0x70,
  kExternRef = 0x6f,
};

std::string_view ValTypeName(ValType t);

struct FuncType {
  std::vector<ValType> params;
  std::vector<ValType> results;

  friend bool operator==(const FuncType&, const FuncType&) = default;
};

std::string ToString(const FuncType& t);

enum class TrapKind {
  kUnreachable,
  kMemoryOutOfBounds,
  kIntegerDivideByZero,
  kIntegerOverflow,
  kInvalidConversion,
  kIndirectCallTypeMismatch,
  kUndefinedElement,
  kUninitializedElement,
  kCallStackExhausted,
  kInterrupted,
  kOutOfMemory,
  kHostError,
  kExit,
};

std::string_view TrapKindName(TrapKind kind);

// Raised out of guest execution. Guest state is unusable afterwards; the
// instance must be discarded.
class Trap : public std::exception {
 public:
  Trap(TrapKind kind, std::string message)
      : kind_(kind), message_(std::move(message)) {}

  TrapKind kind() const noexcept { return kind_; }
  const char* what() const noexcept override { return message_.c_str(); }

 private:
  TrapKind kind_;
  std::string message_;
};

inline constexpr uint32_t kPageSize = 65536;
inline constexpr uint32_t kMaxPages = 65536;

}  // namespace fl::wasm
