#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fl/wasm/types.h"

namespace fl::wasm {

// Interpreter instruction. Numeric, load/store and constant instructions keep
// their binary opcode; control and prefixed instructions use the Op codes
// below. Immediates are pre-decoded into `a` and `b`.
struct Instr {
  uint16_t code;
  uint32_t a;
  uint64_t b;
};

namespace op {
inline constexpr uint16_t kUnreachable = 0x100;
inline constexpr uint16_t kBr = 0x101;           // a=target pc, b=(arity<<32)|height
inline constexpr uint16_t kBrIf = 0x102;         // as kBr, pops the condition first
inline constexpr uint16_t kBrUnless = 0x103;     // a=target pc, no stack adjustment
inline constexpr uint16_t kJump = 0x104;         // a=target pc
inline constexpr uint16_t kBrTable = 0x105;      // a=first BranchTarget, b=entries (incl. default)
inline constexpr uint16_t kReturn = 0x106;
inline constexpr uint16_t kCall = 0x107;         // a=function index (defined)
inline constexpr uint16_t kCallHost = 0x108;     // a=import index
inline constexpr uint16_t kCallIndirect = 0x109; // a=canonical signature id
inline constexpr uint16_t kDrop = 0x10a;
inline constexpr uint16_t kSelect = 0x10b;
inline constexpr uint16_t kLocalGet = 0x10c;
inline constexpr uint16_t kLocalSet = 0x10d;
inline constexpr uint16_t kLocalTee = 0x10e;
inline constexpr uint16_t kGlobalGet = 0x10f;
inline constexpr uint16_t kGlobalSet = 0x110;
inline constexpr uint16_t kMemorySize = 0x111;
inline constexpr uint16_t kMemoryGrow = 0x112;
inline constexpr uint16_t kPrefixFC = 0x200;     // kPrefixFC + sub-opcode
}  // namespace op

struct BranchTarget {
  uint32_t pc;
  uint32_t arity;
  uint32_t height;
};

struct ConstExpr {
  enum class Kind { kValue, kGlobalGet, kRefFunc, kRefNull };
  Kind kind = Kind::kValue;
  uint64_t value = 0;
  uint32_t index = 0;
};

struct FunctionImport {
  std::string module;
  std::string name;
  uint32_t type_index = 0;
};

struct Function {
  uint32_t type_index = 0;
  uint32_t num_params = 0;
  uint32_t num_results = 0;
  uint32_t num_locals = 0;  // declared locals, excluding params
  uint32_t max_height = 0;  // peak operand stack depth
  std::vector<Instr> code;
  std::vector<BranchTarget> branch_targets;
};

struct Global {
  ValType type = ValType::kI32;
  bool is_mutable = false;
  ConstExpr init;
};

enum class ExternKind : uint8_t { kFunction = 0, kTable = 1, kMemory = 2, kGlobal = 3 };

struct Export {
  std::string name;
  ExternKind kind = ExternKind::kFunction;
  uint32_t index = 0;
};

struct Limits {
  uint32_t min = 0;
  std::optional<uint32_t> max;
};

struct ElementSegment {
  bool active = false;
  ConstExpr offset;
  std::vector<uint32_t> functions;  // kNullFunction for ref.null entries
};

struct DataSegment {
  bool active = false;
  ConstExpr offset;
  std::string bytes;
};

inline constexpr uint32_t kNullFunction = UINT32_MAX;

// A decoded and validated module in interpreter-ready form. Immutable and
// shareable across threads; each invocation instantiates it afresh.
struct CompiledModule {
  std::vector<FuncType> types;
  std::vector<uint32_t> type_signature;  // type index -> canonical signature id
  std::vector<FunctionImport> imports;
  std::vector<Function> functions;        // defined functions, after imports
  std::optional<Limits> table;
  std::optional<Limits> memory;
  std::vector<Global> globals;
  std::vector<Export> exports;
  std::vector<ElementSegment> elements;
  std::vector<DataSegment> data;
  std::optional<uint32_t> start;

  uint32_t num_functions() const {
    return static_cast<uint32_t>(imports.size() + functions.size());
  }
  const FuncType& FunctionType(uint32_t func_index) const;
  const Export* FindExport(std::string_view name, ExternKind kind) const;

  // Bytes held by this compiled form; what a cache entry accounts for.
  size_t ArtifactSize() const;
};

// Decodes and validates a binary module. Throws Error(kInvalidWasm).
std::shared_ptr<const CompiledModule> CompileModule(std::string_view bytes);

}  // namespace fl::wasm
