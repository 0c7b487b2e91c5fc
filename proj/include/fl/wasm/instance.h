#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fl/wasm/module.h"

namespace fl::wasm {

class Instance;

using HostFunction =
    std::function<void(Instance& instance, std::span<const uint64_t> args, std::span<uint64_t> results)>;

// Resolves a module's function imports by (module, name). A host function
// may re-enter the calling instance through Instance::Call (e.g. to allocate
// guest memory for a reply).
class Linker {
 public:
  void Define(std::string module, std::string name, FuncType type, HostFunction fn);

  struct Entry {
    FuncType type;
    HostFunction fn;
  };
  const Entry* Find(std::string_view module, std::string_view name) const;

 private:
  std::map<std::pair<std::string, std::string>, Entry, std::less<>> entries_;
};

struct InstanceLimits {
  // Linear memory cap in bytes, rounded down to whole pages.
  uint64_t max_memory_bytes = uint64_t{kMaxPages} * kPageSize;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  // Set from another thread to stop execution at the next check point.
  const std::atomic<bool>* interrupt = nullptr;
  uint32_t max_call_depth = 20'000;
  uint32_t value_stack_slots = 1u << 19;
};

// One isolated execution context of a CompiledModule: own memory, globals
// and table. Not thread-safe; confined to the invocation that created it.
class Instance {
 public:
  // Resolves imports, initializes memory/table/globals and runs the start
  // function. Throws Error(kInvalidWasm) on link failure and Trap on
  // initialization faults.
  Instance(std::shared_ptr<const CompiledModule> module, const Linker& linker,
           InstanceLimits limits = {}, void* host_data = nullptr);
  ~Instance();

  Instance(const Instance&) = delete;
  Instance& operator=(const Instance&) = delete;

  const CompiledModule& module() const { return *module_; }

  std::optional<uint32_t> ExportedFunction(std::string_view name) const;
  bool HasExportedMemory(std::string_view name) const;

  // Calls function `index` (import space included). Arguments and results
  // are raw 64-bit slots (i32/f32 in the low half). Throws Trap.
  std::vector<uint64_t> Call(uint32_t index, std::span<const uint64_t> args);

  std::span<uint8_t> memory() { return {memory_.data(), memory_size_}; }
  uint64_t memory_size() const { return memory_size_; }

  // True once a memory.grow (or the initial allocation) was refused because
  // of max_memory_bytes.
  bool memory_limit_hit() const { return memory_limit_hit_; }

  // Bounds-checked accessors for host functions; throw Trap on violation.
  std::string_view ReadMemory(uint32_t offset, uint32_t length) const;
  void WriteMemory(uint32_t offset, std::string_view bytes);

  void* host_data() const { return host_data_; }

  // Throws Trap(kInterrupted) when the deadline passed or the interrupt flag
  // is set. Host functions that block should call this.
  void CheckInterrupt() const;
  const InstanceLimits& limits() const { return limits_; }

 private:
  int32_t GrowMemory(uint32_t delta_pages);
  uint64_t EvalConst(const ConstExpr& e) const;
  void Execute(uint32_t defined_index, uint64_t* args_base);
  [[noreturn]] void ThrowTrap(TrapKind kind) const;

  std::shared_ptr<const CompiledModule> module_;
  InstanceLimits limits_;
  void* host_data_;
  std::vector<const Linker::Entry*> imports_;
  std::vector<uint8_t> memory_;
  uint64_t memory_size_ = 0;
  uint32_t max_pages_ = 0;
  bool memory_limit_hit_ = false;
  std::vector<uint64_t> globals_;
  std::vector<uint32_t> table_;
  std::vector<bool> dropped_data_;
  std::unique_ptr<uint64_t[]> stack_;
  uint64_t* stack_end_ = nullptr;
  uint64_t* sp_ = nullptr;
  uint32_t depth_ = 0;
};

}  // namespace fl::wasm
