#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "fl/protocol/types.h"
#include "fl/wasm/instance.h"

namespace fl::abi {

inline constexpr std::string_view kImportModule = "funless";
inline constexpr std::string_view kAllocExport = "_fl_alloc";
inline constexpr std::string_view kRunExport = "_fl_run";
inline constexpr std::string_view kMemoryExport = "memory";
inline constexpr size_t kMaxPayloadBytes = size_t{8} << 20;

using Deadline = std::chrono::steady_clock::time_point;

// Services a guest can reach through its imports. Any member may be empty;
// fl_http then answers {"error":"unavailable"} and fl_log drops the line.
struct HostServices {
  // Takes the guest's request JSON, returns the reply JSON. Must give up by
  // `deadline`.
  std::function<std::string(std::string_view request, Deadline deadline)> http;
  std::function<void(std::string_view line)> log;
};

// Checks the module exports `memory`, `_fl_alloc(i32)->i32` and
// `_fl_run(i32,i32)->i64`. Throws Error(kAbiViolation).
void ValidateExports(const wasm::CompiledModule& module);

// Defines the "funless" imports and the WASI subset the guests may use.
// Expects Instance::host_data() to point at a HostServices.
void DefineHostImports(wasm::Linker& linker);

// The process-wide linker holding DefineHostImports.
const wasm::Linker& DefaultLinker();

// Runs one request through the wrapper: alloc, copy in, run, read back.
// Returns the validated response envelope bytes. Throws Error(kAbiViolation)
// and lets wasm::Trap through.
std::string CallGuest(wasm::Instance& instance, std::string_view input);

// Maps a validated envelope to Ok / FunctionError. Throws Error(kAbiViolation)
// if it is not exactly one of the two shapes.
InvocationOutcome ParseEnvelope(std::string_view response);

bool IsValidUtf8(std::string_view s);

struct RunOptions {
  uint32_t reserved_memory_mb = 64;
  Deadline deadline = Deadline::max();
  const std::atomic<bool>* interrupt = nullptr;
};

// Fresh instance, one call, outcome mapping (trap -> GuestTrap, denied
// memory growth -> OutOfMemory, deadline -> Timeout, link error ->
// InvalidWasm). Never throws for guest misbehavior.
InvocationOutcome RunGuest(std::shared_ptr<const wasm::CompiledModule> module, std::string_view args,
                           const RunOptions& options, const HostServices& services);

}  // namespace fl::abi
