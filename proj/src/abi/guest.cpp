#include "fl/abi/guest.h"

#include <openssl/rand.h>

#include <cstring>
#include <json.hpp>
#include <thread>

#include "fl/common/error.h"

namespace fl::abi {

namespace {

using wasm::FuncType;
using wasm::Instance;
using wasm::Trap;
using wasm::TrapKind;
using wasm::ValType;

constexpr ValType I32 = ValType::kI32;
constexpr ValType I64 = ValType::kI64;

const HostServices& Services(Instance& inst) { return *static_cast<const HostServices*>(inst.host_data()); }

uint32_t Arg32(std::span<const uint64_t> args, size_t i) { return static_cast<uint32_t>(args[i]); }

int64_t Pack(uint32_t offset, uint32_t length) {
  return static_cast<int64_t>(uint64_t{offset} << 32 | length);
}

// Copies `bytes` into guest memory through the guest's own allocator.
uint32_t CopyIn(Instance& inst, std::string_view bytes) {
  auto alloc = inst.ExportedFunction(kAllocExport);
  if (!alloc) throw Error(ErrorCode::kAbiViolation, "guest does not export _fl_alloc");
  uint64_t len = bytes.size();
  uint32_t ptr = static_cast<uint32_t>(inst.Call(*alloc, std::span<const uint64_t>(&len, 1)).at(0));
  if (uint64_t{ptr} + bytes.size() > inst.memory_size()) {
    throw Error(ErrorCode::kAbiViolation, "_fl_alloc returned a region outside linear memory");
  }
  inst.WriteMemory(ptr, bytes);
  return ptr;
}

Deadline EffectiveDeadline(const Instance& inst) {
  return inst.limits().deadline.value_or(Deadline::max());
}

void FlHttp(Instance& inst, std::span<const uint64_t> args, std::span<uint64_t> results) {
  std::string request(inst.ReadMemory(Arg32(args, 0), Arg32(args, 1)));
  const HostServices& services = Services(inst);
  std::string reply = services.http ? services.http(request, EffectiveDeadline(inst))
                                    : std::string(R"({"error":"unavailable"})");
  // The guest may have outlived its deadline while the request was pending.
  inst.CheckInterrupt();
  uint32_t ptr = CopyIn(inst, reply);
  results[0] = static_cast<uint64_t>(Pack(ptr, static_cast<uint32_t>(reply.size())));
}

void FlLog(Instance& inst, std::span<const uint64_t> args, std::span<uint64_t>) {
  std::string_view line = inst.ReadMemory(Arg32(args, 0), Arg32(args, 1));
  const HostServices& services = Services(inst);
  if (services.log) services.log(line);
}

void FlSleep(Instance& inst, std::span<const uint64_t> args, std::span<uint64_t>) {
  auto ms = static_cast<int64_t>(args[0]);
  if (ms <= 0) return;
  auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(ms);
  // Sleep in slices so interruption and the deadline stay responsive.
  for (;;) {
    inst.CheckInterrupt();
    auto now = std::chrono::steady_clock::now();
    if (now >= until) return;
    auto slice = std::min<std::chrono::steady_clock::duration>(until - now, std::chrono::milliseconds(20));
    std::this_thread::sleep_for(slice);
  }
}

// wasi_snapshot_preview1 subset. Errno 0 = success, 8 = badf, 28 = inval.
void WasiClockTimeGet(Instance& inst, std::span<const uint64_t> args, std::span<uint64_t> results) {
  uint32_t id = Arg32(args, 0);
  uint64_t ns;
  if (id == 0) {
    ns = static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                   std::chrono::system_clock::now().time_since_epoch())
                                   .count());
  } else if (id == 1) {
    ns = static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                   std::chrono::steady_clock::now().time_since_epoch())
                                   .count());
  } else {
    results[0] = 28;
    return;
  }
  inst.WriteMemory(Arg32(args, 2), std::string_view(reinterpret_cast<const char*>(&ns), sizeof(ns)));
  results[0] = 0;
}

void WasiFdWrite(Instance& inst, std::span<const uint64_t> args, std::span<uint64_t> results) {
  uint32_t fd = Arg32(args, 0);
  uint32_t iovs = Arg32(args, 1);
  uint32_t count = Arg32(args, 2);
  if (fd != 1 && fd != 2) {
    results[0] = 8;
    return;
  }
  std::string text;
  for (uint32_t i = 0; i < count; ++i) {
    std::string_view iov = inst.ReadMemory(iovs + i * 8, 8);
    uint32_t base, len;
    std::memcpy(&base, iov.data(), 4);
    std::memcpy(&len, iov.data() + 4, 4);
    text.append(inst.ReadMemory(base, len));
  }
  uint32_t written = static_cast<uint32_t>(text.size());
  inst.WriteMemory(Arg32(args, 3), std::string_view(reinterpret_cast<const char*>(&written), 4));
  const HostServices& services = Services(inst);
  if (services.log && !text.empty()) services.log(text);
  results[0] = 0;
}

void WasiRandomGet(Instance& inst, std::span<const uint64_t> args, std::span<uint64_t> results) {
  std::string buf(Arg32(args, 1), '\0');
  if (!buf.empty()) RAND_bytes(reinterpret_cast<unsigned char*>(buf.data()), static_cast<int>(buf.size()));
  inst.WriteMemory(Arg32(args, 0), buf);
  results[0] = 0;
}

void WasiProcExit(Instance&, std::span<const uint64_t> args, std::span<uint64_t>) {
  throw Trap(TrapKind::kExit, "guest called proc_exit(" + std::to_string(Arg32(args, 0)) + ")");
}

// args_sizes_get / environ_sizes_get: both counts are zero.
void WasiZeroSizes(Instance& inst, std::span<const uint64_t> args, std::span<uint64_t> results) {
  uint32_t zero = 0;
  std::string_view z(reinterpret_cast<const char*>(&zero), 4);
  inst.WriteMemory(Arg32(args, 0), z);
  inst.WriteMemory(Arg32(args, 1), z);
  results[0] = 0;
}

void WasiNothing(Instance&, std::span<const uint64_t>, std::span<uint64_t> results) { results[0] = 0; }

bool IsExportedFunction(const wasm::CompiledModule& m, std::string_view name, const FuncType& want) {
  const wasm::Export* e = m.FindExport(name, wasm::ExternKind::kFunction);
  return e != nullptr && m.FunctionType(e->index) == want;
}

}  // namespace

bool IsValidUtf8(std::string_view s) {
  size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    size_t n;
    uint32_t cp;
    if ((c & 0xe0) == 0xc0) {
      n = 1;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      n = 2;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      n = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + n >= s.size()) return false;
    for (size_t k = 1; k <= n; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    static constexpr uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[n] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += n + 1;
  }
  return true;
}

void ValidateExports(const wasm::CompiledModule& module) {
  if (module.FindExport(kMemoryExport, wasm::ExternKind::kMemory) == nullptr) {
    throw Error(ErrorCode::kAbiViolation, "module does not export memory");
  }
  if (!IsExportedFunction(module, kAllocExport, FuncType{{I32}, {I32}})) {
    throw Error(ErrorCode::kAbiViolation, "module does not export _fl_alloc(i32) -> i32");
  }
  if (!IsExportedFunction(module, kRunExport, FuncType{{I32, I32}, {I64}})) {
    throw Error(ErrorCode::kAbiViolation, "module does not export _fl_run(i32, i32) -> i64");
  }
}

void DefineHostImports(wasm::Linker& linker) {
  std::string fl(kImportModule);
  linker.Define(fl, "fl_http", FuncType{{I32, I32}, {I64}}, FlHttp);
  linker.Define(fl, "fl_log", FuncType{{I32, I32}, {}}, FlLog);
  linker.Define(fl, "fl_sleep", FuncType{{I64}, {}}, FlSleep);

  const std::string wasi = "wasi_snapshot_preview1";
  linker.Define(wasi, "clock_time_get", FuncType{{I32, I64, I32}, {I32}}, WasiClockTimeGet);
  linker.Define(wasi, "fd_write", FuncType{{I32, I32, I32, I32}, {I32}}, WasiFdWrite);
  linker.Define(wasi, "random_get", FuncType{{I32, I32}, {I32}}, WasiRandomGet);
  linker.Define(wasi, "proc_exit", FuncType{{I32}, {}}, WasiProcExit);
  linker.Define(wasi, "args_sizes_get", FuncType{{I32, I32}, {I32}}, WasiZeroSizes);
  linker.Define(wasi, "environ_sizes_get", FuncType{{I32, I32}, {I32}}, WasiZeroSizes);
  linker.Define(wasi, "args_get", FuncType{{I32, I32}, {I32}}, WasiNothing);
  linker.Define(wasi, "environ_get", FuncType{{I32, I32}, {I32}}, WasiNothing);
}

const wasm::Linker& DefaultLinker() {
  static const wasm::Linker linker = [] {
    wasm::Linker l;
    DefineHostImports(l);
    return l;
  }();
  return linker;
}

std::string CallGuest(Instance& instance, std::string_view input) {
  if (!instance.HasExportedMemory(kMemoryExport)) {
    throw Error(ErrorCode::kAbiViolation, "guest does not export memory");
  }
  auto run = instance.ExportedFunction(kRunExport);
  if (!run) throw Error(ErrorCode::kAbiViolation, "guest does not export _fl_run");

  uint32_t ptr = CopyIn(instance, input);
  uint64_t call_args[2] = {ptr, input.size()};
  auto packed = instance.Call(*run, call_args).at(0);
  uint32_t offset = static_cast<uint32_t>(packed >> 32);
  uint32_t length = static_cast<uint32_t>(packed);
  if (uint64_t{offset} + length > instance.memory_size()) {
    throw Error(ErrorCode::kAbiViolation, "response region " + std::to_string(offset) + "+" +
                                              std::to_string(length) + " lies outside linear memory");
  }
  std::string response(instance.ReadMemory(offset, length));
  if (!IsValidUtf8(response)) throw Error(ErrorCode::kAbiViolation, "response is not valid UTF-8");
  return response;
}

InvocationOutcome ParseEnvelope(std::string_view response) {
  nlohmann::json doc = nlohmann::json::parse(response, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kAbiViolation, "response is not a JSON object");
  }
  auto status = doc.find("status");
  if (status == doc.end() || !status->is_string() || doc.size() != 2) {
    throw Error(ErrorCode::kAbiViolation, "response envelope must have exactly status and payload/message");
  }
  if (*status == "ok") {
    auto payload = doc.find("payload");
    if (payload == doc.end()) throw Error(ErrorCode::kAbiViolation, "ok response without payload");
    std::string text = payload->dump();
    if (text.size() > kMaxPayloadBytes) throw Error(ErrorCode::kAbiViolation, "payload exceeds 8 MiB");
    return outcome::Ok{std::move(text)};
  }
  if (*status == "error") {
    auto message = doc.find("message");
    if (message == doc.end() || !message->is_string()) {
      throw Error(ErrorCode::kAbiViolation, "error response without a string message");
    }
    return outcome::FunctionError{message->get<std::string>()};
  }
  throw Error(ErrorCode::kAbiViolation, "unknown response status");
}

InvocationOutcome RunGuest(std::shared_ptr<const wasm::CompiledModule> module, std::string_view args,
                           const RunOptions& options, const HostServices& services) {
  wasm::InstanceLimits limits;
  limits.max_memory_bytes = uint64_t{options.reserved_memory_mb} << 20;
  if (options.deadline != Deadline::max()) limits.deadline = options.deadline;
  limits.interrupt = options.interrupt;

  std::unique_ptr<Instance> instance;
  auto trap_outcome = [&](const Trap& trap) -> InvocationOutcome {
    if (trap.kind() == TrapKind::kInterrupted) {
      return MakePlatformError(PlatformErrorKind::kTimeout, trap.what());
    }
    if (trap.kind() == TrapKind::kOutOfMemory || (instance && instance->memory_limit_hit())) {
      return MakePlatformError(PlatformErrorKind::kOutOfMemory,
                               "guest exceeded its reserved memory of " +
                                   std::to_string(options.reserved_memory_mb) + " MiB (" + trap.what() + ")");
    }
    return MakePlatformError(PlatformErrorKind::kGuestTrap, trap.what());
  };

  try {
    instance = std::make_unique<Instance>(module, DefaultLinker(), limits,
                                          const_cast<HostServices*>(&services));
  } catch (const Trap& trap) {
    return trap_outcome(trap);
  } catch (const Error& e) {
    return MakePlatformError(PlatformErrorKind::kInvalidWasm, e.what());
  }

  try {
    return ParseEnvelope(CallGuest(*instance, args));
  } catch (const Trap& trap) {
    return trap_outcome(trap);
  } catch (const Error& e) {
    return MakePlatformError(PlatformErrorKind::kGuestTrap, std::string("ABI violation: ") + e.what());
  } catch (const std::bad_alloc&) {
    return MakePlatformError(PlatformErrorKind::kOutOfMemory, "host allocation failed");
  }
}

}  // namespace fl::abi
