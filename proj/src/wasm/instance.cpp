#include "fl/wasm/instance.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "fl/common/error.h"

static_assert(std::endian::native == std::endian::little,
              "linear memory accesses assume a little-endian host");

namespace fl::wasm {

void Linker::Define(std::string module, std::string name, FuncType type, HostFunction fn) {
  entries_[{std::move(module), std::move(name)}] = Entry{std::move(type), std::move(fn)};
}

const Linker::Entry* Linker::Find(std::string_view module, std::string_view name) const {
  auto it = entries_.find(std::pair<std::string, std::string>(module, name));
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

inline uint32_t I32(uint64_t s) { return static_cast<uint32_t>(s); }
inline int32_t S32(uint64_t s) { return static_cast<int32_t>(static_cast<uint32_t>(s)); }
inline int64_t S64(uint64_t s) { return static_cast<int64_t>(s); }
inline float F32(uint64_t s) { return std::bit_cast<float>(static_cast<uint32_t>(s)); }
inline double F64(uint64_t s) { return std::bit_cast<double>(s); }
inline uint64_t Box(float f) { return std::bit_cast<uint32_t>(f); }
inline uint64_t Box(double d) { return std::bit_cast<uint64_t>(d); }

template <typename F>
F WasmMin(F a, F b) {
  if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<F>::quiet_NaN();
  if (a == b) return std::signbit(a) ? a : b;
  return a < b ? a : b;
}

template <typename F>
F WasmMax(F a, F b) {
  if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<F>::quiet_NaN();
  if (a == b) return std::signbit(a) ? b : a;
  return a > b ? a : b;
}

// Float -> integer truncation ranges: valid iff lo < x < hi (exclusive) after
// accounting for the representable bounds listed per case.
struct TruncRange {
  double lo;  // exclusive
  double hi;  // exclusive
};

constexpr TruncRange kI32S{-2147483649.0, 2147483648.0};
constexpr TruncRange kI32U{-1.0, 4294967296.0};
constexpr TruncRange kI64S{-9223372036854777856.0, 9223372036854775808.0};
constexpr TruncRange kI64U{-1.0, 18446744073709551616.0};

template <typename I, typename F>
I TruncOrTrap(F x, TruncRange range, TrapKind& fault) {
  if (std::isnan(x)) {
    fault = TrapKind::kInvalidConversion;
    return 0;
  }
  double d = static_cast<double>(x);
  // The i64 signed lower bound is exactly representable; include it.
  bool in_range = d < range.hi && (d > range.lo || (std::is_same_v<I, int64_t> && d == -9223372036854775808.0));
  if (!in_range) {
    fault = TrapKind::kIntegerOverflow;
    return 0;
  }
  return static_cast<I>(x);
}

template <typename I, typename F>
I TruncSat(F x) {
  if (std::isnan(x)) return 0;
  double d = static_cast<double>(x);
  if (d <= static_cast<double>(std::numeric_limits<I>::min())) return std::numeric_limits<I>::min();
  if (d >= static_cast<double>(std::numeric_limits<I>::max())) return std::numeric_limits<I>::max();
  return static_cast<I>(x);
}

}  // namespace

Instance::Instance(std::shared_ptr<const CompiledModule> module, const Linker& linker,
                   InstanceLimits limits, void* host_data)
    : module_(std::move(module)), limits_(limits), host_data_(host_data) {
  const CompiledModule& m = *module_;
  for (const auto& imp : m.imports) {
    const Linker::Entry* entry = linker.Find(imp.module, imp.name);
    if (entry == nullptr) {
      throw Error(ErrorCode::kInvalidWasm, "unknown import " + imp.module + "." + imp.name);
    }
    if (!(entry->type == m.types[imp.type_index])) {
      throw Error(ErrorCode::kInvalidWasm, "incompatible import type for " + imp.module + "." + imp.name +
                                               ": expected " + ToString(entry->type));
    }
    imports_.push_back(entry);
  }

  stack_.reset(new uint64_t[limits_.value_stack_slots]);
  sp_ = stack_.get();
  stack_end_ = sp_ + limits_.value_stack_slots;

  if (m.memory) {
    uint64_t cap = limits_.max_memory_bytes / kPageSize;
    uint64_t module_max = m.memory->max.value_or(kMaxPages);
    max_pages_ = static_cast<uint32_t>(std::min<uint64_t>(module_max, cap));
    if (m.memory->min > cap) {
      memory_limit_hit_ = true;
      throw Trap(TrapKind::kOutOfMemory, "initial memory of " + std::to_string(m.memory->min) +
                                             " pages exceeds the memory limit");
    }
    memory_size_ = uint64_t{m.memory->min} * kPageSize;
    memory_.resize(memory_size_);
  }

  for (const auto& g : m.globals) globals_.push_back(EvalConst(g.init));

  if (m.table) table_.assign(m.table->min, kNullFunction);
  for (const auto& seg : m.elements) {
    if (!seg.active) continue;
    uint64_t offset = I32(EvalConst(seg.offset));
    if (offset + seg.functions.size() > table_.size()) {
      throw Trap(TrapKind::kUndefinedElement, "out of bounds table access during initialization");
    }
    std::copy(seg.functions.begin(), seg.functions.end(), table_.begin() + static_cast<ptrdiff_t>(offset));
  }

  dropped_data_.assign(m.data.size(), false);
  for (size_t i = 0; i < m.data.size(); ++i) {
    const auto& seg = m.data[i];
    if (!seg.active) continue;
    uint64_t offset = I32(EvalConst(seg.offset));
    if (offset + seg.bytes.size() > memory_size_) {
      throw Trap(TrapKind::kMemoryOutOfBounds, "out of bounds memory access during initialization");
    }
    std::memcpy(memory_.data() + offset, seg.bytes.data(), seg.bytes.size());
    dropped_data_[i] = true;
  }

  if (m.start) Call(*m.start, {});
}

Instance::~Instance() = default;

uint64_t Instance::EvalConst(const ConstExpr& e) const {
  switch (e.kind) {
    case ConstExpr::Kind::kValue: return e.value;
    case ConstExpr::Kind::kGlobalGet: return globals_.at(e.index);
    case ConstExpr::Kind::kRefFunc: return e.index;
    case ConstExpr::Kind::kRefNull: return kNullFunction;
  }
  return 0;
}

std::optional<uint32_t> Instance::ExportedFunction(std::string_view name) const {
  const Export* e = module_->FindExport(name, ExternKind::kFunction);
  if (e == nullptr) return std::nullopt;
  return e->index;
}

bool Instance::HasExportedMemory(std::string_view name) const {
  return module_->FindExport(name, ExternKind::kMemory) != nullptr;
}

std::string_view Instance::ReadMemory(uint32_t offset, uint32_t length) const {
  if (uint64_t{offset} + length > memory_size_) ThrowTrap(TrapKind::kMemoryOutOfBounds);
  return {reinterpret_cast<const char*>(memory_.data()) + offset, length};
}

void Instance::WriteMemory(uint32_t offset, std::string_view bytes) {
  if (uint64_t{offset} + bytes.size() > memory_size_) ThrowTrap(TrapKind::kMemoryOutOfBounds);
  std::memcpy(memory_.data() + offset, bytes.data(), bytes.size());
}

void Instance::CheckInterrupt() const {
  if (limits_.interrupt != nullptr && limits_.interrupt->load(std::memory_order_relaxed)) {
    throw Trap(TrapKind::kInterrupted, "execution interrupted");
  }
  if (limits_.deadline && std::chrono::steady_clock::now() >= *limits_.deadline) {
    throw Trap(TrapKind::kInterrupted, "execution deadline exceeded");
  }
}

void Instance::ThrowTrap(TrapKind kind) const { throw Trap(kind, std::string(TrapKindName(kind))); }

int32_t Instance::GrowMemory(uint32_t delta_pages) {
  uint64_t old_pages = memory_size_ / kPageSize;
  uint64_t new_pages = old_pages + delta_pages;
  uint64_t module_max = module_->memory->max.value_or(kMaxPages);
  if (new_pages > module_max) return -1;
  if (new_pages > max_pages_) {
    memory_limit_hit_ = true;
    return -1;
  }
  memory_size_ = new_pages * kPageSize;
  memory_.resize(memory_size_);
  return static_cast<int32_t>(old_pages);
}

std::vector<uint64_t> Instance::Call(uint32_t index, std::span<const uint64_t> args) {
  const CompiledModule& m = *module_;
  if (index >= m.num_functions()) throw Error(ErrorCode::kInvalidArgument, "unknown function index");
  const FuncType& type = m.FunctionType(index);
  if (args.size() != type.params.size()) {
    throw Error(ErrorCode::kInvalidArgument, "argument count mismatch calling " + ToString(type));
  }
  if (index < m.imports.size()) {
    std::vector<uint64_t> results(type.results.size());
    imports_[index]->fn(*this, args, results);
    return results;
  }
  uint64_t* base = sp_;
  uint32_t saved_depth = depth_;
  if (base + args.size() + 16 > stack_end_) ThrowTrap(TrapKind::kCallStackExhausted);
  std::copy(args.begin(), args.end(), base);
  try {
    Execute(index - static_cast<uint32_t>(m.imports.size()), base);
  } catch (...) {
    sp_ = base;
    depth_ = saved_depth;
    throw;
  }
  std::vector<uint64_t> results(base, base + type.results.size());
  sp_ = base;
  depth_ = saved_depth;
  return results;
}

void Instance::Execute(uint32_t defined_index, uint64_t* fp) {
  const CompiledModule& m = *module_;
  const uint32_t num_imports = static_cast<uint32_t>(m.imports.size());

  struct Frame {
    const Function* fn;
    uint32_t return_pc;
    uint64_t* fp;
  };
  std::vector<Frame> frames;

  const Function* fn = &m.functions[defined_index];
  uint8_t* mem = memory_.data();
  uint64_t mem_size = memory_size_;
  uint32_t countdown = 4096;

  // Reserves the callee frame at `new_fp` and zeroes its declared locals.
  auto enter = [&](const Function* callee, uint64_t* new_fp) -> uint64_t* {
    uint64_t* locals_end = new_fp + callee->num_params + callee->num_locals;
    if (depth_ >= limits_.max_call_depth || locals_end + callee->max_height + 4 > stack_end_) {
      ThrowTrap(TrapKind::kCallStackExhausted);
    }
    ++depth_;
    std::fill(new_fp + callee->num_params, locals_end, 0);
    return locals_end;
  };

  uint64_t* sp = enter(fn, fp);
  uint64_t* opbase = sp;
  const Instr* code = fn->code.data();
  uint32_t pc = 0;

  auto tick = [&]() {
    if (--countdown == 0) {
      countdown = 4096;
      CheckInterrupt();
    }
  };

  auto branch = [&](const Instr& in) {
    uint32_t arity = static_cast<uint32_t>(in.b >> 32);
    uint64_t* dest = opbase + static_cast<uint32_t>(in.b);
    if (sp - arity != dest) std::memmove(dest, sp - arity, arity * sizeof(uint64_t));
    sp = dest + arity;
    pc = in.a;
  };

  auto call_host = [&](uint32_t import_index) {
    const Linker::Entry* entry = imports_[import_index];
    size_t nparams = entry->type.params.size();
    size_t nresults = entry->type.results.size();
    uint64_t results[8] = {};
    std::vector<uint64_t> big;
    std::span<uint64_t> out(results, nresults);
    if (nresults > 8) {
      big.resize(nresults);
      out = big;
    }
    sp_ = sp;
    entry->fn(*this, std::span<const uint64_t>(sp - nparams, nparams), out);
    sp -= nparams;
    std::copy(out.begin(), out.end(), sp);
    sp += nresults;
    mem = memory_.data();
    mem_size = memory_size_;
  };

  auto call = [&](uint32_t callee_defined) {
    const Function* callee = &m.functions[callee_defined];
    uint64_t* new_fp = sp - callee->num_params;
    frames.push_back(Frame{fn, pc, fp});
    fn = callee;
    fp = new_fp;
    sp = enter(callee, new_fp);
    opbase = sp;
    code = fn->code.data();
    pc = 0;
  };

#define FL_ADDR(width)                                            \
  uint64_t ea = uint64_t{I32(sp[-1])} + in.a;                     \
  if (ea + (width) > mem_size) ThrowTrap(TrapKind::kMemoryOutOfBounds)

#define FL_LOAD(T, expr)                     \
  {                                          \
    FL_ADDR(sizeof(T));                      \
    T v;                                     \
    std::memcpy(&v, mem + ea, sizeof(T));    \
    sp[-1] = (expr);                         \
    break;                                   \
  }

#define FL_STORE(T, expr)                                         \
  {                                                               \
    uint64_t value = sp[-1];                                      \
    --sp;                                                         \
    FL_ADDR(sizeof(T));                                           \
    T v = (expr);                                                 \
    std::memcpy(mem + ea, &v, sizeof(T));                         \
    --sp;                                                         \
    break;                                                        \
  }

#define FL_UN(expr)      \
  {                      \
    uint64_t x = sp[-1]; \
    sp[-1] = (expr);     \
    break;               \
  }

#define FL_BIN(expr)     \
  {                      \
    uint64_t y = sp[-1]; \
    uint64_t x = sp[-2]; \
    --sp;                \
    sp[-1] = (expr);     \
    break;               \
  }

  for (;;) {
    const Instr& in = code[pc++];
    switch (in.code) {
      // Control.
      case op::kUnreachable:
        ThrowTrap(TrapKind::kUnreachable);
      case op::kBr:
        tick();
        branch(in);
        break;
      case op::kBrIf:
        if (I32(*--sp) != 0) {
          tick();
          branch(in);
        }
        break;
      case op::kBrUnless:
        if (I32(*--sp) == 0) pc = in.a;
        break;
      case op::kJump:
        pc = in.a;
        break;
      case op::kBrTable: {
        uint32_t index = I32(*--sp);
        uint32_t count = static_cast<uint32_t>(in.b);
        const BranchTarget& t = fn->branch_targets[in.a + std::min(index, count - 1)];
        uint64_t* dest = opbase + t.height;
        if (sp - t.arity != dest) std::memmove(dest, sp - t.arity, t.arity * sizeof(uint64_t));
        sp = dest + t.arity;
        pc = t.pc;
        tick();
        break;
      }
      case op::kReturn: {
        uint32_t n = fn->num_results;
        if (sp - n != fp) std::memmove(fp, sp - n, n * sizeof(uint64_t));
        sp = fp + n;
        --depth_;
        if (frames.empty()) {
          sp_ = sp;
          return;
        }
        Frame f = frames.back();
        frames.pop_back();
        fn = f.fn;
        pc = f.return_pc;
        fp = f.fp;
        code = fn->code.data();
        opbase = fp + fn->num_params + fn->num_locals;
        break;
      }
      case op::kCall:
        tick();
        call(in.a);
        break;
      case op::kCallHost:
        call_host(in.a);
        break;
      case op::kCallIndirect: {
        tick();
        uint32_t index = I32(*--sp);
        if (index >= table_.size()) ThrowTrap(TrapKind::kUndefinedElement);
        uint32_t f = table_[index];
        if (f == kNullFunction) ThrowTrap(TrapKind::kUninitializedElement);
        uint32_t type_index = f < num_imports ? m.imports[f].type_index
                                              : m.functions[f - num_imports].type_index;
        if (m.type_signature[type_index] != in.a) ThrowTrap(TrapKind::kIndirectCallTypeMismatch);
        if (f < num_imports) {
          call_host(f);
        } else {
          call(f - num_imports);
        }
        break;
      }

      // Parametric and variables.
      case op::kDrop:
        --sp;
        break;
      case op::kSelect: {
        uint32_t c = I32(sp[-1]);
        sp -= 2;
        if (c == 0) sp[-1] = sp[0];
        break;
      }
      case op::kLocalGet:
        *sp++ = fp[in.a];
        break;
      case op::kLocalSet:
        fp[in.a] = *--sp;
        break;
      case op::kLocalTee:
        fp[in.a] = sp[-1];
        break;
      case op::kGlobalGet:
        *sp++ = globals_[in.a];
        break;
      case op::kGlobalSet:
        globals_[in.a] = *--sp;
        break;

      // Memory.
      case 0x28: FL_LOAD(uint32_t, v)
      case 0x29: FL_LOAD(uint64_t, v)
      case 0x2a: FL_LOAD(uint32_t, v)
      case 0x2b: FL_LOAD(uint64_t, v)
      case 0x2c: FL_LOAD(int8_t, static_cast<uint32_t>(static_cast<int32_t>(v)))
      case 0x2d: FL_LOAD(uint8_t, v)
      case 0x2e: FL_LOAD(int16_t, static_cast<uint32_t>(static_cast<int32_t>(v)))
      case 0x2f: FL_LOAD(uint16_t, v)
      case 0x30: FL_LOAD(int8_t, static_cast<uint64_t>(static_cast<int64_t>(v)))
      case 0x31: FL_LOAD(uint8_t, v)
      case 0x32: FL_LOAD(int16_t, static_cast<uint64_t>(static_cast<int64_t>(v)))
      case 0x33: FL_LOAD(uint16_t, v)
      case 0x34: FL_LOAD(int32_t, static_cast<uint64_t>(static_cast<int64_t>(v)))
      case 0x35: FL_LOAD(uint32_t, v)
      case 0x36: FL_STORE(uint32_t, static_cast<uint32_t>(value))
      case 0x37: FL_STORE(uint64_t, value)
      case 0x38: FL_STORE(uint32_t, static_cast<uint32_t>(value))
      case 0x39: FL_STORE(uint64_t, value)
      case 0x3a: FL_STORE(uint8_t, static_cast<uint8_t>(value))
      case 0x3b: FL_STORE(uint16_t, static_cast<uint16_t>(value))
      case 0x3c: FL_STORE(uint8_t, static_cast<uint8_t>(value))
      case 0x3d: FL_STORE(uint16_t, static_cast<uint16_t>(value))
      case 0x3e: FL_STORE(uint32_t, static_cast<uint32_t>(value))
      case op::kMemorySize:
        *sp++ = static_cast<uint32_t>(mem_size / kPageSize);
        break;
      case op::kMemoryGrow: {
        int32_t old = GrowMemory(I32(sp[-1]));
        sp[-1] = static_cast<uint32_t>(old);
        mem = memory_.data();
        mem_size = memory_size_;
        break;
      }

      // Constants.
      case 0x41:
      case 0x42:
      case 0x43:
      case 0x44:
        *sp++ = in.b;
        break;

      // i32 comparisons.
      case 0x45: FL_UN(I32(x) == 0)
      case 0x46: FL_BIN(I32(x) == I32(y))
      case 0x47: FL_BIN(I32(x) != I32(y))
      case 0x48: FL_BIN(S32(x) < S32(y))
      case 0x49: FL_BIN(I32(x) < I32(y))
      case 0x4a: FL_BIN(S32(x) > S32(y))
      case 0x4b: FL_BIN(I32(x) > I32(y))
      case 0x4c: FL_BIN(S32(x) <= S32(y))
      case 0x4d: FL_BIN(I32(x) <= I32(y))
      case 0x4e: FL_BIN(S32(x) >= S32(y))
      case 0x4f: FL_BIN(I32(x) >= I32(y))

      // i64 comparisons.
      case 0x50: FL_UN(x == 0)
      case 0x51: FL_BIN(x == y)
      case 0x52: FL_BIN(x != y)
      case 0x53: FL_BIN(S64(x) < S64(y))
      case 0x54: FL_BIN(x < y)
      case 0x55: FL_BIN(S64(x) > S64(y))
      case 0x56: FL_BIN(x > y)
      case 0x57: FL_BIN(S64(x) <= S64(y))
      case 0x58: FL_BIN(x <= y)
      case 0x59: FL_BIN(S64(x) >= S64(y))
      case 0x5a: FL_BIN(x >= y)

      // Float comparisons.
      case 0x5b: FL_BIN(F32(x) == F32(y))
      case 0x5c: FL_BIN(F32(x) != F32(y))
      case 0x5d: FL_BIN(F32(x) < F32(y))
      case 0x5e: FL_BIN(F32(x) > F32(y))
      case 0x5f: FL_BIN(F32(x) <= F32(y))
      case 0x60: FL_BIN(F32(x) >= F32(y))
      case 0x61: FL_BIN(F64(x) == F64(y))
      case 0x62: FL_BIN(F64(x) != F64(y))
      case 0x63: FL_BIN(F64(x) < F64(y))
      case 0x64: FL_BIN(F64(x) > F64(y))
      case 0x65: FL_BIN(F64(x) <= F64(y))
      case 0x66: FL_BIN(F64(x) >= F64(y))

      // i32 arithmetic.
      case 0x67: FL_UN(static_cast<uint32_t>(std::countl_zero(I32(x))))
      case 0x68: FL_UN(static_cast<uint32_t>(std::countr_zero(I32(x))))
      case 0x69: FL_UN(static_cast<uint32_t>(std::popcount(I32(x))))
      case 0x6a: FL_BIN(static_cast<uint32_t>(I32(x) + I32(y)))
      case 0x6b: FL_BIN(static_cast<uint32_t>(I32(x) - I32(y)))
      case 0x6c: FL_BIN(static_cast<uint32_t>(I32(x) * I32(y)))
      case 0x6d: {
        int32_t b = S32(sp[-1]);
        int32_t a = S32(sp[-2]);
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        if (a == std::numeric_limits<int32_t>::min() && b == -1) ThrowTrap(TrapKind::kIntegerOverflow);
        --sp;
        sp[-1] = static_cast<uint32_t>(a / b);
        break;
      }
      case 0x6e: {
        uint32_t b = I32(sp[-1]);
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        --sp;
        sp[-1] = I32(sp[-1]) / b;
        break;
      }
      case 0x6f: {
        int32_t b = S32(sp[-1]);
        int32_t a = S32(sp[-2]);
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        --sp;
        sp[-1] = (b == -1) ? 0u : static_cast<uint32_t>(a % b);
        break;
      }
      case 0x70: {
        uint32_t b = I32(sp[-1]);
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        --sp;
        sp[-1] = I32(sp[-1]) % b;
        break;
      }
      case 0x71: FL_BIN(I32(x) & I32(y))
      case 0x72: FL_BIN(I32(x) | I32(y))
      case 0x73: FL_BIN(I32(x) ^ I32(y))
      case 0x74: FL_BIN(static_cast<uint32_t>(I32(x) << (I32(y) & 31)))
      case 0x75: FL_BIN(static_cast<uint32_t>(S32(x) >> (I32(y) & 31)))
      case 0x76: FL_BIN(I32(x) >> (I32(y) & 31))
      case 0x77: FL_BIN(std::rotl(I32(x), static_cast<int>(I32(y) & 31)))
      case 0x78: FL_BIN(std::rotr(I32(x), static_cast<int>(I32(y) & 31)))

      // i64 arithmetic.
      case 0x79: FL_UN(static_cast<uint64_t>(std::countl_zero(x)))
      case 0x7a: FL_UN(static_cast<uint64_t>(std::countr_zero(x)))
      case 0x7b: FL_UN(static_cast<uint64_t>(std::popcount(x)))
      case 0x7c: FL_BIN(x + y)
      case 0x7d: FL_BIN(x - y)
      case 0x7e: FL_BIN(x * y)
      case 0x7f: {
        int64_t b = S64(sp[-1]);
        int64_t a = S64(sp[-2]);
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        if (a == std::numeric_limits<int64_t>::min() && b == -1) ThrowTrap(TrapKind::kIntegerOverflow);
        --sp;
        sp[-1] = static_cast<uint64_t>(a / b);
        break;
      }
      case 0x80: {
        uint64_t b = sp[-1];
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        --sp;
        sp[-1] = sp[-1] / b;
        break;
      }
      case 0x81: {
        int64_t b = S64(sp[-1]);
        int64_t a = S64(sp[-2]);
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        --sp;
        sp[-1] = (b == -1) ? 0u : static_cast<uint64_t>(a % b);
        break;
      }
      case 0x82: {
        uint64_t b = sp[-1];
        if (b == 0) ThrowTrap(TrapKind::kIntegerDivideByZero);
        --sp;
        sp[-1] = sp[-1] % b;
        break;
      }
      case 0x83: FL_BIN(x & y)
      case 0x84: FL_BIN(x | y)
      case 0x85: FL_BIN(x ^ y)
      case 0x86: FL_BIN(x << (y & 63))
      case 0x87: FL_BIN(static_cast<uint64_t>(S64(x) >> (y & 63)))
      case 0x88: FL_BIN(x >> (y & 63))
      case 0x89: FL_BIN(std::rotl(x, static_cast<int>(y & 63)))
      case 0x8a: FL_BIN(std::rotr(x, static_cast<int>(y & 63)))

      // f32 arithmetic. abs/neg/copysign operate on bits to keep NaN payloads.
      case 0x8b: FL_UN(I32(x) & 0x7fffffffu)
      case 0x8c: FL_UN(I32(x) ^ 0x80000000u)
      case 0x8d: FL_UN(Box(std::ceil(F32(x))))
      case 0x8e: FL_UN(Box(std::floor(F32(x))))
      case 0x8f: FL_UN(Box(std::trunc(F32(x))))
      case 0x90: FL_UN(Box(std::nearbyint(F32(x))))
      case 0x91: FL_UN(Box(std::sqrt(F32(x))))
      case 0x92: FL_BIN(Box(F32(x) + F32(y)))
      case 0x93: FL_BIN(Box(F32(x) - F32(y)))
      case 0x94: FL_BIN(Box(F32(x) * F32(y)))
      case 0x95: FL_BIN(Box(F32(x) / F32(y)))
      case 0x96: FL_BIN(Box(WasmMin(F32(x), F32(y))))
      case 0x97: FL_BIN(Box(WasmMax(F32(x), F32(y))))
      case 0x98: FL_BIN((I32(x) & 0x7fffffffu) | (I32(y) & 0x80000000u))

      // f64 arithmetic.
      case 0x99: FL_UN(x & 0x7fffffffffffffffull)
      case 0x9a: FL_UN(x ^ 0x8000000000000000ull)
      case 0x9b: FL_UN(Box(std::ceil(F64(x))))
      case 0x9c: FL_UN(Box(std::floor(F64(x))))
      case 0x9d: FL_UN(Box(std::trunc(F64(x))))
      case 0x9e: FL_UN(Box(std::nearbyint(F64(x))))
      case 0x9f: FL_UN(Box(std::sqrt(F64(x))))
      case 0xa0: FL_BIN(Box(F64(x) + F64(y)))
      case 0xa1: FL_BIN(Box(F64(x) - F64(y)))
      case 0xa2: FL_BIN(Box(F64(x) * F64(y)))
      case 0xa3: FL_BIN(Box(F64(x) / F64(y)))
      case 0xa4: FL_BIN(Box(WasmMin(F64(x), F64(y))))
      case 0xa5: FL_BIN(Box(WasmMax(F64(x), F64(y))))
      case 0xa6: FL_BIN((x & 0x7fffffffffffffffull) | (y & 0x8000000000000000ull))

      // Conversions.
      case 0xa7: FL_UN(I32(x))
      case 0xa8:
      case 0xa9:
      case 0xaa:
      case 0xab:
      case 0xae:
      case 0xaf:
      case 0xb0:
      case 0xb1: {
        TrapKind fault = TrapKind::kUnreachable;
        bool failed = false;
        uint64_t x = sp[-1];
        uint64_t r = 0;
        switch (in.code) {
          case 0xa8: r = static_cast<uint32_t>(TruncOrTrap<int32_t>(F32(x), kI32S, fault)); break;
          case 0xa9: r = TruncOrTrap<uint32_t>(F32(x), kI32U, fault); break;
          case 0xaa: r = static_cast<uint32_t>(TruncOrTrap<int32_t>(F64(x), kI32S, fault)); break;
          case 0xab: r = TruncOrTrap<uint32_t>(F64(x), kI32U, fault); break;
          case 0xae: r = static_cast<uint64_t>(TruncOrTrap<int64_t>(F32(x), kI64S, fault)); break;
          case 0xaf: r = TruncOrTrap<uint64_t>(F32(x), kI64U, fault); break;
          case 0xb0: r = static_cast<uint64_t>(TruncOrTrap<int64_t>(F64(x), kI64S, fault)); break;
          case 0xb1: r = TruncOrTrap<uint64_t>(F64(x), kI64U, fault); break;
        }
        failed = fault != TrapKind::kUnreachable;
        if (failed) ThrowTrap(fault);
        sp[-1] = r;
        break;
      }
      case 0xac: FL_UN(static_cast<uint64_t>(static_cast<int64_t>(S32(x))))
      case 0xad: FL_UN(uint64_t{I32(x)})
      case 0xb2: FL_UN(Box(static_cast<float>(S32(x))))
      case 0xb3: FL_UN(Box(static_cast<float>(I32(x))))
      case 0xb4: FL_UN(Box(static_cast<float>(S64(x))))
      case 0xb5: FL_UN(Box(static_cast<float>(x)))
      case 0xb6: FL_UN(Box(static_cast<float>(F64(x))))
      case 0xb7: FL_UN(Box(static_cast<double>(S32(x))))
      case 0xb8: FL_UN(Box(static_cast<double>(I32(x))))
      case 0xb9: FL_UN(Box(static_cast<double>(S64(x))))
      case 0xba: FL_UN(Box(static_cast<double>(x)))
      case 0xbb: FL_UN(Box(static_cast<double>(F32(x))))
      case 0xbc: FL_UN(I32(x))
      case 0xbd: FL_UN(x)
      case 0xbe: FL_UN(I32(x))
      case 0xbf: FL_UN(x)
      case 0xc0: FL_UN(static_cast<uint32_t>(static_cast<int32_t>(static_cast<int8_t>(x))))
      case 0xc1: FL_UN(static_cast<uint32_t>(static_cast<int32_t>(static_cast<int16_t>(x))))
      case 0xc2: FL_UN(static_cast<uint64_t>(static_cast<int64_t>(static_cast<int8_t>(x))))
      case 0xc3: FL_UN(static_cast<uint64_t>(static_cast<int64_t>(static_cast<int16_t>(x))))
      case 0xc4: FL_UN(static_cast<uint64_t>(static_cast<int64_t>(static_cast<int32_t>(x))))

      // Saturating truncation.
      case op::kPrefixFC + 0: FL_UN(static_cast<uint32_t>(TruncSat<int32_t>(F32(x))))
      case op::kPrefixFC + 1: FL_UN(TruncSat<uint32_t>(F32(x)))
      case op::kPrefixFC + 2: FL_UN(static_cast<uint32_t>(TruncSat<int32_t>(F64(x))))
      case op::kPrefixFC + 3: FL_UN(TruncSat<uint32_t>(F64(x)))
      case op::kPrefixFC + 4: FL_UN(static_cast<uint64_t>(TruncSat<int64_t>(F32(x))))
      case op::kPrefixFC + 5: FL_UN(TruncSat<uint64_t>(F32(x)))
      case op::kPrefixFC + 6: FL_UN(static_cast<uint64_t>(TruncSat<int64_t>(F64(x))))
      case op::kPrefixFC + 7: FL_UN(TruncSat<uint64_t>(F64(x)))

      // Bulk memory.
      case op::kPrefixFC + 8: {  // memory.init
        uint64_t n = I32(sp[-1]);
        uint64_t src = I32(sp[-2]);
        uint64_t dst = I32(sp[-3]);
        sp -= 3;
        const std::string& seg = m.data[in.a].bytes;
        uint64_t seg_size = dropped_data_[in.a] ? 0 : seg.size();
        if (src + n > seg_size || dst + n > mem_size) ThrowTrap(TrapKind::kMemoryOutOfBounds);
        if (n) std::memcpy(mem + dst, seg.data() + src, n);
        break;
      }
      case op::kPrefixFC + 9:
        dropped_data_[in.a] = true;
        break;
      case op::kPrefixFC + 10: {  // memory.copy
        uint64_t n = I32(sp[-1]);
        uint64_t src = I32(sp[-2]);
        uint64_t dst = I32(sp[-3]);
        sp -= 3;
        if (src + n > mem_size || dst + n > mem_size) ThrowTrap(TrapKind::kMemoryOutOfBounds);
        if (n) std::memmove(mem + dst, mem + src, n);
        break;
      }
      case op::kPrefixFC + 11: {  // memory.fill
        uint64_t n = I32(sp[-1]);
        uint8_t value = static_cast<uint8_t>(sp[-2]);
        uint64_t dst = I32(sp[-3]);
        sp -= 3;
        if (dst + n > mem_size) ThrowTrap(TrapKind::kMemoryOutOfBounds);
        if (n) std::memset(mem + dst, value, n);
        break;
      }

      default:
        throw Error(ErrorCode::kInvalidWasm, "interpreter reached unknown instruction " + std::to_string(in.code));
    }
  }

#undef FL_ADDR
#undef FL_LOAD
#undef FL_STORE
#undef FL_UN
#undef FL_BIN
}

}  // namespace fl::wasm
