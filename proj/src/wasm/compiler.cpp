#include <algorithm>
#include <cstring>
#include <set>

#include "fl/common/error.h"
#include "fl/wasm/module.h"

namespace fl::wasm {

std::string_view ValTypeName(ValType t) {
  switch (t) {
    case ValType::kI32: return "i32";
    case ValType::kI64: return "i64";
    case ValType::kF32: return "f32";
    case ValType::kF64: return "f64";
    case ValType::kFuncRef: return "funcref";
    case ValType::kExternRef: return "externref";
  }
  return "?";
}

std::string ToString(const FuncType& t) {
  std::string out = "(";
  for (size_t i = 0; i < t.params.size(); ++i) {
    if (i) out += ", ";
    out += ValTypeName(t.params[i]);
  }
  out += ") -> (";
  for (size_t i = 0; i < t.results.size(); ++i) {
    if (i) out += ", ";
    out += ValTypeName(t.results[i]);
  }
  return out + ")";
}

std::string_view TrapKindName(TrapKind kind) {
  switch (kind) {
    case TrapKind::kUnreachable: return "unreachable";
    case TrapKind::kMemoryOutOfBounds: return "out of bounds memory access";
    case TrapKind::kIntegerDivideByZero: return "integer divide by zero";
    case TrapKind::kIntegerOverflow: return "integer overflow";
    case TrapKind::kInvalidConversion: return "invalid conversion to integer";
    case TrapKind::kIndirectCallTypeMismatch: return "indirect call type mismatch";
    case TrapKind::kUndefinedElement: return "undefined element";
    case TrapKind::kUninitializedElement: return "uninitialized element";
    case TrapKind::kCallStackExhausted: return "call stack exhausted";
    case TrapKind::kInterrupted: return "interrupted";
    case TrapKind::kOutOfMemory: return "out of memory";
    case TrapKind::kHostError: return "host error";
    case TrapKind::kExit: return "exit";
  }
  return "trap";
}

const FuncType& CompiledModule::FunctionType(uint32_t func_index) const {
  if (func_index < imports.size()) return types[imports[func_index].type_index];
  return types[functions[func_index - imports.size()].type_index];
}

const Export* CompiledModule::FindExport(std::string_view name, ExternKind kind) const {
  for (const auto& e : exports) {
    if (e.kind == kind && e.name == name) return &e;
  }
  return nullptr;
}

size_t CompiledModule::ArtifactSize() const {
  size_t size = sizeof(CompiledModule);
  for (const auto& t : types) size += sizeof(FuncType) + t.params.size() + t.results.size();
  size += type_signature.size() * sizeof(uint32_t);
  for (const auto& i : imports) size += sizeof(FunctionImport) + i.module.size() + i.name.size();
  for (const auto& f : functions) {
    size += sizeof(Function) + f.code.size() * sizeof(Instr) +
            f.branch_targets.size() * sizeof(BranchTarget);
  }
  size += globals.size() * sizeof(Global);
  for (const auto& e : exports) size += sizeof(Export) + e.name.size();
  for (const auto& e : elements) size += sizeof(ElementSegment) + e.functions.size() * sizeof(uint32_t);
  for (const auto& d : data) size += sizeof(DataSegment) + d.bytes.size();
  return size;
}

namespace {

[[noreturn]] void Fail(const std::string& message) {
  throw Error(ErrorCode::kInvalidWasm, "invalid wasm: " + message);
}

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  bool done() const { return pos_ >= in_.size(); }
  size_t pos() const { return pos_; }
  size_t remaining() const { return in_.size() - pos_; }

  uint8_t Byte() {
    if (done()) Fail("unexpected end of section");
    return static_cast<uint8_t>(in_[pos_++]);
  }

  std::string_view Bytes(size_t n) {
    if (n > remaining()) Fail("unexpected end of section");
    auto out = in_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  uint32_t U32() {
    uint32_t result = 0;
    for (int shift = 0;; shift += 7) {
      uint8_t b = Byte();
      if (shift == 28 && (b & 0x70) != 0) Fail("integer representation too long");
      result |= static_cast<uint32_t>(b & 0x7f) << shift;
      if ((b & 0x80) == 0) return result;
      if (shift == 28) Fail("integer representation too long");
    }
  }

  int64_t Signed(int bits) {
    uint64_t result = 0;
    int shift = 0;
    uint8_t b = 0;
    const int max_bytes = (bits + 6) / 7;
    for (int i = 0;; ++i) {
      b = Byte();
      result |= static_cast<uint64_t>(b & 0x7f) << shift;
      shift += 7;
      if ((b & 0x80) == 0) break;
      if (i + 1 == max_bytes) Fail("integer representation too long");
    }
    if (shift > bits) {
      // Bits of the final byte beyond the value width must repeat its sign bit.
      int used = bits - (shift - 7);
      int high = (b & 0x7f) >> (used - 1);
      if (high != 0 && high != (0x7f >> (used - 1))) Fail("integer too large");
    }
    if (shift < 64 && (b & 0x40)) result |= ~uint64_t{0} << shift;
    return static_cast<int64_t>(result);
  }

  int32_t S32() { return static_cast<int32_t>(Signed(32)); }
  int64_t S64() { return Signed(64); }

  uint32_t Fixed32() {
    auto b = Bytes(4);
    uint32_t v;
    std::memcpy(&v, b.data(), 4);
    return v;
  }

  uint64_t Fixed64() {
    auto b = Bytes(8);
    uint64_t v;
    std::memcpy(&v, b.data(), 8);
    return v;
  }

  // Element count of a vector whose elements take at least one byte each.
  uint32_t Count() {
    uint32_t n = U32();
    if (n > remaining()) Fail("vector length exceeds section size");
    return n;
  }

  std::string Name() {
    uint32_t len = U32();
    auto bytes = Bytes(len);
    if (!IsUtf8(bytes)) Fail("malformed UTF-8 name");
    return std::string(bytes);
  }

 private:
  static bool IsUtf8(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
      auto c = static_cast<uint8_t>(s[i]);
      size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
      if (n == 0 || i + n > s.size()) return false;
      for (size_t k = 1; k < n; ++k) {
        if ((static_cast<uint8_t>(s[i + k]) & 0xc0) != 0x80) return false;
      }
      i += n;
    }
    return true;
  }

  std::string_view in_;
  size_t pos_ = 0;
};

bool IsNumType(ValType t) {
  return t == ValType::kI32 || t == ValType::kI64 || t == ValType::kF32 || t == ValType::kF64;
}

ValType ReadValType(Reader& r) {
  uint8_t b = r.Byte();
  switch (b) {
    case 0x7f: case 0x7e: case 0x7d: case 0x7c: case 0x70: case 0x6f:
      return static_cast<ValType>(b);
    default:
      Fail("unknown value type 0x" + std::to_string(b));
  }
}

Limits ReadLimits(Reader& r, uint32_t bound, const char* what) {
  uint8_t flag = r.Byte();
  if (flag > 1) Fail(std::string("bad limits flag for ") + what);
  Limits l;
  l.min = r.U32();
  if (flag == 1) l.max = r.U32();
  if (l.min > bound || (l.max && *l.max > bound)) Fail(std::string(what) + " size out of range");
  if (l.max && *l.max < l.min) Fail(std::string(what) + " max below min");
  return l;
}

// Operand type while validating; kUnknown stands for the polymorphic stack.
enum class Vt : uint8_t {
  kUnknown = 0,
  kI32 = 0x7f,
  kI64 = 0x7e,
  kF32 = 0x7d,
  kF64 = 0x7c,
  kFuncRef = 0x70,
  kExternRef = 0x6f,
};

Vt V(ValType t) { return static_cast<Vt>(t); }

struct NumericSig {
  Vt in0 = Vt::kUnknown;
  Vt in1 = Vt::kUnknown;  // kUnknown means unary
  Vt out = Vt::kUnknown;
};

// Signatures for numeric opcodes 0x45..0xc4.
NumericSig NumericSignature(uint8_t opc) {
  constexpr Vt i32 = Vt::kI32, i64 = Vt::kI64, f32 = Vt::kF32, f64 = Vt::kF64, none = Vt::kUnknown;
  if (opc == 0x45) return {i32, none, i32};
  if (opc >= 0x46 && opc <= 0x4f) return {i32, i32, i32};
  if (opc == 0x50) return {i64, none, i32};
  if (opc >= 0x51 && opc <= 0x5a) return {i64, i64, i32};
  if (opc >= 0x5b && opc <= 0x60) return {f32, f32, i32};
  if (opc >= 0x61 && opc <= 0x66) return {f64, f64, i32};
  if (opc >= 0x67 && opc <= 0x69) return {i32, none, i32};
  if (opc >= 0x6a && opc <= 0x78) return {i32, i32, i32};
  if (opc >= 0x79 && opc <= 0x7b) return {i64, none, i64};
  if (opc >= 0x7c && opc <= 0x8a) return {i64, i64, i64};
  if (opc >= 0x8b && opc <= 0x91) return {f32, none, f32};
  if (opc >= 0x92 && opc <= 0x98) return {f32, f32, f32};
  if (opc >= 0x99 && opc <= 0x9f) return {f64, none, f64};
  if (opc >= 0xa0 && opc <= 0xa6) return {f64, f64, f64};
  switch (opc) {
    case 0xa7: return {i64, none, i32};
    case 0xa8: case 0xa9: return {f32, none, i32};
    case 0xaa: case 0xab: return {f64, none, i32};
    case 0xac: case 0xad: return {i32, none, i64};
    case 0xae: case 0xaf: return {f32, none, i64};
    case 0xb0: case 0xb1: return {f64, none, i64};
    case 0xb2: case 0xb3: return {i32, none, f32};
    case 0xb4: case 0xb5: return {i64, none, f32};
    case 0xb6: return {f64, none, f32};
    case 0xb7: case 0xb8: return {i32, none, f64};
    case 0xb9: case 0xba: return {i64, none, f64};
    case 0xbb: return {f32, none, f64};
    case 0xbc: return {f32, none, i32};
    case 0xbd: return {f64, none, i64};
    case 0xbe: return {i32, none, f32};
    case 0xbf: return {i64, none, f64};
    case 0xc0: case 0xc1: return {i32, none, i32};
    case 0xc2: case 0xc3: case 0xc4: return {i64, none, i64};
    default: Fail("unknown opcode");
  }
}

struct MemAccess {
  Vt type;
  uint32_t natural_align;  // log2
  bool is_store;
};

MemAccess MemorySignature(uint8_t opc) {
  switch (opc) {
    case 0x28: return {Vt::kI32, 2, false};
    case 0x29: return {Vt::kI64, 3, false};
    case 0x2a: return {Vt::kF32, 2, false};
    case 0x2b: return {Vt::kF64, 3, false};
    case 0x2c: case 0x2d: return {Vt::kI32, 0, false};
    case 0x2e: case 0x2f: return {Vt::kI32, 1, false};
    case 0x30: case 0x31: return {Vt::kI64, 0, false};
    case 0x32: case 0x33: return {Vt::kI64, 1, false};
    case 0x34: case 0x35: return {Vt::kI64, 2, false};
    case 0x36: return {Vt::kI32, 2, true};
    case 0x37: return {Vt::kI64, 3, true};
    case 0x38: return {Vt::kF32, 2, true};
    case 0x39: return {Vt::kF64, 3, true};
    case 0x3a: return {Vt::kI32, 0, true};
    case 0x3b: return {Vt::kI32, 1, true};
    case 0x3c: return {Vt::kI64, 0, true};
    case 0x3d: return {Vt::kI64, 1, true};
    case 0x3e: return {Vt::kI64, 2, true};
    default: Fail("unknown memory opcode");
  }
}

enum class FrameKind { kFunction, kBlock, kLoop, kIf, kElse };

struct ControlFrame {
  FrameKind kind;
  std::vector<Vt> params;
  std::vector<Vt> results;
  size_t height;
  bool unreachable = false;
  uint32_t loop_pc = 0;
  uint32_t if_branch = UINT32_MAX;
  std::vector<uint32_t> patches;        // instructions whose `a` becomes the end pc
  std::vector<uint32_t> table_patches;  // branch targets whose pc becomes the end pc

  const std::vector<Vt>& label_types() const { return kind == FrameKind::kLoop ? params : results; }
};

struct ModuleContext {
  const CompiledModule& module;
  std::optional<uint32_t> data_count;
};

class FunctionCompiler {
 public:
  FunctionCompiler(const ModuleContext& ctx, Function& fn, std::vector<Vt> locals, std::string_view body)
      : ctx_(ctx), m_(ctx.module), fn_(fn), locals_(std::move(locals)), r_(body) {}

  void Compile() {
    const FuncType& type = m_.types[fn_.type_index];
    ControlFrame top{FrameKind::kFunction, {}, {}, 0};
    for (auto t : type.results) top.results.push_back(V(t));
    ctrls_.push_back(std::move(top));
    while (!ctrls_.empty()) {
      if (r_.done()) Fail("function body missing end");
      Step(r_.Byte());
    }
    if (!r_.done()) Fail("bytes after function end");
  }

 private:
  void Emit(uint16_t code, uint32_t a = 0, uint64_t b = 0) {
    if (!ctrls_.back().unreachable) fn_.code.push_back(Instr{code, a, b});
  }
  uint32_t pc() const { return static_cast<uint32_t>(fn_.code.size()); }

  void Push(Vt t) {
    vals_.push_back(t);
    fn_.max_height = std::max<uint32_t>(fn_.max_height, static_cast<uint32_t>(vals_.size()));
  }

  Vt Pop() {
    auto& frame = ctrls_.back();
    if (vals_.size() == frame.height) {
      if (frame.unreachable) return Vt::kUnknown;
      Fail("type mismatch: operand stack underflow");
    }
    Vt t = vals_.back();
    vals_.pop_back();
    return t;
  }

  Vt Pop(Vt expect) {
    Vt actual = Pop();
    if (actual != expect && actual != Vt::kUnknown && expect != Vt::kUnknown) {
      Fail("type mismatch: expected " + std::string(ValTypeName(static_cast<ValType>(expect))) +
           ", found " + std::string(ValTypeName(static_cast<ValType>(actual))));
    }
    return actual == Vt::kUnknown ? expect : actual;
  }

  void PopAll(const std::vector<Vt>& types) {
    for (auto it = types.rbegin(); it != types.rend(); ++it) Pop(*it);
  }
  void PushAll(const std::vector<Vt>& types) {
    for (auto t : types) Push(t);
  }

  void PushCtrl(FrameKind kind, std::vector<Vt> params, std::vector<Vt> results) {
    ControlFrame frame{kind, params, std::move(results), vals_.size()};
    frame.loop_pc = pc();
    ctrls_.push_back(std::move(frame));
    PushAll(params);
  }

  ControlFrame PopCtrl() {
    if (ctrls_.empty()) Fail("control stack underflow");
    PopAll(ctrls_.back().results);
    if (vals_.size() != ctrls_.back().height) Fail("type mismatch: values remain at block end");
    ControlFrame frame = std::move(ctrls_.back());
    ctrls_.pop_back();
    return frame;
  }

  void MarkUnreachable() {
    vals_.resize(ctrls_.back().height);
    ctrls_.back().unreachable = true;
  }

  ControlFrame& Label(uint32_t depth) {
    if (depth >= ctrls_.size()) Fail("unknown label");
    return ctrls_[ctrls_.size() - 1 - depth];
  }

  void ReadBlockType(std::vector<Vt>& params, std::vector<Vt>& results) {
    // Single-byte forms first; otherwise a non-negative s33 type index.
    size_t save = r_.pos();
    uint8_t b = r_.Byte();
    if (b == 0x40) return;
    if (b == 0x7f || b == 0x7e || b == 0x7d || b == 0x7c || b == 0x70 || b == 0x6f) {
      results.push_back(static_cast<Vt>(b));
      return;
    }
    (void)save;
    // Re-decode as signed LEB starting at `b`.
    int64_t index = b & 0x7f;
    int shift = 7;
    uint8_t cur = b;
    while (cur & 0x80) {
      if (shift > 28) Fail("block type index too long");
      cur = r_.Byte();
      index |= static_cast<int64_t>(cur & 0x7f) << shift;
      shift += 7;
    }
    if (cur & 0x40) Fail("negative block type");
    if (index < 0 || static_cast<uint64_t>(index) >= m_.types.size()) Fail("unknown block type");
    const auto& t = m_.types[static_cast<size_t>(index)];
    for (auto p : t.params) params.push_back(V(p));
    for (auto p : t.results) results.push_back(V(p));
  }

  void EmitBranch(uint16_t code, uint32_t depth) {
    ControlFrame& target = Label(depth);
    uint64_t imm = (static_cast<uint64_t>(target.label_types().size()) << 32) | target.height;
    if (ctrls_.back().unreachable) return;
    if (target.kind == FrameKind::kLoop) {
      fn_.code.push_back(Instr{code, target.loop_pc, imm});
    } else {
      target.patches.push_back(pc());
      fn_.code.push_back(Instr{code, 0, imm});
    }
  }

  void PatchEnd(ControlFrame& frame, uint32_t end_pc) {
    for (uint32_t at : frame.patches) fn_.code[at].a = end_pc;
    for (uint32_t at : frame.table_patches) fn_.branch_targets[at].pc = end_pc;
  }

  uint32_t ReadMemArg(uint32_t natural_align) {
    uint32_t align = r_.U32();
    uint32_t offset = r_.U32();
    if (align > natural_align) Fail("alignment must not be larger than natural");
    if (!m_.memory) Fail("unknown memory 0");
    return offset;
  }

  void RequireMemory() {
    if (!m_.memory) Fail("unknown memory 0");
  }

  void Step(uint8_t opc) {
    switch (opc) {
      case 0x00:  // unreachable
        Emit(op::kUnreachable);
        MarkUnreachable();
        return;
      case 0x01:  // nop
        return;
      case 0x02:
      case 0x03:
      case 0x04: {
        std::vector<Vt> params, results;
        ReadBlockType(params, results);
        if (opc == 0x04) Pop(Vt::kI32);
        PopAll(params);
        bool reachable = !ctrls_.back().unreachable;
        FrameKind kind = opc == 0x02 ? FrameKind::kBlock : opc == 0x03 ? FrameKind::kLoop : FrameKind::kIf;
        uint32_t branch = UINT32_MAX;
        if (kind == FrameKind::kIf && reachable) {
          branch = pc();
          fn_.code.push_back(Instr{op::kBrUnless, 0, 0});
        }
        PushCtrl(kind, std::move(params), std::move(results));
        ctrls_.back().if_branch = branch;
        return;
      }
      case 0x05: {  // else
        if (ctrls_.back().kind != FrameKind::kIf) Fail("else without matching if");
        bool reachable = !ctrls_.back().unreachable;
        ControlFrame frame = PopCtrl();
        if (reachable) {
          frame.patches.push_back(pc());
          fn_.code.push_back(Instr{op::kJump, 0, 0});
        }
        if (frame.if_branch != UINT32_MAX) fn_.code[frame.if_branch].a = pc();
        frame.if_branch = UINT32_MAX;
        frame.kind = FrameKind::kElse;
        frame.unreachable = false;
        auto params = frame.params;
        ctrls_.push_back(std::move(frame));
        PushAll(params);
        return;
      }
      case 0x0b: {  // end
        ControlFrame frame = PopCtrl();
        if (frame.kind == FrameKind::kIf) {
          if (frame.params != frame.results) Fail("type mismatch: if without else must not change types");
          if (frame.if_branch != UINT32_MAX) fn_.code[frame.if_branch].a = pc();
        }
        PatchEnd(frame, pc());
        if (frame.kind == FrameKind::kFunction) {
          fn_.code.push_back(Instr{op::kReturn, 0, 0});
          return;
        }
        PushAll(frame.results);
        return;
      }
      case 0x0c: {  // br
        uint32_t depth = r_.U32();
        PopAll(Label(depth).label_types());
        EmitBranch(op::kBr, depth);
        MarkUnreachable();
        return;
      }
      case 0x0d: {  // br_if
        uint32_t depth = r_.U32();
        Pop(Vt::kI32);
        auto types = Label(depth).label_types();
        PopAll(types);
        PushAll(types);
        EmitBranch(op::kBrIf, depth);
        return;
      }
      case 0x0e: {  // br_table
        uint32_t n = r_.Count();
        std::vector<uint32_t> depths(n + 1);
        for (uint32_t i = 0; i < n; ++i) depths[i] = r_.U32();
        depths[n] = r_.U32();
        Pop(Vt::kI32);
        size_t arity = Label(depths[n]).label_types().size();
        for (uint32_t d : depths) {
          const auto& types = Label(d).label_types();
          if (types.size() != arity) Fail("type mismatch: br_table arity");
          // Check each target against the current operand stack.
          std::vector<Vt> popped;
          for (auto it = types.rbegin(); it != types.rend(); ++it) popped.push_back(Pop(*it));
          for (auto it = popped.rbegin(); it != popped.rend(); ++it) Push(*it);
        }
        PopAll(Label(depths[n]).label_types());
        if (!ctrls_.back().unreachable) {
          uint32_t first = static_cast<uint32_t>(fn_.branch_targets.size());
          for (uint32_t d : depths) {
            ControlFrame& target = Label(d);
            BranchTarget bt{0, static_cast<uint32_t>(target.label_types().size()),
                            static_cast<uint32_t>(target.height)};
            if (target.kind == FrameKind::kLoop) {
              bt.pc = target.loop_pc;
            } else {
              target.table_patches.push_back(static_cast<uint32_t>(fn_.branch_targets.size()));
            }
            fn_.branch_targets.push_back(bt);
          }
          fn_.code.push_back(Instr{op::kBrTable, first, n + 1u});
        }
        MarkUnreachable();
        return;
      }
      case 0x0f:  // return
        PopAll(ctrls_.front().results);
        Emit(op::kReturn);
        MarkUnreachable();
        return;
      case 0x10: {  // call
        uint32_t f = r_.U32();
        if (f >= m_.num_functions()) Fail("unknown function " + std::to_string(f));
        const FuncType& t = m_.FunctionType(f);
        for (auto it = t.params.rbegin(); it != t.params.rend(); ++it) Pop(V(*it));
        for (auto res : t.results) Push(V(res));
        if (f < m_.imports.size()) {
          Emit(op::kCallHost, f);
        } else {
          Emit(op::kCall, f - static_cast<uint32_t>(m_.imports.size()));
        }
        return;
      }
      case 0x11: {  // call_indirect
        uint32_t type_index = r_.U32();
        uint32_t table_index = r_.U32();
        if (table_index != 0 || !m_.table) Fail("unknown table");
        if (type_index >= m_.types.size()) Fail("unknown type");
        Pop(Vt::kI32);
        const FuncType& t = m_.types[type_index];
        for (auto it = t.params.rbegin(); it != t.params.rend(); ++it) Pop(V(*it));
        for (auto res : t.results) Push(V(res));
        Emit(op::kCallIndirect, m_.type_signature[type_index]);
        return;
      }
      case 0x1a:  // drop
        Pop();
        Emit(op::kDrop);
        return;
      case 0x1b: {  // select
        Pop(Vt::kI32);
        Vt t1 = Pop();
        Vt t2 = Pop();
        bool num1 = t1 == Vt::kUnknown || IsNumType(static_cast<ValType>(t1));
        bool num2 = t2 == Vt::kUnknown || IsNumType(static_cast<ValType>(t2));
        if (!num1 || !num2) Fail("type mismatch: select needs numeric operands");
        if (t1 != t2 && t1 != Vt::kUnknown && t2 != Vt::kUnknown) Fail("type mismatch in select");
        Push(t1 == Vt::kUnknown ? t2 : t1);
        Emit(op::kSelect);
        return;
      }
      case 0x1c: {  // select t
        uint32_t n = r_.U32();
        if (n != 1) Fail("invalid result arity for typed select");
        Vt t = V(ReadValType(r_));
        Pop(Vt::kI32);
        Pop(t);
        Pop(t);
        Push(t);
        Emit(op::kSelect);
        return;
      }
      case 0x20:
      case 0x21:
      case 0x22: {
        uint32_t index = r_.U32();
        if (index >= locals_.size()) Fail("unknown local " + std::to_string(index));
        Vt t = locals_[index];
        if (opc == 0x20) {
          Push(t);
          Emit(op::kLocalGet, index);
        } else if (opc == 0x21) {
          Pop(t);
          Emit(op::kLocalSet, index);
        } else {
          Pop(t);
          Push(t);
          Emit(op::kLocalTee, index);
        }
        return;
      }
      case 0x23:
      case 0x24: {
        uint32_t index = r_.U32();
        if (index >= m_.globals.size()) Fail("unknown global " + std::to_string(index));
        const Global& g = m_.globals[index];
        if (opc == 0x23) {
          Push(V(g.type));
          Emit(op::kGlobalGet, index);
        } else {
          if (!g.is_mutable) Fail("global is immutable");
          Pop(V(g.type));
          Emit(op::kGlobalSet, index);
        }
        return;
      }
      case 0x3f:
      case 0x40: {
        if (r_.Byte() != 0x00) Fail("zero byte expected");
        RequireMemory();
        if (opc == 0x3f) {
          Push(Vt::kI32);
          Emit(op::kMemorySize);
        } else {
          Pop(Vt::kI32);
          Push(Vt::kI32);
          Emit(op::kMemoryGrow);
        }
        return;
      }
      case 0x41: {
        uint32_t v = static_cast<uint32_t>(r_.S32());
        Push(Vt::kI32);
        Emit(0x41, 0, v);
        return;
      }
      case 0x42: {
        uint64_t v = static_cast<uint64_t>(r_.S64());
        Push(Vt::kI64);
        Emit(0x42, 0, v);
        return;
      }
      case 0x43: {
        uint32_t v = r_.Fixed32();
        Push(Vt::kF32);
        Emit(0x43, 0, v);
        return;
      }
      case 0x44: {
        uint64_t v = r_.Fixed64();
        Push(Vt::kF64);
        Emit(0x44, 0, v);
        return;
      }
      case 0xfc:
        StepPrefixed(r_.U32());
        return;
      default:
        break;
    }
    if (opc >= 0x28 && opc <= 0x3e) {
      MemAccess access = MemorySignature(opc);
      uint32_t offset = ReadMemArg(access.natural_align);
      if (access.is_store) {
        Pop(access.type);
        Pop(Vt::kI32);
      } else {
        Pop(Vt::kI32);
        Push(access.type);
      }
      Emit(opc, offset);
      return;
    }
    if (opc >= 0x45 && opc <= 0xc4) {
      NumericSig sig = NumericSignature(opc);
      if (sig.in1 != Vt::kUnknown) Pop(sig.in1);
      Pop(sig.in0);
      Push(sig.out);
      Emit(opc);
      return;
    }
    Fail("unsupported opcode 0x" + std::to_string(opc));
  }

  void StepPrefixed(uint32_t sub) {
    constexpr Vt i32 = Vt::kI32, i64 = Vt::kI64, f32 = Vt::kF32, f64 = Vt::kF64;
    static constexpr Vt kSatIn[] = {f32, f32, f64, f64, f32, f32, f64, f64};
    static constexpr Vt kSatOut[] = {i32, i32, i32, i32, i64, i64, i64, i64};
    if (sub <= 7) {
      Pop(kSatIn[sub]);
      Push(kSatOut[sub]);
      Emit(static_cast<uint16_t>(op::kPrefixFC + sub));
      return;
    }
    switch (sub) {
      case 8: {  // memory.init
        uint32_t segment = r_.U32();
        if (r_.Byte() != 0x00) Fail("zero byte expected");
        RequireMemory();
        if (!ctx_.data_count) Fail("data count section required");
        if (segment >= *ctx_.data_count) Fail("unknown data segment");
        Pop(i32);
        Pop(i32);
        Pop(i32);
        Emit(static_cast<uint16_t>(op::kPrefixFC + sub), segment);
        return;
      }
      case 9: {  // data.drop
        uint32_t segment = r_.U32();
        if (!ctx_.data_count) Fail("data count section required");
        if (segment >= *ctx_.data_count) Fail("unknown data segment");
        Emit(static_cast<uint16_t>(op::kPrefixFC + sub), segment);
        return;
      }
      case 10:  // memory.copy
        if (r_.Byte() != 0x00 || r_.Byte() != 0x00) Fail("zero byte expected");
        RequireMemory();
        Pop(i32);
        Pop(i32);
        Pop(i32);
        Emit(static_cast<uint16_t>(op::kPrefixFC + sub));
        return;
      case 11:  // memory.fill
        if (r_.Byte() != 0x00) Fail("zero byte expected");
        RequireMemory();
        Pop(i32);
        Pop(i32);
        Pop(i32);
        Emit(static_cast<uint16_t>(op::kPrefixFC + sub));
        return;
      default:
        Fail("unsupported opcode 0xfc " + std::to_string(sub));
    }
  }

  const ModuleContext& ctx_;
  const CompiledModule& m_;
  Function& fn_;
  std::vector<Vt> locals_;
  Reader r_;
  std::vector<Vt> vals_;
  std::vector<ControlFrame> ctrls_;
};

ConstExpr ReadConstExpr(Reader& r, const CompiledModule& m, ValType expected) {
  ConstExpr e;
  uint8_t opc = r.Byte();
  ValType actual;
  switch (opc) {
    case 0x41:
      e.value = static_cast<uint32_t>(r.S32());
      actual = ValType::kI32;
      break;
    case 0x42:
      e.value = static_cast<uint64_t>(r.S64());
      actual = ValType::kI64;
      break;
    case 0x43:
      e.value = r.Fixed32();
      actual = ValType::kF32;
      break;
    case 0x44:
      e.value = r.Fixed64();
      actual = ValType::kF64;
      break;
    case 0x23: {
      e.kind = ConstExpr::Kind::kGlobalGet;
      e.index = r.U32();
      // Only earlier immutable globals are visible to initializers.
      if (e.index >= m.globals.size()) Fail("unknown global in constant expression");
      if (m.globals[e.index].is_mutable) Fail("constant expression reads a mutable global");
      actual = m.globals[e.index].type;
      break;
    }
    case 0xd0: {
      e.kind = ConstExpr::Kind::kRefNull;
      actual = ReadValType(r);
      break;
    }
    case 0xd2: {
      e.kind = ConstExpr::Kind::kRefFunc;
      e.index = r.U32();
      if (e.index >= m.num_functions()) Fail("unknown function in constant expression");
      actual = ValType::kFuncRef;
      break;
    }
    default:
      Fail("constant expression required");
  }
  if (r.Byte() != 0x0b) Fail("constant expression must end after one instruction");
  if (actual != expected) Fail("type mismatch in constant expression");
  return e;
}

class ModuleDecoder {
 public:
  explicit ModuleDecoder(std::string_view bytes) : r_(bytes) {}

  std::shared_ptr<const CompiledModule> Decode() {
    auto magic = r_.Bytes(4);
    if (magic != std::string_view("\0asm", 4)) Fail("magic header not detected");
    if (r_.Fixed32() != 1) Fail("unknown binary version");

    uint8_t last_id = 0;
    std::vector<uint32_t> function_types;
    std::vector<std::string_view> bodies;
    bool saw_code = false;
    while (!r_.done()) {
      uint8_t id = r_.Byte();
      uint32_t size = r_.U32();
      Reader section(r_.Bytes(size));
      if (id == 0) continue;  // custom section
      // Canonical order, with the data count section between element and code.
      auto rank = [](uint8_t s) { return s == 12 ? 9.5 : s == 10 ? 10.0 : s == 11 ? 11.0 : double(s); };
      if (id > 12) Fail("unknown section id " + std::to_string(id));
      if (last_id != 0 && rank(id) <= rank(last_id)) Fail("unexpected or duplicate section");
      last_id = id;
      switch (id) {
        case 1: ReadTypes(section); break;
        case 2: ReadImports(section); break;
        case 3: {
          uint32_t n = section.Count();
          for (uint32_t i = 0; i < n; ++i) {
            uint32_t t = section.U32();
            if (t >= m_.types.size()) Fail("unknown type");
            function_types.push_back(t);
          }
          break;
        }
        case 4: ReadTables(section); break;
        case 5: ReadMemories(section); break;
        case 6: ReadGlobals(section); break;
        case 7: ReadExports(section); break;
        case 8: {
          uint32_t f = section.U32();
          if (f >= m_.imports.size() + function_types.size()) Fail("unknown start function");
          m_.start = f;
          break;
        }
        case 9: ReadElements(section, function_types.size()); break;
        case 12: ctx_data_count_ = section.U32(); break;
        case 10: {
          saw_code = true;
          uint32_t n = section.Count();
          if (n != function_types.size()) Fail("function and code section have inconsistent lengths");
          for (uint32_t i = 0; i < n; ++i) {
            uint32_t body_size = section.U32();
            bodies.push_back(section.Bytes(body_size));
          }
          break;
        }
        case 11: ReadData(section); break;
      }
      if (!section.done()) Fail("section size mismatch");
    }
    if (!saw_code && !function_types.empty()) Fail("function and code section have inconsistent lengths");
    if (ctx_data_count_ && *ctx_data_count_ != m_.data.size()) {
      Fail("data count and data section have inconsistent lengths");
    }

    // Function space must be complete before bodies are validated (calls
    // reference any function index).
    m_.functions.resize(function_types.size());
    for (size_t i = 0; i < function_types.size(); ++i) {
      Function& fn = m_.functions[i];
      fn.type_index = function_types[i];
      fn.num_params = static_cast<uint32_t>(m_.types[fn.type_index].params.size());
      fn.num_results = static_cast<uint32_t>(m_.types[fn.type_index].results.size());
    }
    ValidateLateReferences();

    ModuleContext ctx{m_, ctx_data_count_};
    for (size_t i = 0; i < bodies.size(); ++i) CompileBody(ctx, m_.functions[i], bodies[i]);
    return std::make_shared<const CompiledModule>(std::move(m_));
  }

 private:
  void ReadTypes(Reader& s) {
    uint32_t n = s.Count();
    for (uint32_t i = 0; i < n; ++i) {
      if (s.Byte() != 0x60) Fail("malformed function type");
      FuncType t;
      uint32_t np = s.Count();
      for (uint32_t k = 0; k < np; ++k) t.params.push_back(ReadValType(s));
      uint32_t nr = s.Count();
      for (uint32_t k = 0; k < nr; ++k) t.results.push_back(ReadValType(s));
      uint32_t canonical = static_cast<uint32_t>(m_.types.size());
      for (uint32_t k = 0; k < m_.types.size(); ++k) {
        if (m_.types[k] == t) {
          canonical = m_.type_signature[k];
          break;
        }
      }
      m_.types.push_back(std::move(t));
      m_.type_signature.push_back(canonical);
    }
  }

  void ReadImports(Reader& s) {
    uint32_t n = s.Count();
    for (uint32_t i = 0; i < n; ++i) {
      FunctionImport imp;
      imp.module = s.Name();
      imp.name = s.Name();
      uint8_t kind = s.Byte();
      if (kind != 0) {
        Fail("unsupported import kind for " + imp.module + "." + imp.name +
             " (only function imports are supported)");
      }
      imp.type_index = s.U32();
      if (imp.type_index >= m_.types.size()) Fail("unknown type");
      m_.imports.push_back(std::move(imp));
    }
  }

  void ReadTables(Reader& s) {
    uint32_t n = s.Count();
    for (uint32_t i = 0; i < n; ++i) {
      if (m_.table) Fail("multiple tables");
      ValType t = ReadValType(s);
      if (t != ValType::kFuncRef) Fail("only funcref tables are supported");
      m_.table = ReadLimits(s, UINT32_MAX, "table");
      if (m_.table->min > 10'000'000) Fail("table size too large");
    }
  }

  void ReadMemories(Reader& s) {
    uint32_t n = s.Count();
    for (uint32_t i = 0; i < n; ++i) {
      if (m_.memory) Fail("multiple memories");
      m_.memory = ReadLimits(s, kMaxPages, "memory");
    }
  }

  void ReadGlobals(Reader& s) {
    uint32_t n = s.Count();
    for (uint32_t i = 0; i < n; ++i) {
      Global g;
      g.type = ReadValType(s);
      uint8_t mut = s.Byte();
      if (mut > 1) Fail("malformed mutability");
      g.is_mutable = mut == 1;
      g.init = ReadConstExpr(s, m_, g.type);
      m_.globals.push_back(g);
    }
  }

  void ReadExports(Reader& s) {
    uint32_t n = s.Count();
    std::set<std::string> names;
    for (uint32_t i = 0; i < n; ++i) {
      Export e;
      e.name = s.Name();
      uint8_t kind = s.Byte();
      if (kind > 3) Fail("malformed export kind");
      e.kind = static_cast<ExternKind>(kind);
      e.index = s.U32();
      if (!names.insert(e.name).second) Fail("duplicate export name " + e.name);
      m_.exports.push_back(std::move(e));
    }
  }

  void ReadElements(Reader& s, size_t defined_functions) {
    uint32_t n = s.Count();
    size_t total_functions = m_.imports.size() + defined_functions;
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t flags = s.U32();
      if (flags > 7) Fail("malformed element segment flags");
      ElementSegment seg;
      bool passive_or_declarative = flags & 1;
      bool explicit_table = flags & 2;
      bool uses_exprs = flags & 4;
      seg.active = !passive_or_declarative;
      if (seg.active) {
        if (explicit_table && s.U32() != 0) Fail("unknown table");
        if (!m_.table) Fail("unknown table");
        seg.offset = ReadConstExpr(s, m_, ValType::kI32);
      }
      if (passive_or_declarative || explicit_table) {
        if (uses_exprs) {
          if (ReadValType(s) != ValType::kFuncRef) Fail("only funcref elements are supported");
        } else if (s.Byte() != 0x00) {
          Fail("malformed element kind");
        }
      }
      uint32_t count = s.Count();
      for (uint32_t k = 0; k < count; ++k) {
        uint32_t f;
        if (uses_exprs) {
          uint8_t opc = s.Byte();
          if (opc == 0xd2) {
            f = s.U32();
          } else if (opc == 0xd0) {
            if (ReadValType(s) != ValType::kFuncRef) Fail("type mismatch in element");
            f = kNullFunction;
          } else {
            Fail("unsupported element expression");
          }
          if (s.Byte() != 0x0b) Fail("element expression must end");
        } else {
          f = s.U32();
        }
        if (f != kNullFunction && f >= total_functions) Fail("unknown function in element");
        seg.functions.push_back(f);
      }
      m_.elements.push_back(std::move(seg));
    }
  }

  void ReadData(Reader& s) {
    uint32_t n = s.Count();
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t flags = s.U32();
      DataSegment seg;
      if (flags == 0 || flags == 2) {
        if (flags == 2 && s.U32() != 0) Fail("unknown memory");
        if (!m_.memory) Fail("unknown memory 0");
        seg.active = true;
        seg.offset = ReadConstExpr(s, m_, ValType::kI32);
      } else if (flags != 1) {
        Fail("malformed data segment flags");
      }
      uint32_t len = s.U32();
      seg.bytes = std::string(s.Bytes(len));
      m_.data.push_back(std::move(seg));
    }
  }

  void ValidateLateReferences() {
    uint32_t nfuncs = m_.num_functions();
    for (const auto& e : m_.exports) {
      switch (e.kind) {
        case ExternKind::kFunction:
          if (e.index >= nfuncs) Fail("unknown function in export");
          break;
        case ExternKind::kTable:
          if (e.index != 0 || !m_.table) Fail("unknown table in export");
          break;
        case ExternKind::kMemory:
          if (e.index != 0 || !m_.memory) Fail("unknown memory in export");
          break;
        case ExternKind::kGlobal:
          if (e.index >= m_.globals.size()) Fail("unknown global in export");
          break;
      }
    }
    for (const auto& g : m_.globals) {
      if (g.init.kind == ConstExpr::Kind::kRefFunc && g.init.index >= nfuncs) Fail("unknown function");
    }
    if (m_.start) {
      const FuncType& t = m_.FunctionType(*m_.start);
      if (!t.params.empty() || !t.results.empty()) Fail("start function must have type [] -> []");
    }
  }

  void CompileBody(const ModuleContext& ctx, Function& fn, std::string_view body) {
    Reader r(body);
    std::vector<Vt> locals;
    for (auto p : m_.types[fn.type_index].params) locals.push_back(V(p));
    uint32_t groups = r.Count();
    uint64_t declared = 0;
    for (uint32_t i = 0; i < groups; ++i) {
      uint32_t count = r.U32();
      declared += count;
      if (declared > 50'000) Fail("too many locals");
      ValType t = ReadValType(r);
      locals.insert(locals.end(), count, V(t));
    }
    fn.num_locals = static_cast<uint32_t>(declared);
    FunctionCompiler compiler(ctx, fn, std::move(locals), body.substr(r.pos()));
    compiler.Compile();
  }

  Reader r_;
  CompiledModule m_;
  std::optional<uint32_t> ctx_data_count_;
};

}  // namespace

std::shared_ptr<const CompiledModule> CompileModule(std::string_view bytes) {
  return ModuleDecoder(bytes).Decode();
}

}  // namespace fl::wasm
