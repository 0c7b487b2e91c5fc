// Freestanding runtime for guest functions: bump allocator, a small JSON
// reader/writer, base64 and the host imports. Include from exactly one
// translation unit per guest.
#pragma once

#include <stddef.h>
#include <stdint.h>

#define FL_EXPORT(name) extern "C" __attribute__((export_name(name)))
#define FL_IMPORT(name) extern "C" __attribute__((import_module("funless"), import_name(name)))

FL_IMPORT("fl_http") int64_t fl_http(const char* req, uint32_t len);
FL_IMPORT("fl_log") void fl_log(const char* msg, uint32_t len);
FL_IMPORT("fl_sleep") void fl_sleep(int64_t ms);

extern "C" __attribute__((import_module("wasi_snapshot_preview1"), import_name("clock_time_get")))
uint16_t __wasi_clock_time_get(uint32_t id, uint64_t precision, uint64_t* out);

extern "C" unsigned char __heap_base;

// Built with -mbulk-memory, so these lower to memory.copy / memory.fill.
extern "C" void* memcpy(void* dst, const void* src, size_t n) { return __builtin_memcpy(dst, src, n); }
extern "C" void* memmove(void* dst, const void* src, size_t n) { return __builtin_memmove(dst, src, n); }
extern "C" void* memset(void* dst, int c, size_t n) { return __builtin_memset(dst, c, n); }

extern "C" int memcmp(const void* a, const void* b, size_t n) {
  auto* x = static_cast<const unsigned char*>(a);
  auto* y = static_cast<const unsigned char*>(b);
  for (size_t i = 0; i < n; ++i) {
    if (x[i] != y[i]) return x[i] < y[i] ? -1 : 1;
  }
  return 0;
}

namespace flg {

// ---- memory ------------------------------------------------------------

static uintptr_t g_top = 0;

inline void EnsureMemory(uintptr_t end) {
  uintptr_t cap = __builtin_wasm_memory_size(0) * 65536u;
  if (end <= cap) return;
  uintptr_t pages = (end - cap + 65535u) / 65536u;
  // A refused grow is fatal for the guest; the host reports it as OOM.
  if (__builtin_wasm_memory_grow(0, pages) == static_cast<size_t>(-1)) __builtin_trap();
}

inline void* Alloc(uint32_t n) {
  if (g_top == 0) g_top = reinterpret_cast<uintptr_t>(&__heap_base);
  uintptr_t p = (g_top + 7u) & ~uintptr_t{7};
  if (n > UINT32_MAX - 65536u - p) __builtin_trap();
  EnsureMemory(p + n);
  g_top = p + n;
  return reinterpret_cast<void*>(p);
}

// Extends the most recent allocation in place when possible.
inline void* Grow(void* ptr, uint32_t old_size, uint32_t new_size) {
  auto p = reinterpret_cast<uintptr_t>(ptr);
  if (p + old_size == g_top) {
    if (new_size > UINT32_MAX - 65536u - p) __builtin_trap();
    EnsureMemory(p + new_size);
    g_top = p + new_size;
    return ptr;
  }
  void* fresh = Alloc(new_size);
  memcpy(fresh, ptr, old_size);
  return fresh;
}

struct Str {
  const char* p = nullptr;
  uint32_t n = 0;

  bool Eq(const char* z) const {
    uint32_t i = 0;
    for (; z[i]; ++i) {
      if (i >= n || p[i] != z[i]) return false;
    }
    return i == n;
  }
};

inline uint32_t Len(const char* z) {
  uint32_t n = 0;
  while (z[n]) ++n;
  return n;
}

inline Str S(const char* z) { return Str{z, Len(z)}; }

inline void Log(const char* z) { fl_log(z, Len(z)); }

inline uint64_t NowNs() {
  uint64_t t = 0;
  __wasi_clock_time_get(1, 1, &t);
  return t;
}

// ---- output buffer -----------------------------------------------------

class Buf {
 public:
  void Put(char c) {
    Reserve(1);
    data_[size_++] = c;
  }
  void Put(const char* p, uint32_t n) {
    Reserve(n);
    memcpy(data_ + size_, p, n);
    size_ += n;
  }
  void Put(Str s) { Put(s.p, s.n); }
  void Put(const char* z) { Put(z, Len(z)); }

  void PutInt(int64_t v) {
    char tmp[24];
    int i = 0;
    uint64_t u = v < 0 ? 0 - static_cast<uint64_t>(v) : static_cast<uint64_t>(v);
    do {
      tmp[i++] = static_cast<char>('0' + u % 10);
      u /= 10;
    } while (u);
    if (v < 0) Put('-');
    while (i) Put(tmp[--i]);
  }

  // Fixed point with three decimals, e.g. 1234 -> "1.234".
  void PutMilli(uint64_t thousandths) {
    PutInt(static_cast<int64_t>(thousandths / 1000));
    Put('.');
    uint64_t frac = thousandths % 1000;
    Put(static_cast<char>('0' + frac / 100));
    Put(static_cast<char>('0' + frac / 10 % 10));
    Put(static_cast<char>('0' + frac % 10));
  }

  void PutString(Str s) {
    static const char kHex[] = "0123456789abcdef";
    Put('"');
    for (uint32_t i = 0; i < s.n; ++i) {
      unsigned char c = static_cast<unsigned char>(s.p[i]);
      switch (c) {
        case '"': Put("\\\"", 2); break;
        case '\\': Put("\\\\", 2); break;
        case '\n': Put("\\n", 2); break;
        case '\r': Put("\\r", 2); break;
        case '\t': Put("\\t", 2); break;
        case '\b': Put("\\b", 2); break;
        case '\f': Put("\\f", 2); break;
        default:
          if (c < 0x20) {
            Put("\\u00", 4);
            Put(kHex[c >> 4]);
            Put(kHex[c & 15]);
          } else {
            Put(static_cast<char>(c));
          }
      }
    }
    Put('"');
  }

  const char* data() const { return data_; }
  uint32_t size() const { return size_; }
  Str str() const { return Str{data_, size_}; }

 private:
  void Reserve(uint32_t extra) {
    if (size_ + extra <= cap_) return;
    uint32_t want = cap_ ? cap_ * 2 : 256;
    while (want < size_ + extra) want *= 2;
    data_ = static_cast<char*>(data_ ? Grow(data_, cap_, want) : Alloc(want));
    cap_ = want;
  }

  char* data_ = nullptr;
  uint32_t size_ = 0;
  uint32_t cap_ = 0;
};

// ---- JSON --------------------------------------------------------------

enum class Kind : uint8_t { kNull, kBool, kNumber, kString, kArray, kObject };

// Numbers keep their source lexeme so re-serialization is exact. Children of
// arrays and objects form a singly linked list.
struct Value {
  Kind kind = Kind::kNull;
  bool boolean = false;
  Str text;
  Str key;
  Value* first = nullptr;
  Value* next = nullptr;
  uint32_t count = 0;

  const Value* Get(const char* name) const {
    if (kind != Kind::kObject) return nullptr;
    for (const Value* v = first; v; v = v->next) {
      if (v->key.Eq(name)) return v;
    }
    return nullptr;
  }

  // Integer value of a number without fraction or exponent.
  bool AsInt(int64_t* out) const {
    if (kind != Kind::kNumber) return false;
    uint32_t i = 0;
    bool neg = false;
    if (text.n && text.p[0] == '-') {
      neg = true;
      i = 1;
    }
    if (i == text.n) return false;
    uint64_t acc = 0;
    for (; i < text.n; ++i) {
      char c = text.p[i];
      if (c < '0' || c > '9') return false;
      if (acc > (UINT64_C(1) << 63) / 10) return false;
      acc = acc * 10 + static_cast<uint64_t>(c - '0');
    }
    if (acc > (neg ? (UINT64_C(1) << 63) : (UINT64_C(1) << 63) - 1)) return false;
    *out = neg ? static_cast<int64_t>(0 - acc) : static_cast<int64_t>(acc);
    return true;
  }
};

class Parser {
 public:
  Parser(const char* p, uint32_t n) : p_(p), end_(p + n) {}

  // Null on malformed input.
  Value* ParseDocument() {
    Value* v = ParseValue(0);
    SkipWs();
    if (!v || p_ != end_) return nullptr;
    return v;
  }

 private:
  static constexpr int kMaxDepth = 512;

  void SkipWs() {
    while (p_ < end_ && (*p_ == ' ' || *p_ == '\n' || *p_ == '\r' || *p_ == '\t')) ++p_;
  }

  bool Literal(const char* z) {
    uint32_t n = Len(z);
    if (static_cast<uint32_t>(end_ - p_) < n || memcmp(p_, z, n) != 0) return false;
    p_ += n;
    return true;
  }

  static Value* New(Kind k) {
    auto* v = static_cast<Value*>(Alloc(sizeof(Value)));
    *v = Value{};
    v->kind = k;
    return v;
  }

  Value* ParseValue(int depth) {
    if (depth > kMaxDepth) return nullptr;
    SkipWs();
    if (p_ == end_) return nullptr;
    switch (*p_) {
      case 'n':
        return Literal("null") ? New(Kind::kNull) : nullptr;
      case 't':
      case 'f': {
        bool b = *p_ == 't';
        if (!Literal(b ? "true" : "false")) return nullptr;
        Value* v = New(Kind::kBool);
        v->boolean = b;
        return v;
      }
      case '"': {
        Value* v = New(Kind::kString);
        return ParseString(&v->text) ? v : nullptr;
      }
      case '[':
        return ParseArray(depth);
      case '{':
        return ParseObject(depth);
      default:
        return ParseNumber();
    }
  }

  static bool IsDigit(char c) { return c >= '0' && c <= '9'; }

  Value* ParseNumber() {
    const char* start = p_;
    if (p_ < end_ && *p_ == '-') ++p_;
    if (p_ == end_) return nullptr;
    if (*p_ == '0') {
      ++p_;
    } else if (IsDigit(*p_)) {
      while (p_ < end_ && IsDigit(*p_)) ++p_;
    } else {
      return nullptr;
    }
    if (p_ < end_ && *p_ == '.') {
      ++p_;
      if (p_ == end_ || !IsDigit(*p_)) return nullptr;
      while (p_ < end_ && IsDigit(*p_)) ++p_;
    }
    if (p_ < end_ && (*p_ == 'e' || *p_ == 'E')) {
      ++p_;
      if (p_ < end_ && (*p_ == '+' || *p_ == '-')) ++p_;
      if (p_ == end_ || !IsDigit(*p_)) return nullptr;
      while (p_ < end_ && IsDigit(*p_)) ++p_;
    }
    Value* v = New(Kind::kNumber);
    v->text = Str{start, static_cast<uint32_t>(p_ - start)};
    return v;
  }

  int Hex4() {
    if (end_ - p_ < 4) return -1;
    int v = 0;
    for (int i = 0; i < 4; ++i) {
      char c = *p_++;
      v <<= 4;
      if (c >= '0' && c <= '9') v |= c - '0';
      else if (c >= 'a' && c <= 'f') v |= c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v |= c - 'A' + 10;
      else return -1;
    }
    return v;
  }

  static void PutUtf8(Buf& b, uint32_t cp) {
    if (cp < 0x80) {
      b.Put(static_cast<char>(cp));
    } else if (cp < 0x800) {
      b.Put(static_cast<char>(0xc0 | (cp >> 6)));
      b.Put(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      b.Put(static_cast<char>(0xe0 | (cp >> 12)));
      b.Put(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      b.Put(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      b.Put(static_cast<char>(0xf0 | (cp >> 18)));
      b.Put(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      b.Put(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      b.Put(static_cast<char>(0x80 | (cp & 0x3f)));
    }
  }

  bool ParseString(Str* out) {
    ++p_;  // opening quote
    // Fast path: no escapes, reference the input directly.
    const char* scan = p_;
    while (scan < end_ && *scan != '"' && *scan != '\\' && static_cast<unsigned char>(*scan) >= 0x20) ++scan;
    if (scan < end_ && *scan == '"') {
      *out = Str{p_, static_cast<uint32_t>(scan - p_)};
      p_ = scan + 1;
      return true;
    }
    Buf b;
    while (p_ < end_) {
      unsigned char c = static_cast<unsigned char>(*p_++);
      if (c == '"') {
        *out = b.str();
        return true;
      }
      if (c < 0x20) return false;
      if (c != '\\') {
        b.Put(static_cast<char>(c));
        continue;
      }
      if (p_ == end_) return false;
      char e = *p_++;
      switch (e) {
        case '"': b.Put('"'); break;
        case '\\': b.Put('\\'); break;
        case '/': b.Put('/'); break;
        case 'b': b.Put('\b'); break;
        case 'f': b.Put('\f'); break;
        case 'n': b.Put('\n'); break;
        case 'r': b.Put('\r'); break;
        case 't': b.Put('\t'); break;
        case 'u': {
          int hi = Hex4();
          if (hi < 0) return false;
          uint32_t cp = static_cast<uint32_t>(hi);
          if (cp >= 0xd800 && cp <= 0xdbff) {
            if (end_ - p_ < 6 || p_[0] != '\\' || p_[1] != 'u') return false;
            p_ += 2;
            int lo = Hex4();
            if (lo < 0xdc00 || lo > 0xdfff) return false;
            cp = 0x10000 + ((cp - 0xd800) << 10) + (static_cast<uint32_t>(lo) - 0xdc00);
          } else if (cp >= 0xdc00 && cp <= 0xdfff) {
            return false;
          }
          PutUtf8(b, cp);
          break;
        }
        default:
          return false;
      }
    }
    return false;
  }

  Value* ParseArray(int depth) {
    ++p_;
    Value* arr = New(Kind::kArray);
    Value** tail = &arr->first;
    SkipWs();
    if (p_ < end_ && *p_ == ']') {
      ++p_;
      return arr;
    }
    for (;;) {
      Value* item = ParseValue(depth + 1);
      if (!item) return nullptr;
      *tail = item;
      tail = &item->next;
      ++arr->count;
      SkipWs();
      if (p_ == end_) return nullptr;
      if (*p_ == ',') {
        ++p_;
        continue;
      }
      if (*p_ == ']') {
        ++p_;
        return arr;
      }
      return nullptr;
    }
  }

  Value* ParseObject(int depth) {
    ++p_;
    Value* obj = New(Kind::kObject);
    Value** tail = &obj->first;
    SkipWs();
    if (p_ < end_ && *p_ == '}') {
      ++p_;
      return obj;
    }
    for (;;) {
      SkipWs();
      if (p_ == end_ || *p_ != '"') return nullptr;
      Str key;
      if (!ParseString(&key)) return nullptr;
      SkipWs();
      if (p_ == end_ || *p_ != ':') return nullptr;
      ++p_;
      Value* item = ParseValue(depth + 1);
      if (!item) return nullptr;
      item->key = key;
      *tail = item;
      tail = &item->next;
      ++obj->count;
      SkipWs();
      if (p_ == end_) return nullptr;
      if (*p_ == ',') {
        ++p_;
        continue;
      }
      if (*p_ == '}') {
        ++p_;
        return obj;
      }
      return nullptr;
    }
  }

  const char* p_;
  const char* end_;
};

inline Value* ParseJson(Str s) { return Parser(s.p, s.n).ParseDocument(); }

inline void WriteJson(Buf& b, const Value* v) {
  switch (v->kind) {
    case Kind::kNull: b.Put("null"); break;
    case Kind::kBool: b.Put(v->boolean ? "true" : "false"); break;
    case Kind::kNumber: b.Put(v->text); break;
    case Kind::kString: b.PutString(v->text); break;
    case Kind::kArray:
      b.Put('[');
      for (const Value* c = v->first; c; c = c->next) {
        if (c != v->first) b.Put(',');
        WriteJson(b, c);
      }
      b.Put(']');
      break;
    case Kind::kObject:
      b.Put('{');
      for (const Value* c = v->first; c; c = c->next) {
        if (c != v->first) b.Put(',');
        b.PutString(c->key);
        b.Put(':');
        WriteJson(b, c);
      }
      b.Put('}');
      break;
  }
}

// ---- base64 ------------------------------------------------------------

inline void Base64Encode(Buf& b, Str s) {
  static const char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  uint32_t i = 0;
  auto at = [&](uint32_t k) { return static_cast<uint32_t>(static_cast<unsigned char>(s.p[k])); };
  for (; i + 2 < s.n; i += 3) {
    uint32_t v = at(i) << 16 | at(i + 1) << 8 | at(i + 2);
    b.Put(kAlphabet[v >> 18]);
    b.Put(kAlphabet[(v >> 12) & 63]);
    b.Put(kAlphabet[(v >> 6) & 63]);
    b.Put(kAlphabet[v & 63]);
  }
  if (i + 1 == s.n) {
    uint32_t v = at(i) << 16;
    b.Put(kAlphabet[v >> 18]);
    b.Put(kAlphabet[(v >> 12) & 63]);
    b.Put("==");
  } else if (i + 2 == s.n) {
    uint32_t v = at(i) << 16 | at(i + 1) << 8;
    b.Put(kAlphabet[v >> 18]);
    b.Put(kAlphabet[(v >> 12) & 63]);
    b.Put(kAlphabet[(v >> 6) & 63]);
    b.Put('=');
  }
}

inline bool Base64Decode(Buf& b, Str s) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  uint32_t acc = 0;
  int bits = 0;
  for (uint32_t i = 0; i < s.n; ++i) {
    if (s.p[i] == '=') break;
    int v = val(s.p[i]);
    if (v < 0) return false;
    acc = (acc << 6) | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      b.Put(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return true;
}

// ---- host HTTP ---------------------------------------------------------

struct HttpResponse {
  bool ok = false;
  int64_t status_code = 0;
  Str body;
  Str error;
};

// Sends `request` (already JSON) through the host and decodes the reply.
inline HttpResponse Http(Str request) {
  HttpResponse r;
  int64_t packed = fl_http(request.p, request.n);
  Str raw{reinterpret_cast<const char*>(static_cast<uintptr_t>(static_cast<uint64_t>(packed) >> 32)),
          static_cast<uint32_t>(packed)};
  Value* v = ParseJson(raw);
  if (!v || v->kind != Kind::kObject) {
    r.error = S("malformed host reply");
    return r;
  }
  if (const Value* e = v->Get("error")) {
    r.error = e->kind == Kind::kString ? e->text : S("host error");
    return r;
  }
  const Value* code = v->Get("status_code");
  const Value* body = v->Get("body");
  if (!code || !code->AsInt(&r.status_code) || !body || body->kind != Kind::kString) {
    r.error = S("malformed host reply");
    return r;
  }
  Buf decoded;
  if (!Base64Decode(decoded, body->text)) {
    r.error = S("bad body encoding");
    return r;
  }
  r.body = decoded.str();
  r.ok = true;
  return r;
}

// ---- entry point -------------------------------------------------------

// Filled by the guest's Run(): either a payload (raw JSON) or an error.
struct Result {
  Buf payload;
  Str error;
  bool failed = false;

  void Fail(Str message) {
    failed = true;
    error = message;
  }
  void Fail(const char* message) { Fail(S(message)); }
};

inline int64_t Pack(const Buf& b) {
  return static_cast<int64_t>(static_cast<uint64_t>(reinterpret_cast<uintptr_t>(b.data())) << 32 | b.size());
}

}  // namespace flg

FL_EXPORT("_fl_alloc") uint32_t _fl_alloc(uint32_t len) {
  return static_cast<uint32_t>(reinterpret_cast<uintptr_t>(flg::Alloc(len ? len : 1)));
}

#ifndef FL_GUEST_CUSTOM_RUN

void Run(const flg::Value& args, flg::Result& result);

FL_EXPORT("_fl_run") int64_t _fl_run(uint32_t ptr, uint32_t len) {
  flg::Buf out;
  flg::Value* args = flg::ParseJson(flg::Str{reinterpret_cast<const char*>(static_cast<uintptr_t>(ptr)), len});
  flg::Result result;
  if (!args) {
    result.Fail("arguments are not valid JSON");
  } else {
    Run(*args, result);
  }
  if (result.failed) {
    out.Put("{\"status\":\"error\",\"message\":");
    out.PutString(result.error);
  } else {
    out.Put("{\"status\":\"ok\",\"payload\":");
    out.Put(result.payload.str());
  }
  out.Put('}');
  return flg::Pack(out);
}

#endif
