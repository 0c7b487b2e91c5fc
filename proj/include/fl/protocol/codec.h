#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "fl/protocol/types.h"

namespace fl {

// Canonical big-endian writer. Strings and byte blobs are u32-length-prefixed.
class ByteWriter {
 public:
  void U8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void U16(uint16_t v);
  void U32(uint32_t v);
  void U64(uint64_t v);
  void I64(int64_t v) { U64(static_cast<uint64_t>(v)); }
  void Raw(std::string_view bytes) { out_.append(bytes); }
  void Str(std::string_view s);

  template <typename Tag>
  void Id(const Id128<Tag>& id) {
    out_.append(reinterpret_cast<const char*>(id.bytes.data()), id.bytes.size());
  }

  std::string& buffer() { return out_; }
  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
};

// Bounds-checked reader; every underflow throws Error(kMalformedFrame).
class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  uint8_t U8();
  uint16_t U16();
  uint32_t U32();
  uint64_t U64();
  int64_t I64() { return static_cast<int64_t>(U64()); }
  std::string_view Raw(size_t n);
  std::string Str(size_t max_len);

  template <typename Tag>
  Id128<Tag> Id() {
    Id128<Tag> id;
    auto raw = Raw(id.bytes.size());
    std::copy(raw.begin(), raw.end(), id.bytes.begin());
    return id;
  }

  size_t remaining() const { return in_.size() - pos_; }
  void ExpectEnd() const;

 private:
  std::string_view in_;
  size_t pos_ = 0;
};

void WriteFunctionId(ByteWriter& w, const FunctionId& id);
FunctionId ReadFunctionId(ByteReader& r);

void WriteDescriptor(ByteWriter& w, const FunctionDescriptor& d);
FunctionDescriptor ReadDescriptor(ByteReader& r, size_t max_wasm_bytes);

// Canonical standalone descriptor serialization (used by the function store).
std::string EncodeDescriptor(const FunctionDescriptor& d);
FunctionDescriptor DecodeDescriptor(std::string_view bytes,
                                    size_t max_wasm_bytes = kDefaultMaxWasmBytes);

}  // namespace fl
