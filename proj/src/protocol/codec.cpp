#include "fl/protocol/codec.h"

#include <algorithm>
#include <limits>

#include "fl/common/error.h"

namespace fl {

void ByteWriter::U16(uint16_t v) {
  U8(static_cast<uint8_t>(v >> 8));
  U8(static_cast<uint8_t>(v));
}

void ByteWriter::U32(uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) U8(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::U64(uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) U8(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::Str(std::string_view s) {
  U32(static_cast<uint32_t>(s.size()));
  out_.append(s);
}

std::string_view ByteReader::Raw(size_t n) {
  if (n > remaining()) throw Error(ErrorCode::kMalformedFrame, "truncated frame");
  auto out = in_.substr(pos_, n);
  pos_ += n;
  return out;
}

uint8_t ByteReader::U8() { return static_cast<uint8_t>(Raw(1)[0]); }

uint16_t ByteReader::U16() {
  auto b = Raw(2);
  return static_cast<uint16_t>((static_cast<uint8_t>(b[0]) << 8) | static_cast<uint8_t>(b[1]));
}

uint32_t ByteReader::U32() {
  auto b = Raw(4);
  uint32_t v = 0;
  for (char c : b) v = (v << 8) | static_cast<uint8_t>(c);
  return v;
}

uint64_t ByteReader::U64() {
  auto b = Raw(8);
  uint64_t v = 0;
  for (char c : b) v = (v << 8) | static_cast<uint8_t>(c);
  return v;
}

std::string ByteReader::Str(size_t max_len) {
  uint32_t len = U32();
  if (len > max_len) throw Error(ErrorCode::kMalformedFrame, "string field exceeds its bound");
  return std::string(Raw(len));
}

void ByteReader::ExpectEnd() const {
  if (remaining() != 0) throw Error(ErrorCode::kMalformedFrame, "trailing bytes after payload");
}

void WriteFunctionId(ByteWriter& w, const FunctionId& id) {
  if (!id.IsValid()) {
    throw Error(ErrorCode::kInvalidArgument, "invalid function id '" + id.ToString() + "'");
  }
  w.Str(id.module_name);
  w.Str(id.function_name);
}

FunctionId ReadFunctionId(ByteReader& r) {
  FunctionId id;
  id.module_name = r.Str(kMaxNameBytes);
  id.function_name = r.Str(kMaxNameBytes);
  if (!id.IsValid()) throw Error(ErrorCode::kMalformedFrame, "invalid function id");
  return id;
}

void WriteDescriptor(ByteWriter& w, const FunctionDescriptor& d) {
  WriteFunctionId(w, d.id);
  w.Str(d.wasm_bytes);
  w.U32(d.reserved_memory_mb);
  w.I64(d.created_at);
  w.I64(d.updated_at);
}

FunctionDescriptor ReadDescriptor(ByteReader& r, size_t max_wasm_bytes) {
  FunctionDescriptor d;
  d.id = ReadFunctionId(r);
  d.wasm_bytes = r.Str(max_wasm_bytes);
  d.reserved_memory_mb = r.U32();
  d.created_at = r.I64();
  d.updated_at = r.I64();
  if (!HasWasmPreamble(d.wasm_bytes)) {
    throw Error(ErrorCode::kMalformedFrame, "descriptor binary lacks the wasm preamble");
  }
  if (d.reserved_memory_mb < 1) {
    throw Error(ErrorCode::kMalformedFrame, "descriptor reserves no memory");
  }
  return d;
}

std::string EncodeDescriptor(const FunctionDescriptor& d) {
  ValidateDescriptor(d, std::numeric_limits<size_t>::max());
  ByteWriter w;
  WriteDescriptor(w, d);
  return w.Take();
}

FunctionDescriptor DecodeDescriptor(std::string_view bytes, size_t max_wasm_bytes) {
  ByteReader r(bytes);
  auto d = ReadDescriptor(r, max_wasm_bytes);
  r.ExpectEnd();
  return d;
}

}  // namespace fl
