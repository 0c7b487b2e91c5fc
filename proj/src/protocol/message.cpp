#include "fl/protocol/message.h"

#include <limits>

#include "fl/common/error.h"
#include "fl/common/net.h"
#include "fl/protocol/codec.h"

namespace fl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void CheckDescriptor(const FunctionDescriptor& d, const CodecLimits& limits) {
  if (d.wasm_bytes.size() > limits.max_wasm_bytes) {
    throw Error(ErrorCode::kOversizeMessage,
                "wasm binary of " + std::to_string(d.wasm_bytes.size()) +
                    " bytes exceeds the limit of " + std::to_string(limits.max_wasm_bytes));
  }
  try {
    ValidateDescriptor(d, limits.max_wasm_bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidArgument, e.what());
  }
}

void WriteEnvelope(ByteWriter& w, const InvocationEnvelope& env, const CodecLimits& limits) {
  if (env.args.size() > limits.max_args_bytes) {
    throw Error(ErrorCode::kOversizeMessage, "invocation arguments exceed the limit");
  }
  w.Id(env.correlation_id);
  WriteFunctionId(w, env.function_id);
  w.Str(env.args);
  w.I64(env.deadline);
}

InvocationEnvelope ReadEnvelope(ByteReader& r, const CodecLimits& limits) {
  InvocationEnvelope env;
  env.correlation_id = r.Id<CorrelationTag>();
  env.function_id = ReadFunctionId(r);
  env.args = r.Str(limits.max_args_bytes);
  env.deadline = r.I64();
  return env;
}

void WriteOutcome(ByteWriter& w, const InvocationOutcome& outcome) {
  w.U8(static_cast<uint8_t>(outcome.index()));
  std::visit(Overloaded{
                 [&](const outcome::Ok& ok) { w.Str(ok.payload); },
                 [&](const outcome::FunctionError& fe) { w.Str(fe.message); },
                 [&](const outcome::PlatformError& pe) {
                   w.U8(static_cast<uint8_t>(pe.kind));
                   w.Str(pe.message);
                 },
             },
             outcome);
}

InvocationOutcome ReadOutcome(ByteReader& r) {
  constexpr size_t kMaxText = kMaxFrameLength;
  switch (r.U8()) {
    case 0: return outcome::Ok{r.Str(kMaxText)};
    case 1: return outcome::FunctionError{r.Str(kMaxText)};
    case 2: {
      uint8_t kind = r.U8();
      if (kind >= kPlatformErrorKindCount) {
        throw Error(ErrorCode::kMalformedFrame, "unknown platform error kind");
      }
      return outcome::PlatformError{static_cast<PlatformErrorKind>(kind), r.Str(kMaxText)};
    }
    default: throw Error(ErrorCode::kMalformedFrame, "unknown outcome variant");
  }
}

void WriteSample(ByteWriter& w, const MetricsSample& s) {
  w.Id(s.worker_id);
  w.U64(s.free_memory_mb);
  w.U32(s.in_flight);
  w.U64(s.cache_bytes);
  w.I64(s.taken_at);
}

MetricsSample ReadSample(ByteReader& r) {
  MetricsSample s;
  s.worker_id = r.Id<WorkerTag>();
  s.free_memory_mb = r.U64();
  s.in_flight = r.U32();
  s.cache_bytes = r.U64();
  s.taken_at = r.I64();
  return s;
}

void WriteAnnounceBody(ByteWriter& w, const DiscoveryAnnounce& a) {
  if (a.listen_address.size() > kMaxAddressBytes) {
    throw Error(ErrorCode::kInvalidArgument, "listen address exceeds 253 bytes");
  }
  w.Id(a.worker_id);
  w.U16(static_cast<uint16_t>(a.listen_address.size()));
  w.Raw(a.listen_address);
  w.U32(a.capacity_mb);
  w.U64(a.epoch);
}

DiscoveryAnnounce ReadAnnounceBody(ByteReader& r) {
  DiscoveryAnnounce a;
  a.worker_id = r.Id<WorkerTag>();
  uint16_t len = r.U16();
  if (len > kMaxAddressBytes) throw Error(ErrorCode::kMalformedFrame, "address too long");
  a.listen_address = std::string(r.Raw(len));
  a.capacity_mb = r.U32();
  a.epoch = r.U64();
  if (a.capacity_mb == 0) throw Error(ErrorCode::kMalformedFrame, "zero capacity");
  return a;
}

}  // namespace

MessageTag TagOf(const Message& m) {
  return static_cast<MessageTag>(m.index() + 1);
}

std::string_view MessageName(const Message& m) {
  static constexpr std::string_view kNames[] = {
      "CreateBroadcast", "InvokeRequest", "InvokeResult",    "NoCode",     "InvokeWithCode",
      "Heartbeat",       "DeleteBroadcast", "UpdateBroadcast", "WorkerHello"};
  return kNames[m.index()];
}

std::string EncodeMessage(const Message& m, const CodecLimits& limits) {
  ByteWriter w;
  w.U32(0);  // length, patched below
  w.U8(static_cast<uint8_t>(TagOf(m)));
  std::visit(Overloaded{
                 [&](const msg::CreateBroadcast& v) {
                   CheckDescriptor(v.descriptor, limits);
                   WriteDescriptor(w, v.descriptor);
                 },
                 [&](const msg::InvokeRequest& v) { WriteEnvelope(w, v.envelope, limits); },
                 [&](const msg::InvokeResult& v) {
                   w.Id(v.correlation_id);
                   WriteOutcome(w, v.outcome);
                 },
                 [&](const msg::NoCode& v) {
                   w.Id(v.correlation_id);
                   WriteFunctionId(w, v.function_id);
                 },
                 [&](const msg::InvokeWithCode& v) {
                   CheckDescriptor(v.descriptor, limits);
                   WriteEnvelope(w, v.envelope, limits);
                   WriteDescriptor(w, v.descriptor);
                 },
                 [&](const msg::Heartbeat& v) { WriteSample(w, v.sample); },
                 [&](const msg::DeleteBroadcast& v) { WriteFunctionId(w, v.function_id); },
                 [&](const msg::UpdateBroadcast& v) {
                   CheckDescriptor(v.descriptor, limits);
                   WriteDescriptor(w, v.descriptor);
                 },
                 [&](const msg::WorkerHello& v) { WriteAnnounceBody(w, v.announce); },
             },
             m);
  std::string frame = w.Take();
  size_t n = frame.size() - kFrameHeaderBytes;
  if (n > kMaxFrameLength) {
    throw Error(ErrorCode::kOversizeMessage, "frame of " + std::to_string(n) + " bytes exceeds 80 MiB");
  }
  for (int i = 0; i < 4; ++i) frame[i] = static_cast<char>((n >> (24 - 8 * i)) & 0xff);
  return frame;
}

Message DecodeMessage(std::string_view frame, const CodecLimits& limits) {
  ByteReader header(frame);
  uint32_t n = header.U32();
  if (n == 0) throw Error(ErrorCode::kMalformedFrame, "empty frame");
  if (n > kMaxFrameLength) throw Error(ErrorCode::kMalformedFrame, "frame length beyond 80 MiB");
  if (frame.size() - kFrameHeaderBytes < n) throw Error(ErrorCode::kMalformedFrame, "truncated frame");
  if (frame.size() - kFrameHeaderBytes > n) {
    throw Error(ErrorCode::kMalformedFrame, "trailing bytes after frame");
  }
  ByteReader r(frame.substr(kFrameHeaderBytes));
  uint8_t tag = r.U8();
  Message m;
  switch (static_cast<MessageTag>(tag)) {
    case MessageTag::kCreateBroadcast:
      m = msg::CreateBroadcast{ReadDescriptor(r, limits.max_wasm_bytes)};
      break;
    case MessageTag::kInvokeRequest:
      m = msg::InvokeRequest{ReadEnvelope(r, limits)};
      break;
    case MessageTag::kInvokeResult: {
      auto cid = r.Id<CorrelationTag>();
      m = msg::InvokeResult{cid, ReadOutcome(r)};
      break;
    }
    case MessageTag::kNoCode: {
      auto cid = r.Id<CorrelationTag>();
      m = msg::NoCode{cid, ReadFunctionId(r)};
      break;
    }
    case MessageTag::kInvokeWithCode: {
      auto env = ReadEnvelope(r, limits);
      m = msg::InvokeWithCode{std::move(env), ReadDescriptor(r, limits.max_wasm_bytes)};
      break;
    }
    case MessageTag::kHeartbeat:
      m = msg::Heartbeat{ReadSample(r)};
      break;
    case MessageTag::kDeleteBroadcast:
      m = msg::DeleteBroadcast{ReadFunctionId(r)};
      break;
    case MessageTag::kUpdateBroadcast:
      m = msg::UpdateBroadcast{ReadDescriptor(r, limits.max_wasm_bytes)};
      break;
    case MessageTag::kWorkerHello:
      m = msg::WorkerHello{ReadAnnounceBody(r)};
      break;
    default:
      throw Error(ErrorCode::kMalformedFrame, "unknown message tag " + std::to_string(tag));
  }
  r.ExpectEnd();
  return m;
}

void FrameSplitter::Feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameSplitter::Next() {
  if (buffered() < kFrameHeaderBytes) return std::nullopt;
  uint32_t n = 0;
  for (size_t i = 0; i < kFrameHeaderBytes; ++i) {
    n = (n << 8) | static_cast<uint8_t>(buffer_[offset_ + i]);
  }
  if (n > kMaxFrameLength) throw Error(ErrorCode::kOversizeMessage, "frame length beyond 80 MiB");
  if (buffered() < kFrameHeaderBytes + n) return std::nullopt;
  std::string frame = buffer_.substr(offset_, kFrameHeaderBytes + n);
  offset_ += kFrameHeaderBytes + n;
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return frame;
}

std::optional<std::string> ReadFrame(int fd) {
  uint8_t header[kFrameHeaderBytes];
  if (!net::RecvExact(fd, header, sizeof(header))) return std::nullopt;
  uint32_t n = (uint32_t{header[0]} << 24) | (uint32_t{header[1]} << 16) |
               (uint32_t{header[2]} << 8) | uint32_t{header[3]};
  if (n > kMaxFrameLength) throw Error(ErrorCode::kOversizeMessage, "frame length beyond 80 MiB");
  std::string frame(kFrameHeaderBytes + n, '\0');
  std::copy(header, header + kFrameHeaderBytes, frame.begin());
  if (!net::RecvExact(fd, frame.data() + kFrameHeaderBytes, n)) return std::nullopt;
  return frame;
}

}  // namespace fl
