#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "fl/protocol/types.h"

namespace fl {

namespace msg {

struct CreateBroadcast {
  FunctionDescriptor descriptor;
  friend bool operator==(const CreateBroadcast&, const CreateBroadcast&) = default;
};
struct InvokeRequest {
  InvocationEnvelope envelope;
  friend bool operator==(const InvokeRequest&, const InvokeRequest&) = default;
};
struct InvokeResult {
  CorrelationId correlation_id;
  InvocationOutcome outcome;
  friend bool operator==(const InvokeResult&, const InvokeResult&) = default;
};
struct NoCode {
  CorrelationId correlation_id;
  FunctionId function_id;
  friend bool operator==(const NoCode&, const NoCode&) = default;
};
struct InvokeWithCode {
  InvocationEnvelope envelope;
  FunctionDescriptor descriptor;
  friend bool operator==(const InvokeWithCode&, const InvokeWithCode&) = default;
};
struct Heartbeat {
  MetricsSample sample;
  friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};
struct DeleteBroadcast {
  FunctionId function_id;
  friend bool operator==(const DeleteBroadcast&, const DeleteBroadcast&) = default;
};
struct UpdateBroadcast {
  FunctionDescriptor descriptor;
  friend bool operator==(const UpdateBroadcast&, const UpdateBroadcast&) = default;
};
// First frame a worker sends on every accepted Core connection.
struct WorkerHello {
  DiscoveryAnnounce announce;
  friend bool operator==(const WorkerHello&, const WorkerHello&) = default;
};

}  // namespace msg

using Message = std::variant<msg::CreateBroadcast, msg::InvokeRequest, msg::InvokeResult,
                             msg::NoCode, msg::InvokeWithCode, msg::Heartbeat,
                             msg::DeleteBroadcast, msg::UpdateBroadcast, msg::WorkerHello>;

enum class MessageTag : uint8_t {
  kCreateBroadcast = 0x01,
  kInvokeRequest = 0x02,
  kInvokeResult = 0x03,
  kNoCode = 0x04,
  kInvokeWithCode = 0x05,
  kHeartbeat = 0x06,
  kDeleteBroadcast = 0x07,
  kUpdateBroadcast = 0x08,
  kWorkerHello = 0x09,
};

MessageTag TagOf(const Message& m);
std::string_view MessageName(const Message& m);

inline constexpr size_t kFrameHeaderBytes = 4;
inline constexpr uint32_t kMaxFrameLength = uint32_t{80} << 20;

struct CodecLimits {
  size_t max_wasm_bytes = kDefaultMaxWasmBytes;
  size_t max_args_bytes = kMaxArgsBytes;
};

// Frame = u32 BE length N | u8 tag | N-1 payload bytes.
// Throws Error(kOversizeMessage) when a size limit is exceeded and
// Error(kInvalidArgument) when a field violates its type invariant.
std::string EncodeMessage(const Message& m, const CodecLimits& limits = {});

// `frame` must be exactly one complete frame. Throws Error(kMalformedFrame).
Message DecodeMessage(std::string_view frame, const CodecLimits& limits = {});

// Splits complete frames off the front of a byte stream.
class FrameSplitter {
 public:
  // Appends raw bytes. Throws Error(kOversizeMessage) on a length prefix
  // beyond kMaxFrameLength.
  void Feed(std::string_view bytes);
  // Next complete frame (header included), if any.
  std::optional<std::string> Next();
  size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::string buffer_;
  size_t offset_ = 0;
};

// Blocking read of one frame from a stream socket. Returns nullopt on clean
// EOF or socket error; throws Error(kOversizeMessage) on a bad length.
std::optional<std::string> ReadFrame(int fd);

}  // namespace fl
