#include <gtest/gtest.h>

#include <set>

#include "fl/common/error.h"
#include "fl/protocol/announce.h"
#include "fl/protocol/codec.h"
#include "fl/protocol/message.h"
#include "random_values.h"
#include "test_util.h"

namespace fl {
namespace {

using testing::CodeOf;
using testing::RandomValues;

CorrelationId Seq() {
  CorrelationId c;
  for (int i = 0; i < 16; ++i) c.bytes[i] = static_cast<uint8_t>(i);
  return c;
}

TEST(Codec, HeartbeatRoundTrip) {
  WorkerId w = WorkerId::Random();
  Message m = msg::Heartbeat{MetricsSample{w, 512, 0, 0, 1'700'000'000'000}};
  std::string frame = EncodeMessage(m);
  EXPECT_EQ(static_cast<uint8_t>(frame[4]), 0x06);
  EXPECT_EQ(DecodeMessage(frame), m);
}

TEST(Codec, NoCodeGoldenBytes) {
  Message m = msg::NoCode{Seq(), FunctionId{"m", "f"}};
  std::string want("\x00\x00\x00\x1b\x04", 5);
  for (int i = 0; i < 16; ++i) want.push_back(static_cast<char>(i));
  want += std::string("\x00\x00\x00\x01m\x00\x00\x00\x01" "f", 10);
  EXPECT_EQ(EncodeMessage(m), want);
  EXPECT_EQ(DecodeMessage(want), m);
}

TEST(Codec, TagAssignments) {
  RandomValues r(1);
  std::set<uint8_t> tags;
  for (int i = 0; i < 500; ++i) {
    Message m = r.Msg();
    uint8_t tag = static_cast<uint8_t>(EncodeMessage(m)[4]);
    // Variant order follows the tag table, 0x01..0x09.
    EXPECT_EQ(tag, m.index() + 1);
    tags.insert(tag);
  }
  EXPECT_EQ(tags.size(), 9u);
}

TEST(Codec, OversizeWasmRejected) {
  FunctionDescriptor d{{"m", "f"}, std::string("\0asm\1\0\0\0", 8), 64, 0, 0};
  d.wasm_bytes.resize((size_t{64} << 20) + 1, 'x');
  EXPECT_EQ(CodeOf([&] { EncodeMessage(msg::CreateBroadcast{d}); }), ErrorCode::kOversizeMessage);
  d.wasm_bytes.resize(size_t{64} << 20);
  EXPECT_EQ(DecodeMessage(EncodeMessage(msg::CreateBroadcast{d})), Message(msg::CreateBroadcast{d}));
}

TEST(Codec, UnknownTagAndTruncation) {
  std::string frame = EncodeMessage(msg::NoCode{Seq(), {"m", "f"}});
  std::string bad = frame;
  bad[4] = static_cast<char>(0xff);
  EXPECT_EQ(CodeOf([&] { DecodeMessage(bad); }), ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf([&] { DecodeMessage(frame.substr(0, frame.size() - 1)); }), ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf([&] { DecodeMessage(frame + "x"); }), ErrorCode::kMalformedFrame);
}

TEST(Codec, InvalidFieldsRejectedOnEncode) {
  EXPECT_EQ(CodeOf([] { EncodeMessage(msg::NoCode{Seq(), {"a/b", "f"}}); }), ErrorCode::kInvalidArgument);
  FunctionDescriptor d{{"m", "f"}, "notwasm!", 64, 0, 0};
  EXPECT_EQ(CodeOf([&] { EncodeMessage(msg::CreateBroadcast{d}); }), ErrorCode::kInvalidArgument);
}

TEST(Codec, RandomRoundTrip) {
  RandomValues r(20240601);
  for (int i = 0; i < 1000; ++i) {
    Message m = r.Msg();
    ASSERT_EQ(DecodeMessage(EncodeMessage(m)), m) << "iteration " << i << " " << MessageName(m);
  }
}

TEST(Codec, EveryTruncationIsMalformed) {
  RandomValues r(5);
  for (int i = 0; i < 50; ++i) {
    std::string frame = EncodeMessage(r.Msg());
    for (size_t cut = 0; cut < frame.size(); cut += 1 + frame.size() / 40) {
      EXPECT_ANY_THROW(DecodeMessage(frame.substr(0, cut)));
    }
  }
}

TEST(Framing, ConcatenatedFramesSplitExactly) {
  RandomValues r(77);
  std::vector<Message> sent;
  std::string stream;
  for (int i = 0; i < 200; ++i) {
    sent.push_back(r.Msg());
    stream += EncodeMessage(sent.back());
  }
  // Feed in irregular chunks.
  FrameSplitter split;
  std::vector<Message> got;
  size_t pos = 0;
  while (pos < stream.size()) {
    size_t n = std::min<size_t>(stream.size() - pos, static_cast<size_t>(r.Int(1, 4000)));
    split.Feed(std::string_view(stream).substr(pos, n));
    pos += n;
    while (auto f = split.Next()) got.push_back(DecodeMessage(*f));
  }
  EXPECT_EQ(split.buffered(), 0u);
  EXPECT_EQ(got, sent);
}

TEST(Announce, RoundTripAndMagic) {
  DiscoveryAnnounce a{WorkerId::Random(), "10.0.0.5:9000", 1024, 1};
  std::string d = EncodeAnnounce(a);
  EXPECT_LE(d.size(), kMaxAnnounceBytes);
  EXPECT_EQ(d.substr(0, 4), "FLSS");
  EXPECT_EQ(DecodeAnnounce(d), a);
  std::string bad = d;
  bad.replace(0, 4, "XXXX");
  EXPECT_EQ(CodeOf([&] { DecodeAnnounce(bad); }), ErrorCode::kMalformedFrame);
}

TEST(Announce, AddressBound) {
  DiscoveryAnnounce a{WorkerId::Random(), std::string(300, 'a'), 1024, 1};
  EXPECT_ANY_THROW(EncodeAnnounce(a));
  a.listen_address = std::string(253, 'a');
  EXPECT_LE(EncodeAnnounce(a).size(), kMaxAnnounceBytes);
}

TEST(Announce, RandomRoundTrip) {
  RandomValues r(99);
  for (int i = 0; i < 1000; ++i) {
    DiscoveryAnnounce a = r.Announce();
    std::string d = EncodeAnnounce(a);
    ASSERT_LE(d.size(), kMaxAnnounceBytes);
    ASSERT_EQ(DecodeAnnounce(d), a);
  }
}

}  // namespace
}  // namespace fl
