#include "fl/abi/guest.h"

#include <gtest/gtest.h>

#include <json.hpp>

#include "fl/common/error.h"
#include "guest_files.h"

namespace fl::abi {
namespace {

using testing::GuestBytes;

std::shared_ptr<const wasm::CompiledModule> Load(const std::string& name) {
  return wasm::CompileModule(GuestBytes(name));
}

InvocationOutcome Invoke(const std::string& name, std::string_view args, RunOptions options = {}) {
  static const HostServices services;
  return RunGuest(Load(name), args, options, services);
}

std::string OkPayload(const InvocationOutcome& o) {
  if (auto* ok = std::get_if<outcome::Ok>(&o)) return ok->payload;
  if (auto* fe = std::get_if<outcome::FunctionError>(&o)) return "FunctionError: " + fe->message;
  auto& pe = std::get<outcome::PlatformError>(o);
  return std::string(PlatformErrorKindName(pe.kind)) + ": " + pe.message;
}

PlatformErrorKind ErrorKind(const InvocationOutcome& o) {
  auto* pe = std::get_if<outcome::PlatformError>(&o);
  EXPECT_NE(pe, nullptr) << OkPayload(o);
  return pe ? pe->kind : PlatformErrorKind::kNoWorkerAvailable;
}

TEST(GuestAbi, HelloGreets) {
  EXPECT_EQ(OkPayload(Invoke("hello", R"({"name":"a"})")), R"("Hello a")");
  EXPECT_EQ(OkPayload(Invoke("hello", R"({"name":"edge"})")), R"("Hello edge")");
  EXPECT_EQ(OkPayload(Invoke("hello", "{}")), R"("Hello world")");
}

TEST(GuestAbi, HelloRejectsNonStringName) {
  auto o = Invoke("hello", R"({"name":5})");
  ASSERT_TRUE(std::holds_alternative<outcome::FunctionError>(o)) << OkPayload(o);
}

TEST(GuestAbi, CallGuestReturnsRawEnvelope) {
  static const HostServices services;
  wasm::Instance inst(Load("hello"), DefaultLinker(), {}, const_cast<HostServices*>(&services));
  EXPECT_EQ(CallGuest(inst, R"({"name":"a"})"), R"({"status":"ok","payload":"Hello a"})");
}

TEST(GuestAbi, ExportsValidated) {
  EXPECT_NO_THROW(ValidateExports(*Load("hello")));
}

TEST(GuestAbi, TrapsBecomeGuestTrap) {
  EXPECT_EQ(ErrorKind(Invoke("trap", "{}")), PlatformErrorKind::kGuestTrap);
  EXPECT_EQ(ErrorKind(Invoke("div_zero", "{}")), PlatformErrorKind::kGuestTrap);
  EXPECT_EQ(ErrorKind(Invoke("recurse", "{}")), PlatformErrorKind::kGuestTrap);
  EXPECT_EQ(OkPayload(Invoke("div_zero", R"({"d":2})")), "21");
}

TEST(GuestAbi, AbiViolations) {
  EXPECT_EQ(ErrorKind(Invoke("oob_return", "{}")), PlatformErrorKind::kGuestTrap);
  EXPECT_EQ(ErrorKind(Invoke("missing_payload", "{}")), PlatformErrorKind::kGuestTrap);
  EXPECT_EQ(ErrorKind(Invoke("bad_utf8", "{}")), PlatformErrorKind::kGuestTrap);
}

TEST(GuestAbi, MemoryCapGivesOutOfMemory) {
  RunOptions opts;
  opts.reserved_memory_mb = 16;
  EXPECT_EQ(ErrorKind(Invoke("blowout", "{}", opts)), PlatformErrorKind::kOutOfMemory);
}

TEST(GuestAbi, DeadlineInterruptsSpin) {
  RunOptions opts;
  opts.deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(200);
  auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(ErrorKind(Invoke("spin", "{}", opts)), PlatformErrorKind::kTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(2));
}

TEST(GuestAbi, SleepHonoursDeadline) {
  RunOptions opts;
  opts.deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(300);
  EXPECT_EQ(ErrorKind(Invoke("sleep", "{}", opts)), PlatformErrorKind::kTimeout);
}

TEST(GuestAbi, MatrixProductSmall) {
  auto payload = OkPayload(Invoke("matrix_mult", R"({"a":[[1,2],[3,4]],"b":[[5,6],[7,8]]})"));
  EXPECT_EQ(nlohmann::json::parse(payload), nlohmann::json::parse("[[19,22],[43,50]]"));
  auto id = OkPayload(Invoke("matrix_mult", R"({"a":[[1,0,0],[0,1,0],[0,0,1]],"b":[[1,0,0],[0,1,0],[0,0,1]]})"));
  EXPECT_EQ(nlohmann::json::parse(id), nlohmann::json::parse("[[1,0,0],[0,1,0],[0,0,1]]"));
  auto bad = Invoke("matrix_mult", R"({"a":[[1,2],[3,4]],"b":[[1]]})");
  EXPECT_TRUE(std::holds_alternative<outcome::FunctionError>(bad));
}

TEST(GuestAbi, EchoRoundTrip) {
  std::string v = R"({"a":[1,2.5,-3e10,true,null,"x\"y\\z\u0001é😀"],"b":{}})";
  EXPECT_EQ(nlohmann::json::parse(OkPayload(Invoke("echo", v))), nlohmann::json::parse(v));
}

TEST(GuestAbi, LogReachesHost) {
  std::vector<std::string> lines;
  HostServices services;
  services.log = [&](std::string_view l) { lines.emplace_back(l); };
  auto o = RunGuest(Load("logger"), "{}", {}, services);
  EXPECT_EQ(OkPayload(o), "null");
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0], "logger guest says hi");
}

TEST(GuestAbi, HttpShimRoundTrip) {
  HostServices services;
  std::string seen;
  services.http = [&](std::string_view req, Deadline) {
    seen = std::string(req);
    return std::string(R"({"status_code":200,"headers":{},"body":"cGluZw=="})");
  };
  auto o = RunGuest(Load("server_reply"), R"({"target_url":"http://h/x","message":"ping"})", {}, services);
  EXPECT_EQ(OkPayload(o), R"({"reply":"ping"})");
  auto req = nlohmann::json::parse(seen);
  EXPECT_EQ(req["method"], "POST");
  EXPECT_EQ(req["body"], "cGluZw==");

  services.http = [](std::string_view, Deadline) { return std::string(R"({"error":"denied"})"); };
  auto denied = RunGuest(Load("server_reply"), R"({"target_url":"http://h/x","message":"ping"})", {}, services);
  ASSERT_TRUE(std::holds_alternative<outcome::FunctionError>(denied));
  EXPECT_EQ(std::get<outcome::FunctionError>(denied).message, "denied");
}

TEST(GuestAbi, Utf8Validator) {
  EXPECT_TRUE(IsValidUtf8("plain"));
  EXPECT_TRUE(IsValidUtf8("\xc3\xa9\xf0\x9f\x98\x80"));
  EXPECT_FALSE(IsValidUtf8("\xff"));
  EXPECT_FALSE(IsValidUtf8("\xc3"));
  EXPECT_FALSE(IsValidUtf8("\xed\xa0\x80"));  // surrogate
  EXPECT_FALSE(IsValidUtf8("\xc0\x80"));      // overlong
}

}  // namespace
}  // namespace fl::abi
