#include "fl/cli/cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>

#include "fl/core/core_service.h"
#include "fl/worker/worker_service.h"
#include "guest_files.h"

namespace fl::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

// One core and one worker in this process, shared by the suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    core::CoreConfig cc;
    cc.port = 0;
    cc.token = "cli-token";
    cc.discovery = false;
    cc.multicast = false;
    core_ = new core::CoreService(cc);
    core_->Start();
    worker::WorkerConfig wc;
    wc.multicast = false;
    wc.metrics_period_ms = 200;
    worker_ = new worker::WorkerService(wc);
    worker_->Start();
    core_->ConnectWorker("127.0.0.1:" + std::to_string(worker_->listen_port()));
    for (int i = 0; i < 100; ++i) {
      auto ws = core_->Workers();
      if (!ws.empty() && ws[0].last_sample.free_memory_mb > 0) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    dir_ = fs::temp_directory_path() / ("fl-cli-" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() {
    core_->Stop();
    worker_->Stop();
    delete core_;
    delete worker_;
    fs::remove_all(dir_);
  }

  static std::string Url() { return "http://127.0.0.1:" + std::to_string(core_->http_port()); }

  Result Fl(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
    if (!env.count("FL_CORE_URL") && !env.count("none")) env["FL_CORE_URL"] = Url();
    if (!env.count("FL_TOKEN") && !env.count("none")) env["FL_TOKEN"] = "cli-token";
    env.erase("none");
    // Keep the developer's own config file out of the way.
    env["XDG_CONFIG_HOME"] = (dir_ / "xdg").string();
    EnvLookup lookup = [env](const std::string& k) -> std::optional<std::string> {
      auto it = env.find(k);
      if (it == env.end()) return std::nullopt;
      return it->second;
    };
    std::ostringstream out, err;
    int code = cli::Run(args, out, err, lookup);
    return {code, out.str(), err.str()};
  }

  static std::string Write(const std::string& name, const std::string& content) {
    fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }

  static core::CoreService* core_;
  static worker::WorkerService* worker_;
  static fs::path dir_;
};

core::CoreService* CliTest::core_ = nullptr;
worker::WorkerService* CliTest::worker_ = nullptr;
fs::path CliTest::dir_;

TEST_F(CliTest, UploadInvokeDelete) {
  std::string wasm = testing::GuestPath("hello");
  auto up = Fl({"upload", "cli", "hello", wasm, "--memory-mb", "32"});
  EXPECT_EQ(up.code, kExitOk) << up.err;
  EXPECT_EQ(up.out, "cli/hello\n");

  auto dup = Fl({"upload", "cli", "hello", wasm});
  EXPECT_EQ(dup.code, kExitPlatformError);
  EXPECT_NE(dup.err.find("already exists"), std::string::npos) << dup.err;
  EXPECT_EQ(Fl({"upload", "cli", "x", (dir_ / "missing.wasm").string()}).code, kExitUsage);

  auto inv = Fl({"invoke", "cli", "hello", R"({"name":"x"})"});
  EXPECT_EQ(inv.code, kExitOk) << inv.err;
  EXPECT_EQ(inv.out, "\"Hello x\"\n");
  EXPECT_EQ(Fl({"invoke", "cli", "hello"}).out, "\"Hello world\"\n");
  auto from_file = Fl({"invoke", "cli", "hello", "@" + Write("args.json", R"({"name":"file"})")});
  EXPECT_EQ(from_file.out, "\"Hello file\"\n");
  EXPECT_EQ(Fl({"invoke", "cli", "hello", "not-json"}).code, kExitUsage);
  EXPECT_EQ(Fl({"invoke", "cli", "missing"}).code, kExitPlatformError);

  auto fe = Fl({"invoke", "cli", "hello", R"({"name":5})"});
  EXPECT_EQ(fe.code, kExitFunctionError);
  EXPECT_NE(fe.err.find("FunctionError"), std::string::npos);

  auto js = Fl({"--json", "invoke", "cli", "hello", R"({"name":"j"})"});
  EXPECT_EQ(json::parse(js.out), json::parse(R"({"status":"ok","payload":"Hello j"})"));

  EXPECT_EQ(Fl({"update", "cli", "hello", testing::GuestPath("hello_v2")}).code, kExitOk);
  EXPECT_EQ(Fl({"invoke", "cli", "hello", R"({"name":"x"})"}).out, "\"Hi x\"\n");

  auto got = Fl({"get", "cli", "hello"});
  EXPECT_EQ(json::parse(got.out)["memory_mb"], 32);
  EXPECT_EQ(Fl({"delete", "cli", "hello"}).code, kExitOk);
  EXPECT_EQ(Fl({"delete", "cli", "hello"}).code, kExitPlatformError);
}

TEST_F(CliTest, ListAndWorkersTables) {
  std::string wasm = testing::GuestPath("echo");
  ASSERT_EQ(Fl({"upload", "tbl", "a", wasm}).code, kExitOk);
  ASSERT_EQ(Fl({"upload", "tbl", "b", wasm}).code, kExitOk);
  auto list = Fl({"list"});
  EXPECT_EQ(list.code, kExitOk);
  std::istringstream lines(list.out);
  std::string line;
  int rows = 0;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("MODULE", 0), 0u);
  while (std::getline(lines, line)) {
    if (line.rfind("tbl ", 0) == 0) ++rows;
    EXPECT_EQ(line.find_last_not_of(' '), line.size() - 1) << "trailing space";
  }
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(json::parse(Fl({"--json", "list"}).out).size(), 2u);

  auto ws = Fl({"workers"});
  EXPECT_EQ(ws.code, kExitOk);
  EXPECT_NE(ws.out.find("FREE_MB"), std::string::npos);
  EXPECT_NE(ws.out.find(worker_->id().ToHex()), std::string::npos);
  auto wj = json::parse(Fl({"--json", "workers"}).out);
  ASSERT_EQ(wj.size(), 1u);
  EXPECT_EQ(wj[0]["worker_id"], worker_->id().ToHex());
  Fl({"delete", "tbl", "a"});
  Fl({"delete", "tbl", "b"});
}

TEST_F(CliTest, SettingsPrecedence) {
  std::string cfg = Write("cfg.json", json{{"core_url", Url()}, {"token", "cli-token"}}.dump());
  // Config file alone.
  EXPECT_EQ(Fl({"--config", cfg, "list"}, {{"none", ""}}).code, kExitOk);
  // Env beats the file.
  auto bad_env = Fl({"--config", cfg, "list"}, {{"FL_TOKEN", "wrong"}, {"FL_CORE_URL", Url()}});
  EXPECT_EQ(bad_env.code, kExitPlatformError);
  EXPECT_NE(bad_env.err.find("401"), std::string::npos);
  // Flags beat env.
  EXPECT_EQ(Fl({"--config", cfg, "--token", "cli-token", "list"}, {{"FL_TOKEN", "wrong"}, {"FL_CORE_URL", Url()}}).code,
            kExitOk);
  EXPECT_EQ(Fl({"--core-url", "http://127.0.0.1:1", "list"}).code, kExitUsage);
  EXPECT_EQ(Fl({"--config", Write("broken.json", "{nope"), "list"}, {{"none", ""}}).code, kExitUsage);
  EXPECT_EQ(Fl({"bogus"}).code, kExitUsage);
  EXPECT_EQ(Fl({}).code, kExitUsage);
}

TEST_F(CliTest, ConnectReportsWorkerId) {
  auto r = Fl({"connect", "127.0.0.1:" + std::to_string(worker_->listen_port())});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, worker_->id().ToHex() + "\n");
}

}  // namespace
}  // namespace fl::cli
