// Core and workers as separate processes on loopback.
#include <signal.h>

#include <gtest/gtest.h>

#include <future>
#include <json.hpp>

#include "guest_files.h"
#include "testkit.h"

namespace fl::testing {
namespace {

using nlohmann::json;
using Ms = std::chrono::milliseconds;

struct Call {
  int status = 0;
  json body;
};

Call Invoke(HttpClient& c, const std::string& fn, const json& args, int timeout_ms = 0) {
  std::map<std::string, std::string> h;
  if (timeout_ms > 0) h["X-Fl-Timeout-Ms"] = std::to_string(timeout_ms);
  auto r = c.Post("/v1/invoke/" + fn, args.dump(), "application/json", h);
  return Call{r.status, json::parse(r.body, nullptr, false)};
}

json Workers(const CoreHandle& core) { return json::parse(core.Client().Get("/v1/admin/workers").body); }

json WorkerById(const CoreHandle& core, const std::string& id) {
  for (const auto& w : Workers(core)) {
    if (w["worker_id"] == id) return w;
  }
  return nullptr;
}

class Platform : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = TempDir("integration"); }
  std::string dir_;
};

TEST_F(Platform, FunctionLifecycle) {
  CoreHandle core = StartCore(dir_);
  WorkerHandle w1 = StartWorker(dir_, core.discovery());
  WorkerHandle w2 = StartWorker(dir_, core.discovery());
  ASSERT_TRUE(WaitForWorkers(core, 2));
  HttpClient c = core.Client();

  auto created = json::parse(UploadGuest(core, "bench", "hello", "hello", 64));
  EXPECT_EQ(created["memory_mb"], 64);
  // Pushed to both workers at creation time.
  EXPECT_TRUE(WaitFor([&] { return w1.Counters()["compile_total"] == 1 && w2.Counters()["compile_total"] == 1; }, Ms(5000)));

  EXPECT_EQ(c.Post("/v1/fn/bench/hello", GuestBytes("hello"), "application/wasm").status, 409);
  EXPECT_EQ(c.Post("/v1/fn/bench/bad", "hello", "application/wasm").status, 400);
  EXPECT_EQ(HttpClient(core.url()).Post("/v1/fn/bench/x", GuestBytes("hello"), "application/wasm").status, 401);
  EXPECT_EQ(HttpClient(core.url(), "wrong").Get("/v1/fn").status, 401);
  EXPECT_EQ(Invoke(c, "bench/missing", json::object()).status, 404);

  Call hi = Invoke(c, "bench/hello", {{"name", "x"}});
  EXPECT_EQ(hi.status, 200);
  EXPECT_EQ(hi.body, json::parse(R"({"status":"ok","payload":"Hello x"})"));
  Call fe = Invoke(c, "bench/hello", {{"name", 5}});
  EXPECT_EQ(fe.status, 200);
  EXPECT_EQ(fe.body["kind"], "FunctionError");
  EXPECT_EQ(w1.Counters()["nocode_total"] + w2.Counters()["nocode_total"], 0u);

  // New code reaches every worker: no stale cache anywhere.
  auto r = c.Put("/v1/fn/bench/hello", GuestBytes("hello_v2"));
  EXPECT_EQ(r.status, 200);
  for (int i = 0; i < 12; ++i) {
    ASSERT_EQ(Invoke(c, "bench/hello", {{"name", "x"}}).body["payload"], "Hi x") << i;
  }
  // Both workers compiled the new binary from the update broadcast.
  EXPECT_TRUE(WaitFor([&] { return w1.Counters()["compile_total"] == 2 && w2.Counters()["compile_total"] == 2; }, Ms(5000)));
  EXPECT_EQ(w1.Counters()["nocode_total"] + w2.Counters()["nocode_total"], 0u);
  EXPECT_EQ(c.Put("/v1/fn/bench/nothere", GuestBytes("hello")).status, 404);

  UploadGuest(core, "bench", "other", "echo");
  auto list = json::parse(c.Get("/v1/fn").body);
  std::set<std::string> names;
  for (const auto& f : list) names.insert(f["module"].get<std::string>() + "/" + f["name"].get<std::string>());
  EXPECT_EQ(names, (std::set<std::string>{"bench/hello", "bench/other"}));
  EXPECT_FALSE(json::parse(c.Get("/v1/fn/bench/hello").body).contains("wasm"));

  EXPECT_EQ(c.Delete("/v1/fn/bench/hello").status, 204);
  EXPECT_EQ(c.Delete("/v1/fn/bench/hello").status, 404);
  Call gone = Invoke(c, "bench/hello", json::object());
  EXPECT_EQ(gone.status, 404);
  EXPECT_EQ(gone.body["kind"], "NotFound");
}

TEST_F(Platform, AdmissionAndTimeouts) {
  CoreHandle core = StartCore(dir_);
  WorkerHandle w = StartWorker(dir_, core.discovery(), {"--capacity-mb", "128", "--cache-threshold-bytes", "33554432"});
  ASSERT_TRUE(WaitForWorkers(core, 1));
  HttpClient c = core.Client();

  UploadGuest(core, "t", "big", "hello", 256);
  Call none = Invoke(c, "t/big", json::object());
  EXPECT_EQ(none.status, 503);
  EXPECT_EQ(none.body["kind"], "NoWorkerAvailable");

  UploadGuest(core, "t", "sleep", "sleep", 16);
  auto start = std::chrono::steady_clock::now();
  Call slow = Invoke(c, "t/sleep", json::object(), 1000);
  auto took = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(slow.status, 504);
  EXPECT_EQ(slow.body["kind"], "Timeout");
  EXPECT_LT(took, Ms(2500));
  EXPECT_EQ(c.Post("/v1/invoke/t/sleep", "{}", "application/json", {{"X-Fl-Timeout-Ms", "-5"}}).status, 400);
  EXPECT_EQ(c.Post("/v1/invoke/t/sleep", "not json").status, 400);
}

TEST_F(Platform, ParallelSleeps) {
  CoreHandle core = StartCore(dir_);
  WorkerHandle w = StartWorker(dir_, core.discovery());
  ASSERT_TRUE(WaitForWorkers(core, 1));
  UploadGuest(core, "t", "sleep", "sleep", 16);
  auto start = std::chrono::steady_clock::now();
  std::vector<std::future<Call>> calls;
  for (int i = 0; i < 4; ++i) {
    calls.push_back(std::async(std::launch::async, [&] {
      HttpClient c = core.Client();
      return Invoke(c, "t/sleep", json::object());
    }));
  }
  for (auto& f : calls) {
    Call r = f.get();
    EXPECT_EQ(r.body, json::parse(R"({"status":"ok","payload":"Slept for 3 seconds"})"));
  }
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_GE(s, 3.0);
  EXPECT_LE(s, 4.5);
}

TEST_F(Platform, WorkerLossAndRestart) {
  CoreHandle core = StartCore(dir_);
  std::string state = dir_ + "/wstate";
  auto w = std::make_unique<WorkerHandle>(StartWorker(dir_, core.discovery(), {"--state-dir", state}));
  ASSERT_TRUE(WaitForWorkers(core, 1));
  uint64_t epoch1 = WorkerById(core, w->id)["epoch"];
  UploadGuest(core, "t", "sleep", "sleep", 16);
  UploadGuest(core, "t", "hello", "hello", 16);

  auto pending = std::async(std::launch::async, [&] {
    HttpClient c = core.Client();
    return Invoke(c, "t/sleep", json::object());
  });
  std::this_thread::sleep_for(Ms(700));
  w->proc->Kill();
  Call lost = pending.get();
  EXPECT_EQ(lost.status, 502);
  EXPECT_EQ(lost.body["kind"], "WorkerLost");

  std::string old_id = w->id;
  w = std::make_unique<WorkerHandle>(StartWorker(dir_, core.discovery(), {"--state-dir", state}));
  EXPECT_EQ(w->id, old_id);
  ASSERT_TRUE(WaitFor([&] {
    json rec = WorkerById(core, old_id);
    return rec.is_object() && rec["epoch"].get<uint64_t>() == epoch1 + 1 && rec["connected"].get<bool>() &&
           rec["free_memory_mb"].get<uint64_t>() > 0;
  }, Ms(10000)));
  EXPECT_EQ(Workers(core).size(), 1u);
  // The new incarnation has an empty cache: the no-code path serves it.
  HttpClient c = core.Client();
  EXPECT_EQ(Invoke(c, "t/hello", {{"name", "again"}}).body["payload"], "Hello again");
  EXPECT_EQ(w->Counters()["nocode_total"], 1u);
}

TEST_F(Platform, StaticWorkerList) {
  WorkerHandle w1 = StartWorker(dir_, "");
  WorkerHandle w2 = StartWorker(dir_, "");
  CoreHandle core = StartCore(dir_, {"--no-discovery", "--static-worker", w1.address(), "--static-worker", w2.address()});
  ASSERT_TRUE(WaitForWorkers(core, 2));
  UploadGuest(core, "t", "hello", "hello");
  HttpClient c = core.Client();
  EXPECT_EQ(Invoke(c, "t/hello", json::object()).body["payload"], "Hello world");
}

TEST_F(Platform, ManualConnect) {
  WorkerHandle w = StartWorker(dir_, "");
  CoreHandle core = StartCore(dir_, {"--no-discovery"});
  HttpClient c = core.Client();
  EXPECT_TRUE(Workers(core).empty());
  auto r = c.Post("/v1/admin/connect", json{{"address", w.address()}}.dump());
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)["worker_id"], w.id);
  EXPECT_TRUE(WaitForWorkers(core, 1));
  EXPECT_EQ(c.Post("/v1/admin/connect", R"({"addr":1})").status, 400);
  EXPECT_EQ(c.Post("/v1/admin/connect", json{{"address", "127.0.0.1:1"}}.dump()).status, 502);
}

TEST_F(Platform, MulticastDiscovery) {
  // Private group and port so parallel runs do not see each other.
  uint16_t port = static_cast<uint16_t>(20000 + (::getpid() % 20000));
  std::string group = "239.77.76." + std::to_string(100 + ::getpid() % 100);
  CoreHandle core;
  core.proc = std::make_unique<ChildProcess>(
      std::vector<std::string>{BinPath("flcore"), "--token", kToken, "--bind", "127.0.0.1:0", "--discovery",
                               "0.0.0.0:" + std::to_string(port), "--multicast-group", group},
      dir_ + "/mcore.log");
  core.http_port = static_cast<uint16_t>(std::stoi(core.proc->WaitReady().at("http")));
  ChildProcess worker({BinPath("flworker"), "--multicast-group", group, "--multicast-port", std::to_string(port),
                       "--announce-period-ms", "300"},
                      dir_ + "/mworker.log");
  worker.WaitReady();
  // Two announce periods plus slack for the dial and first heartbeat.
  EXPECT_TRUE(WaitForWorkers(core, 1, Ms(3000)));
}

TEST_F(Platform, StoreSurvivesCoreRestart) {
  std::string store = dir_ + "/store";
  auto core = std::make_unique<CoreHandle>(StartCore(dir_, {"--store-dir", store}));
  std::string disc = core->discovery();
  UploadGuest(*core, "keep", "hello", "hello", 32);
  core.reset();  // SIGTERM

  core = std::make_unique<CoreHandle>(StartCore(dir_, {"--store-dir", store}));
  HttpClient c = core->Client();
  auto got = c.Get("/v1/fn/keep/hello");
  ASSERT_EQ(got.status, 200);
  EXPECT_EQ(json::parse(got.body)["memory_mb"], 32);
  WorkerHandle w = StartWorker(dir_, core->discovery());
  ASSERT_TRUE(WaitForWorkers(*core, 1));
  EXPECT_EQ(Invoke(c, "keep/hello", {{"name", "disk"}}).body["payload"], "Hello disk");
}

TEST_F(Platform, SilentWorkerExcluded) {
  CoreHandle core = StartCore(dir_, {"--liveness-timeout-ms", "1500"});
  WorkerHandle a = StartWorker(dir_, core.discovery(), {"--metrics-period-ms", "300", "--capacity-mb", "2048"});
  WorkerHandle b = StartWorker(dir_, core.discovery(), {"--metrics-period-ms", "300", "--capacity-mb", "512", "--cache-threshold-bytes", "33554432"});
  ASSERT_TRUE(WaitForWorkers(core, 2));
  UploadGuest(core, "t", "hello", "hello");
  HttpClient c = core.Client();

  ::kill(a.proc->pid(), SIGSTOP);
  ASSERT_TRUE(WaitFor([&] { return !WorkerById(core, a.id)["live"].get<bool>(); }, Ms(5000)));
  // Everything lands on b although a reported more free memory.
  uint64_t before = b.Counters()["invocations_total"];
  for (int i = 0; i < 10; ++i) ASSERT_EQ(Invoke(c, "t/hello", json::object(), 3000).status, 200);
  EXPECT_EQ(b.Counters()["invocations_total"], before + 10);
  ::kill(a.proc->pid(), SIGCONT);
  EXPECT_TRUE(WaitFor([&] { return WorkerById(core, a.id)["live"].get<bool>(); }, Ms(5000)));
}

}  // namespace
}  // namespace fl::testing
