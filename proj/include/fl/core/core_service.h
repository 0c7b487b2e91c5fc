#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "fl/common/clock.h"
#include "fl/common/net.h"
#include "fl/core/registry.h"
#include "fl/protocol/message.h"
#include "fl/store/function_store.h"

namespace httplib {
class Server;
}

namespace fl::core {

struct CoreConfig {
  std::string bind_host = "127.0.0.1";
  uint16_t port = 8080;  // 0: pick a free port
  std::string token;
  int64_t liveness_timeout_ms = 15'000;
  int64_t default_timeout_ms = 60'000;
  uint32_t default_memory_mb = 128;
  size_t max_wasm_bytes = kDefaultMaxWasmBytes;
  // Announce reception. The socket is bound to discovery_host:discovery_port
  // and joins the group when multicast is on, so unicast announces to that
  // port work either way.
  bool multicast = true;
  std::string multicast_group = "239.77.76.83";
  std::string discovery_host = "0.0.0.0";
  uint16_t discovery_port = 7856;
  bool discovery = true;
  std::vector<std::string> static_workers;
  StoreConfig store;
};

struct CoreStats {
  uint64_t invocations_total = 0;
  uint64_t nocode_total = 0;
  uint64_t invoke_with_code_total = 0;
  uint64_t worker_lost_total = 0;
  uint64_t timeout_total = 0;
  uint64_t late_results_total = 0;
};

class CoreService {
 public:
  explicit CoreService(CoreConfig config, const Clock& clock = SystemClock::Instance());
  ~CoreService();

  CoreService(const CoreService&) = delete;
  CoreService& operator=(const CoreService&) = delete;

  void Start();
  void Stop();
  uint16_t http_port() const { return http_port_; }

  // Lifecycle. Throw Error(kAlreadyExists / kNotFound / kInvalidWasm /
  // kInvalidArgument / kStorageUnavailable).
  FunctionDescriptor CreateFunction(const FunctionId& id, std::string wasm,
                                    std::optional<uint32_t> memory_mb);
  FunctionDescriptor UpdateFunction(const FunctionId& id, std::string wasm,
                                    std::optional<uint32_t> memory_mb);
  void DeleteFunction(const FunctionId& id);
  FunctionDescriptor GetFunction(const FunctionId& id) const;
  std::vector<FunctionId> ListFunctions() const;

  // Throws Error(kInvalidArgument) for bad args or timeout; everything else
  // comes back as an outcome. Never retries on another worker.
  InvocationOutcome Invoke(const FunctionId& id, std::string args,
                           std::optional<int64_t> timeout_ms = std::nullopt);

  // Dials a worker and waits for its hello. Throws Error(kIo / kTimeout).
  WorkerId ConnectWorker(const std::string& address);
  void OnAnnounce(const DiscoveryAnnounce& a);

  std::vector<WorkerRecord> Workers() const { return registry_.Snapshot(); }
  bool IsLive(const WorkerRecord& w) const { return registry_.IsLive(w, clock_.NowMs()); }
  CoreStats stats() const;
  WorkerRegistry& registry() { return registry_; }

 private:
  struct Link;
  struct PendingCall;

  void ValidateWasm(const std::string& wasm) const;
  void Broadcast(const Message& m);
  bool SendTo(Link& link, const Message& m);
  void ReadLoop(std::shared_ptr<Link> link);
  void Complete(const CorrelationId& cid, const Link* from, InvocationOutcome outcome);
  void HandleNoCode(const msg::NoCode& m, const std::shared_ptr<Link>& from);
  void DialAsync(const std::string& address);
  void DiscoveryLoop();
  void MaintenanceLoop();
  bool Sleep(int64_t ms);

  CoreConfig config_;
  const Clock& clock_;
  std::unique_ptr<FunctionStore> store_;
  std::mutex lifecycle_mu_;
  WorkerRegistry registry_;

  mutable std::mutex links_mu_;
  std::map<WorkerId, std::shared_ptr<Link>> links_;
  std::set<std::string> dialing_;
  std::vector<std::thread> link_threads_;

  std::mutex pending_mu_;
  std::unordered_map<CorrelationId, std::shared_ptr<PendingCall>, Id128Hash> pending_;

  std::atomic<uint64_t> invocations_total_{0};
  std::atomic<uint64_t> nocode_total_{0};
  std::atomic<uint64_t> invoke_with_code_total_{0};
  std::atomic<uint64_t> worker_lost_total_{0};
  std::atomic<uint64_t> timeout_total_{0};
  std::atomic<uint64_t> late_results_total_{0};

  std::unique_ptr<httplib::Server> http_;
  uint16_t http_port_ = 0;
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
  bool started_ = false;
  std::vector<std::thread> loops_;
};

}  // namespace fl::core
