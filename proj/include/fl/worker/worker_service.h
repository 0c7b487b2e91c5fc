#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fl/common/clock.h"
#include "fl/common/net.h"
#include "fl/common/thread_pool.h"
#include "fl/protocol/message.h"
#include "fl/worker/host_http.h"
#include "fl/worker/module_cache.h"

namespace httplib {
class Server;
}

namespace fl::worker {

struct WorkerConfig {
  // Holds worker_id and epoch across restarts. Empty: fresh identity.
  std::string state_dir;
  std::string listen_host = "127.0.0.1";
  uint16_t listen_port = 0;
  // Address put in announces; defaults to listen_host:listen_port.
  std::string advertise_address;
  std::string metrics_host = "127.0.0.1";
  uint16_t metrics_port = 0;
  uint32_t capacity_mb = 1024;
  uint64_t cache_threshold_bytes = uint64_t{256} << 20;
  int64_t ttl_ms = 2'700'000;
  int64_t metrics_period_ms = 5000;
  int64_t announce_period_ms = 3000;
  int64_t beacon_period_ms = 30'000;
  int64_t sweep_period_ms = 60'000;
  // Unicast announce target, in addition to (or instead of) multicast.
  std::string core_address;
  bool multicast = true;
  std::string multicast_group = "239.77.76.83";
  uint16_t multicast_port = 7856;
  std::vector<std::string> http_allowlist{"*"};
  uint32_t parallelism = 0;  // 0: number of CPUs
};

// Throws Error(kInvalidArgument).
void ValidateConfig(const WorkerConfig& config);

struct WorkerCounters {
  uint64_t invocations_total = 0;
  uint64_t nocode_total = 0;
  uint64_t compile_total = 0;
  uint64_t cache_bytes = 0;
  uint32_t in_flight = 0;
};

class WorkerService {
 public:
  explicit WorkerService(WorkerConfig config, const Clock& clock = SystemClock::Instance());
  ~WorkerService();

  WorkerService(const WorkerService&) = delete;
  WorkerService& operator=(const WorkerService&) = delete;

  // Binds the listener and metrics endpoint, starts the periodic loops.
  void Start();
  void Stop();

  const WorkerId& id() const { return id_; }
  uint64_t epoch() const { return epoch_; }
  uint16_t listen_port() const { return listen_port_; }
  uint16_t metrics_port() const { return metrics_port_; }
  DiscoveryAnnounce Announce() const;
  bool connected() const;

  // Message handlers, callable without the network layer. An empty optional
  // means no reply is sent (duplicate correlation id).
  void HandleBroadcast(const FunctionDescriptor& d);
  void HandleDelete(const FunctionId& id);
  std::optional<Message> HandleInvoke(const InvocationEnvelope& env);
  std::optional<msg::InvokeResult> HandleInvokeWithCode(const InvocationEnvelope& env,
                                                        const FunctionDescriptor& d);

  MetricsSample TakeSample();
  WorkerCounters counters() const;
  std::map<std::string, uint64_t> ExecutionCounts() const;
  ModuleCache& cache() { return cache_; }
  void Flush();

 private:
  struct Connection {
    net::Socket socket;
    std::mutex send_mu;
  };

  void LoadIdentity();
  msg::InvokeResult Execute(const InvocationEnvelope& env, std::shared_ptr<const wasm::CompiledModule> module,
                            uint32_t reserved_mb);
  bool MarkSeen(const CorrelationId& cid);
  bool MarkExecuted(const CorrelationId& cid);
  void Send(const Message& m);

  void AcceptLoop();
  void ReadLoop(std::shared_ptr<Connection> conn);
  void HeartbeatLoop();
  void AnnounceLoop();
  void SweepLoop();
  // Waits up to ms; false once stopping.
  bool Sleep(int64_t ms);

  WorkerConfig config_;
  const Clock& clock_;
  WorkerId id_;
  uint64_t epoch_ = 1;
  HttpAllowlist allowlist_;
  ModuleCache cache_;

  std::atomic<uint64_t> invocations_total_{0};
  std::atomic<uint64_t> nocode_total_{0};
  std::atomic<uint64_t> compile_total_{0};
  std::atomic<uint32_t> in_flight_{0};
  std::atomic<uint64_t> reserved_in_flight_mb_{0};
  std::mutex sample_mu_;
  int64_t last_taken_at_ = 0;

  // Bounded memory of correlation ids: requests seen and guests run.
  mutable std::mutex cid_mu_;
  std::unordered_set<CorrelationId, Id128Hash> seen_;
  std::deque<CorrelationId> seen_order_;
  std::unordered_map<CorrelationId, uint64_t, Id128Hash> executed_;
  std::deque<CorrelationId> executed_order_;

  mutable std::mutex conn_mu_;
  std::shared_ptr<Connection> conn_;
  std::vector<std::thread> readers_;

  net::Socket listener_;
  uint16_t listen_port_ = 0;
  uint16_t metrics_port_ = 0;
  std::unique_ptr<httplib::Server> http_;
  std::unique_ptr<ThreadPool> pool_;

  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
  // Interrupts running guests on Stop().
  std::atomic<bool> abort_{false};
  bool started_ = false;
  std::vector<std::thread> loops_;
};

}  // namespace fl::worker
