#pragma once

#include <sys/types.h>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "fl/protocol/types.h"

namespace httplib {
class Server;
}

namespace fl::bench {

enum class PlanMode { kParallel, kSingleThread };

struct LoadPlan {
  FunctionId function_id;
  std::string args = "{}";
  // Per-request arguments; overrides `args` when set.
  std::function<std::string(int thread, int index)> args_for;
  int threads = 1;
  int requests_per_thread = 1;
  PlanMode mode = PlanMode::kParallel;
  int64_t timeout_ms = 0;  // X-Fl-Timeout-Ms when positive
  bool keep_bodies = false;
};

struct LatencyRecord {
  std::string tag;  // "t<thread>-<index>"
  int thread = 0;
  int index = 0;
  double start_ms = 0;  // UTC
  double end_ms = 0;
  int http_status = 0;  // 0: transport failure
  std::string outcome;  // "ok", "FunctionError", a platform kind, or "transport"
  std::string args;
  std::string body;  // kept only with LoadPlan::keep_bodies

  bool ok() const { return outcome == "ok"; }
  double latency_ms() const { return end_ms - start_ms; }
};

struct Endpoint {
  std::string core_url;
  std::string token;
};

// Each thread sends its requests back to back over its own keep-alive
// connection. Throws Error(kIo) only when the core is unreachable up front.
std::vector<LatencyRecord> RunPlan(const LoadPlan& plan, const Endpoint& core);

// "latency_ms,cumulative_fraction" rows over successful records, ascending,
// then a "# ..." summary footer. Throws Error(kEmptyInput) when nothing
// succeeded.
std::string EmitCdf(const std::vector<LatencyRecord>& records);
std::string EmitRecords(const std::vector<LatencyRecord>& records);

// Nearest-rank percentile of successful latencies, q in (0, 1].
double Percentile(const std::vector<LatencyRecord>& records, double q);

struct MemoryRow {
  double t_s = 0;
  pid_t pid = 0;
  std::string name;
  uint64_t rss_bytes = 0;
};

struct MemoryStats {
  pid_t pid = 0;
  std::string name;
  size_t samples = 0;
  double mean_bytes = 0;
  double stddev_bytes = 0;  // population
};

// VmRSS of a live process. Throws Error(kUnknownProcess).
uint64_t ReadRssBytes(pid_t pid);
std::string ProcessName(pid_t pid);
// Accepts a pid or a process name (first match in /proc). Throws
// Error(kUnknownProcess).
pid_t ResolveProcess(const std::string& pid_or_name);

// Samples every process once per 1/rate_hz seconds for duration_s seconds
// (duration_s * rate_hz rows per process). A process that exits mid-run
// ends its series.
std::vector<MemoryRow> SampleMemory(const std::vector<pid_t>& pids, double duration_s, double rate_hz = 1.0);
std::vector<MemoryStats> SummarizeMemory(const std::vector<MemoryRow>& rows);
std::string EmitMemory(const std::vector<MemoryRow>& rows);

// Local HTTP target for the network guests: GET answers a fixed body, POST
// echoes the request body; every reply carries X-Fl-Server-Ts.
class EchoServer {
 public:
  EchoServer();
  ~EchoServer();
  // Returns the bound port (port 0 picks one). Throws Error(kIo).
  uint16_t Start(const std::string& host, uint16_t port);
  void Stop();
  uint64_t requests() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::shared_ptr<std::atomic<uint64_t>> count_;
};

inline constexpr std::string_view kEchoGetBody = "fl-echo";

}  // namespace fl::bench
