#include "fl/bench/bench.h"

#include <dirent.h>
#include <signal.h>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "fl/common/clock.h"
#include "fl/common/error.h"

namespace fl::bench {

using json = nlohmann::json;

namespace {

// UTC milliseconds with sub-ms resolution, anchored once so intervals come
// from the steady clock.
class WallTimer {
 public:
  WallTimer()
      : utc0_(static_cast<double>(SystemClock::Instance().NowMs())), steady0_(std::chrono::steady_clock::now()) {}
  double Now() const {
    std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - steady0_;
    return utc0_ + d.count();
  }

 private:
  double utc0_;
  std::chrono::steady_clock::time_point steady0_;
};

std::string Fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

std::vector<LatencyRecord> RunPlan(const LoadPlan& plan, const Endpoint& core) {
  int threads = plan.mode == PlanMode::kSingleThread ? 1 : plan.threads;
  if (threads < 1 || plan.requests_per_thread < 1) {
    throw Error(ErrorCode::kInvalidArgument, "threads and requests must be positive");
  }
  {
    httplib::Client probe(core.core_url);
    probe.set_connection_timeout(3);
    probe.set_bearer_token_auth(core.token);
    if (!probe.Get("/v1/fn")) throw Error(ErrorCode::kIo, "core unreachable at " + core.core_url);
  }
  const std::string path = "/v1/invoke/" + plan.function_id.module_name + "/" + plan.function_id.function_name;
  WallTimer timer;
  std::vector<std::vector<LatencyRecord>> per_thread(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      httplib::Client client(core.core_url);
      client.set_bearer_token_auth(core.token);
      client.set_keep_alive(true);
      client.set_connection_timeout(5);
      client.set_read_timeout(plan.timeout_ms > 0 ? plan.timeout_ms / 1000 + 10 : 120);
      httplib::Headers headers;
      if (plan.timeout_ms > 0) headers.emplace("X-Fl-Timeout-Ms", std::to_string(plan.timeout_ms));
      auto& out = per_thread[t];
      out.reserve(plan.requests_per_thread);
      for (int i = 0; i < plan.requests_per_thread; ++i) {
        LatencyRecord r;
        r.thread = t;
        r.index = i;
        r.tag = "t" + std::to_string(t) + "-" + std::to_string(i);
        r.args = plan.args_for ? plan.args_for(t, i) : plan.args;
        r.start_ms = timer.Now();
        auto res = client.Post(path, headers, r.args, "application/json");
        r.end_ms = timer.Now();
        if (!res) {
          r.outcome = "transport";
          r.body = httplib::to_string(res.error());
        } else {
          r.http_status = res->status;
          json body = json::parse(res->body, nullptr, false);
          if (res->status == 200 && body.is_object() && body.value("status", "") == "ok") {
            r.outcome = "ok";
          } else if (body.is_object() && body.contains("kind") && body["kind"].is_string()) {
            r.outcome = body["kind"].get<std::string>();
          } else {
            r.outcome = "HTTP" + std::to_string(res->status);
          }
          if (plan.keep_bodies) r.body = std::move(res->body);
        }
        out.push_back(std::move(r));
      }
    });
  }
  for (auto& th : pool) th.join();
  std::vector<LatencyRecord> all;
  for (auto& v : per_thread) {
    for (auto& r : v) all.push_back(std::move(r));
  }
  return all;
}

double Percentile(const std::vector<LatencyRecord>& records, double q) {
  std::vector<double> v;
  for (const auto& r : records) {
    if (r.ok()) v.push_back(r.latency_ms());
  }
  if (v.empty()) throw Error(ErrorCode::kEmptyInput, "no successful records");
  std::sort(v.begin(), v.end());
  size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<size_t>(rank, 1, v.size()) - 1];
}

std::string EmitCdf(const std::vector<LatencyRecord>& records) {
  std::vector<double> v;
  std::map<std::string, size_t> failures;
  for (const auto& r : records) {
    if (r.ok()) {
      v.push_back(r.latency_ms());
    } else {
      ++failures[r.outcome];
    }
  }
  if (v.empty()) throw Error(ErrorCode::kEmptyInput, "no successful records to build a CDF from");
  std::sort(v.begin(), v.end());
  std::ostringstream out;
  out << "latency_ms,cumulative_fraction\n";
  for (size_t i = 0; i < v.size(); ++i) {
    double frac = i + 1 == v.size() ? 1.0 : static_cast<double>(i + 1) / static_cast<double>(v.size());
    out << Fmt(v[i]) << "," << Fmt(frac, 6) << "\n";
  }
  size_t failed = records.size() - v.size();
  out << "# total=" << records.size() << " ok=" << v.size() << " failed=" << failed;
  for (const auto& [kind, n] : failures) out << " " << kind << "=" << n;
  out << " p50=" << Fmt(Percentile(records, 0.5)) << " p95=" << Fmt(Percentile(records, 0.95))
      << " max=" << Fmt(v.back()) << "\n";
  return out.str();
}

std::string EmitRecords(const std::vector<LatencyRecord>& records) {
  std::ostringstream out;
  out << "tag,thread,index,start_ms,end_ms,latency_ms,http_status,outcome\n";
  for (const auto& r : records) {
    out << r.tag << "," << r.thread << "," << r.index << "," << Fmt(r.start_ms) << "," << Fmt(r.end_ms) << ","
        << Fmt(r.latency_ms()) << "," << r.http_status << "," << r.outcome << "\n";
  }
  return out.str();
}

// ---- memory sampling ------------------------------------------------------

uint64_t ReadRssBytes(pid_t pid) {
  std::ifstream in("/proc/" + std::to_string(pid) + "/status");
  if (!in) throw Error(ErrorCode::kUnknownProcess, "no process " + std::to_string(pid));
  std::string line;
  bool zombie = false;
  while (std::getline(in, line)) {
    if (line.rfind("State:", 0) == 0 && line.find('Z') != std::string::npos) zombie = true;
    if (line.rfind("VmRSS:", 0) == 0) {
      std::istringstream s(line.substr(6));
      uint64_t kb = 0;
      s >> kb;
      return kb * 1024;
    }
  }
  throw Error(ErrorCode::kUnknownProcess,
              "process " + std::to_string(pid) + (zombie ? " has exited" : " has no resident set"));
}

std::string ProcessName(pid_t pid) {
  std::ifstream in("/proc/" + std::to_string(pid) + "/comm");
  if (!in) throw Error(ErrorCode::kUnknownProcess, "no process " + std::to_string(pid));
  std::string name;
  std::getline(in, name);
  return name;
}

pid_t ResolveProcess(const std::string& pid_or_name) {
  if (!pid_or_name.empty() && std::all_of(pid_or_name.begin(), pid_or_name.end(), ::isdigit)) {
    pid_t pid = static_cast<pid_t>(std::stol(pid_or_name));
    ReadRssBytes(pid);
    return pid;
  }
  std::vector<pid_t> pids;
  if (DIR* d = opendir("/proc")) {
    while (dirent* e = readdir(d)) {
      std::string n = e->d_name;
      if (n.empty() || !std::all_of(n.begin(), n.end(), ::isdigit)) continue;
      pids.push_back(static_cast<pid_t>(std::stol(n)));
    }
    closedir(d);
  }
  std::sort(pids.begin(), pids.end());
  for (pid_t pid : pids) {
    try {
      if (ProcessName(pid) == pid_or_name) {
        ReadRssBytes(pid);
        return pid;
      }
    } catch (const Error&) {
    }
  }
  throw Error(ErrorCode::kUnknownProcess, "no process named '" + pid_or_name + "'");
}

std::vector<MemoryRow> SampleMemory(const std::vector<pid_t>& pids, double duration_s, double rate_hz) {
  std::map<pid_t, std::string> names;
  for (pid_t pid : pids) {
    ReadRssBytes(pid);
    names[pid] = ProcessName(pid);
  }
  std::vector<MemoryRow> rows;
  auto start = std::chrono::steady_clock::now();
  auto period = std::chrono::duration<double>(1.0 / rate_hz);
  size_t ticks = static_cast<size_t>(std::llround(duration_s * rate_hz));
  std::map<pid_t, bool> alive;
  for (pid_t pid : pids) alive[pid] = true;
  for (size_t k = 0; k < ticks; ++k) {
    std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period * k));
    double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (pid_t pid : pids) {
      if (!alive[pid]) continue;
      try {
        rows.push_back(MemoryRow{t, pid, names[pid], ReadRssBytes(pid)});
      } catch (const Error&) {
        alive[pid] = false;
      }
    }
  }
  return rows;
}

std::vector<MemoryStats> SummarizeMemory(const std::vector<MemoryRow>& rows) {
  std::map<pid_t, std::vector<const MemoryRow*>> by_pid;
  for (const auto& r : rows) by_pid[r.pid].push_back(&r);
  std::vector<MemoryStats> out;
  for (const auto& [pid, v] : by_pid) {
    MemoryStats s{pid, v.front()->name, v.size(), 0, 0};
    for (const auto* r : v) s.mean_bytes += static_cast<double>(r->rss_bytes);
    s.mean_bytes /= static_cast<double>(v.size());
    double acc = 0;
    for (const auto* r : v) acc += std::pow(static_cast<double>(r->rss_bytes) - s.mean_bytes, 2);
    s.stddev_bytes = std::sqrt(acc / static_cast<double>(v.size()));
    out.push_back(s);
  }
  return out;
}

std::string EmitMemory(const std::vector<MemoryRow>& rows) {
  std::ostringstream out;
  out << "t_s,pid,name,rss_bytes\n";
  for (const auto& r : rows) out << Fmt(r.t_s) << "," << r.pid << "," << r.name << "," << r.rss_bytes << "\n";
  for (const auto& s : SummarizeMemory(rows)) {
    out << "# pid=" << s.pid << " name=" << s.name << " samples=" << s.samples << " mean_kb=" << Fmt(s.mean_bytes / 1024, 1)
        << " stddev_kb=" << Fmt(s.stddev_bytes / 1024, 1) << "\n";
  }
  return out.str();
}

// ---- echo server ----------------------------------------------------------

EchoServer::EchoServer() : count_(std::make_shared<std::atomic<uint64_t>>(0)) {}

EchoServer::~EchoServer() { Stop(); }

uint16_t EchoServer::Start(const std::string& host, uint16_t port) {
  server_ = std::make_unique<httplib::Server>();
  server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  auto count = count_;
  auto stamp = [](httplib::Response& res) {
    res.set_header("X-Fl-Server-Ts", std::to_string(SystemClock::Instance().NowMs()));
  };
  server_->Get(".*", [count, stamp](const httplib::Request&, httplib::Response& res) {
    ++*count;
    stamp(res);
    res.set_content(std::string(kEchoGetBody), "text/plain");
  });
  server_->Post(".*", [count, stamp](const httplib::Request& req, httplib::Response& res) {
    ++*count;
    stamp(res);
    std::string type = req.get_header_value("Content-Type");
    res.set_content(req.body, type.empty() ? "application/octet-stream" : type);
  });
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(ErrorCode::kIo, "echo server cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return static_cast<uint16_t>(bound);
}

void EchoServer::Stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

uint64_t EchoServer::requests() const { return count_->load(); }

}  // namespace fl::bench
