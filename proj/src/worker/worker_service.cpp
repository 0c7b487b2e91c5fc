#include "fl/worker/worker_service.h"

#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fl/abi/guest.h"
#include "fl/common/error.h"
#include "fl/protocol/announce.h"
#include "fl/protocol/codec.h"

namespace fl::worker {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr size_t kRememberedIds = 16384;

std::string ReadSmallFile(const fs::path& p) {
  std::ifstream in(p);
  std::string s;
  std::getline(in, s);
  return s;
}

void WriteSmallFile(const fs::path& p, const std::string& content) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << content << "\n";
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

}  // namespace

void ValidateConfig(const WorkerConfig& c) {
  if (c.capacity_mb == 0) throw Error(ErrorCode::kInvalidArgument, "capacity_mb must be positive");
  if (c.cache_threshold_bytes > (uint64_t{c.capacity_mb} << 20)) {
    throw Error(ErrorCode::kInvalidArgument, "cache threshold exceeds capacity");
  }
  if (c.metrics_period_ms <= 0 || c.announce_period_ms <= 0 || c.beacon_period_ms <= 0 ||
      c.sweep_period_ms <= 0 || c.ttl_ms <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "periods must be positive");
  }
}

WorkerService::WorkerService(WorkerConfig config, const Clock& clock)
    : config_(std::move(config)),
      clock_(clock),
      allowlist_(config_.http_allowlist),
      cache_(config_.cache_threshold_bytes, config_.ttl_ms, clock) {
  ValidateConfig(config_);
  if (config_.parallelism == 0) config_.parallelism = std::max(1u, std::thread::hardware_concurrency());
  LoadIdentity();
}

WorkerService::~WorkerService() { Stop(); }

void WorkerService::LoadIdentity() {
  if (config_.state_dir.empty()) {
    id_ = WorkerId::Random();
    epoch_ = static_cast<uint64_t>(clock_.NowMs());
    return;
  }
  fs::path dir(config_.state_dir);
  fs::create_directories(dir);
  auto stored = WorkerId::FromHex(ReadSmallFile(dir / "worker_id"));
  if (stored) {
    id_ = *stored;
  } else {
    id_ = WorkerId::Random();
    WriteSmallFile(dir / "worker_id", id_.ToHex());
  }
  uint64_t prev = 0;
  try {
    prev = std::stoull(ReadSmallFile(dir / "epoch"));
  } catch (const std::exception&) {
  }
  epoch_ = prev + 1;
  WriteSmallFile(dir / "epoch", std::to_string(epoch_));
}

DiscoveryAnnounce WorkerService::Announce() const {
  std::string addr = config_.advertise_address;
  if (addr.empty()) addr = config_.listen_host + ":" + std::to_string(listen_port_);
  return DiscoveryAnnounce{id_, addr, config_.capacity_mb, epoch_};
}

bool WorkerService::connected() const {
  std::lock_guard lock(conn_mu_);
  return conn_ != nullptr;
}

bool WorkerService::MarkSeen(const CorrelationId& cid) {
  std::lock_guard lock(cid_mu_);
  if (!seen_.insert(cid).second) return false;
  seen_order_.push_back(cid);
  if (seen_order_.size() > kRememberedIds) {
    seen_.erase(seen_order_.front());
    seen_order_.pop_front();
  }
  return true;
}

bool WorkerService::MarkExecuted(const CorrelationId& cid) {
  std::lock_guard lock(cid_mu_);
  if (!executed_.emplace(cid, 0).second) return false;
  executed_order_.push_back(cid);
  if (executed_order_.size() > kRememberedIds) {
    executed_.erase(executed_order_.front());
    executed_order_.pop_front();
  }
  return true;
}

std::map<std::string, uint64_t> WorkerService::ExecutionCounts() const {
  std::lock_guard lock(cid_mu_);
  std::map<std::string, uint64_t> out;
  for (const auto& [cid, n] : executed_) out[cid.ToHex()] = n;
  return out;
}

void WorkerService::HandleBroadcast(const FunctionDescriptor& d) {
  ++compile_total_;
  std::shared_ptr<const wasm::CompiledModule> module;
  try {
    module = wasm::CompileModule(d.wasm_bytes);
    abi::ValidateExports(*module);
  } catch (const Error& e) {
    cache_.Erase(d.id);
    spdlog::warn("compile of {} failed, dropped: {}", d.id.ToString(), e.what());
    return;
  }
  auto r = cache_.Insert(d.id, module, module->ArtifactSize(), d.reserved_memory_mb);
  if (!r.admitted) spdlog::warn("{} larger than the cache threshold, not cached", d.id.ToString());
  for (const auto& id : r.evicted) spdlog::info("evicted {}", id.ToString());
}

void WorkerService::HandleDelete(const FunctionId& id) {
  if (cache_.Erase(id)) spdlog::info("dropped {} from cache", id.ToString());
}

std::optional<Message> WorkerService::HandleInvoke(const InvocationEnvelope& env) {
  if (!MarkSeen(env.correlation_id)) {
    spdlog::warn("duplicate request {}, ignored", env.correlation_id.ToHex());
    return std::nullopt;
  }
  auto entry = cache_.Lookup(env.function_id);
  if (!entry) {
    ++nocode_total_;
    return msg::NoCode{env.correlation_id, env.function_id};
  }
  if (!MarkExecuted(env.correlation_id)) return std::nullopt;
  return Execute(env, entry->compiled, entry->reserved_memory_mb);
}

std::optional<msg::InvokeResult> WorkerService::HandleInvokeWithCode(const InvocationEnvelope& env,
                                                                     const FunctionDescriptor& d) {
  MarkSeen(env.correlation_id);
  if (!MarkExecuted(env.correlation_id)) {
    spdlog::warn("duplicate request {}, ignored", env.correlation_id.ToHex());
    return std::nullopt;
  }
  ++compile_total_;
  std::shared_ptr<const wasm::CompiledModule> module;
  try {
    module = wasm::CompileModule(d.wasm_bytes);
    abi::ValidateExports(*module);
  } catch (const Error& e) {
    cache_.Erase(d.id);
    return msg::InvokeResult{env.correlation_id,
                             MakePlatformError(PlatformErrorKind::kInvalidWasm, e.what())};
  }
  auto r = cache_.Insert(d.id, module, module->ArtifactSize(), d.reserved_memory_mb);
  for (const auto& id : r.evicted) spdlog::info("evicted {}", id.ToString());
  return Execute(env, module, d.reserved_memory_mb);
}

msg::InvokeResult WorkerService::Execute(const InvocationEnvelope& env,
                                         std::shared_ptr<const wasm::CompiledModule> module,
                                         uint32_t reserved_mb) {
  int64_t remaining = env.deadline - clock_.NowMs();
  if (remaining <= 0) {
    return msg::InvokeResult{env.correlation_id,
                             MakePlatformError(PlatformErrorKind::kTimeout, "deadline passed before start")};
  }
  {
    std::lock_guard lock(cid_mu_);
    if (auto it = executed_.find(env.correlation_id); it != executed_.end()) ++it->second;
  }
  ++invocations_total_;
  ++in_flight_;
  reserved_in_flight_mb_ += reserved_mb;

  abi::RunOptions opts;
  opts.reserved_memory_mb = reserved_mb;
  opts.deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(remaining);
  opts.interrupt = &abort_;
  abi::HostServices services;
  services.http = [this](std::string_view request, abi::Deadline deadline) {
    return PerformHttp(request, deadline, allowlist_);
  };
  std::string tag = env.function_id.ToString();
  services.log = [&tag](std::string_view line) { spdlog::info("[{}] {}", tag, line); };

  InvocationOutcome outcome = abi::RunGuest(std::move(module), env.args, opts, services);

  reserved_in_flight_mb_ -= reserved_mb;
  --in_flight_;
  return msg::InvokeResult{env.correlation_id, std::move(outcome)};
}

MetricsSample WorkerService::TakeSample() {
  uint64_t cache_bytes = cache_.total_bytes();
  uint64_t used = reserved_in_flight_mb_.load() + (cache_bytes >> 20);
  uint64_t free = used >= config_.capacity_mb ? 0 : config_.capacity_mb - used;
  std::lock_guard lock(sample_mu_);
  last_taken_at_ = std::max(clock_.NowMs(), last_taken_at_ + 1);
  return MetricsSample{id_, free, in_flight_.load(), cache_bytes, last_taken_at_};
}

WorkerCounters WorkerService::counters() const {
  return WorkerCounters{invocations_total_.load(), nocode_total_.load(), compile_total_.load(),
                        cache_.total_bytes(), in_flight_.load()};
}

void WorkerService::Flush() { cache_.Clear(); }

void WorkerService::Send(const Message& m) {
  std::shared_ptr<Connection> conn;
  {
    std::lock_guard lock(conn_mu_);
    conn = conn_;
  }
  if (!conn) {
    spdlog::debug("no core connection, {} dropped", MessageName(m));
    return;
  }
  std::string frame = EncodeMessage(m);
  std::lock_guard lock(conn->send_mu);
  if (!net::SendAll(conn->socket.fd(), frame.data(), frame.size())) {
    spdlog::warn("send {} failed", MessageName(m));
  }
}

void WorkerService::Start() {
  if (started_) return;
  started_ = true;
  pool_ = std::make_unique<ThreadPool>(config_.parallelism);
  listener_ = net::TcpListen(config_.listen_host, config_.listen_port);
  listen_port_ = net::LocalPort(listener_);

  http_ = std::make_unique<httplib::Server>();
  http_->Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    auto c = counters();
    std::ostringstream out;
    out << "invocations_total " << c.invocations_total << "\n"
        << "nocode_total " << c.nocode_total << "\n"
        << "compile_total " << c.compile_total << "\n"
        << "cache_bytes " << c.cache_bytes << "\n"
        << "cache_entries " << cache_.size() << "\n"
        << "in_flight " << c.in_flight << "\n";
    res.set_content(out.str(), "text/plain");
  });
  http_->Get("/debug/executions", [this](const httplib::Request&, httplib::Response& res) {
    json j = json::object();
    for (const auto& [cid, n] : ExecutionCounts()) j[cid] = n;
    res.set_content(j.dump(), "application/json");
  });
  http_->Get("/debug/cache", [this](const httplib::Request&, httplib::Response& res) {
    json j = json::array();
    for (const auto& e : cache_.Snapshot()) {
      j.push_back({{"id", e.id.ToString()}, {"byte_size", e.byte_size}, {"last_activity", e.last_activity}});
    }
    res.set_content(j.dump(), "application/json");
  });
  http_->Post("/admin/flush", [this](const httplib::Request&, httplib::Response& res) {
    Flush();
    res.status = 204;
  });
  if (config_.metrics_port == 0) {
    metrics_port_ = static_cast<uint16_t>(http_->bind_to_any_port(config_.metrics_host));
  } else if (http_->bind_to_port(config_.metrics_host, config_.metrics_port)) {
    metrics_port_ = config_.metrics_port;
  }
  if (metrics_port_ == 0) throw Error(ErrorCode::kIo, "cannot bind metrics endpoint");

  loops_.emplace_back([this] { http_->listen_after_bind(); });
  loops_.emplace_back([this] { AcceptLoop(); });
  loops_.emplace_back([this] { HeartbeatLoop(); });
  loops_.emplace_back([this] { AnnounceLoop(); });
  loops_.emplace_back([this] { SweepLoop(); });
  spdlog::info("worker {} epoch {} listening on {}:{}, metrics on {}", id_.ToHex(), epoch_,
               config_.listen_host, listen_port_, metrics_port_);
}

void WorkerService::Stop() {
  {
    std::lock_guard lock(stop_mu_);
    if (stopping_ || !started_) {
      stopping_ = true;
      return;
    }
    stopping_ = true;
  }
  stop_cv_.notify_all();
  abort_ = true;
  listener_.Shutdown();
  if (http_) http_->stop();
  {
    std::lock_guard lock(conn_mu_);
    if (conn_) conn_->socket.Shutdown();
  }
  for (auto& t : loops_) {
    if (t.joinable()) t.join();
  }
  for (auto& t : readers_) {
    if (t.joinable()) t.join();
  }
  if (pool_) pool_->Shutdown();
  listener_.Close();
}

bool WorkerService::Sleep(int64_t ms) {
  std::unique_lock lock(stop_mu_);
  return !stop_cv_.wait_for(lock, std::chrono::milliseconds(ms), [&] { return stopping_; });
}

void WorkerService::AcceptLoop() {
  for (;;) {
    int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (!Sleep(0)) return;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      spdlog::warn("accept failed: {}", std::strerror(errno));
      if (!Sleep(100)) return;
      continue;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Connection>();
    conn->socket = net::Socket(fd);

    std::string hello = EncodeMessage(msg::WorkerHello{Announce()});
    std::string beat = EncodeMessage(msg::Heartbeat{TakeSample()});
    if (!net::SendAll(fd, hello.data(), hello.size()) || !net::SendAll(fd, beat.data(), beat.size())) {
      spdlog::warn("handshake with core failed");
      continue;
    }
    {
      std::lock_guard lock(conn_mu_);
      if (conn_) {
        spdlog::info("core reconnected, replacing previous connection");
        conn_->socket.Shutdown();
      }
      conn_ = conn;
    }
    spdlog::info("core connected");
    readers_.emplace_back([this, conn] { ReadLoop(conn); });
  }
}

void WorkerService::ReadLoop(std::shared_ptr<Connection> conn) {
  for (;;) {
    std::optional<std::string> frame;
    Message m;
    try {
      frame = ReadFrame(conn->socket.fd());
      if (!frame) break;
      m = DecodeMessage(*frame);
    } catch (const Error& e) {
      spdlog::error("bad frame from core, closing: {}", e.what());
      break;
    }
    if (auto* b = std::get_if<msg::CreateBroadcast>(&m)) {
      HandleBroadcast(b->descriptor);
    } else if (auto* u = std::get_if<msg::UpdateBroadcast>(&m)) {
      HandleBroadcast(u->descriptor);
    } else if (auto* d = std::get_if<msg::DeleteBroadcast>(&m)) {
      HandleDelete(d->function_id);
    } else if (auto* r = std::get_if<msg::InvokeRequest>(&m)) {
      pool_->Submit([this, env = std::move(r->envelope)] {
        if (auto reply = HandleInvoke(env)) Send(*reply);
      });
    } else if (auto* w = std::get_if<msg::InvokeWithCode>(&m)) {
      pool_->Submit([this, env = std::move(w->envelope), desc = std::move(w->descriptor)] {
        if (auto reply = HandleInvokeWithCode(env, desc)) Send(*reply);
      });
    } else {
      spdlog::warn("unexpected {} from core", MessageName(m));
    }
  }
  conn->socket.Shutdown();
  std::lock_guard lock(conn_mu_);
  if (conn_ == conn) {
    conn_.reset();
    spdlog::info("core disconnected");
  }
}

void WorkerService::HeartbeatLoop() {
  while (Sleep(config_.metrics_period_ms)) {
    if (connected()) Send(msg::Heartbeat{TakeSample()});
  }
}

void WorkerService::AnnounceLoop() {
  net::Socket sock;
  try {
    sock = net::UdpSocket();
  } catch (const Error& e) {
    spdlog::error("announce disabled: {}", e.what());
    return;
  }
  std::vector<net::HostPort> targets;
  if (config_.multicast) targets.push_back({config_.multicast_group, config_.multicast_port});
  if (!config_.core_address.empty()) {
    try {
      targets.push_back(net::ParseHostPort(config_.core_address));
    } catch (const Error& e) {
      spdlog::error("bad core address: {}", e.what());
    }
  }
  std::string datagram = EncodeAnnounce(Announce());
  auto last = std::chrono::steady_clock::time_point::min();
  const int64_t tick = std::min<int64_t>(config_.announce_period_ms, 500);
  do {
    auto now = std::chrono::steady_clock::now();
    int64_t period = connected() ? config_.beacon_period_ms : config_.announce_period_ms;
    if (last == std::chrono::steady_clock::time_point::min() ||
        now - last >= std::chrono::milliseconds(period)) {
      for (const auto& t : targets) {
        if (!net::SendDatagram(sock, t, datagram)) spdlog::debug("announce to {} failed", t.ToString());
      }
      last = now;
    }
  } while (Sleep(tick));
}

void WorkerService::SweepLoop() {
  while (Sleep(config_.sweep_period_ms)) {
    for (const auto& id : cache_.Sweep()) spdlog::info("ttl expired {}", id.ToString());
  }
}

}  // namespace fl::worker
