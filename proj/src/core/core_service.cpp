#include "fl/core/core_service.h"

#include <sys/socket.h>
#include <sys/time.h>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <json.hpp>

#include "fl/abi/guest.h"
#include "fl/common/error.h"
#include "fl/protocol/announce.h"
#include "fl/protocol/codec.h"
#include "fl/wasm/module.h"

namespace fl::core {

using json = nlohmann::json;

namespace {

// Results that arrive just after the deadline still win over a bare Timeout.
constexpr int64_t kResultGraceMs = 250;
constexpr int kDialTimeoutMs = 2000;
constexpr int kHelloTimeoutMs = 5000;

void SetRecvTimeout(int fd, int ms) {
  timeval tv{ms / 1000, (ms % 1000) * 1000};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

}  // namespace

struct CoreService::Link {
  WorkerId id;
  uint64_t epoch = 0;
  std::string address;
  net::Socket socket;
  std::mutex send_mu;
};

struct CoreService::PendingCall {
  WorkerId worker;
  std::shared_ptr<Link> link;
  InvocationEnvelope envelope;
  FunctionDescriptor descriptor;
  bool code_sent = false;
  std::optional<InvocationOutcome> outcome;
  std::condition_variable cv;
};

CoreService::CoreService(CoreConfig config, const Clock& clock)
    : config_(std::move(config)),
      clock_(clock),
      store_(MakeFunctionStore(config_.store)),
      registry_(clock, config_.liveness_timeout_ms) {
  if (config_.token.empty()) throw Error(ErrorCode::kInvalidArgument, "an API token is required");
}

CoreService::~CoreService() { Stop(); }

CoreStats CoreService::stats() const {
  return CoreStats{invocations_total_.load(), nocode_total_.load(), invoke_with_code_total_.load(),
                   worker_lost_total_.load(), timeout_total_.load(), late_results_total_.load()};
}

// ---- lifecycle ------------------------------------------------------------

void CoreService::ValidateWasm(const std::string& wasm) const {
  if (wasm.size() > config_.max_wasm_bytes) {
    throw Error(ErrorCode::kInvalidWasm, "module exceeds " + std::to_string(config_.max_wasm_bytes) + " bytes");
  }
  if (!HasWasmPreamble(wasm)) throw Error(ErrorCode::kInvalidWasm, "missing wasm preamble");
  try {
    abi::ValidateExports(*wasm::CompileModule(wasm));
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidWasm, e.what());
  }
}

FunctionDescriptor CoreService::CreateFunction(const FunctionId& id, std::string wasm,
                                               std::optional<uint32_t> memory_mb) {
  if (!id.IsValid()) throw Error(ErrorCode::kInvalidArgument, "invalid function id '" + id.ToString() + "'");
  ValidateWasm(wasm);
  FunctionDescriptor d;
  {
    std::lock_guard lock(lifecycle_mu_);
    if (store_->Contains(id)) throw Error(ErrorCode::kAlreadyExists, id.ToString() + " already exists");
    int64_t now = clock_.NowMs();
    d = FunctionDescriptor{id, std::move(wasm), memory_mb.value_or(config_.default_memory_mb), now, now};
    ValidateDescriptor(d, config_.max_wasm_bytes);
    store_->Put(d);
  }
  Broadcast(msg::CreateBroadcast{d});
  spdlog::info("created {} ({} bytes, {} MiB)", id.ToString(), d.wasm_bytes.size(), d.reserved_memory_mb);
  return d;
}

FunctionDescriptor CoreService::UpdateFunction(const FunctionId& id, std::string wasm,
                                               std::optional<uint32_t> memory_mb) {
  if (!id.IsValid()) throw Error(ErrorCode::kInvalidArgument, "invalid function id '" + id.ToString() + "'");
  ValidateWasm(wasm);
  FunctionDescriptor d;
  {
    std::lock_guard lock(lifecycle_mu_);
    FunctionDescriptor prev = store_->Get(id);
    d = FunctionDescriptor{id, std::move(wasm), memory_mb.value_or(prev.reserved_memory_mb), prev.created_at,
                           std::max(clock_.NowMs(), prev.updated_at)};
    ValidateDescriptor(d, config_.max_wasm_bytes);
    store_->Put(d);
  }
  Broadcast(msg::UpdateBroadcast{d});
  spdlog::info("updated {}", id.ToString());
  return d;
}

void CoreService::DeleteFunction(const FunctionId& id) {
  {
    std::lock_guard lock(lifecycle_mu_);
    store_->Delete(id);
  }
  Broadcast(msg::DeleteBroadcast{id});
  spdlog::info("deleted {}", id.ToString());
}

FunctionDescriptor CoreService::GetFunction(const FunctionId& id) const { return store_->Get(id); }

std::vector<FunctionId> CoreService::ListFunctions() const {
  auto ids = store_->List();
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---- links ----------------------------------------------------------------

bool CoreService::SendTo(Link& link, const Message& m) {
  std::string frame = EncodeMessage(m);
  std::lock_guard lock(link.send_mu);
  return net::SendAll(link.socket.fd(), frame.data(), frame.size());
}

void CoreService::Broadcast(const Message& m) {
  std::vector<std::shared_ptr<Link>> links;
  {
    std::lock_guard lock(links_mu_);
    for (const auto& [id, l] : links_) links.push_back(l);
  }
  for (const auto& l : links) {
    if (!SendTo(*l, m)) spdlog::warn("{} to worker {} failed", MessageName(m), l->id.ToHex());
  }
}

WorkerId CoreService::ConnectWorker(const std::string& address) {
  net::HostPort target = net::ParseHostPort(address);
  auto link = std::make_shared<Link>();
  link->socket = net::TcpConnect(target, kDialTimeoutMs);
  link->address = address;

  SetRecvTimeout(link->socket.fd(), kHelloTimeoutMs);
  std::optional<std::string> frame = ReadFrame(link->socket.fd());
  if (!frame) throw Error(ErrorCode::kIo, "no hello from " + address);
  Message m = DecodeMessage(*frame);
  auto* hello = std::get_if<msg::WorkerHello>(&m);
  if (!hello) throw Error(ErrorCode::kIo, std::string("expected hello from ") + address + ", got " +
                                              std::string(MessageName(m)));
  SetRecvTimeout(link->socket.fd(), 0);
  link->id = hello->announce.worker_id;
  link->epoch = hello->announce.epoch;

  DiscoveryAnnounce a = hello->announce;
  a.listen_address = address;
  std::shared_ptr<Link> old;
  {
    std::lock_guard lock(links_mu_);
    if (!registry_.Register(a)) {
      throw Error(ErrorCode::kIo, "worker " + a.worker_id.ToHex() + " answered with a stale epoch");
    }
    if (auto it = links_.find(link->id); it != links_.end()) old = it->second;
    links_[link->id] = link;
    registry_.SetConnected(link->id, true);
    link_threads_.emplace_back([this, link] { ReadLoop(link); });
  }
  if (old) {
    spdlog::info("worker {} reconnected (epoch {} -> {})", link->id.ToHex(), old->epoch, link->epoch);
    old->socket.Shutdown();
  } else {
    spdlog::info("worker {} connected at {} (epoch {})", link->id.ToHex(), address, link->epoch);
  }
  return link->id;
}

void CoreService::ReadLoop(std::shared_ptr<Link> link) {
  for (;;) {
    Message m;
    try {
      auto frame = ReadFrame(link->socket.fd());
      if (!frame) break;
      m = DecodeMessage(*frame);
    } catch (const Error& e) {
      spdlog::error("bad frame from worker {}: {}", link->id.ToHex(), e.what());
      break;
    }
    if (auto* hb = std::get_if<msg::Heartbeat>(&m)) {
      if (hb->sample.worker_id == link->id) registry_.IngestHeartbeat(hb->sample);
    } else if (auto* r = std::get_if<msg::InvokeResult>(&m)) {
      Complete(r->correlation_id, link.get(), std::move(r->outcome));
    } else if (auto* nc = std::get_if<msg::NoCode>(&m)) {
      HandleNoCode(*nc, link);
    } else if (std::holds_alternative<msg::WorkerHello>(m)) {
      // Only the first frame carries meaning.
    } else {
      spdlog::warn("unexpected {} from worker {}", MessageName(m), link->id.ToHex());
    }
  }
  link->socket.Shutdown();

  bool current = false;
  {
    std::lock_guard lock(links_mu_);
    auto it = links_.find(link->id);
    if (it != links_.end() && it->second == link) {
      links_.erase(it);
      registry_.SetConnected(link->id, false);
      current = true;
    }
  }
  if (current) spdlog::info("worker {} disconnected", link->id.ToHex());

  std::vector<CorrelationId> lost;
  {
    std::lock_guard lock(pending_mu_);
    for (const auto& [cid, p] : pending_) {
      if (p->link == link && !p->outcome) lost.push_back(cid);
    }
  }
  for (const auto& cid : lost) {
    Complete(cid, link.get(),
             MakePlatformError(PlatformErrorKind::kWorkerLost, "connection to worker " + link->id.ToHex() + " lost"));
  }
}

void CoreService::Complete(const CorrelationId& cid, const Link* from, InvocationOutcome outcome) {
  std::lock_guard lock(pending_mu_);
  auto it = pending_.find(cid);
  if (it == pending_.end() || it->second->link.get() != from || it->second->outcome) {
    ++late_results_total_;
    return;
  }
  it->second->outcome = std::move(outcome);
  it->second->cv.notify_all();
}

void CoreService::HandleNoCode(const msg::NoCode& m, const std::shared_ptr<Link>& from) {
  ++nocode_total_;
  std::shared_ptr<PendingCall> call;
  {
    std::lock_guard lock(pending_mu_);
    auto it = pending_.find(m.correlation_id);
    if (it == pending_.end() || it->second->link != from || it->second->code_sent || it->second->outcome) {
      ++late_results_total_;
      return;
    }
    it->second->code_sent = true;
    call = it->second;
  }
  ++invoke_with_code_total_;
  if (!SendTo(*from, msg::InvokeWithCode{call->envelope, call->descriptor})) {
    spdlog::warn("InvokeWithCode to {} failed", from->id.ToHex());
  }
}

// ---- invocation -----------------------------------------------------------

InvocationOutcome CoreService::Invoke(const FunctionId& id, std::string args, std::optional<int64_t> timeout_ms) {
  if (args.size() > kMaxArgsBytes) throw Error(ErrorCode::kInvalidArgument, "arguments exceed 8 MiB");
  if (!json::accept(args)) throw Error(ErrorCode::kInvalidArgument, "arguments are not valid JSON");
  int64_t timeout = timeout_ms.value_or(config_.default_timeout_ms);
  if (timeout <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout must be positive");
  ++invocations_total_;

  FunctionDescriptor d;
  try {
    d = store_->Get(id);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotFound) throw;
    return MakePlatformError(PlatformErrorKind::kNotFound, id.ToString() + " not found");
  }

  auto call = std::make_shared<PendingCall>();
  call->envelope = InvocationEnvelope{CorrelationId::Random(), id, std::move(args), clock_.NowMs() + timeout};
  const CorrelationId cid = call->envelope.correlation_id;
  try {
    call->worker = registry_.Reserve(cid, d.reserved_memory_mb);
  } catch (const Error& e) {
    return MakePlatformError(PlatformErrorKind::kNoWorkerAvailable, e.what());
  }
  {
    std::lock_guard lock(links_mu_);
    if (auto it = links_.find(call->worker); it != links_.end()) call->link = it->second;
  }
  if (!call->link) {
    registry_.Release(cid);
    return MakePlatformError(PlatformErrorKind::kWorkerLost, "worker disconnected before dispatch");
  }
  call->descriptor = std::move(d);
  {
    std::lock_guard lock(pending_mu_);
    pending_[cid] = call;
  }
  auto finish = [&](InvocationOutcome o) {
    {
      std::lock_guard lock(pending_mu_);
      pending_.erase(cid);
    }
    registry_.Release(cid);
    if (auto* pe = std::get_if<outcome::PlatformError>(&o)) {
      if (pe->kind == PlatformErrorKind::kWorkerLost) ++worker_lost_total_;
      if (pe->kind == PlatformErrorKind::kTimeout) ++timeout_total_;
    }
    return o;
  };

  if (!SendTo(*call->link, msg::InvokeRequest{call->envelope})) {
    return finish(MakePlatformError(PlatformErrorKind::kWorkerLost, "send to worker failed"));
  }

  auto wait_until = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout + kResultGraceMs);
  std::unique_lock lock(pending_mu_);
  bool done = call->cv.wait_until(lock, wait_until, [&] { return call->outcome.has_value(); });
  InvocationOutcome result = done ? std::move(*call->outcome)
                                  : MakePlatformError(PlatformErrorKind::kTimeout,
                                                      "no result within " + std::to_string(timeout) + " ms");
  if (!done) call->outcome = result;  // later frames for this cid are dropped
  lock.unlock();
  return finish(std::move(result));
}

// ---- discovery ------------------------------------------------------------

void CoreService::OnAnnounce(const DiscoveryAnnounce& a) {
  {
    std::lock_guard lock(links_mu_);
    auto it = links_.find(a.worker_id);
    if (it != links_.end() && it->second->epoch >= a.epoch) return;
  }
  DialAsync(a.listen_address);
}

void CoreService::DialAsync(const std::string& address) {
  if (!Sleep(0)) return;
  std::lock_guard lock(links_mu_);
  if (!dialing_.insert(address).second) return;
  link_threads_.emplace_back([this, address] {
    try {
      ConnectWorker(address);
    } catch (const std::exception& e) {
      spdlog::warn("connect to {} failed: {}", address, e.what());
    }
    std::lock_guard inner(links_mu_);
    dialing_.erase(address);
  });
}

void CoreService::DiscoveryLoop() {
  net::Socket sock;
  try {
    sock = net::UdpListen(config_.discovery_host, config_.discovery_port,
                          config_.multicast ? config_.multicast_group : "");
  } catch (const Error& e) {
    spdlog::error("discovery disabled: {}", e.what());
    return;
  }
  spdlog::info("listening for announces on {}:{}{}", config_.discovery_host, config_.discovery_port,
               config_.multicast ? " (group " + config_.multicast_group + ")" : "");
  while (Sleep(0)) {
    auto datagram = net::RecvDatagram(sock, 250);
    if (!datagram) continue;
    try {
      OnAnnounce(DecodeAnnounce(*datagram));
    } catch (const Error& e) {
      spdlog::debug("ignored datagram: {}", e.what());
    }
  }
}

void CoreService::MaintenanceLoop() {
  do {
    std::set<std::string> connected;
    {
      std::lock_guard lock(links_mu_);
      for (const auto& [id, l] : links_) connected.insert(l->address);
    }
    for (const auto& addr : config_.static_workers) {
      if (!connected.contains(addr)) DialAsync(addr);
    }
  } while (Sleep(1000));
}

bool CoreService::Sleep(int64_t ms) {
  std::unique_lock lock(stop_mu_);
  return !stop_cv_.wait_for(lock, std::chrono::milliseconds(ms), [&] { return stopping_; });
}

// ---- HTTP API -------------------------------------------------------------

namespace {

json DescriptorJson(const FunctionDescriptor& d) {
  return json{{"module", d.id.module_name},      {"name", d.id.function_name},
              {"memory_mb", d.reserved_memory_mb}, {"wasm_bytes", d.wasm_bytes.size()},
              {"created_at", d.created_at},       {"updated_at", d.updated_at}};
}

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kAlreadyExists: return 409;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidWasm:
    case ErrorCode::kInvalidDescriptor:
    case ErrorCode::kOversizeMessage: return 400;
    case ErrorCode::kUnauthorized: return 401;
    case ErrorCode::kNoWorkerAvailable: return 503;
    case ErrorCode::kTimeout: return 504;
    case ErrorCode::kIo:
    case ErrorCode::kWorkerLost: return 502;
    default: return 500;
  }
}

int StatusFor(PlatformErrorKind kind) {
  switch (kind) {
    case PlatformErrorKind::kNotFound: return 404;
    case PlatformErrorKind::kNoWorkerAvailable: return 503;
    case PlatformErrorKind::kTimeout: return 504;
    default: return 502;
  }
}

void SendError(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  res.status = status;
  res.set_content(json{{"status", "error"}, {"kind", kind}, {"message", message}}.dump(-1, ' ', false,
                                                                                       json::error_handler_t::replace),
                  "application/json");
}

std::optional<uint32_t> MemoryParam(const httplib::Request& req) {
  if (!req.has_param("memory_mb")) return std::nullopt;
  std::string v = req.get_param_value("memory_mb");
  uint64_t mb = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), mb);
  if (ec != std::errc() || p != v.data() + v.size() || mb == 0 || mb > UINT32_MAX) {
    throw Error(ErrorCode::kInvalidArgument, "memory_mb must be a positive integer");
  }
  return static_cast<uint32_t>(mb);
}

FunctionId PathId(const httplib::Request& req) {
  FunctionId id{req.matches[1].str(), req.matches[2].str()};
  if (!id.IsValid()) throw Error(ErrorCode::kInvalidArgument, "invalid function id '" + id.ToString() + "'");
  return id;
}

}  // namespace

void CoreService::Start() {
  if (started_) return;
  started_ = true;
  http_ = std::make_unique<httplib::Server>();
  http_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  http_->set_payload_max_length(config_.max_wasm_bytes + 1024);

  auto guarded = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        SendError(res, StatusFor(e.code()), ErrorCodeName(e.code()), e.what());
      } catch (const std::exception& e) {
        SendError(res, 500, "Internal", e.what());
      }
    };
  };

  http_->set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Authorization") != "Bearer " + config_.token) {
      SendError(res, 401, "Unauthorized", "missing or invalid bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  const std::string fn_path = R"(/v1/fn/([^/]+)/([^/]+))";
  http_->Post(fn_path, guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto d = CreateFunction(PathId(req), req.body, MemoryParam(req));
    res.status = 201;
    res.set_content(DescriptorJson(d).dump(), "application/json");
  }));
  http_->Put(fn_path, guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto d = UpdateFunction(PathId(req), req.body, MemoryParam(req));
    res.set_content(DescriptorJson(d).dump(), "application/json");
  }));
  http_->Get(fn_path, guarded([this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(DescriptorJson(GetFunction(PathId(req))).dump(), "application/json");
  }));
  http_->Delete(fn_path, guarded([this](const httplib::Request& req, httplib::Response& res) {
    DeleteFunction(PathId(req));
    res.status = 204;
  }));
  http_->Get("/v1/fn", guarded([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& id : ListFunctions()) {
      try {
        out.push_back(DescriptorJson(GetFunction(id)));
      } catch (const Error&) {
        // deleted meanwhile
      }
    }
    res.set_content(out.dump(), "application/json");
  }));

  http_->Post(R"(/v1/invoke/([^/]+)/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::optional<int64_t> timeout;
    if (req.has_header("X-Fl-Timeout-Ms")) {
      std::string v = req.get_header_value("X-Fl-Timeout-Ms");
      int64_t ms = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), ms);
      if (ec != std::errc() || p != v.data() + v.size() || ms <= 0) {
        throw Error(ErrorCode::kInvalidArgument, "X-Fl-Timeout-Ms must be a positive integer");
      }
      timeout = ms;
    }
    std::string args = req.body.empty() ? "{}" : req.body;
    InvocationOutcome o = Invoke(PathId(req), std::move(args), timeout);
    if (auto* ok = std::get_if<outcome::Ok>(&o)) {
      res.set_content(R"({"status":"ok","payload":)" + ok->payload + "}", "application/json");
    } else if (auto* fe = std::get_if<outcome::FunctionError>(&o)) {
      SendError(res, 200, "FunctionError", fe->message);
    } else {
      const auto& pe = std::get<outcome::PlatformError>(o);
      SendError(res, StatusFor(pe.kind), PlatformErrorKindName(pe.kind), pe.message);
    }
  }));

  http_->Post("/v1/admin/connect", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("address") || !body["address"].is_string()) {
      throw Error(ErrorCode::kInvalidArgument, R"(expected {"address":"host:port"})");
    }
    WorkerId id = ConnectWorker(body["address"].get<std::string>());
    res.set_content(json{{"worker_id", id.ToHex()}}.dump(), "application/json");
  }));
  http_->Get("/v1/admin/workers", guarded([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    int64_t now = clock_.NowMs();
    for (const auto& w : Workers()) {
      out.push_back({{"worker_id", w.worker_id.ToHex()},
                     {"address", w.address},
                     {"capacity_mb", w.capacity_mb},
                     {"epoch", w.epoch},
                     {"free_memory_mb", w.last_sample.free_memory_mb},
                     {"effective_free_mb", EffectiveFree(w)},
                     {"pending_reservations_mb", w.pending_reservations_mb},
                     {"in_flight", w.last_sample.in_flight},
                     {"cache_bytes", w.last_sample.cache_bytes},
                     {"last_seen", w.last_seen},
                     {"connected", w.connected},
                     {"live", registry_.IsLive(w, now)}});
    }
    res.set_content(out.dump(), "application/json");
  }));
  http_->Get("/v1/admin/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
    CoreStats s = stats();
    res.set_content(json{{"invocations_total", s.invocations_total},
                         {"nocode_total", s.nocode_total},
                         {"invoke_with_code_total", s.invoke_with_code_total},
                         {"worker_lost_total", s.worker_lost_total},
                         {"timeout_total", s.timeout_total},
                         {"late_results_total", s.late_results_total}}
                        .dump(),
                    "application/json");
  }));

  if (config_.port == 0) {
    http_port_ = static_cast<uint16_t>(http_->bind_to_any_port(config_.bind_host));
  } else if (http_->bind_to_port(config_.bind_host, config_.port)) {
    http_port_ = config_.port;
  }
  if (http_port_ == 0) throw Error(ErrorCode::kIo, "cannot bind HTTP API on " + config_.bind_host);

  loops_.emplace_back([this] { http_->listen_after_bind(); });
  if (config_.discovery) loops_.emplace_back([this] { DiscoveryLoop(); });
  loops_.emplace_back([this] { MaintenanceLoop(); });
  spdlog::info("core API on {}:{}", config_.bind_host, http_port_);
}

void CoreService::Stop() {
  {
    std::lock_guard lock(stop_mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  stop_cv_.notify_all();
  if (!started_) return;
  if (http_) http_->stop();
  for (auto& t : loops_) {
    if (t.joinable()) t.join();
  }
  for (;;) {
    std::vector<std::thread> threads;
    {
      std::lock_guard lock(links_mu_);
      for (auto& [id, l] : links_) l->socket.Shutdown();
      threads.swap(link_threads_);
    }
    if (threads.empty()) break;
    for (auto& t : threads) {
      if (t.joinable()) t.join();
    }
  }
  std::lock_guard lock(pending_mu_);
  for (auto& [cid, p] : pending_) {
    if (!p->outcome) {
      p->outcome = MakePlatformError(PlatformErrorKind::kWorkerLost, "core shutting down");
      p->cv.notify_all();
    }
  }
}

}  // namespace fl::core
