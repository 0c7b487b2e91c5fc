#include "testkit.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fl/common/net.h"
#include "guest_files.h"

namespace fl::testing {

using json = nlohmann::json;

struct HttpClient::Impl {
  explicit Impl(const std::string& base) : client(base) {}
  httplib::Client client;
};

HttpClient::HttpClient(const std::string& base_url, const std::string& token)
    : impl_(std::make_unique<Impl>(base_url)) {
  if (!token.empty()) impl_->client.set_bearer_token_auth(token);
  impl_->client.set_keep_alive(true);
  impl_->client.set_connection_timeout(5);
  impl_->client.set_read_timeout(120);
}
HttpClient::~HttpClient() = default;
HttpClient::HttpClient(HttpClient&&) noexcept = default;

namespace {

HttpReply Convert(const httplib::Result& r) {
  HttpReply out;
  if (!r) {
    out.body = httplib::to_string(r.error());
    return out;
  }
  out.status = r->status;
  out.body = r->body;
  for (const auto& [k, v] : r->headers) out.headers[k] = v;
  return out;
}

}  // namespace

HttpReply HttpClient::Get(const std::string& path) { return Convert(impl_->client.Get(path)); }

HttpReply HttpClient::Post(const std::string& path, const std::string& body, const std::string& content_type,
                           const std::map<std::string, std::string>& headers) {
  httplib::Headers h(headers.begin(), headers.end());
  return Convert(impl_->client.Post(path, h, body, content_type));
}

HttpReply HttpClient::Put(const std::string& path, const std::string& body, const std::string& content_type) {
  return Convert(impl_->client.Put(path, body, content_type));
}

HttpReply HttpClient::Delete(const std::string& path) { return Convert(impl_->client.Delete(path)); }

ChildProcess::ChildProcess(std::vector<std::string> argv, const std::string& log_path) {
  int pipefd[2];
  if (pipe2(pipefd, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  pid_t parent = getpid();
  pid_ = fork();
  if (pid_ < 0) throw std::runtime_error("fork failed");
  if (pid_ == 0) {
    prctl(PR_SET_PDEATHSIG, SIGKILL);
    if (getppid() != parent) _exit(127);
    dup2(pipefd[1], STDOUT_FILENO);
    int log = open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (log >= 0) dup2(log, STDERR_FILENO);
    std::vector<char*> args;
    for (auto& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    execv(args[0], args.data());
    _exit(127);
  }
  close(pipefd[1]);
  stdout_fd_ = pipefd[0];
}

ChildProcess::~ChildProcess() {
  Terminate();
  if (stdout_fd_ >= 0) close(stdout_fd_);
}

std::map<std::string, std::string> ChildProcess::WaitReady(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string line;
  for (;;) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw std::runtime_error("process " + std::to_string(pid_) + " not ready in time");
    pollfd p{stdout_fd_, POLLIN, 0};
    if (poll(&p, 1, static_cast<int>(left.count())) <= 0) continue;
    char c;
    ssize_t n = read(stdout_fd_, &c, 1);
    if (n <= 0) throw std::runtime_error("process " + std::to_string(pid_) + " exited before ready");
    if (c != '\n') {
      line.push_back(c);
      continue;
    }
    if (line.rfind("ready", 0) != 0) {
      line.clear();
      continue;
    }
    std::map<std::string, std::string> kv;
    std::istringstream s(line.substr(5));
    std::string tok;
    while (s >> tok) {
      auto eq = tok.find('=');
      if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
  }
}

void ChildProcess::Reap(bool block) {
  if (exited_ || pid_ <= 0) return;
  int status = 0;
  if (waitpid(pid_, &status, block ? 0 : WNOHANG) == pid_) exited_ = true;
}

bool ChildProcess::running() {
  Reap(false);
  return !exited_;
}

void ChildProcess::Terminate() {
  if (!running()) return;
  kill(pid_, SIGTERM);
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (running() && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  Kill();
}

void ChildProcess::Kill() {
  if (!running()) return;
  kill(pid_, SIGKILL);
  Reap(true);
}

std::string BinPath(const std::string& name) { return std::string(FL_BIN_DIR) + "/" + name; }

std::string TempDir(const std::string& tag) {
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() /
             ("fl-" + tag + "-" + std::to_string(getpid()) + "-" + std::to_string(rd() % 1000000));
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::map<std::string, uint64_t> ParseMetrics(const std::string& text) {
  std::map<std::string, uint64_t> out;
  std::istringstream in(text);
  std::string key;
  uint64_t value;
  while (in >> key >> value) out[key] = value;
  return out;
}

bool WaitFor(const std::function<bool()>& pred, std::chrono::milliseconds timeout, std::chrono::milliseconds step) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(step);
  }
  return pred();
}

std::map<std::string, uint64_t> WorkerHandle::Counters() const {
  auto r = Metrics().Get("/metrics");
  if (r.status != 200) throw std::runtime_error("metrics unavailable: " + r.body);
  return ParseMetrics(r.body);
}

namespace {

uint16_t FreeUdpPort() {
  for (;;) {
    uint16_t p = net::PickFreePort();
    try {
      net::Socket s = net::UdpListen("127.0.0.1", p);
      return p;
    } catch (const std::exception&) {
    }
  }
}

}  // namespace

CoreHandle StartCore(const std::string& log_dir, std::vector<std::string> extra) {
  CoreHandle h;
  h.discovery_port = FreeUdpPort();
  std::vector<std::string> argv = {BinPath("flcore"),
                                   "--token",
                                   kToken,
                                   "--bind",
                                   "127.0.0.1:0",
                                   "--discovery",
                                   "127.0.0.1:" + std::to_string(h.discovery_port),
                                   "--no-multicast",
                                   "--log-level",
                                   "info"};
  argv.insert(argv.end(), extra.begin(), extra.end());
  h.proc = std::make_unique<ChildProcess>(argv, log_dir + "/core.log");
  auto kv = h.proc->WaitReady();
  h.http_port = static_cast<uint16_t>(std::stoi(kv.at("http")));
  return h;
}

WorkerHandle StartWorker(const std::string& log_dir, const std::string& core_discovery,
                         std::vector<std::string> extra) {
  static std::atomic<int> seq{0};
  WorkerHandle h;
  std::vector<std::string> argv = {BinPath("flworker"), "--no-multicast", "--announce-period-ms", "200",
                                   "--parallelism", "4", "--log-level", "info"};
  // Empty: the worker announces nowhere and must be dialed.
  if (!core_discovery.empty()) {
    argv.push_back("--core");
    argv.push_back(core_discovery);
  }
  argv.insert(argv.end(), extra.begin(), extra.end());
  h.proc = std::make_unique<ChildProcess>(argv, log_dir + "/worker" + std::to_string(seq++) + ".log");
  auto kv = h.proc->WaitReady();
  h.listen_port = static_cast<uint16_t>(std::stoi(kv.at("listen")));
  h.metrics_port = static_cast<uint16_t>(std::stoi(kv.at("metrics")));
  h.id = kv.at("id");
  return h;
}

bool WaitForWorkers(const CoreHandle& core, size_t n, std::chrono::milliseconds timeout) {
  HttpClient c = core.Client();
  return WaitFor(
      [&] {
        auto r = c.Get("/v1/admin/workers");
        if (r.status != 200) return false;
        json ws = json::parse(r.body, nullptr, false);
        size_t ready = 0;
        for (const auto& w : ws) {
          if (w["connected"].get<bool>() && w["live"].get<bool>() && w["free_memory_mb"].get<uint64_t>() > 0) ++ready;
        }
        return ready >= n;
      },
      timeout, std::chrono::milliseconds(100));
}

std::string UploadGuest(const CoreHandle& core, const std::string& module, const std::string& name,
                        const std::string& guest, uint32_t memory_mb) {
  auto r = core.Client().Post("/v1/fn/" + module + "/" + name + "?memory_mb=" + std::to_string(memory_mb),
                              GuestBytes(guest), "application/wasm");
  if (r.status != 201) throw std::runtime_error("upload " + guest + " failed: " + std::to_string(r.status) + " " + r.body);
  return r.body;
}

}  // namespace fl::testing
