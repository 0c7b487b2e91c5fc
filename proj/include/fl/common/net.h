#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace fl::net {

// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { Close(); }

  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      Close();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int Release() { return std::exchange(fd_, -1); }
  void Close();
  // Wakes any thread blocked in a read on this socket without closing it.
  void Shutdown();

 private:
  int fd_ = -1;
};

struct HostPort {
  std::string host;
  uint16_t port = 0;

  std::string ToString() const { return host + ":" + std::to_string(port); }
};

// Parses "host:port"; throws Error(kInvalidArgument) on malformed input.
HostPort ParseHostPort(std::string_view text);

Socket TcpListen(const std::string& host, uint16_t port, int backlog = 64);
Socket TcpConnect(const HostPort& target, int timeout_ms);
uint16_t LocalPort(const Socket& socket);

bool SendAll(int fd, const void* data, size_t len);
// False on EOF or error before `len` bytes arrive.
bool RecvExact(int fd, void* data, size_t len);

Socket UdpSocket();
// Multicast destinations get TTL 1 and loopback on.
bool SendDatagram(const Socket& socket, const HostPort& target, std::string_view data);
// Binds host:port for datagrams (SO_REUSEADDR/SO_REUSEPORT), joining
// `multicast_group` when non-empty.
Socket UdpListen(const std::string& host, uint16_t port, const std::string& multicast_group = "");
// nullopt on timeout or error.
std::optional<std::string> RecvDatagram(const Socket& socket, int timeout_ms);

// Binds 127.0.0.1:0, reads the assigned port and releases it.
uint16_t PickFreePort();

}  // namespace fl::net
