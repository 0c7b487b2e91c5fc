#include "fl/common/net.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "fl/common/error.h"

namespace fl::net {

void Socket::Close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::Shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

HostPort ParseHostPort(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(ErrorCode::kInvalidArgument, "expected host:port, got '" + std::string(text) + "'");
  }
  unsigned port = 0;
  auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port > 65535) {
    throw Error(ErrorCode::kInvalidArgument, "bad port in '" + std::string(text) + "'");
  }
  return HostPort{std::string(text.substr(0, colon)), static_cast<uint16_t>(port)};
}

namespace {

sockaddr_in Resolve(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0" || host == "*") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::kIo, "cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

std::string Errno(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

Socket TcpListen(const std::string& host, uint16_t port, int backlog) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(ErrorCode::kIo, Errno("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = Resolve(host, port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw Error(ErrorCode::kIo, Errno("bind"));
  }
  if (::listen(s.fd(), backlog) != 0) throw Error(ErrorCode::kIo, Errno("listen"));
  return s;
}

Socket TcpConnect(const HostPort& target, int timeout_ms) {
  sockaddr_in addr = Resolve(target.host, target.port);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!s.valid()) throw Error(ErrorCode::kIo, Errno("socket"));
  int rc = ::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    throw Error(ErrorCode::kIo, Errno(("connect " + target.ToString()).c_str()));
  }
  if (rc != 0) {
    pollfd pfd{s.fd(), POLLOUT, 0};
    rc = ::poll(&pfd, 1, timeout_ms);
    if (rc == 0) throw Error(ErrorCode::kTimeout, "connect " + target.ToString() + ": timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (rc < 0 || err != 0) {
      errno = err;
      throw Error(ErrorCode::kIo, Errno(("connect " + target.ToString()).c_str()));
    }
  }
  int flags = ::fcntl(s.fd(), F_GETFL, 0);
  ::fcntl(s.fd(), F_SETFL, flags & ~O_NONBLOCK);
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

uint16_t LocalPort(const Socket& socket) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw Error(ErrorCode::kIo, Errno("getsockname"));
  }
  return ntohs(addr.sin_port);
}

bool SendAll(int fd, const void* data, size_t len) {
  const char* p = static_cast<const char*>(data);
  while (len > 0) {
    ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += n;
    len -= static_cast<size_t>(n);
  }
  return true;
}

bool RecvExact(int fd, void* data, size_t len) {
  char* p = static_cast<char*>(data);
  while (len > 0) {
    ssize_t n = ::recv(fd, p, len, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += n;
    len -= static_cast<size_t>(n);
  }
  return true;
}

Socket UdpSocket() {
  Socket s(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(ErrorCode::kIo, Errno("socket"));
  unsigned char ttl = 1;
  unsigned char loop = 1;
  ::setsockopt(s.fd(), IPPROTO_IP, IP_MULTICAST_TTL, &ttl, sizeof(ttl));
  ::setsockopt(s.fd(), IPPROTO_IP, IP_MULTICAST_LOOP, &loop, sizeof(loop));
  return s;
}

bool SendDatagram(const Socket& socket, const HostPort& target, std::string_view data) {
  sockaddr_in addr{};
  try {
    addr = Resolve(target.host, target.port);
  } catch (const Error&) {
    return false;
  }
  ssize_t n = ::sendto(socket.fd(), data.data(), data.size(), 0, reinterpret_cast<sockaddr*>(&addr),
                       sizeof(addr));
  return n == static_cast<ssize_t>(data.size());
}

Socket UdpListen(const std::string& host, uint16_t port, const std::string& multicast_group) {
  Socket s(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(ErrorCode::kIo, Errno("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEPORT, &one, sizeof(one));
  sockaddr_in addr = Resolve(host, port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw Error(ErrorCode::kIo, Errno("bind udp"));
  }
  if (!multicast_group.empty()) {
    ip_mreq mreq{};
    if (inet_pton(AF_INET, multicast_group.c_str(), &mreq.imr_multiaddr) != 1) {
      throw Error(ErrorCode::kInvalidArgument, "bad multicast group '" + multicast_group + "'");
    }
    mreq.imr_interface.s_addr = htonl(INADDR_ANY);
    if (::setsockopt(s.fd(), IPPROTO_IP, IP_ADD_MEMBERSHIP, &mreq, sizeof(mreq)) != 0) {
      throw Error(ErrorCode::kIo, Errno("join multicast group"));
    }
  }
  return s;
}

std::optional<std::string> RecvDatagram(const Socket& socket, int timeout_ms) {
  pollfd pfd{socket.fd(), POLLIN, 0};
  int rc = ::poll(&pfd, 1, timeout_ms);
  if (rc <= 0) return std::nullopt;
  std::string buf(2048, '\0');
  ssize_t n = ::recv(socket.fd(), buf.data(), buf.size(), 0);
  if (n < 0) return std::nullopt;
  buf.resize(static_cast<size_t>(n));
  return buf;
}

uint16_t PickFreePort() {
  Socket s = TcpListen("127.0.0.1", 0);
  return LocalPort(s);
}

}  // namespace fl::net
