#include "pgn/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "pgn/errors.hpp"

namespace pgn {

namespace {

sockaddr_in make_addr(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  require(inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1, ErrorCode::ConnectionError,
          "bad IPv4 address " + host);
  return addr;
}

}  // namespace

TcpStream::~TcpStream() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpStream::connect(const std::string& host, uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  require(fd >= 0, ErrorCode::ConnectionError, "socket: " + std::string(strerror(errno)));
  sockaddr_in addr = make_addr(host, port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string err = strerror(errno);
    ::close(fd);
    fail(ErrorCode::ConnectionError, "connect " + host + ":" + std::to_string(port) + ": " + err);
  }
  const int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<TcpStream>(fd);
}

size_t TcpStream::read_some(void* dst, size_t n) {
  for (;;) {
    const ssize_t r = ::recv(fd_, dst, n, 0);
    if (r >= 0) return static_cast<size_t>(r);
    if (errno == EINTR) continue;
    fail(ErrorCode::ConnectionError, "recv: " + std::string(strerror(errno)));
  }
}

void TcpStream::write_all(const void* src, size_t n) {
  const auto* p = static_cast<const uint8_t*>(src);
  size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::send(fd_, p + sent, n - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::ConnectionError, "send: " + std::string(strerror(errno)));
    }
    sent += static_cast<size_t>(r);
  }
}

Server::~Server() { stop(); }

void Server::start(SessionHandler handler, const std::string& host, uint16_t port) {
  handler_ = std::move(handler);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  require(listen_fd_ >= 0, ErrorCode::BindFailure, "socket: " + std::string(strerror(errno)));
  const int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = make_addr(host, port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const std::string err = strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    fail(ErrorCode::BindFailure, "bind " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener closed
    }
    const int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    sessions_.emplace_back([this, fd] {
      TcpStream stream(fd);
      try {
        handler_(stream);
      } catch (const Error&) {
        // connection-level failure ends only this session
      }
    });
  }
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (accept_thread_.joinable()) accept_thread_.join();
  for (auto& t : sessions_) t.join();
  sessions_.clear();
}

}  // namespace pgn
