#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "pgn/wire.hpp"

// Blocking TCP transport; the protocol logic lives behind ByteStream so the
// same session handler runs over sockets and in-memory pipes.

namespace pgn {

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  static std::unique_ptr<TcpStream> connect(const std::string& host, uint16_t port);

  size_t read_some(void* dst, size_t n) override;
  void write_all(const void* src, size_t n) override;

 private:
  int fd_;
};

// Accept loop on its own thread, one thread per connection, all joined on
// stop(). The session handler owns the request/response loop.
class Server {
 public:
  using SessionHandler = std::function<void(ByteStream&)>;

  Server() = default;
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // port 0 picks an ephemeral port
  void start(SessionHandler handler, const std::string& host, uint16_t port);
  uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();

  SessionHandler handler_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::vector<std::thread> sessions_;
};

}  // namespace pgn
