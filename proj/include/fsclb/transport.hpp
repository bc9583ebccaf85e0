#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "fsclb/protocol.hpp"

namespace fsclb {

// Anything that can answer a request frame with a reply frame.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual Frame handle_frame(const Frame& request) = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual Frame roundtrip(const Frame& request) = 0;
};

// Synchronous in-process call; deterministic, zero loss.
class InprocTransport : public Transport {
 public:
  explicit InprocTransport(Endpoint& endpoint) : endpoint_(endpoint) {}
  Frame roundtrip(const Frame& request) override {
    return endpoint_.handle_frame(request);
  }

 private:
  Endpoint& endpoint_;
};

// Blocking request/response over a single TCP connection. Wire format:
// 4-byte big-endian frame length, then the frame. Any I/O failure throws
// TransportError; the run aborts, there are no retries.
class TcpClientTransport : public Transport {
 public:
  TcpClientTransport(const std::string& host, std::uint16_t port);
  ~TcpClientTransport() override;
  TcpClientTransport(const TcpClientTransport&) = delete;
  TcpClientTransport& operator=(const TcpClientTransport&) = delete;

  Frame roundtrip(const Frame& request) override;

 private:
  int fd_ = -1;
};

// Accept loop feeding frames into an Endpoint, one request in flight at a
// time. Clients are served sequentially; a kShutdown frame stops the loop.
class TcpServer {
 public:
  // port 0 binds an ephemeral port; the bound port is available right after
  // construction.
  TcpServer(Endpoint& endpoint, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void start();  // spawns the accept loop
  void run();    // accept loop in the calling thread
  void stop();

 private:
  void serve_connection(int fd);

  Endpoint& endpoint_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

}  // namespace fsclb
