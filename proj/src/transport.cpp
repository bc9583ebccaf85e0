#include "fsclb/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "fsclb/errors.hpp"

namespace fsclb {

namespace {

constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 30;

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send failed: ") + std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Returns false on a clean EOF at a frame boundary.
bool read_all(int fd, std::uint8_t* data, std::size_t n, bool eof_ok) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, data + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("recv failed: ") + std::strerror(errno));
    }
    if (r == 0) {
      if (got == 0 && eof_ok) return false;
      throw TransportError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void send_frame(int fd, const Frame& frame) {
  std::uint8_t len[4];
  const auto n = static_cast<std::uint32_t>(frame.size());
  len[0] = static_cast<std::uint8_t>(n >> 24);
  len[1] = static_cast<std::uint8_t>(n >> 16);
  len[2] = static_cast<std::uint8_t>(n >> 8);
  len[3] = static_cast<std::uint8_t>(n);
  write_all(fd, len, 4);
  write_all(fd, frame.data(), frame.size());
}

bool recv_frame(int fd, Frame& frame, bool eof_ok) {
  std::uint8_t len[4];
  if (!read_all(fd, len, 4, eof_ok)) return false;
  const std::size_t n = (std::size_t{len[0]} << 24) | (std::size_t{len[1]} << 16) |
                        (std::size_t{len[2]} << 8) | std::size_t{len[3]};
  if (n > kMaxFrameBytes) throw TransportError("frame too large");
  frame.resize(n);
  read_all(fd, frame.data(), n, false);
  return true;
}

}  // namespace

TcpClientTransport::TcpClientTransport(const std::string& host,
                                       std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    fd_ = -1;
    throw TransportError("bad host address: " + host);
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw TransportError(std::string("connect failed: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpClientTransport::~TcpClientTransport() {
  if (fd_ >= 0) ::close(fd_);
}

Frame TcpClientTransport::roundtrip(const Frame& request) {
  send_frame(fd_, request);
  Frame reply;
  if (!recv_frame(fd_, reply, false)) {
    throw TransportError("server closed connection");
  }
  return reply;
}

TcpServer::TcpServer(Endpoint& endpoint, std::uint16_t port)
    : endpoint_(endpoint) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd_);
    throw TransportError(std::string("bind failed: ") + std::strerror(errno));
  }
  if (::listen(listen_fd_, 8) != 0) {
    ::close(listen_fd_);
    throw TransportError(std::string("listen failed: ") + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  if (thread_.joinable()) thread_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start() {
  thread_ = std::thread([this] { run(); });
}

void TcpServer::run() {
  while (!stopping_.load()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listen socket closed by stop()
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    serve_connection(fd);
    ::close(fd);
  }
}

void TcpServer::serve_connection(int fd) {
  Frame request;
  while (!stopping_.load()) {
    try {
      if (!recv_frame(fd, request, true)) return;  // client done
      const Frame reply = endpoint_.handle_frame(request);
      send_frame(fd, reply);
      if (frame_type_of(request) == frame_type::kShutdown) {
        stopping_.store(true);
        return;
      }
    } catch (const TransportError&) {
      return;  // drop the connection, keep serving
    } catch (const Error&) {
      return;  // malformed frame: close, client sees a transport error
    }
  }
}

void TcpServer::stop() {
  stopping_.store(true);
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
}

}  // namespace fsclb
