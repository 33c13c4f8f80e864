#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>

namespace pushsum::net::detail {

/// Owning TCP socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  ~Socket();

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  /// Half-closes the write side so queued data drains before the FIN.
  void shutdown_write();

  /// Writes everything or throws kPeerDisconnected / kIo.
  void send_all(std::span<const std::uint8_t> bytes) const;
  /// Reads what is available. Returns 0 on orderly shutdown.
  std::size_t receive_some(std::span<std::uint8_t> buffer) const;

 private:
  int fd_ = -1;
};

/// Bound, listening socket. Port 0 picks an ephemeral port.
Socket listen_tcp(const std::string& host, std::uint16_t port);
std::uint16_t local_port(const Socket& s);

/// Connects, retrying until `deadline`. Throws kPeerDisconnected naming
/// `what` when the peer never accepts.
Socket connect_tcp(const std::string& host, std::uint16_t port,
                   std::chrono::steady_clock::time_point deadline, const std::string& what);

/// Accepts one connection, or returns an invalid socket on timeout.
Socket accept_tcp(const Socket& listener, std::chrono::milliseconds timeout);

}  // namespace pushsum::net::detail
