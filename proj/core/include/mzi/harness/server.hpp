#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "mzi/harness/session.hpp"

namespace mzi::harness {

/// Websocket front end for SessionManager: every text frame is one protocol
/// message, replies go back on the same connection in order.
class SessionServer {
 public:
  /// Binds immediately; port 0 picks a free port.
  SessionServer(SessionManager& sessions, const std::string& address, std::uint16_t port);
  ~SessionServer();

  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  std::uint16_t port() const;

  /// Starts accepting on `threads` I/O threads and returns.
  void start(int threads = 1);
  /// Blocks until SIGINT or SIGTERM, then stops.
  void wait_for_shutdown_signal();
  /// Closes the listener and every connection; the server cannot restart.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mzi::harness
