#pragma once

#include "prosim/session.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace prosim
{

/// WebSocket front end for one live session. One operator client at a time;
/// a new connection replaces the old one. Snapshots go out at the display
/// rate, also while idle or paused so a fresh client sees the scene at once.
class LiveServer
{
public:
  explicit LiveServer(SessionConfig config);
  ~LiveServer();
  LiveServer(const LiveServer&) = delete;
  LiveServer& operator=(const LiveServer&) = delete;

  /// Binds the configured address (port 0 picks a free port). Throws on failure.
  void bind();
  /// Bound port, valid after bind().
  std::uint16_t port() const;

  /// Serves until stop(). Calls bind() if needed.
  void run();
  /// Thread-safe; run() returns shortly after.
  void stop();

  Session& session();

private:
  struct Impl;
  friend class Connection;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prosim
