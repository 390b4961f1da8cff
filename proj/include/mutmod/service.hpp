#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mutmod/decision.hpp"
#include "mutmod/document.hpp"
#include "mutmod/scenario.hpp"
#include "mutmod/trace.hpp"

namespace mutmod {

inline constexpr std::string_view kProtocolVersion = "1";
inline constexpr std::size_t kDefaultSessionQueue = 1024;

/// Bounded FIFO of outgoing frames for one session.
class SessionOutbox {
 public:
  explicit SessionOutbox(std::size_t capacity = kDefaultSessionQueue) : capacity_(capacity) {}

  /// False (and the outbox is marked overflowed) when full.
  bool push(std::string frame);
  const std::string& front() const { return frames_.front(); }
  void pop() { frames_.pop_front(); }
  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  bool overflowed() const { return overflowed_; }

 private:
  std::size_t capacity_;
  std::deque<std::string> frames_;
  bool overflowed_ = false;
};

/// Subscription pattern: "all", "[chain]" / "[chain].*" (every variable of one
/// model) or an exact "[chain].variable".
bool pattern_matches(std::string_view pattern, const SlotKey& slot);

/// Translates one trace record into zero or more server frames
/// (type, body). Stateful: a proposal record is held until its routing
/// disposition arrives.
class FrameMapper {
 public:
  struct Frame {
    std::string type;
    json body;
    std::optional<SlotKey> slot;  // set for per-variable frames
  };

  std::vector<Frame> map(const json& record);

 private:
  std::optional<json> held_proposal_;
};

struct ServiceOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  std::size_t session_queue = kDefaultSessionQueue;
  // Replay timeline entries at their virtual time measured from start().
  bool pace = true;
};

class Session;

/// Websocket boundary around one engine. Connections are handled on an I/O
/// thread; every command is serialized onto a single engine thread, which also
/// replays the scenario timeline and produces the broadcasts.
class Service {
 public:
  Service(const Scenario& scenario, std::uint64_t seed, std::optional<AutonomyMode> mode,
          ServiceOptions options = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts both threads. Throws BindFailure.
  void start();
  std::uint16_t port() const;

  bool wait_timeline(std::chrono::milliseconds timeout);
  /// Blocks until SIGINT/SIGTERM, or until `linger` elapses if given.
  void wait_for_shutdown(std::optional<std::chrono::milliseconds> linger);

  /// Expires pending proposals, closes connections and joins threads.
  void stop();

  /// Valid after stop().
  Trace trace() const;

 private:
  friend class Session;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mutmod
