#include "mutmod/service.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "mutmod/engine.hpp"
#include "mutmod/error.hpp"

namespace mutmod {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

bool SessionOutbox::push(std::string frame) {
  if (frames_.size() >= capacity_) {
    overflowed_ = true;
    return false;
  }
  frames_.push_back(std::move(frame));
  return true;
}

bool pattern_matches(std::string_view pattern, const SlotKey& slot) {
  if (pattern == "all" || pattern == "*") return true;
  auto chain = slot.chain.to_string();
  if (pattern == chain) return true;
  if (pattern.size() == chain.size() + 2 && pattern.substr(0, chain.size()) == chain &&
      pattern.substr(chain.size()) == ".*")
    return true;
  return pattern == slot.to_string();
}

std::vector<FrameMapper::Frame> FrameMapper::map(const json& r) {
  std::vector<Frame> out;
  const auto& type = r.at("type").get_ref<const std::string&>();
  auto t = r.at("t");
  if (type == "notify") {
    auto slot = SlotKey::parse(r.at("node").get<std::string>());
    out.push_back({"value_changed", {{"node", r["node"]}, {"old", r["old"]}, {"new", r["new"]}, {"t", t}}, slot});
  } else if (type == "posterior") {
    auto slot = SlotKey::parse(r.at("node").get<std::string>());
    out.push_back({"posterior",
                   {{"node", r["node"]}, {"domain", r["domain"]}, {"probs", r["probs"]}, {"map", r["map"]}, {"t", t}},
                   slot});
  } else if (type == "proposal") {
    held_proposal_ = r;
  } else if (type == "disposition") {
    const auto& status = r.at("status");
    if (held_proposal_ && (*held_proposal_)["id"] == r["id"]) {
      json body = {{"id", r["id"]},
                   {"rule", (*held_proposal_)["rule"]},
                   {"action", (*held_proposal_)["action"]},
                   {"status", status},
                   {"t", t}};
      if (r.contains("expires_at")) body["expires_at"] = r["expires_at"];
      held_proposal_.reset();
      out.push_back({"proposal_created", std::move(body), std::nullopt});
      if (status != "pending")
        out.push_back({"proposal_resolved", {{"id", r["id"]}, {"status", status}, {"t", t}}, std::nullopt});
    } else {
      out.push_back({"proposal_resolved", {{"id", r["id"]}, {"status", status}, {"t", t}}, std::nullopt});
    }
  } else if (type == "action") {
    out.push_back({"action_executed",
                   {{"action", r["action"]},
                    {"source", r["source"]},
                    {"human_approved", r["human_approved"]},
                    {"proposal", r["proposal"]},
                    {"t", t}},
                   std::nullopt});
  } else if (type == "mode") {
    out.push_back({"mode_changed", {{"from", r["from"]}, {"to", r["to"]}, {"t", t}}, std::nullopt});
  }
  return out;
}

namespace {

json pending_json(const DecisionPipeline& d) {
  json out = json::array();
  for (const auto& p : d.pending())
    out.push_back({{"id", p.id},
                   {"rule", p.rule},
                   {"action", action_to_json(p.action)},
                   {"created_at", p.created_at},
                   {"expires_at", p.expires_at}});
  return out;
}

bool valid_pattern(const std::string& p) {
  if (p == "all" || p == "*") return true;
  std::string probe = p;
  if (probe.size() > 2 && probe.ends_with(".*")) probe = probe.substr(0, probe.size() - 2);
  if (!probe.empty() && probe.back() == ']') probe += ".x";
  try {
    SlotKey::parse(probe);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

class Session;

struct Command {
  std::shared_ptr<Session> session;
  json seq;
  std::string type;
  json body;
};

struct Service::Impl {
  Impl(const Scenario& s, std::uint64_t seed, std::optional<AutonomyMode> mode, ServiceOptions o)
      : scenario(s), engine(s, seed, mode), options(std::move(o)), acceptor(ioc), signals(ioc) {}

  void accept();
  void engine_loop();
  void handle(const Command& c);
  void broadcast();
  void enqueue(Command c) {
    {
      std::lock_guard lock(mu);
      commands.push_back(std::move(c));
    }
    cv.notify_all();
  }
  VirtualTime live_time() const {
    if (!options.pace) return engine.now();
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return std::max<VirtualTime>(engine.now(), elapsed.count());
  }

  Scenario scenario;
  Engine engine;
  ServiceOptions options;
  FrameMapper mapper;
  std::vector<json> fresh;  // trace records not yet broadcast

  net::io_context ioc;
  tcp::acceptor acceptor;
  net::signal_set signals;
  std::thread io_thread, engine_thread;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Command> commands;
  bool stopping = false;
  bool timeline_done = false;
  bool shutdown_requested = false;
  bool io_done = false;

  std::mutex sessions_mu;
  std::vector<std::weak_ptr<Session>> sessions;

  std::chrono::steady_clock::time_point started;
  bool running = false;
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Service::Impl& service)
      : ws_(std::move(socket)), service_(service), outbox_(service.options.session_queue) {}

  void start() {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] {
      self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      self->ws_.async_accept([self](beast::error_code ec) {
        if (ec) return;
        self->open_ = true;
        self->service_.enqueue({self, nullptr, "__hello", json::object()});
        self->read();
      });
    });
  }

  /// Thread-safe: hops onto the session's strand.
  void send(std::string type, json body, std::optional<json> reply_to = std::nullopt,
            std::optional<SlotKey> slot = std::nullopt) {
    net::post(ws_.get_executor(), [self = shared_from_this(), type = std::move(type), body = std::move(body),
                                   reply_to = std::move(reply_to), slot = std::move(slot)]() mutable {
      self->deliver(std::move(type), std::move(body), std::move(reply_to), slot);
    });
  }

  /// Broadcast frame: dropped unless a subscription covers it.
  void publish(std::string type, json body, std::optional<SlotKey> slot) {
    net::post(ws_.get_executor(), [self = shared_from_this(), type = std::move(type), body = std::move(body),
                                   slot = std::move(slot)]() mutable {
      if (!self->wants(slot)) return;
      self->deliver(std::move(type), std::move(body), std::nullopt, slot);
    });
  }

  /// Runs on the strand before later publishes are posted.
  void subscribe(std::vector<std::string> patterns, json seq, json snapshot) {
    net::post(ws_.get_executor(), [self = shared_from_this(), patterns = std::move(patterns),
                                   seq = std::move(seq), snapshot = std::move(snapshot)]() mutable {
      for (auto& p : patterns) self->patterns_.push_back(std::move(p));
      self->deliver("ack", {{"subscribed", self->patterns_}}, seq, std::nullopt);
      self->deliver("snapshot", std::move(snapshot), std::nullopt, std::nullopt);
    });
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] { self->shutdown("server stopping"); });
  }

 private:
  bool wants(const std::optional<SlotKey>& slot) const {
    if (patterns_.empty()) return false;
    if (!slot) return true;
    for (const auto& p : patterns_)
      if (pattern_matches(p, *slot)) return true;
    return false;
  }

  void deliver(std::string type, json body, std::optional<json> reply_to, const std::optional<SlotKey>&) {
    if (!open_ || closing_) return;
    json frame = {{"type", std::move(type)}, {"seq", next_seq_++}, {"body", std::move(body)}};
    if (reply_to) frame["reply_to"] = *reply_to;
    if (!outbox_.push(frame.dump())) {
      shutdown("overflow");
      return;
    }
    flush();
  }

  void flush() {
    if (writing_ || outbox_.empty() || closing_) return;
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->open_ = false;
        return;
      }
      self->outbox_.pop();
      if (self->closing_)
        self->send_close();
      else
        self->flush();
    });
  }

  // A close frame may not overlap a pending write; it goes out once the
  // current write completes.
  void shutdown(const char* reason) {
    if (closing_ || !open_) return;
    closing_ = true;
    close_reason_ = reason;
    if (!writing_) send_close();
  }

  void send_close() {
    auto code = close_reason_ == "overflow" ? websocket::close_code::policy_error : websocket::close_code::going_away;
    ws_.async_close(websocket::close_reason(code, close_reason_),
                    [self = shared_from_this()](beast::error_code) { self->open_ = false; });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->open_ = false;
        return;
      }
      auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->on_message(text);
      if (!self->closing_) self->read();
    });
  }

  void on_message(const std::string& text) {
    json frame;
    try {
      frame = json::parse(text);
    } catch (const json::parse_error& e) {
      deliver("error", {{"code", to_string(ErrorCode::SchemaViolation)}, {"message", e.what()}}, json(nullptr),
              std::nullopt);
      return;
    }
    json seq = frame.is_object() && frame.contains("seq") ? frame["seq"] : json(nullptr);
    auto reject = [&](ErrorCode code, std::string message) {
      deliver("error", {{"code", to_string(code)}, {"message", std::move(message)}}, seq, std::nullopt);
    };
    if (!frame.is_object() || !frame.contains("type") || !frame["type"].is_string())
      return reject(ErrorCode::SchemaViolation, "frame needs a string type");
    if (!seq.is_number_integer()) return reject(ErrorCode::SchemaViolation, "frame needs an integer seq");
    json body = frame.value("body", json::object());
    if (!body.is_object()) return reject(ErrorCode::SchemaViolation, "body must be an object");
    service_.enqueue({shared_from_this(), seq, frame["type"].get<std::string>(), std::move(body)});
  }

  websocket::stream<beast::tcp_stream> ws_;
  Service::Impl& service_;
  beast::flat_buffer buffer_;
  SessionOutbox outbox_;
  std::vector<std::string> patterns_;
  std::uint64_t next_seq_ = 1;
  bool open_ = false;
  bool writing_ = false;
  bool closing_ = false;
  std::string close_reason_;
};

void Service::Impl::accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    auto s = std::make_shared<Session>(std::move(socket), *this);
    {
      std::lock_guard lock(sessions_mu);
      sessions.push_back(s);
    }
    s->start();
    accept();
  });
}

void Service::Impl::broadcast() {
  std::vector<std::shared_ptr<Session>> live;
  {
    std::lock_guard lock(sessions_mu);
    for (auto& w : sessions)
      if (auto s = w.lock()) live.push_back(std::move(s));
  }
  auto records = std::move(fresh);
  fresh.clear();
  for (const auto& r : records)
    for (auto& f : mapper.map(r))
      for (auto& s : live) s->publish(f.type, f.body, f.slot);
}

void Service::Impl::handle(const Command& c) {
  auto& s = c.session;
  auto error = [&](ErrorCode code, const std::string& message) {
    s->send("error", {{"code", to_string(code)}, {"message", message}}, std::make_optional(c.seq));
  };
  auto finish_turn = [&](const Outcome& out) {
    if (out.ok)
      s->send("ack", out.detail, std::make_optional(c.seq));
    else
      error(out.code, out.message);
  };

  if (c.type == "__hello") {
    s->send("hello", {{"version", kProtocolVersion}, {"mode", to_string(engine.decisions().mode())},
                      {"scenario", scenario.name}});
    return;
  }
  try {
    if (c.type == "ping") {
      s->send("ack", {{"pong", true}, {"t", live_time()}}, std::make_optional(c.seq));
    } else if (c.type == "subscribe") {
      std::vector<std::string> patterns;
      if (c.body.contains("patterns")) {
        if (!c.body["patterns"].is_array()) return error(ErrorCode::SchemaViolation, "patterns must be an array");
        for (const auto& p : c.body["patterns"]) {
          if (!p.is_string()) return error(ErrorCode::SchemaViolation, "patterns must be strings");
          patterns.push_back(p.get<std::string>());
        }
      } else if (c.body.contains("pattern")) {
        if (!c.body["pattern"].is_string()) return error(ErrorCode::SchemaViolation, "pattern must be a string");
        patterns.push_back(c.body["pattern"].get<std::string>());
      } else {
        patterns.push_back("all");
      }
      for (const auto& p : patterns)
        if (!valid_pattern(p)) return error(ErrorCode::SchemaViolation, "bad subscription pattern " + p);
      json snap = snapshot_to_json(*engine.snapshot());
      snap["mode"] = to_string(engine.decisions().mode());
      snap["pending"] = pending_json(engine.decisions());
      s->subscribe(std::move(patterns), c.seq, std::move(snap));
    } else if (c.type == "set_mode") {
      if (!c.body.contains("mode") || !c.body["mode"].is_string())
        return error(ErrorCode::SchemaViolation, "set_mode needs mode");
      auto mode = parse_mode(c.body["mode"].get<std::string>());
      finish_turn(engine.set_mode(mode, live_time()));
    } else if (c.type == "wizard_decide") {
      if (!c.body.contains("action") || !c.body["action"].is_object())
        return error(ErrorCode::SchemaViolation, "wizard_decide needs action");
      auto action = action_from_json(c.body["action"]);
      finish_turn(engine.wizard_decide(action, live_time()));
    } else if (c.type == "resolve_proposal") {
      if (!c.body.contains("id") || !c.body["id"].is_string() || !c.body.contains("verdict") ||
          !c.body["verdict"].is_string())
        return error(ErrorCode::SchemaViolation, "resolve_proposal needs id and verdict");
      auto verdict = parse_verdict(c.body["verdict"].get<std::string>());
      finish_turn(engine.resolve_proposal(c.body["id"].get<std::string>(), verdict, live_time()));
    } else {
      error(ErrorCode::UnknownType, "unknown frame type " + c.type);
    }
  } catch (const Error& e) {
    error(e.code() == ErrorCode::InvalidArgument ? ErrorCode::SchemaViolation : e.code(), e.what());
  } catch (const json::exception& e) {
    error(ErrorCode::SchemaViolation, e.what());
  }
}

void Service::Impl::engine_loop() {
  using Clock = std::chrono::steady_clock;
  std::size_t next = 0;
  const auto& timeline = scenario.timeline;
  auto at = [&](VirtualTime t) { return started + std::chrono::milliseconds(t); };

  std::unique_lock lock(mu);
  while (true) {
    if (next == timeline.size() && !timeline_done) {
      timeline_done = true;
      cv.notify_all();
    }
    auto deadline = Clock::time_point::max();
    if (next < timeline.size()) deadline = options.pace ? at(timeline[next].t) : Clock::now();
    if (options.pace) {
      auto pending = engine.decisions().pending();
      if (!pending.empty()) deadline = std::min(deadline, at(pending.front().expires_at));
    }
    cv.wait_until(lock, deadline, [&] { return stopping || !commands.empty(); });
    if (stopping) break;

    if (!commands.empty()) {
      auto c = std::move(commands.front());
      commands.pop_front();
      lock.unlock();
      handle(c);
      broadcast();
      lock.lock();
      continue;
    }
    if (Clock::now() < deadline) continue;
    lock.unlock();
    if (next < timeline.size() && (!options.pace || Clock::now() >= at(timeline[next].t))) {
      engine.apply(timeline[next++]);
    } else {
      engine.tick(live_time());  // proposal deadline passed
    }
    broadcast();
    lock.lock();
  }
  lock.unlock();
  engine.finish();
  broadcast();
}

Service::Service(const Scenario& scenario, std::uint64_t seed, std::optional<AutonomyMode> mode,
                 ServiceOptions options)
    : impl_(std::make_unique<Impl>(scenario, seed, mode, std::move(options))) {}

Service::~Service() { stop(); }

void Service::start() {
  auto& m = *impl_;
  if (m.running) return;
  try {
    tcp::endpoint ep(net::ip::make_address(m.options.address), m.options.port);
    m.acceptor.open(ep.protocol());
    m.acceptor.set_option(net::socket_base::reuse_address(true));
    m.acceptor.bind(ep);
    m.acceptor.listen();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BindFailure,
                "cannot listen on " + m.options.address + ":" + std::to_string(m.options.port) + ": " + e.what());
  }
  m.engine.set_listener([&m](const json& r) { m.fresh.push_back(r); });
  m.engine.initialise();
  m.fresh.clear();  // nothing is subscribed yet
  m.signals.add(SIGINT);
  m.signals.add(SIGTERM);
  m.signals.async_wait([&m](beast::error_code ec, int) {
    if (ec) return;
    std::lock_guard lock(m.mu);
    m.shutdown_requested = true;
    m.cv.notify_all();
  });
  m.accept();
  m.started = std::chrono::steady_clock::now();
  m.running = true;
  m.io_thread = std::thread([&m] {
    m.ioc.run();
    std::lock_guard lock(m.mu);
    m.io_done = true;
    m.cv.notify_all();
  });
  m.engine_thread = std::thread([&m] { m.engine_loop(); });
}

std::uint16_t Service::port() const { return impl_->acceptor.local_endpoint().port(); }

bool Service::wait_timeline(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mu);
  return impl_->cv.wait_for(lock, timeout, [&] { return impl_->timeline_done; });
}

void Service::wait_for_shutdown(std::optional<std::chrono::milliseconds> linger) {
  auto& m = *impl_;
  std::unique_lock lock(m.mu);
  if (linger)
    m.cv.wait_for(lock, *linger, [&] { return m.shutdown_requested; });
  else
    m.cv.wait(lock, [&] { return m.shutdown_requested; });
}

void Service::stop() {
  auto& m = *impl_;
  if (!m.running) return;
  m.running = false;
  {
    std::lock_guard lock(m.mu);
    m.stopping = true;
  }
  m.cv.notify_all();
  m.engine_thread.join();

  net::post(m.ioc, [&m] {
    beast::error_code ec;
    m.acceptor.close(ec);
    m.signals.cancel(ec);
  });
  {
    std::lock_guard lock(m.sessions_mu);
    for (auto& w : m.sessions)
      if (auto s = w.lock()) s->close();
  }
  // Give close handshakes a moment before tearing the loop down.
  {
    std::unique_lock lock(m.mu);
    if (!m.cv.wait_for(lock, std::chrono::seconds(2), [&] { return m.io_done; })) m.ioc.stop();
  }
  m.io_thread.join();
}

Trace Service::trace() const { return impl_->engine.trace(); }

}  // namespace mutmod
