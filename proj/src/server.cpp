#include "prosim/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <iostream>
#include <thread>

namespace prosim
{

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace
{

constexpr std::size_t kMaxQueuedSnapshots = 4;  // a slow client skips frames instead of lagging
constexpr std::uint64_t kMaxCatchUpTicks = 200;  // per wake-up; a longer stall is dropped, not replayed

}  // namespace

class Connection;

struct LiveServer::Impl
{
  explicit Impl(SessionConfig c) : session(std::move(c), RunMode::Live), acceptor(ioc) {}

  Session session;
  net::io_context ioc;
  tcp::acceptor acceptor;
  bool bound = false;
  std::atomic<bool> stopping{false};
  std::weak_ptr<Connection> client;  // io thread only

  void accept();
  void broadcast(std::string text, bool snapshot);
  std::string handle_text(const std::string& text, bool& greeted);
  void loop();
};

class Connection : public std::enable_shared_from_this<Connection>
{
public:
  Connection(tcp::socket socket, LiveServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void start()
  {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

  void close()
  {
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  /// io thread only.
  void send(std::string text, bool snapshot)
  {
    if (closed_ || !open_)
      return;
    if (snapshot)
    {
      if (snapshots_queued_ >= kMaxQueuedSnapshots)
        return;
      ++snapshots_queued_;
    }
    queue_.push_back({std::move(text), snapshot});
    if (queue_.size() == 1)
      write_next();
  }

private:
  struct Outgoing
  {
    std::string text;
    bool snapshot;
  };

  void on_accept(beast::error_code ec)
  {
    if (ec)
      return;
    open_ = true;
    send(server_hello_json().dump(), false);
    send(server_.session.scene_json().dump(), false);
    read_next();
  }

  void read_next()
  {
    ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t)
  {
    if (ec)
    {
      lost();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    send(server_.handle_text(text, greeted_), false);
    read_next();
  }

  void write_next()
  {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front().text),
                    beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t)
  {
    if (ec)
    {
      lost();
      return;
    }
    if (queue_.front().snapshot)
      --snapshots_queued_;
    queue_.pop_front();
    if (!queue_.empty())
      write_next();
  }

  void lost()
  {
    if (closed_)
      return;
    closed_ = true;
    if (server_.client.lock().get() == this)
      server_.session.client_disconnected();
  }

  websocket::stream<beast::tcp_stream> ws_;
  LiveServer::Impl& server_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;
  std::size_t snapshots_queued_ = 0;
  bool open_ = false;
  bool closed_ = false;
  bool greeted_ = false;
};

void LiveServer::Impl::accept()
{
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec)
      return;
    if (auto old = client.lock())
      old->close();
    auto c = std::make_shared<Connection>(std::move(socket), *this);
    client = c;
    c->start();
    accept();
  });
}

void LiveServer::Impl::broadcast(std::string text, bool snapshot)
{
  net::post(ioc, [this, text = std::move(text), snapshot]() mutable {
    if (auto c = client.lock())
      c->send(std::move(text), snapshot);
  });
}

std::string LiveServer::Impl::handle_text(const std::string& text, bool& greeted)
{
  auto parsed = parse_client_text(text);
  if (auto* err = std::get_if<std::string>(&parsed))
  {
    std::optional<std::int64_t> id;
    try
    {
      const json j = json::parse(text);
      if (j.is_object() && j.contains("id") && j.at("id").is_number_integer())
        id = j.at("id").get<std::int64_t>();
    }
    catch (const json::exception&)
    {
    }
    return reject_json(id, *err).dump();
  }
  const auto& m = std::get<ClientMessage>(parsed);
  if (m.kind == ClientKind::Hello)
  {
    greeted = true;
    return ack_json(m.id, m.kind).dump();
  }
  if (!greeted)
    return reject_json(m.id, "send hello first").dump();
  const Ack a = session.handle_message(m);
  return a.accepted ? ack_json(m.id, m.kind).dump() : reject_json(m.id, a.reason).dump();
}

void LiveServer::Impl::loop()
{
  using clock = std::chrono::steady_clock;
  const auto tick = std::chrono::duration<double>(session.config().world.tick);
  const auto frame = std::chrono::duration<double>(1.0 / session.config().snapshot_rate);
  bool running = false;
  clock::time_point anchor;
  std::uint64_t done = 0;
  clock::time_point next_idle = clock::now();

  while (!stopping)
  {
    const auto now = clock::now();
    if (session.lifecycle() == Lifecycle::Running)
    {
      if (!running)
      {
        running = true;
        anchor = now;
        done = 0;
      }
      const auto due = static_cast<std::uint64_t>((now - anchor) / tick);
      std::uint64_t steps = 0;
      while (done < due && steps < kMaxCatchUpTicks && session.lifecycle() == Lifecycle::Running)
      {
        session.step();
        ++done;
        ++steps;
      }
      if (done < due)
      {
        // stalled too long: drop the backlog and keep simulated time continuous
        anchor = now - std::chrono::duration_cast<clock::duration>(tick * static_cast<double>(done));
      }
    }
    else
    {
      running = false;
      if (now >= next_idle)
      {
        broadcast(session.snapshot().to_json(session.config().world).dump(), true);
        next_idle = now + std::chrono::duration_cast<clock::duration>(frame);
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

LiveServer::LiveServer(SessionConfig config) : impl_(std::make_unique<Impl>(std::move(config)))
{
  Impl& s = *impl_;
  s.session.on_snapshot = [&s](const Snapshot& snap) {
    s.broadcast(snap.to_json(s.session.config().world).dump(), true);
  };
  s.session.on_trial_end = [&s](const TrialResult& r) { s.broadcast(r.to_json().dump(), false); };
}

LiveServer::~LiveServer() { stop(); }

void LiveServer::bind()
{
  Impl& s = *impl_;
  if (s.bound)
    return;
  const auto& c = s.session.config();
  const tcp::endpoint ep(net::ip::make_address(c.bind_address), c.port);
  s.acceptor.open(ep.protocol());
  s.acceptor.set_option(net::socket_base::reuse_address(true));
  s.acceptor.bind(ep);
  s.acceptor.listen(net::socket_base::max_listen_connections);
  s.bound = true;
}

std::uint16_t LiveServer::port() const { return impl_->acceptor.local_endpoint().port(); }

Session& LiveServer::session() { return impl_->session; }

void LiveServer::run()
{
  Impl& s = *impl_;
  bind();
  s.accept();
  std::thread sim([&s] { s.loop(); });
  auto guard = net::make_work_guard(s.ioc);
  std::thread stopper([&s, &guard] {
    while (!s.stopping)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    guard.reset();
    net::post(s.ioc, [&s] {
      beast::error_code ec;
      s.acceptor.close(ec);
      if (auto c = s.client.lock())
        c->close();
    });
  });
  s.ioc.run();
  s.stopping = true;
  stopper.join();
  sim.join();
}

void LiveServer::stop() { impl_->stopping = true; }

}  // namespace prosim
