#include "doctest.h"

#include "prosim/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <filesystem>
#include <thread>

using namespace prosim;
using nlohmann::json;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace
{

class Client
{
public:
  explicit Client(std::uint16_t port) : ws_(ioc_)
  {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }

  void send(const json& j) { ws_.write(net::buffer(j.dump())); }
  void send_text(const std::string& s) { ws_.write(net::buffer(s)); }

  json read()
  {
    beast::flat_buffer b;
    ws_.read(b);
    return json::parse(beast::buffers_to_string(b.data()));
  }

  /// Next message that is not a snapshot.
  json reply()
  {
    while (true)
    {
      json j = read();
      if (j.at("type") != "snapshot")
        return j;
    }
  }

  void close() { ws_.close(websocket::close_code::normal); }

private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

struct Running
{
  explicit Running(SessionConfig c) : server(std::move(c))
  {
    server.bind();
    thread = std::thread([this] { server.run(); });
  }
  ~Running()
  {
    server.stop();
    thread.join();
  }
  LiveServer server;
  std::thread thread;
};

SessionConfig live_config(const std::string& name)
{
  SessionConfig c;
  c.port = 0;
  c.trials[0].method = MethodId::C;
  c.trials[0].duration = 30.0;
  c.log_dir = (std::filesystem::temp_directory_path() / ("prosim_server_" + name)).string();
  std::filesystem::remove_all(c.log_dir);
  return c;
}

}  // namespace

TEST_CASE("server greets, requires hello and acknowledges by id")
{
  Running r(live_config("hello"));
  Client c(r.server.port());
  const json hello = c.read();
  CHECK(hello.at("type") == "hello");
  CHECK(hello.at("protocol") == "prosim");
  CHECK(hello.at("version") == kProtocolVersion);
  const json scene = c.read();
  CHECK(scene.at("type") == "scene");
  CHECK(scene.at("blocks").size() == 4);
  CHECK(scene.at("scene").contains("box_frame"));

  c.send({{"type", "gesture"}, {"gesture", "WF"}, {"id", 1}});
  json r1 = c.reply();
  CHECK(r1.at("type") == "reject");
  CHECK(r1.at("id") == 1);
  CHECK(r1.at("reason") == "send hello first");

  c.send({{"type", "hello"}, {"protocol", "prosim"}, {"version", 1}, {"id", 2}});
  CHECK(c.reply().at("type") == "ack");

  c.send_text("{broken");
  json bad = c.reply();
  CHECK(bad.at("type") == "reject");

  c.send({{"type", "control"}, {"action", "start"}, {"id", 3}});
  json ok = c.reply();
  CHECK(ok.at("type") == "ack");
  CHECK(ok.at("of") == "control");
  CHECK(ok.at("id") == 3);

  c.send({{"type", "control"}, {"action", "start"}, {"id", 4}});
  json again = c.reply();
  CHECK(again.at("type") == "reject");
  CHECK(again.at("reason").get<std::string>().find("running") != std::string::npos);

  c.send({{"type", "control"}, {"action", "stop"}, {"id", 5}});
  // the trial_end notice and the ack can arrive in either order
  json a = c.reply();
  json b = c.reply();
  if (a.at("type") != "trial_end")
    std::swap(a, b);
  CHECK(a.at("type") == "trial_end");
  CHECK(a.at("reason") == "stopped");
  CHECK(a.at("outcomes").size() == 4);
  CHECK(b.at("type") == "ack");
  c.close();
}

TEST_CASE("live session paces simulated time and streams snapshots at the display rate")
{
  Running r(live_config("rate"));
  Client c(r.server.port());
  c.read();  // hello
  c.read();  // scene
  c.send({{"type", "hello"}, {"protocol", "prosim"}, {"version", 1}});
  c.reply();
  const auto wall0 = std::chrono::steady_clock::now();
  c.send({{"type", "control"}, {"action", "start"}});
  int running_frames = 0;
  double last_t = -1.0;
  while (true)
  {
    const json j = c.read();
    if (j.at("type") != "snapshot" || j.at("lifecycle") != "running")
      continue;
    const double t = j.at("t");
    CHECK(t > last_t);
    last_t = t;
    if (t > 1.0 + 1e-9)
      break;
    ++running_frames;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  CHECK(running_frames >= 59);
  CHECK(running_frames <= 61);
  CHECK(wall > 0.9);
  CHECK(wall < 3.0);
}

TEST_CASE("disconnect pauses a running trial and a new client can resume it")
{
  Running r(live_config("disconnect"));
  {
    Client c(r.server.port());
    c.read();  // hello
    c.read();  // scene
    c.send({{"type", "hello"}, {"protocol", "prosim"}, {"version", 1}});
    c.reply();
    c.send({{"type", "control"}, {"action", "start"}});
    c.reply();
    c.close();
  }
  for (int i = 0; i < 200 && r.server.session().lifecycle() != Lifecycle::Paused; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  CHECK(r.server.session().lifecycle() == Lifecycle::Paused);

  Client c(r.server.port());
  c.read();  // hello
  c.read();  // scene
  const json idle = c.read();  // idle broadcasts continue while paused
  CHECK(idle.at("type") == "snapshot");
  CHECK(idle.at("lifecycle") == "paused");
  c.send({{"type", "hello"}, {"protocol", "prosim"}, {"version", 1}});
  c.reply();
  c.send({{"type", "control"}, {"action", "resume"}});
  CHECK(c.reply().at("type") == "ack");
  CHECK(r.server.session().lifecycle() == Lifecycle::Running);
}

TEST_CASE("live planning runs on the worker and the lock shows in snapshots")
{
  Running r(live_config("plan"));
  Client c(r.server.port());
  c.read();  // hello
  c.read();  // scene
  c.send({{"type", "hello"}, {"protocol", "prosim"}, {"version", 1}});
  c.reply();
  c.send({{"type", "control"}, {"action", "start"}});
  c.reply();
  const Snapshot s0 = r.server.session().snapshot();
  const Vector3d eye = s0.shoulder * r.server.session().config().head_offset;
  const Vector3d block = s0.blocks[1].pose.translation;
  const Vector3d d = (block - eye).normalized();
  c.send({{"type", "gaze"}, {"origin", {eye.x(), eye.y(), eye.z()}}, {"direction", {d.x(), d.y(), d.z()}}});
  // raw classifier frames at the 50 ms cadence: three identical ones make an event
  const auto hold = [&](const char* g, int frames) {
    for (int i = 0; i < frames; ++i)
    {
      c.send({{"type", "classification"}, {"gesture", g}});
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  };
  hold("NM", 4);
  hold("WF", 4);
  hold("NM", 3);
  bool locked = false;
  for (int i = 0; i < 100 && !locked; ++i)
  {
    const json j = c.read();
    locked = j.at("type") == "snapshot" && j.at("selection").at("locked") == true;
  }
  CHECK(locked);
  hold("WE", 4);
  std::string status;
  for (int i = 0; i < 600; ++i)
  {
    const json j = c.read();
    if (j.at("type") != "snapshot")
      continue;
    status = j.at("plan_status");
    if (status == "done")
      break;
  }
  CHECK(status == "done");
}
