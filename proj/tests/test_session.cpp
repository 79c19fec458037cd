#include "doctest.h"

#include "prosim/config.hpp"
#include "prosim/mailbox.hpp"
#include "prosim/protocol.hpp"
#include "prosim/session.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace prosim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

fs::path scratch_dir(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("prosim_session_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SessionConfig short_config(const std::string& name, MethodId method, double duration)
{
  SessionConfig c;
  c.trials[0].method = method;
  c.trials[0].duration = duration;
  c.log_dir = scratch_dir(name).string();
  return c;
}

std::vector<json> read_log(const std::string& path)
{
  std::ifstream in(path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line))
    out.push_back(json::parse(line));
  return out;
}

std::size_t count_kind(const std::vector<json>& log, const std::string& kind)
{
  std::size_t n = 0;
  for (const auto& r : log)
    n += r.at("kind") == kind;
  return n;
}

std::string slurp(const std::string& path)
{
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ClientMessage look_at(const Session& s, const Vector3d& point)
{
  const Vector3d eye = s.eye_position();
  return ClientMessage::make_gaze(eye, point - eye);
}

ClientMessage parsed(const std::string& text)
{
  auto r = parse_client_text(text);
  REQUIRE_MESSAGE(std::holds_alternative<ClientMessage>(r), text);
  return std::get<ClientMessage>(r);
}

/// Structural equality with a relative tolerance on numbers.
bool json_close(const json& a, const json& b)
{
  if (a.is_number() && b.is_number())
    return std::abs(a.get<double>() - b.get<double>()) <= 1e-12 * (1.0 + std::abs(a.get<double>()));
  if (a.type() != b.type() || a.size() != b.size())
    return false;
  if (a.is_object())
  {
    for (auto it = a.begin(); it != a.end(); ++it)
      if (!b.contains(it.key()) || !json_close(*it, b.at(it.key())))
        return false;
    return true;
  }
  if (a.is_array())
  {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!json_close(a[i], b[i]))
        return false;
    return true;
  }
  return a == b;
}

std::string rejection(const std::string& text)
{
  auto r = parse_client_text(text);
  REQUIRE_MESSAGE(std::holds_alternative<std::string>(r), text);
  return std::get<std::string>(r);
}

}  // namespace

TEST_CASE("config survives a json round trip and rejects unknown keys")
{
  SessionConfig c;
  c.planner.time_budget = 0.25;
  c.world.grasp_threshold = 0.03;
  c.snapshot_rate = 30;
  c.trials = counterbalanced_plan(2, 1, 40);
  const json j = c.to_json();
  const SessionConfig back = SessionConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.trials.size() == 4);
  CHECK(back.planner.time_budget == 0.25);

  json bad = j;
  bad["planer"] = json::object();
  CHECK_THROWS_AS(SessionConfig::from_json(bad), std::invalid_argument);

  json nested = j;
  nested["world"]["grasp_treshold"] = 0.1;
  CHECK_THROWS_AS(SessionConfig::from_json(nested), std::invalid_argument);
}

TEST_CASE("config validation catches inconsistent values")
{
  SessionConfig c;
  CHECK_NOTHROW(c.validate());

  SUBCASE("snapshot rate faster than the tick") { c.snapshot_rate = 2000; }
  SUBCASE("zero snapshot rate") { c.snapshot_rate = 0; }
  SUBCASE("missing emg file")
  {
    c.gesture_source.kind = GestureSourceKind::EmgFile;
    c.gesture_source.path = "/nonexistent/recording.csv";
  }
  SUBCASE("path given to client events")
  {
    c.gesture_source.path = "x.csv";
  }
  SUBCASE("condition limit below one") { c.control.cond_limit = 0.5; }
  SUBCASE("negative joint speed") { c.control.joint_speed = -1.0; }
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("config file paths resolve against the file directory")
{
  const fs::path dir = scratch_dir("cfgpath");
  {
    std::ofstream out(dir / "session.json");
    out << "{ // comment allowed\n \"log_dir\": \"out\", \"method\": \"B\" }\n";
  }
  const SessionConfig c = SessionConfig::load((dir / "session.json").string());
  CHECK(fs::path(c.log_dir) == dir / "out");
  REQUIRE(c.trials.size() == 1);
  CHECK(c.trials[0].method == MethodId::B);
}

TEST_CASE("protocol parses every client message kind")
{
  CHECK(parsed(R"({"type":"hello","protocol":"prosim","version":1})").kind == ClientKind::Hello);
  const auto g = parsed(R"({"type":"gesture","gesture":"WE","id":7})");
  CHECK(g.kind == ClientKind::Gesture);
  CHECK(g.gesture == GestureClass::WE);
  CHECK(g.id == 7);
  CHECK(parsed(R"({"type":"classification","gesture":"HC"})").gesture == GestureClass::HC);
  const auto gz = parsed(R"({"type":"gaze","origin":[0,0,1],"direction":[0,3,4]})");
  CHECK(gz.gaze.direction.isApprox(Vector3d(0, 0.6, 0.8)));
  const auto sh = parsed(R"({"type":"shoulder","position":[0,0,1.2],"orientation":[2,0,0,0]})");
  CHECK(sh.shoulder.rotation.w() == doctest::Approx(1.0));
  CHECK(parsed(R"({"type":"control","action":"pause"})").action == ControlAction::Pause);
  CHECK(parsed(R"({"type":"method","method":"C"})").method == MethodId::C);
}

TEST_CASE("protocol rejects malformed messages with a reason")
{
  CHECK(rejection("not json").find("JSON") != std::string::npos);
  CHECK(rejection("[1,2]").find("object") != std::string::npos);
  CHECK(rejection(R"({"gesture":"WE"})").find("type") != std::string::npos);
  CHECK(rejection(R"({"type":"teleport"})").find("teleport") != std::string::npos);
  CHECK(rejection(R"({"type":"gesture","gesture":"XX"})").find("gesture") != std::string::npos);
  CHECK(rejection(R"({"type":"gesture","gesture":"WE","extra":1})").find("extra") != std::string::npos);
  CHECK(rejection(R"({"type":"gesture","gesture":"WE","id":"a"})").find("id") != std::string::npos);
  CHECK(rejection(R"({"type":"gaze","origin":[0,0],"direction":[1,0,0]})").find("origin") != std::string::npos);
  CHECK(rejection(R"({"type":"gaze","origin":[0,0,0],"direction":[0,0,0]})").find("non-zero") != std::string::npos);
  CHECK(rejection(R"({"type":"shoulder","position":[0,0,0],"orientation":[0,0,0,0]})").find("quaternion") !=
        std::string::npos);
  CHECK(rejection(R"({"type":"hello","protocol":"prosim","version":2})").find("version") != std::string::npos);
  CHECK(rejection(R"({"type":"control","action":"explode"})").find("action") != std::string::npos);
}

TEST_CASE("protocol fuzz: random mutations never throw and always round trip when accepted")
{
  const std::vector<std::string> seeds = {
      R"({"type":"gesture","gesture":"WF"})",
      R"({"type":"gaze","origin":[0.1,0.2,1.5],"direction":[0.5,0.1,-0.5]})",
      R"({"type":"shoulder","position":[0,0,1.2],"orientation":[1,0,0,0]})",
      R"({"type":"control","action":"start","id":3})",
  };
  std::mt19937_64 rng(5);
  const std::string noise = "{}[],:\"0123456789.-eE truefalsnul";
  std::size_t accepted = 0;
  for (int i = 0; i < 4000; ++i)
  {
    std::string s = seeds[rng() % seeds.size()];
    const int edits = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < edits; ++e)
    {
      const std::size_t pos = rng() % s.size();
      switch (rng() % 3)
      {
        case 0: s.erase(pos, 1); break;
        case 1: s.insert(pos, 1, noise[rng() % noise.size()]); break;
        default: s[pos] = noise[rng() % noise.size()]; break;
      }
    }
    ParseResult r;
    REQUIRE_NOTHROW(r = parse_client_text(s));
    if (auto* m = std::get_if<ClientMessage>(&r))
    {
      ++accepted;
      const auto again = parse_client_message(to_json(*m));
      REQUIRE(std::holds_alternative<ClientMessage>(again));
      CHECK(json_close(to_json(std::get<ClientMessage>(again)), to_json(*m)));
    }
    else
    {
      CHECK_FALSE(std::get<std::string>(r).empty());
    }
  }
  CHECK(accepted > 0);
}

TEST_CASE("traces round trip and reject bad input")
{
  Trace t = {{0.0, ClientMessage::make_gesture(GestureClass::WF)},
             {0.5, ClientMessage::make_gaze(Vector3d(0, 0, 1.5), Vector3d(1, 0, -1))},
             {0.5, ClientMessage::make_classification(GestureClass::NM)}};
  std::stringstream ss;
  write_trace(ss, t);
  std::stringstream in("# header comment\n\n" + ss.str());
  const Trace back = read_trace(in);
  REQUIRE(back.size() == 3);
  CHECK(back[1].t == 0.5);
  CHECK(to_json(back[1].message) == to_json(t[1].message));
  std::stringstream twice;
  write_trace(twice, back);
  CHECK(twice.str() == ss.str());

  std::stringstream unsorted(R"({"t":1,"type":"gesture","gesture":"WE"}
{"t":0.5,"type":"gesture","gesture":"WE"})");
  CHECK_THROWS_AS(read_trace(unsorted), std::invalid_argument);
  std::stringstream control(R"({"t":0,"type":"control","action":"stop"})");
  CHECK_THROWS_AS(read_trace(control), std::invalid_argument);
  std::stringstream negative(R"({"t":-1,"type":"gesture","gesture":"WE"})");
  CHECK_THROWS_AS(read_trace(negative), std::invalid_argument);
}

TEST_CASE("mailbox keeps only the latest value across threads")
{
  LatestValueMailbox<int> box;
  CHECK_FALSE(box.take());
  box.put(1);
  box.put(2);
  CHECK(box.peek() == 2);
  CHECK(box.take() == 2);
  CHECK_FALSE(box.take());

  std::thread producer([&] {
    for (int i = 1; i <= 10000; ++i)
      box.put(i);
  });
  int last = 0;
  while (last < 10000)
    if (auto v = box.take())
    {
      CHECK(*v > last);
      last = *v;
    }
  producer.join();
  CHECK(box.puts() == 10002);
}

TEST_CASE("headless session emits 60 snapshots per simulated second")
{
  SessionConfig c = short_config("rate", MethodId::D, 2.0);
  Session s(c, RunMode::Headless);
  std::vector<double> times;
  s.on_snapshot = [&](const Snapshot& snap) { times.push_back(snap.t); };
  const TrialResult r = s.run_trial({});
  CHECK(r.end_reason == "timeout");
  CHECK(times.size() == 120);
  for (std::size_t i = 1; i < times.size(); ++i)
    CHECK(times[i] - times[i - 1] == doctest::Approx(1.0 / 60.0).epsilon(0.07));
}

TEST_CASE("empty trace leaves all four blocks never grasped")
{
  SessionConfig c = short_config("empty", MethodId::D, 5.0);
  Session s(c, RunMode::Headless);
  const auto results = s.run_headless({});
  REQUIRE(results.size() == 1);
  for (auto o : results[0].outcomes)
    CHECK(o == Outcome::NeverGrasped);
  CHECK(s.lifecycle() == Lifecycle::Finished);

  const auto log = read_log(results[0].log_path);
  REQUIRE(!log.empty());
  CHECK(log.front().at("kind") == "header");
  CHECK(log.front().at("schema") == kLogSchema);
  CHECK(count_kind(log, "timeout") == 1);
  CHECK(count_kind(log, "attach") == 0);
  CHECK(count_kind(log, "gesture") == 0);
  CHECK(count_kind(log, "outcome") == 4);
  CHECK(log.back().at("kind") == "trial_end");
  CHECK(log.back().at("success_count") == 0);
  double last = 0.0;
  for (const auto& rec : log)
  {
    CHECK(rec.at("t").get<double>() >= last);
    last = rec.at("t").get<double>();
  }
}

TEST_CASE("control lifecycle transitions")
{
  SessionConfig c = short_config("life", MethodId::A, 1.0);
  Session s(c, RunMode::Live);
  CHECK(s.lifecycle() == Lifecycle::Idle);
  CHECK_FALSE(s.step());
  CHECK(s.world().tick_index == 0);
  CHECK_FALSE(s.handle_message(ClientMessage::make_control(ControlAction::Pause)).accepted);
  CHECK(s.handle_message(ClientMessage::make_method(MethodId::B)).accepted);
  CHECK(s.trial().method == MethodId::B);
  CHECK(s.handle_message(ClientMessage::make_control(ControlAction::Start)).accepted);
  const Ack again = s.handle_message(ClientMessage::make_control(ControlAction::Start));
  CHECK_FALSE(again.accepted);
  CHECK(again.reason.find("running") != std::string::npos);
  CHECK_FALSE(s.handle_message(ClientMessage::make_method(MethodId::C)).accepted);
  s.step();
  CHECK(s.world().tick_index == 1);
  CHECK(s.handle_message(ClientMessage::make_control(ControlAction::Pause)).accepted);
  s.step();
  CHECK(s.world().tick_index == 1);
  CHECK(s.handle_message(ClientMessage::make_control(ControlAction::Resume)).accepted);
  s.client_disconnected();
  CHECK(s.lifecycle() == Lifecycle::Paused);
  CHECK(s.handle_message(ClientMessage::make_control(ControlAction::Reset)).accepted);
  CHECK(s.lifecycle() == Lifecycle::Idle);
  CHECK(s.world().tick_index == 0);
  CHECK(s.handle_message(ClientMessage::make_control(ControlAction::Start)).accepted);
  CHECK(s.handle_message(ClientMessage::make_control(ControlAction::Stop)).accepted);
  CHECK(s.lifecycle() == Lifecycle::Finished);
  REQUIRE(s.results().size() == 1);
  CHECK(s.results()[0].end_reason == "stopped");
  CHECK_FALSE(s.handle_message(ClientMessage::make_control(ControlAction::Start)).accepted);
}

TEST_CASE("gesture source decides which messages are accepted")
{
  SessionConfig c = short_config("source", MethodId::A, 1.0);
  {
    Session s(c, RunMode::Headless);
    CHECK(s.handle_message(ClientMessage::make_gesture(GestureClass::WF)).accepted);
    CHECK_FALSE(s.handle_message(ClientMessage::make_intent(GestureClass::WF)).accepted);
  }
  c.gesture_source.kind = GestureSourceKind::Synthetic;
  Session s(c, RunMode::Headless);
  CHECK_FALSE(s.handle_message(ClientMessage::make_gesture(GestureClass::WF)).accepted);
  CHECK_FALSE(s.handle_message(ClientMessage::make_classification(GestureClass::WF)).accepted);
  CHECK(s.handle_message(ClientMessage::make_intent(GestureClass::WF)).accepted);
}

TEST_CASE("synthetic emg intent drives method A through the classifier")
{
  SessionConfig c = short_config("synth", MethodId::A, 3.0);
  c.gesture_source.kind = GestureSourceKind::Synthetic;
  Session s(c, RunMode::Headless);
  const double home = c.world.arm.home[0];
  const Trace trace = {{0.5, ClientMessage::make_intent(GestureClass::WF)},
                       {1.5, ClientMessage::make_intent(GestureClass::NM)}};
  const TrialResult r = s.run_trial(trace);
  const auto log = read_log(r.log_path);
  REQUIRE(count_kind(log, "gesture") >= 2);
  std::vector<std::string> seen;
  double first_wf = -1;
  for (const auto& rec : log)
    if (rec.at("kind") == "gesture")
    {
      seen.push_back(rec.at("gesture"));
      if (seen.back() == "WF" && first_wf < 0)
        first_wf = rec.at("t");
    }
  const auto first_active = std::find_if(seen.begin(), seen.end(), [](const std::string& g) { return g != "NM"; });
  REQUIRE(first_active != seen.end());
  CHECK(*first_active == "WF");
  CHECK(seen.back() == "NM");
  // window fill plus three classifications
  CHECK(first_wf > 0.5);
  CHECK(first_wf < 0.9);
  // joint 0 moved while WF was held (about one second at the joint speed)
  const auto& last_snapshot = *std::find_if(log.rbegin(), log.rend(), [](const json& j) { return j.at("kind") == "snapshot"; });
  const double q0 = last_snapshot.at("q")[0];
  CHECK(q0 - home == doctest::Approx(c.control.joint_speed * 1.0).epsilon(0.25));
}

TEST_CASE("method C lock is visible in the snapshot")
{
  SessionConfig c = short_config("lock", MethodId::C, 1.0);
  Session s(c, RunMode::Headless);
  const Vector3d target = s.world().blocks[2].pose.translation;
  const Trace trace = {{0.0, look_at(s, target)}, {0.3, ClientMessage::make_gesture(GestureClass::WF)}};
  std::optional<Snapshot> before, after;
  s.on_snapshot = [&](const Snapshot& snap) {
    if (snap.t < 0.29)
      before = snap;
    else if (!after && snap.t > 0.31)
      after = snap;
  };
  s.run_trial(trace);
  REQUIRE(before);
  REQUIRE(after);
  CHECK(before->selection.block == BlockId{2});
  CHECK_FALSE(before->selection.locked);
  CHECK(after->selection.block == BlockId{2});
  CHECK(after->selection.locked);
  const json j = after->to_json(c.world);
  CHECK(j.at("type") == "snapshot");
  CHECK(j.at("selection").at("locked") == true);
  CHECK(j.at("blocks").size() == 4);
  CHECK(j.at("belief").size() == 4);
}

TEST_CASE("NM during execution aborts and freezes the arm")
{
  SessionConfig c = short_config("abort", MethodId::C, 3.0);
  Session s(c, RunMode::Headless);
  const Vector3d target = s.world().blocks[0].pose.translation;
  const Trace trace = {{0.0, look_at(s, target)},
                       {0.2, ClientMessage::make_gesture(GestureClass::WF)},
                       {0.3, ClientMessage::make_gesture(GestureClass::WE)},
                       {0.6, ClientMessage::make_gesture(GestureClass::NM)}};
  std::optional<JointVector> at_abort;
  std::optional<JointVector> later;
  s.run_trial(trace, [&](const Session& sess) {
    const auto& w = sess.world();
    if (w.time >= 0.6 - 1e-9 && w.time < 0.6 + 0.5e-3)
      at_abort = w.q;
    if (w.time > 1.5 && !later)
      later = w.q;
  });
  REQUIRE(at_abort);
  REQUIRE(later);
  CHECK((*later - *at_abort).norm() == 0.0);
  const auto log = read_log(s.results()[0].log_path);
  CHECK(count_kind(log, "plan_request") == 1);
  CHECK(count_kind(log, "plan_result") == 1);
  CHECK(count_kind(log, "plan_abort") == 1);
  CHECK(count_kind(log, "plan_done") == 0);
}

TEST_CASE("shoulder motion invalidates an executing plan")
{
  SessionConfig c = short_config("invalid", MethodId::D, 2.0);
  Session s(c, RunMode::Headless);
  const Vector3d target = s.world().blocks[1].pose.translation;
  RigidTransform moved = c.shoulder;
  moved.translation.x() -= 0.05;
  const Trace trace = {{0.0, look_at(s, target)},
                       {0.2, ClientMessage::make_gesture(GestureClass::WF)},
                       {0.3, ClientMessage::make_gesture(GestureClass::WE)},
                       {0.5, ClientMessage::make_shoulder(moved)}};
  s.run_trial(trace);
  const auto log = read_log(s.results()[0].log_path);
  CHECK(count_kind(log, "plan_invalidated") == 1);
  CHECK(count_kind(log, "plan_done") == 0);
  CHECK(s.controller().plan_status.find("replan") != std::string::npos);
}

TEST_CASE("identical config and trace give byte-identical logs")
{
  const auto run = [](const std::string& name) {
    SessionConfig c = short_config(name, MethodId::D, 6.0);
    c.trials[0].gaze_noise = true;
    Session s(c, RunMode::Headless);
    const Vector3d target = s.world().blocks[3].pose.translation;
    const Trace trace = {{0.0, look_at(s, target)},
                         {0.3, ClientMessage::make_gesture(GestureClass::WF)},
                         {0.4, ClientMessage::make_gesture(GestureClass::WE)},
                         {3.0, ClientMessage::make_gesture(GestureClass::HC)},
                         {3.5, ClientMessage::make_gesture(GestureClass::WF)},
                         {4.0, ClientMessage::make_gesture(GestureClass::NM)}};
    return slurp(s.run_trial(trace).log_path);
  };
  const std::string a = run("det_a");
  const std::string b = run("det_b");
  CHECK(a.size() > 1000);
  CHECK(a == b);
  CHECK(a.find("plan_result") != std::string::npos);
}
