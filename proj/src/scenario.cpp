#include "prosim/scenario.hpp"

#include <functional>
#include <stdexcept>

namespace prosim
{

namespace
{

constexpr double kStepTimeout = 60.0;  // simulated seconds before a step counts as stalled

class Operator
{
public:
  using Check = std::function<bool(Operator&)>;

  explicit Operator(Session& s) : s_(s) {}

  Session& session() { return s_; }
  const WorldState& world() const { return s_.world(); }
  const ControllerState& ctrl() const { return s_.controller(); }
  double now() const { return s_.world().time; }
  double step_age() const { return now() - step_start_; }

  void send(const ClientMessage& m)
  {
    const Ack a = s_.handle_message(m);
    if (!a.accepted)
      throw std::logic_error("scenario message rejected: " + a.reason);
    trace_.push_back({now(), m});
  }

  void look_at(const Vector3d& point)
  {
    const Vector3d eye = s_.eye_position();
    send(ClientMessage::make_gaze(eye, point - eye));
  }

  void add(std::string name, Check check) { steps_.push_back({std::move(name), std::move(check)}); }

  void then_send(std::string name, std::function<void(Operator&)> action)
  {
    add(std::move(name), [action](Operator& op) {
      action(op);
      return true;
    });
  }

  void then_gesture(GestureClass g)
  {
    then_send(std::string("gesture ") + to_string(g), [g](Operator& op) { op.send(ClientMessage::make_gesture(g)); });
  }

  void then_wait(double seconds)
  {
    add("wait", [seconds](Operator& op) { return op.step_age() >= seconds - 1e-9; });
  }

  /// WE, then wait for the resulting plan to finish; anything but an exact arrival is an authoring error.
  void then_reach()
  {
    auto id = std::make_shared<std::uint64_t>(0);
    then_send("gesture WE", [id](Operator& op) {
      *id = op.ctrl().next_plan_id;
      op.send(ClientMessage::make_gesture(GestureClass::WE));
    });
    add("reach", [id](Operator& op) {
      const auto& c = op.ctrl();
      if (c.current_plan < *id || c.plan_active)
        return false;
      if (c.plan_status != "done")
        throw std::runtime_error("scenario reach ended with status \"" + c.plan_status + "\"");
      return true;
    });
  }

  void pick(BlockId id)
  {
    then_send("look at block", [id](Operator& op) { op.look_at(op.world().blocks[id].pose.translation); });
    add("selected", [id](Operator& op) {
      return op.ctrl().selection.block == id && !op.ctrl().selection.locked;
    });
    then_gesture(GestureClass::WF);
    add("locked", [](Operator& op) { return op.ctrl().selection.locked; });
    then_reach();
    then_gesture(GestureClass::HC);
    add("attached", [id](Operator& op) { return op.world().attached == id; });
  }

  void place_at(std::function<Vector3d(Operator&)> point)
  {
    auto p = std::make_shared<Vector3d>(Vector3d::Zero());
    then_send("look at place point", [p, point](Operator& op) {
      *p = point(op);
      op.look_at(*p);
    });
    add("marker on point", [p](Operator& op) {
      const auto& m = op.ctrl().marker;
      return m && (*m - *p).norm() < 1e-6;
    });
    then_gesture(GestureClass::WF);
    add("marker frozen", [](Operator& op) { return op.ctrl().marker_frozen; });
    then_reach();
  }

  void release_and_settle(BlockId id)
  {
    then_gesture(GestureClass::HC);
    add("settled", [id](Operator& op) {
      return !op.world().attached && op.world().blocks[id].phase == BlockPhase::Resting;
    });
  }

  AuthoredRun run()
  {
    const Ack a = s_.handle_message(ClientMessage::make_control(ControlAction::Start));
    if (!a.accepted)
      throw std::logic_error("scenario: " + a.reason);
    std::size_t index = 0;
    step_start_ = now();
    while (true)
    {
      while (index < steps_.size())
      {
        if (step_age() > kStepTimeout)
          throw std::runtime_error("scenario stalled at step \"" + steps_[index].name + "\"");
        if (!steps_[index].check(*this))
          break;
        ++index;
        step_start_ = now();
      }
      if (auto r = s_.step())
        return {trace_, *r};
    }
  }

private:
  struct Step
  {
    std::string name;
    Check check;
  };

  Session& s_;
  Trace trace_;
  std::vector<Step> steps_;
  double step_start_ = 0.0;
};

}  // namespace

const char* to_string(ScenarioKind k)
{
  switch (k)
  {
    case ScenarioKind::PerfectD: return "perfect-d";
    case ScenarioKind::CrossedNotReached: return "crossed-not-reached";
    case ScenarioKind::DroppedFloor: return "dropped-floor";
    case ScenarioKind::DroppedSameSide: return "dropped-same-side";
    case ScenarioKind::NeverGrasped: return "never-grasped";
  }
  return "?";
}

std::optional<ScenarioKind> parse_scenario(const std::string& name)
{
  for (auto k : {ScenarioKind::PerfectD, ScenarioKind::CrossedNotReached, ScenarioKind::DroppedFloor,
                 ScenarioKind::DroppedSameSide, ScenarioKind::NeverGrasped})
    if (name == to_string(k))
      return k;
  return std::nullopt;
}

AuthoredRun author_scenario(const SessionConfig& config, ScenarioKind kind)
{
  SessionConfig c = config;
  c.trials.resize(1);
  c.gesture_source = GestureSourceConfig{};
  if (kind == ScenarioKind::PerfectD)
    c.trials[0].method = MethodId::D;
  else if (c.trials[0].method == MethodId::A || c.trials[0].method == MethodId::B)
    throw std::invalid_argument("scenario " + std::string(to_string(kind)) + " needs an assisted method (C or D)");

  Session session(c, RunMode::Headless);
  Operator op(session);
  const auto& order = c.trials[0].order;
  const BlockId first = order[0];

  switch (kind)
  {
    case ScenarioKind::PerfectD:
      for (BlockId id : order)
      {
        op.pick(id);
        op.place_at([id](Operator& o) { return o.world().target_world(o.session().config().world, id); });
        op.release_and_settle(id);
      }
      break;
    case ScenarioKind::CrossedNotReached:
      op.pick(first);
      op.place_at([](Operator& o) { return o.world().scene.box_frame * Vector3d(-0.05, 0.22, 0.0); });
      op.release_and_settle(first);
      break;
    case ScenarioKind::DroppedFloor:
    {
      op.pick(first);
      const RigidTransform start = c.shoulder;
      constexpr int kSteps = 60;  // 3 s at 20 Hz
      for (int i = 1; i <= kSteps; ++i)
      {
        op.then_wait(0.05);
        op.then_send("move shoulder", [start, i](Operator& o) {
          RigidTransform p = start;
          p.translation.x() -= 0.6 * i / kSteps;
          o.send(ClientMessage::make_shoulder(p));
        });
      }
      op.then_wait(0.1);
      op.release_and_settle(first);
      break;
    }
    case ScenarioKind::DroppedSameSide:
      op.pick(first);
      op.then_wait(0.1);
      op.release_and_settle(first);
      break;
    case ScenarioKind::NeverGrasped: break;
  }
  return op.run();
}

}  // namespace prosim
