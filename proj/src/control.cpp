#include "prosim/control.hpp"

#include <array>
#include <stdexcept>

namespace prosim
{

namespace
{

const std::array<std::string, kEefAxisCount> kAxisNames = {"X translation", "Y translation", "Z translation",
                                                          "X rotation",    "Y rotation",    "Z rotation"};

bool is_motion(GestureClass g) { return g == GestureClass::WF || g == GestureClass::WE; }

double motion_sign(GestureClass g) { return g == GestureClass::WF ? 1.0 : -1.0; }

void toggle(HandState& h) { h = h == HandState::Open ? HandState::Closed : HandState::Open; }

/// Shared by A and B: latches the held class, handles HO cycling and HC toggling.
void direct_event(ControllerState& s, const std::optional<GestureEvent>& event, std::size_t& index, std::size_t modes,
                  ControlCommand& cmd)
{
  if (!event)
    return;
  s.held = event->gesture;
  if (event->gesture == GestureClass::HO)
    index = (index + 1) % modes;
  else if (event->gesture == GestureClass::HC)
  {
    toggle(s.hand);
    cmd.toggle_hand = true;
  }
}

ControlCommand step_assisted(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const IntentParams& intent, PriorMode mode)
{
  ControlCommand cmd;
  if (in.stage != s.stage)
  {
    s.stage = in.stage;
    s.selection = {};
    s.marker_frozen = false;
    if (s.stage == TaskStage::Place)
      s.marker = s.last_valid_marker.value_or(in.place_center);
    else
      s.marker.reset();
  }

  if (in.gaze)
  {
    s.belief = posterior_belief(in.gaze->distances, in.gaze->context, in.gaze->remaining, intent.sigma, mode,
                                intent.priors);
    if (s.stage == TaskStage::Pick)
      s.selection = select_target(s.belief, s.selection);
  }
  if (in.marker_candidate)
  {
    s.last_valid_marker = in.marker_candidate;
    if (s.stage == TaskStage::Place && !s.marker_frozen)
      s.marker = in.marker_candidate;
  }

  if (!event)
    return cmd;
  s.held = event->gesture;

  // Any change away from WE stops the motion.
  if (s.plan_active && event->gesture != GestureClass::WE)
  {
    cmd.abort = true;
    s.plan_active = false;
    s.plan_status = "aborted";
  }

  switch (event->gesture)
  {
    case GestureClass::HC:
      toggle(s.hand);
      cmd.toggle_hand = true;
      break;
    case GestureClass::WF:
      if (s.stage == TaskStage::Pick)
      {
        if (s.selection.block)
          s.selection.locked = !s.selection.locked;
      }
      else if (s.marker)
        s.marker_frozen = !s.marker_frozen;
      break;
    case GestureClass::WE:
    {
      if (s.plan_active)
        break;  // held WE keeps the current plan
      PlanCommand plan;
      plan.stage = s.stage;
      if (s.stage == TaskStage::Pick)
      {
        if (!s.selection.locked || !s.selection.block)
        {
          s.plan_status = "lock a target first";
          break;
        }
        plan.block = s.selection.block;
      }
      else
      {
        if (!s.marker_frozen || !s.marker)
        {
          s.plan_status = "freeze the marker first";
          break;
        }
        plan.point = *s.marker;
      }
      plan.id = s.next_plan_id++;
      s.current_plan = plan.id;
      s.plan_active = true;
      s.plan_status = "planning";
      cmd.plan = plan;
      break;
    }
    case GestureClass::HO:  // no mode to cycle
    case GestureClass::NM:
      break;
  }
  return cmd;
}

}  // namespace

const std::string& axis_name(std::size_t index) { return kAxisNames.at(index); }

ControllerState initial_state(MethodId method)
{
  ControllerState s;
  s.method = method;
  return s;
}

std::string mode_label(const ControllerState& s)
{
  switch (s.method)
  {
    case MethodId::A: return joint_name(s.joint_index);
    case MethodId::B: return axis_name(s.axis_index);
    case MethodId::C:
    case MethodId::D:
    {
      const bool locked = s.stage == TaskStage::Pick ? s.selection.locked : s.marker_frozen;
      return std::string(to_string(s.stage)) + (locked ? ": locked" : ": unlocked");
    }
  }
  return {};
}

ControlCommand step_method_a(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const ArmGeometry& geometry, const ControlParams& params)
{
  if (s.method != MethodId::A)
    throw std::logic_error("step_method_a: controller is not in method A");
  ControlCommand cmd;
  direct_event(s, event, s.joint_index, kArmDof, cmd);
  if (s.held && is_motion(*s.held))
  {
    JointVector q = in.q;
    q[static_cast<Eigen::Index>(s.joint_index)] += motion_sign(*s.held) * params.joint_speed * in.dt;
    q = geometry.clamp(q);
    if (q != in.q)
      cmd.joints = q;
  }
  return cmd;
}

ControlCommand step_method_b(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const ArmGeometry& geometry, const ControlParams& params)
{
  if (s.method != MethodId::B)
    throw std::logic_error("step_method_b: controller is not in method B");
  ControlCommand cmd;
  direct_event(s, event, s.axis_index, kEefAxisCount, cmd);
  if (!s.held || !is_motion(*s.held))
  {
    s.guard = StepStatus::Ok;
    return cmd;
  }
  Twist t;
  const double sign = motion_sign(*s.held);
  if (s.axis_index < 3)
    t.linear[static_cast<Eigen::Index>(s.axis_index)] = sign * params.eef_linear_speed;
  else
    t.angular[static_cast<Eigen::Index>(s.axis_index - 3)] = sign * params.eef_angular_speed;
  const StepResult r = eef_velocity_step(geometry, in.q, t, in.dt, params.cond_limit);
  s.guard = r.status;
  if (r.status == StepStatus::Ok && r.q != in.q)
    cmd.joints = r.q;
  return cmd;
}

ControlCommand step_method_c(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const IntentParams& intent)
{
  if (s.method != MethodId::C)
    throw std::logic_error("step_method_c: controller is not in method C");
  return step_assisted(s, event, in, intent, PriorMode::Uniform);
}

ControlCommand step_method_d(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const IntentParams& intent)
{
  if (s.method != MethodId::D)
    throw std::logic_error("step_method_d: controller is not in method D");
  return step_assisted(s, event, in, intent, PriorMode::TaskContext);
}

ControlCommand step_controller(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                               const ArmGeometry& geometry, const ControlParams& params, const IntentParams& intent)
{
  switch (s.method)
  {
    case MethodId::A: return step_method_a(s, event, in, geometry, params);
    case MethodId::B: return step_method_b(s, event, in, geometry, params);
    case MethodId::C: return step_method_c(s, event, in, intent);
    case MethodId::D: return step_method_d(s, event, in, intent);
  }
  return {};
}

void notify_plan_started(ControllerState& s, std::uint64_t id, GoalKind kind)
{
  if (id != s.current_plan || !s.plan_active)
    return;
  s.plan_status = kind == GoalKind::Exact ? "executing" : "executing (intermediate goal)";
}

void notify_plan_finished(ControllerState& s, std::uint64_t id, ExecStatus status, GoalKind kind)
{
  if (id != s.current_plan || !s.plan_active)
    return;
  s.plan_active = false;
  if (status == ExecStatus::Aborted)
    s.plan_status = "aborted";
  else
    s.plan_status = kind == GoalKind::Exact ? "done" : "intermediate goal reached";
}

void notify_plan_failed(ControllerState& s, std::uint64_t id, const std::string& reason)
{
  if (id != s.current_plan || !s.plan_active)
    return;
  s.plan_active = false;
  s.plan_status = "plan failed: " + reason;
}

void notify_plan_invalidated(ControllerState& s, const std::string& reason)
{
  if (!s.plan_active)
    return;
  s.plan_active = false;
  s.plan_status = reason;
}

}  // namespace prosim
