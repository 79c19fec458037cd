#pragma once

#include "prosim/emg.hpp"
#include "prosim/intent.hpp"
#include "prosim/kinematics.hpp"
#include "prosim/planner.hpp"
#include "prosim/world.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prosim
{

inline constexpr std::size_t kEefAxisCount = 6;

/// "X translation", "Y translation", "Z translation", "X rotation", ...
const std::string& axis_name(std::size_t index);

struct ControlParams
{
  double joint_speed = 0.5;         // rad/s
  double eef_linear_speed = 0.08;   // m/s
  double eef_angular_speed = 0.5;   // rad/s
  double cond_limit = kDefaultConditionLimit;
};

/// What assisted methods see of the scene on a belief refresh tick.
struct GazeScene
{
  std::vector<double> distances;             // one per remaining candidate
  std::vector<IntentCandidate> remaining;
  TaskContext context;
};

struct TickInputs
{
  double dt = 0.001;
  JointVector q = JointVector::Zero();
  TaskStage stage = TaskStage::Pick;        // Place while a block is held
  std::optional<GazeScene> gaze;            // present when the belief is refreshed
  std::optional<Vector3d> marker_candidate; // gaze hit on the place half, refresh ticks only
  Vector3d place_center = Vector3d::Zero(); // marker fallback when no valid hit was seen yet
};

struct PlanCommand
{
  std::uint64_t id = 0;
  TaskStage stage = TaskStage::Pick;
  std::optional<BlockId> block;  // pick target
  Vector3d point = Vector3d::Zero();  // place marker, world frame

  bool operator==(const PlanCommand&) const = default;
};

struct ControlCommand
{
  std::optional<JointVector> joints;  // direct control: new joint positions
  bool toggle_hand = false;
  std::optional<PlanCommand> plan;
  bool abort = false;

  bool empty() const { return !joints && !toggle_hand && !plan && !abort; }
  bool operator==(const ControlCommand&) const = default;
};

struct ControllerState
{
  MethodId method = MethodId::A;
  std::size_t joint_index = 0;
  std::size_t axis_index = 0;
  Selection selection;
  Belief belief;
  std::optional<GestureClass> held;  // class of the latest event
  HandState hand = HandState::Open;

  // Assisted methods.
  TaskStage stage = TaskStage::Pick;
  bool plan_active = false;  // a plan is being computed or executed
  std::uint64_t next_plan_id = 1;
  std::uint64_t current_plan = 0;
  std::optional<Vector3d> marker;
  std::optional<Vector3d> last_valid_marker;
  bool marker_frozen = false;
  std::string plan_status = "idle";

  StepStatus guard = StepStatus::Ok;
};

ControllerState initial_state(MethodId method);

std::string mode_label(const ControllerState& s);

ControlCommand step_method_a(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const ArmGeometry& geometry, const ControlParams& params = {});

ControlCommand step_method_b(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const ArmGeometry& geometry, const ControlParams& params = {});

/// Gaze-only belief (uniform prior).
ControlCommand step_method_c(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const IntentParams& intent = {});

/// Gaze belief weighted by the colour of the previously released block.
ControlCommand step_method_d(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                             const IntentParams& intent = {});

ControlCommand step_controller(ControllerState& s, const std::optional<GestureEvent>& event, const TickInputs& in,
                               const ArmGeometry& geometry, const ControlParams& params, const IntentParams& intent);

/// The session reports back the fate of plan `id`. Stale ids are ignored.
void notify_plan_started(ControllerState& s, std::uint64_t id, GoalKind kind);
void notify_plan_finished(ControllerState& s, std::uint64_t id, ExecStatus status, GoalKind kind);
void notify_plan_failed(ControllerState& s, std::uint64_t id, const std::string& reason);
/// External invalidation (shoulder moved during execution).
void notify_plan_invalidated(ControllerState& s, const std::string& reason);

}  // namespace prosim
