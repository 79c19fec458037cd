#pragma once

#include "prosim/collision.hpp"
#include "prosim/kinematics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

namespace prosim
{

/// Target for the hand frame, in the shoulder base frame. With an approach
/// axis, only the direction of the hand's local −Z is constrained (free yaw).
struct PoseGoal
{
  Vector3d position = Vector3d::Zero();
  std::optional<Quaterniond> orientation;
  std::optional<Vector3d> approach_axis;  // unit, base frame

  static PoseGoal exact(const RigidTransform& pose) { return {pose.translation, pose.rotation, std::nullopt}; }
  static PoseGoal free_yaw(const Vector3d& position, const Vector3d& approach)
  {
    return {position, std::nullopt, approach.normalized()};
  }
};

struct IkOptions
{
  double position_tolerance = 0.005;                // m
  double orientation_tolerance = 2.0 * M_PI / 180.0;  // rad
  std::size_t max_iterations = 200;
  double damping = 0.05;
  double max_step = 0.2;  // rad per iteration, per joint
};

struct PoseError
{
  double position = 0.0;
  double orientation = 0.0;
};

PoseError pose_error(const RigidTransform& hand, const PoseGoal& goal);

/// Damped least squares from each seed in turn; first converged solution.
std::optional<JointVector> ik_solve(const ArmGeometry& geometry, const PoseGoal& goal,
                                    std::span<const JointVector> seeds, const IkOptions& options = {});

struct TrajectoryPoint
{
  double time = 0.0;
  JointVector q = JointVector::Zero();
};

enum class GoalKind
{
  Exact,
  Intermediate,
};

const char* to_string(GoalKind k);

struct JointTrajectory
{
  std::vector<TrajectoryPoint> waypoints;
  GoalKind goal_kind = GoalKind::Exact;

  double duration() const { return waypoints.empty() ? 0.0 : waypoints.back().time; }
  const JointVector& final_q() const { return waypoints.back().q; }
};

struct PlannerConfig
{
  double time_budget = 0.5;              // s per attempt
  double iterations_per_second = 20000;  // budget → deterministic iteration count
  double extend_step = 0.15;             // rad (max-norm) per tree extension
  double collision_resolution = 0.02;    // rad per joint between checks
  double waypoint_spacing = 0.05;        // rad per joint in the output
  double joint_speed = 0.7;              // rad/s
  std::size_t shortcut_attempts = 150;
  std::size_t random_ik_seeds = 24;
  double goal_bias = 0.1;
  ArmCollisionModel collision;
  IkOptions ik;
};

struct PlanRequest
{
  JointVector start = JointVector::Zero();
  PoseGoal goal;
  ObstacleSet obstacles;  // base frame
  std::optional<HeldBlock> held;
  double time_budget = 0.5;
  std::uint64_t rng_seed = 1;
};

class PlanRejected : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct PlanStats
{
  std::size_t iterations = 0;
  std::size_t tree_nodes = 0;
  bool goal_ik_found = false;
  bool cancelled = false;
  double start_distance = 0.0;  // EEF-goal distance at the start
  double final_distance = 0.0;  // EEF-goal distance at the final waypoint
};

/// Densified straight-line motion check.
bool motion_valid(const ArmGeometry& geometry, const JointVector& a, const JointVector& b,
                  const ObstacleSet& obstacles, const std::optional<HeldBlock>& held, const PlannerConfig& config);

/// Bidirectional RRT in joint space from the start to an IK solution of the
/// goal; shortcut, densified and timed at constant joint speed. Falls back to
/// the start-tree node closest to the goal (Intermediate) when no IK goal
/// exists or the budget runs out. Throws PlanRejected on invalid requests.
JointTrajectory plan_reach(const ArmGeometry& geometry, const PlanRequest& request, const PlannerConfig& config = {},
                           std::stop_token stop = {}, PlanStats* stats = nullptr);

enum class ExecStatus
{
  Running,
  Done,
  Aborted,
};

const char* to_string(ExecStatus s);

struct ExecSample
{
  JointVector q;
  ExecStatus status;
};

/// Linear interpolation between bracketing waypoints; pure in `elapsed`.
ExecSample sample_trajectory(const JointTrajectory& trajectory, double elapsed);

/// Stateful executor: once aborted the arm stays frozen at the last q.
class TrajectoryExecutor
{
public:
  TrajectoryExecutor() = default;
  explicit TrajectoryExecutor(JointTrajectory trajectory) : trajectory_(std::move(trajectory)) {}

  ExecSample execute_tick(double elapsed, bool abort);

  const JointTrajectory& trajectory() const { return trajectory_; }
  ExecStatus status() const { return status_; }

private:
  JointTrajectory trajectory_;
  ExecStatus status_ = ExecStatus::Running;
  JointVector last_ = JointVector::Zero();
  bool started_ = false;
};

}  // namespace prosim
