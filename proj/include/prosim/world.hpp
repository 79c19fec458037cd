#pragma once

#include "prosim/collision.hpp"
#include "prosim/geometry.hpp"
#include "prosim/intent.hpp"
#include "prosim/kinematics.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prosim
{

enum class MethodId
{
  A,  // direct joint control
  B,  // direct end-effector control
  C,  // gaze-assisted
  D,  // gaze + task-context assisted
};

inline constexpr std::array<MethodId, 4> kAllMethods = {MethodId::A, MethodId::B, MethodId::C, MethodId::D};

const char* to_string(MethodId m);
std::optional<MethodId> parse_method(std::string_view name);

enum class HandState
{
  Open,
  Closed,
};

const char* to_string(HandState h);

/// Box dimensions and layout. The box frame has its origin at the floor
/// center, x along the participant's heading, z up; the partition is the
/// plane y = 0. The pick half is y < 0 (right of the partition), the place half y > 0.
struct BoxSpec
{
  double floor_width = 0.55;  // along y, across the partition
  double floor_depth = 0.35;  // along x
  double wall_height = 0.08;
  double wall_thickness = 0.01;
  double partition_height = 0.10;
  double partition_thickness = 0.01;

  double table_width = 1.2;
  double table_depth = 0.6;
  double table_thickness = 0.04;

  /// Geometric rules relative to the shoulder.
  double table_below_shoulder = 0.43;
  double box_distance = 0.6;

  /// Block slots and target centers, box-frame (x, y).
  std::array<Eigen::Vector2d, kBlockCount> pick_slots{
      Eigen::Vector2d{-0.12, -0.07}, Eigen::Vector2d{-0.12, -0.17}, Eigen::Vector2d{0.0, -0.07},
      Eigen::Vector2d{0.0, -0.17}};
  std::array<Eigen::Vector2d, kBlockCount> targets{Eigen::Vector2d{-0.12, 0.07}, Eigen::Vector2d{-0.12, 0.17},
                                                   Eigen::Vector2d{0.0, 0.07}, Eigen::Vector2d{0.0, 0.17}};
  double target_radius = 0.05;

  void validate() const;
};

struct BlockSpec
{
  BlockId id = 0;
  BlockColor color = BlockColor::Red;
  int number = 1;
  double diameter = 0.05;
  double height = 0.05;

  double radius() const { return 0.5 * diameter; }
  std::string label() const;  // e.g. "red #1"
};

/// The conventional task sequence: Red #1, Blue #1, Red #2, Blue #2.
std::array<BlockSpec, kBlockCount> default_blocks(double diameter = 0.05, double height = 0.05);

/// Placement of the box in the world, derived from the upright shoulder pose.
struct SceneLayout
{
  RigidTransform box_frame;  // world ← box
  double table_top = 0.0;    // world z of the table top / box floor

  Vector3d box_to_world(const Vector3d& p) const { return box_frame * p; }
  Vector3d world_to_box(const Vector3d& p) const { return box_frame.inverse() * p; }
};

/// Box center `box_distance` ahead of the shoulder along its horizontal
/// heading, table top `table_below_shoulder` under the shoulder's height.
SceneLayout localize_scene(const RigidTransform& upright_shoulder, const BoxSpec& box);

/// Six ways of putting two red and two blue blocks on four slots.
inline constexpr std::size_t kArrangementCount = 6;

/// slot_of[block] for arrangement `id`. Red slots are the id-th pair in
/// lexicographic order; within a colour, the lower number takes the lower slot.
std::array<std::size_t, kBlockCount> arrangement_slots(std::size_t id,
                                                       const std::array<BlockSpec, kBlockCount>& blocks);

struct TrialConfig
{
  MethodId method = MethodId::D;
  std::size_t arrangement = 0;
  std::array<BlockId, kBlockCount> order{0, 1, 2, 3};
  double duration = 300.0;
  std::uint64_t rng_seed = 1;
  bool gaze_noise = false;
  double gaze_noise_deg = 1.5;

  void validate() const;
};

/// Method order for a Study-1 participant (1-based) from the counterbalanced Latin square.
std::array<MethodId, 4> study_method_sequence(std::size_t participant);

/// Session plan: each method of the participant's sequence repeated
/// `trials_per_method` times; arrangements rotate through all six.
std::vector<TrialConfig> counterbalanced_plan(std::size_t participant, std::size_t trials_per_method,
                                              std::uint64_t base_seed = 1);

struct WorldConfig
{
  ArmGeometry arm = ArmGeometry::default_geometry();
  BoxSpec box;
  std::array<BlockSpec, kBlockCount> blocks = default_blocks();
  double grasp_threshold = 0.04;  // grasp point to block surface
  double gravity = 9.81;
  double tick = 0.001;
  double hand_push_radius = 0.02;
  double rest_tolerance = 1e-9;
  double max_release_speed = 1.0;  // m/s, horizontal
};

enum class BlockPhase
{
  Resting,
  Attached,
  Falling,
};

const char* to_string(BlockPhase p);

enum class Side
{
  Pick,
  Place,
};

struct BlockState
{
  RigidTransform pose;  // world frame, center of the cylinder
  BlockPhase phase = BlockPhase::Resting;

  // Falling: pose(t) = release + v·(t - t_release) - ½g(t - t_release)² ẑ
  Vector3d release_position = Vector3d::Zero();
  Vector3d release_velocity = Vector3d::Zero();
  double release_time = 0.0;

  bool in_target = false;
  Side side = Side::Pick;
};

struct BlockHistory
{
  std::size_t attach_count = 0;
  std::size_t crossing_count = 0;  // pick → place crossings
  std::optional<Side> last_release_side;
  std::optional<double> first_attach_time;
};

enum class WorldEventKind
{
  Attach,       // contact made cue
  Detach,       // contact lost cue
  Crossing,     // center crossed the partition plane
  TargetEnter,  // center entered its own target region
  TargetExit,
  Rest,         // a falling block came to rest
  Timeout,
  Complete,     // all blocks resting in their targets
};

const char* to_string(WorldEventKind k);

struct WorldEvent
{
  WorldEventKind kind = WorldEventKind::Timeout;
  double time = 0.0;
  std::optional<BlockId> block;
  Vector3d position = Vector3d::Zero();
  int direction = 0;  // crossings: +1 toward the place half, −1 back

  bool operator==(const WorldEvent& o) const
  {
    return kind == o.kind && time == o.time && block == o.block && position == o.position && direction == o.direction;
  }
};

enum class Outcome
{
  Success,
  InProgressAtTimeout,
  CrossedNotReached,
  DroppedFloor,
  DroppedSameSide,
  NeverGrasped,
};

const char* to_string(Outcome o);
std::optional<Outcome> parse_outcome(std::string_view name);

struct WorldState
{
  double time = 0.0;
  std::uint64_t tick_index = 0;
  RigidTransform shoulder;  // world ← arm base
  JointVector q = JointVector::Zero();
  HandState hand = HandState::Open;
  SceneLayout scene;
  std::array<BlockState, kBlockCount> blocks;
  std::array<BlockHistory, kBlockCount> history;
  std::optional<BlockId> attached;
  RigidTransform attach_offset;  // hand → block center
  bool timed_out = false;
  bool complete = false;
  double duration = 300.0;

  // Hand kinematics of the previous tick, for release velocity.
  Vector3d previous_hand = Vector3d::Zero();
  Vector3d hand_velocity = Vector3d::Zero();

  RigidTransform hand_pose(const ArmGeometry& arm) const;
  Vector3d target_world(const WorldConfig& config, BlockId id) const;
  Side side_of(const Vector3d& world_point) const;
};

/// Places the blocks of the arrangement, localizes the box from the upright
/// shoulder pose and resets the clock. The arm starts at the home posture.
WorldState spawn_trial(const WorldConfig& config, const TrialConfig& trial, const RigidTransform& upright_shoulder);

/// Shoulder at (0, 0, height) facing +X.
WorldState spawn_trial(const WorldConfig& config, const TrialConfig& trial, double shoulder_height);

/// Applies a commanded hand state. Closing near a block attaches the nearest
/// one; opening releases the held block, which then falls.
std::vector<WorldEvent> grasp_update(WorldState& state, const WorldConfig& config, HandState commanded);

/// Advances the clock by one tick: attached block follows the hand, released
/// blocks fall, the hand pushes resting blocks, crossings and target entries
/// are detected.
std::vector<WorldEvent> world_tick(WorldState& state, const WorldConfig& config);

/// Obstacles in the world frame: table, four walls, partition and every
/// non-attached block.
ObstacleSet world_obstacles(const WorldState& state, const WorldConfig& config);

/// Region of the place half floor, in world coordinates.
PlaneRegion place_region(const WorldState& state, const WorldConfig& config);

struct OutcomeInput
{
  BlockHistory history;
  Vector3d final_position = Vector3d::Zero();
  BlockPhase phase = BlockPhase::Resting;
  Vector3d target = Vector3d::Zero();
};

Outcome classify_outcome(const OutcomeInput& input, const SceneLayout& scene, const BoxSpec& box);

std::array<Outcome, kBlockCount> classify_outcomes(const WorldState& state, const WorldConfig& config);

}  // namespace prosim
