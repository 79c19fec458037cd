#include "prosim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prosim
{

const char* to_string(MethodId m)
{
  switch (m)
  {
    case MethodId::A: return "A";
    case MethodId::B: return "B";
    case MethodId::C: return "C";
    case MethodId::D: return "D";
  }
  return "?";
}

std::optional<MethodId> parse_method(std::string_view name)
{
  for (MethodId m : kAllMethods)
    if (name == to_string(m))
      return m;
  return std::nullopt;
}

const char* to_string(HandState h) { return h == HandState::Open ? "open" : "closed"; }

const char* to_string(BlockPhase p)
{
  switch (p)
  {
    case BlockPhase::Resting: return "resting";
    case BlockPhase::Attached: return "attached";
    case BlockPhase::Falling: return "falling";
  }
  return "?";
}

const char* to_string(WorldEventKind k)
{
  switch (k)
  {
    case WorldEventKind::Attach: return "attach";
    case WorldEventKind::Detach: return "detach";
    case WorldEventKind::Crossing: return "crossing";
    case WorldEventKind::TargetEnter: return "target_enter";
    case WorldEventKind::TargetExit: return "target_exit";
    case WorldEventKind::Rest: return "rest";
    case WorldEventKind::Timeout: return "timeout";
    case WorldEventKind::Complete: return "trial_complete";
  }
  return "?";
}

const char* to_string(Outcome o)
{
  switch (o)
  {
    case Outcome::Success: return "Success";
    case Outcome::InProgressAtTimeout: return "InProgressAtTimeout";
    case Outcome::CrossedNotReached: return "CrossedNotReached";
    case Outcome::DroppedFloor: return "DroppedFloor";
    case Outcome::DroppedSameSide: return "DroppedSameSide";
    case Outcome::NeverGrasped: return "NeverGrasped";
  }
  return "?";
}

std::optional<Outcome> parse_outcome(std::string_view name)
{
  for (Outcome o : {Outcome::Success, Outcome::InProgressAtTimeout, Outcome::CrossedNotReached, Outcome::DroppedFloor,
                    Outcome::DroppedSameSide, Outcome::NeverGrasped})
    if (name == to_string(o))
      return o;
  return std::nullopt;
}

void BoxSpec::validate() const
{
  const auto positive = [](double v, const char* what) {
    if (!(v > 0.0))
      throw std::invalid_argument(std::string("box: ") + what + " must be positive");
  };
  positive(floor_width, "floor_width");
  positive(floor_depth, "floor_depth");
  positive(wall_height, "wall_height");
  positive(wall_thickness, "wall_thickness");
  positive(partition_height, "partition_height");
  positive(partition_thickness, "partition_thickness");
  positive(table_width, "table_width");
  positive(table_depth, "table_depth");
  positive(target_radius, "target_radius");
  if (table_width < floor_width || table_depth < floor_depth)
    throw std::invalid_argument("box: table must be at least as large as the box floor");
  for (const auto& t : targets)
    if (!(t.y() > 0.0) || std::abs(t.x()) > 0.5 * floor_depth || t.y() > 0.5 * floor_width)
      throw std::invalid_argument("box: every target must lie in the place half");
  for (const auto& s : pick_slots)
    if (!(s.y() < 0.0) || std::abs(s.x()) > 0.5 * floor_depth || -s.y() > 0.5 * floor_width)
      throw std::invalid_argument("box: every pick slot must lie in the pick half");
}

std::string BlockSpec::label() const { return std::string(to_string(color)) + " #" + std::to_string(number); }

std::array<BlockSpec, kBlockCount> default_blocks(double diameter, double height)
{
  std::array<BlockSpec, kBlockCount> out;
  const BlockColor colors[kBlockCount] = {BlockColor::Red, BlockColor::Blue, BlockColor::Red, BlockColor::Blue};
  const int numbers[kBlockCount] = {1, 1, 2, 2};
  for (BlockId i = 0; i < kBlockCount; ++i)
    out[i] = BlockSpec{i, colors[i], numbers[i], diameter, height};
  return out;
}

SceneLayout localize_scene(const RigidTransform& upright_shoulder, const BoxSpec& box)
{
  Vector3d heading = upright_shoulder.rotation * Vector3d::UnitX();
  heading.z() = 0.0;
  if (heading.norm() < 1e-9)
    throw std::invalid_argument("localize_scene: shoulder heading is vertical");
  heading.normalize();

  const double table_top = upright_shoulder.translation.z() - box.table_below_shoulder;
  Vector3d center = upright_shoulder.translation + box.box_distance * heading;
  center.z() = table_top;

  Matrix3d r;
  r.col(0) = heading;
  r.col(2) = Vector3d::UnitZ();
  r.col(1) = r.col(2).cross(r.col(0));

  SceneLayout out;
  out.box_frame = RigidTransform{Quaterniond(r).normalized(), center};
  out.table_top = table_top;
  return out;
}

std::array<std::size_t, kBlockCount> arrangement_slots(std::size_t id,
                                                       const std::array<BlockSpec, kBlockCount>& blocks)
{
  if (id >= kArrangementCount)
    throw std::out_of_range("arrangement id must be in 0.." + std::to_string(kArrangementCount - 1));

  std::size_t pair = 0;
  std::array<std::size_t, 2> red{};
  for (std::size_t a = 0; a < kBlockCount; ++a)
    for (std::size_t b = a + 1; b < kBlockCount; ++b)
      if (pair++ == id)
        red = {a, b};

  std::array<std::size_t, 2> blue{};
  std::size_t n = 0;
  for (std::size_t s = 0; s < kBlockCount; ++s)
    if (s != red[0] && s != red[1])
      blue[n++] = s;

  // Lower-numbered block of each colour takes the lower slot.
  std::array<std::size_t, kBlockCount> slot_of{};
  for (const auto& b : blocks)
  {
    const auto& slots = b.color == BlockColor::Red ? red : blue;
    slot_of[b.id] = slots[b.number == 1 ? 0 : 1];
  }
  return slot_of;
}

void TrialConfig::validate() const
{
  if (arrangement >= kArrangementCount)
    throw std::out_of_range("trial: arrangement id must be in 0..5");
  std::array<bool, kBlockCount> seen{};
  for (BlockId id : order)
  {
    if (id >= kBlockCount || seen[id])
      throw std::invalid_argument("trial: order must cover all four blocks exactly once");
    seen[id] = true;
  }
  if (!(duration > 0.0))
    throw std::invalid_argument("trial: duration must be positive");
  if (gaze_noise && !(gaze_noise_deg >= 0.0))
    throw std::invalid_argument("trial: gaze noise must be non-negative");
}

std::array<MethodId, 4> study_method_sequence(std::size_t participant)
{
  using enum MethodId;
  static constexpr std::array<std::array<MethodId, 4>, 8> square = {{
      {A, C, B, D},
      {C, B, D, A},
      {A, D, B, C},
      {D, B, C, A},
      {B, D, A, C},
      {D, A, C, B},
      {B, C, A, D},
      {C, A, D, B},
  }};
  if (participant < 1 || participant > square.size())
    throw std::out_of_range("participant must be in 1..8");
  return square[participant - 1];
}

std::vector<TrialConfig> counterbalanced_plan(std::size_t participant, std::size_t trials_per_method,
                                              std::uint64_t base_seed)
{
  std::vector<TrialConfig> out;
  std::size_t k = 0;
  for (MethodId m : study_method_sequence(participant))
    for (std::size_t t = 0; t < trials_per_method; ++t, ++k)
    {
      TrialConfig trial;
      trial.method = m;
      trial.arrangement = (participant - 1 + k) % kArrangementCount;
      trial.rng_seed = base_seed + k;
      out.push_back(trial);
    }
  return out;
}

// ---------------------------------------------------------------------------

RigidTransform WorldState::hand_pose(const ArmGeometry& arm) const
{
  return shoulder * forward_kinematics_unchecked(arm, q).end_effector;
}

Vector3d WorldState::target_world(const WorldConfig& config, BlockId id) const
{
  const auto& t = config.box.targets.at(id);
  return scene.box_to_world(Vector3d(t.x(), t.y(), 0.0));
}

Side WorldState::side_of(const Vector3d& world_point) const
{
  return scene.world_to_box(world_point).y() > 0.0 ? Side::Place : Side::Pick;
}

namespace
{

Quaterniond upright(const Quaterniond& q)
{
  const Vector3d x = q * Vector3d::UnitX();
  const double yaw = std::atan2(x.y(), x.x());
  return Quaterniond(Eigen::AngleAxisd(yaw, Vector3d::UnitZ()));
}

double horizontal_distance(const Vector3d& a, const Vector3d& b) { return std::hypot(a.x() - b.x(), a.y() - b.y()); }

bool over_table(const WorldState& s, const WorldConfig& c, const Vector3d& p)
{
  const Vector3d local = s.scene.world_to_box(p);
  return std::abs(local.x()) <= 0.5 * c.box.table_depth && std::abs(local.y()) <= 0.5 * c.box.table_width;
}

/// Highest support under block `id` at its current horizontal position that
/// is not above `bottom`.
double support_height(const WorldState& s, const WorldConfig& c, BlockId id, double bottom)
{
  const Vector3d& p = s.blocks[id].pose.translation;
  double support = over_table(s, c, p) ? s.scene.table_top : 0.0;
  const double tol = 1e-6;
  for (BlockId j = 0; j < kBlockCount; ++j)
  {
    if (j == id || s.blocks[j].phase != BlockPhase::Resting)
      continue;
    const auto& other = s.blocks[j];
    const double reach = c.blocks[id].radius() + c.blocks[j].radius();
    if (horizontal_distance(p, other.pose.translation) >= reach)
      continue;
    const double top = other.pose.translation.z() + 0.5 * c.blocks[j].height;
    if (top <= bottom + tol)
      support = std::max(support, top);
  }
  return support;
}

void push_from(BlockState& block, double block_radius, double bottom, double top, const Vector3d& pusher,
               double pusher_radius, double pusher_bottom, double pusher_top)
{
  if (pusher_top <= bottom || pusher_bottom >= top)
    return;
  Vector3d d = block.pose.translation - pusher;
  d.z() = 0.0;
  const double dist = d.norm();
  const double reach = block_radius + pusher_radius;
  if (dist >= reach || dist < 1e-12)
    return;
  const Vector3d shift = d / dist * (reach - dist);
  block.pose.translation += shift;
}

}  // namespace

WorldState spawn_trial(const WorldConfig& config, const TrialConfig& trial, const RigidTransform& upright_shoulder)
{
  trial.validate();
  config.box.validate();
  config.arm.validate();

  WorldState s;
  s.shoulder = upright_shoulder;
  s.scene = localize_scene(upright_shoulder, config.box);
  s.q = config.arm.home;
  s.duration = trial.duration;

  const auto slots = arrangement_slots(trial.arrangement, config.blocks);
  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    const auto& xy = config.box.pick_slots[slots[id]];
    auto& b = s.blocks[id];
    b.pose.rotation = s.scene.box_frame.rotation;
    b.pose.translation = s.scene.box_to_world(Vector3d(xy.x(), xy.y(), 0.5 * config.blocks[id].height));
    b.phase = BlockPhase::Resting;
    b.side = Side::Pick;
    b.in_target = false;
  }
  s.previous_hand = s.hand_pose(config.arm).translation;
  return s;
}

WorldState spawn_trial(const WorldConfig& config, const TrialConfig& trial, double shoulder_height)
{
  return spawn_trial(config, trial, RigidTransform::from_translation(Vector3d(0.0, 0.0, shoulder_height)));
}

std::vector<WorldEvent> grasp_update(WorldState& s, const WorldConfig& c, HandState commanded)
{
  std::vector<WorldEvent> events;
  if (commanded == s.hand)
    return events;
  s.hand = commanded;
  const RigidTransform hand = s.hand_pose(c.arm);

  if (commanded == HandState::Closed)
  {
    std::optional<BlockId> best;
    double best_d = c.grasp_threshold;
    for (BlockId id = 0; id < kBlockCount; ++id)
    {
      const Cylinder body{id, s.blocks[id].pose, c.blocks[id].radius(), c.blocks[id].height};
      const double d = body.distance(hand.translation);
      if (d <= best_d && (!best || d < best_d))
      {
        best = id;
        best_d = d;
      }
    }
    if (!best)
      return events;
    auto& b = s.blocks[*best];
    b.phase = BlockPhase::Attached;
    s.attached = best;
    s.attach_offset = hand.inverse() * b.pose;
    auto& h = s.history[*best];
    ++h.attach_count;
    if (!h.first_attach_time)
      h.first_attach_time = s.time;
    events.push_back({WorldEventKind::Attach, s.time, best, b.pose.translation, 0});
    return events;
  }

  if (!s.attached)
    return events;
  const BlockId id = *s.attached;
  auto& b = s.blocks[id];
  b.phase = BlockPhase::Falling;
  b.pose.rotation = upright(b.pose.rotation);
  b.release_position = b.pose.translation;
  Vector3d v = s.hand_velocity;
  if (!v.allFinite())
    v.setZero();
  v.z() = std::clamp(v.z(), -c.max_release_speed, c.max_release_speed);
  const double horizontal = std::hypot(v.x(), v.y());
  if (horizontal > c.max_release_speed)
  {
    v.x() *= c.max_release_speed / horizontal;
    v.y() *= c.max_release_speed / horizontal;
  }
  b.release_velocity = v;
  b.release_time = s.time;
  s.history[id].last_release_side = s.side_of(b.pose.translation);
  s.attached.reset();
  events.push_back({WorldEventKind::Detach, s.time, id, b.pose.translation, 0});
  return events;
}

std::vector<WorldEvent> world_tick(WorldState& s, const WorldConfig& c)
{
  std::vector<WorldEvent> events;
  ++s.tick_index;
  s.time = static_cast<double>(s.tick_index) * c.tick;

  const RigidTransform hand = s.hand_pose(c.arm);
  s.hand_velocity = (hand.translation - s.previous_hand) / c.tick;
  s.previous_hand = hand.translation;

  if (s.attached)
    s.blocks[*s.attached].pose = hand * s.attach_offset;

  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    auto& b = s.blocks[id];
    const double half_h = 0.5 * c.blocks[id].height;
    if (b.phase == BlockPhase::Falling)
    {
      const double previous_bottom = b.pose.translation.z() - half_h;
      const double tau = s.time - b.release_time;
      Vector3d p = b.release_position + b.release_velocity * tau;
      p.z() -= 0.5 * c.gravity * tau * tau;
      b.pose.translation = p;
      const double support = support_height(s, c, id, std::max(previous_bottom, p.z() - half_h));
      if (p.z() - half_h <= support + c.rest_tolerance)
      {
        b.pose.translation.z() = support + half_h;
        b.phase = BlockPhase::Resting;
        events.push_back({WorldEventKind::Rest, s.time, id, b.pose.translation, 0});
      }
    }
    else if (b.phase == BlockPhase::Resting)
    {
      const double bottom = b.pose.translation.z() - half_h;
      const double top = bottom + c.blocks[id].height;
      const double r = c.blocks[id].radius();
      push_from(b, r, bottom, top, hand.translation, c.hand_push_radius, hand.translation.z() - c.hand_push_radius,
                hand.translation.z() + c.hand_push_radius);
      if (s.attached)
      {
        const auto& held = s.blocks[*s.attached];
        const double hh = 0.5 * c.blocks[*s.attached].height;
        push_from(b, r, bottom, top, held.pose.translation, c.blocks[*s.attached].radius(),
                  held.pose.translation.z() - hh, held.pose.translation.z() + hh);
      }
      // Support removed (lower block taken away or pushed off an edge).
      const double support = support_height(s, c, id, bottom);
      if (bottom > support + 1e-6)
      {
        b.phase = BlockPhase::Falling;
        b.release_position = b.pose.translation;
        b.release_velocity.setZero();
        b.release_time = s.time;
      }
    }
  }

  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    auto& b = s.blocks[id];
    const Side side = s.side_of(b.pose.translation);
    if (side != b.side)
    {
      const int direction = side == Side::Place ? 1 : -1;
      if (direction > 0)
        ++s.history[id].crossing_count;
      b.side = side;
      events.push_back({WorldEventKind::Crossing, s.time, id, b.pose.translation, direction});
    }
    const bool inside =
        horizontal_distance(b.pose.translation, s.target_world(c, id)) <= c.box.target_radius;
    if (inside != b.in_target)
    {
      b.in_target = inside;
      events.push_back({inside ? WorldEventKind::TargetEnter : WorldEventKind::TargetExit, s.time, id,
                        b.pose.translation, 0});
    }
  }

  if (!s.complete)
  {
    bool all = true;
    for (const auto& b : s.blocks)
      all = all && b.phase == BlockPhase::Resting && b.in_target;
    if (all)
    {
      s.complete = true;
      events.push_back({WorldEventKind::Complete, s.time, std::nullopt, Vector3d::Zero(), 0});
    }
  }

  if (!s.timed_out && s.time >= s.duration - 1e-9)
  {
    s.timed_out = true;
    events.push_back({WorldEventKind::Timeout, s.time, std::nullopt, Vector3d::Zero(), 0});
  }
  return events;
}

ObstacleSet world_obstacles(const WorldState& s, const WorldConfig& c)
{
  const BoxSpec& box = c.box;
  const RigidTransform& f = s.scene.box_frame;
  ObstacleSet out;
  const auto add = [&](std::string name, const Vector3d& center, const Vector3d& half) {
    out.boxes.push_back({std::move(name), f * RigidTransform::from_translation(center), half});
  };

  const double hx = 0.5 * box.floor_depth;
  const double hy = 0.5 * box.floor_width;
  const double t = box.wall_thickness;
  add("table", {0.0, 0.0, -0.5 * box.table_thickness},
      {0.5 * box.table_depth, 0.5 * box.table_width, 0.5 * box.table_thickness});
  add("wall_far", {hx + 0.5 * t, 0.0, 0.5 * box.wall_height}, {0.5 * t, hy + t, 0.5 * box.wall_height});
  add("wall_near", {-hx - 0.5 * t, 0.0, 0.5 * box.wall_height}, {0.5 * t, hy + t, 0.5 * box.wall_height});
  add("wall_left", {0.0, hy + 0.5 * t, 0.5 * box.wall_height}, {hx, 0.5 * t, 0.5 * box.wall_height});
  add("wall_right", {0.0, -hy - 0.5 * t, 0.5 * box.wall_height}, {hx, 0.5 * t, 0.5 * box.wall_height});
  add("partition", {0.0, 0.0, 0.5 * box.partition_height},
      {hx, 0.5 * box.partition_thickness, 0.5 * box.partition_height});

  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    if (s.attached == id)
      continue;
    out.cylinders.push_back({id, s.blocks[id].pose, c.blocks[id].radius(), c.blocks[id].height});
  }
  return out;
}

PlaneRegion place_region(const WorldState& s, const WorldConfig& c)
{
  const RigidTransform& f = s.scene.box_frame;
  PlaneRegion r;
  const double inner = 0.5 * c.box.partition_thickness;
  const double hy = 0.5 * c.box.floor_width;
  r.center = f * Vector3d(0.0, 0.5 * (inner + hy), 0.0);
  r.axis_u = f.rotation * Vector3d::UnitX();
  r.axis_v = f.rotation * Vector3d::UnitY();
  r.half_u = 0.5 * c.box.floor_depth;
  r.half_v = 0.5 * (hy - inner);
  return r;
}

Outcome classify_outcome(const OutcomeInput& in, const SceneLayout& scene, const BoxSpec& box)
{
  if (in.phase == BlockPhase::Attached)
    return Outcome::InProgressAtTimeout;
  const double horizontal = std::hypot(in.final_position.x() - in.target.x(), in.final_position.y() - in.target.y());
  if (in.phase == BlockPhase::Resting && horizontal <= box.target_radius)
    return Outcome::Success;
  if (in.history.crossing_count > 0)
    return Outcome::CrossedNotReached;
  const Vector3d local = scene.world_to_box(in.final_position);
  const bool on_table = std::abs(local.x()) <= 0.5 * box.table_depth && std::abs(local.y()) <= 0.5 * box.table_width &&
                        local.z() >= -1e-6;
  if (!on_table)
    return Outcome::DroppedFloor;
  if (in.history.attach_count == 0)
    return Outcome::NeverGrasped;
  return Outcome::DroppedSameSide;
}

std::array<Outcome, kBlockCount> classify_outcomes(const WorldState& s, const WorldConfig& c)
{
  std::array<Outcome, kBlockCount> out{};
  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    const OutcomeInput in{s.history[id], s.blocks[id].pose.translation, s.blocks[id].phase, s.target_world(c, id)};
    out[id] = classify_outcome(in, s.scene, c.box);
  }
  return out;
}

}  // namespace prosim
