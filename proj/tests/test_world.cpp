#include "doctest.h"

#include "prosim/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace prosim;

namespace
{

/// Shifts the shoulder so the hand frame sits at `point` without touching q.
void put_hand_at(WorldState& s, const WorldConfig& c, const Vector3d& point)
{
  const Vector3d hand_base = forward_kinematics(c.arm, s.q).end_effector.translation;
  s.shoulder.translation = point - s.shoulder.rotation * hand_base;
  s.previous_hand = s.hand_pose(c.arm).translation;
}

std::size_t count_kind(const std::vector<WorldEvent>& events, WorldEventKind k)
{
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const auto& e) { return e.kind == k; }));
}

}  // namespace

TEST_CASE("spawn places four resting blocks in the pick half")
{
  const WorldConfig c;
  const TrialConfig t;
  const WorldState s = spawn_trial(c, t, 1.2);
  CHECK_FALSE(s.attached);
  CHECK(s.time == 0.0);
  CHECK(s.q == c.arm.home);
  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    const auto& b = s.blocks[id];
    CHECK(b.phase == BlockPhase::Resting);
    CHECK(s.side_of(b.pose.translation) == Side::Pick);
    const Vector3d local = s.scene.world_to_box(b.pose.translation);
    CHECK(std::abs(local.x()) < 0.5 * c.box.floor_depth);
    CHECK(local.y() < -0.5 * c.box.partition_thickness);
    CHECK(local.z() == doctest::Approx(0.5 * c.blocks[id].height));
    CHECK(s.side_of(s.target_world(c, id)) == Side::Place);
  }
}

TEST_CASE("table height follows the shoulder")
{
  const WorldState s = spawn_trial(WorldConfig{}, TrialConfig{}, 1.4);
  CHECK(s.scene.table_top == doctest::Approx(0.97).epsilon(1e-12));
  const Vector3d center = s.scene.box_to_world(Vector3d::Zero());
  CHECK(std::hypot(center.x(), center.y()) == doctest::Approx(0.6));
}

TEST_CASE("arrangements enumerate the six colour assignments")
{
  const auto blocks = default_blocks();
  std::set<std::array<int, kBlockCount>> seen;
  for (std::size_t id = 0; id < kArrangementCount; ++id)
  {
    const auto slots = arrangement_slots(id, blocks);
    std::array<int, kBlockCount> colour_at{};
    std::set<std::size_t> used(slots.begin(), slots.end());
    CHECK(used.size() == kBlockCount);
    for (BlockId b = 0; b < kBlockCount; ++b)
      colour_at[slots[b]] = blocks[b].color == BlockColor::Red ? 1 : 0;
    CHECK(std::count(colour_at.begin(), colour_at.end(), 1) == 2);
    seen.insert(colour_at);
  }
  CHECK(seen.size() == 6);
  CHECK_THROWS_AS(arrangement_slots(kArrangementCount, blocks), std::out_of_range);

  TrialConfig bad;
  bad.arrangement = 6;
  CHECK_THROWS(spawn_trial(WorldConfig{}, bad, 1.2));
  bad.arrangement = 0;
  bad.order = {0, 1, 1, 3};
  CHECK_THROWS(spawn_trial(WorldConfig{}, bad, 1.2));
}

TEST_CASE("scene localization uses the horizontal heading")
{
  const BoxSpec box;
  RigidTransform shoulder = RigidTransform::from_axis_angle(Vector3d::UnitZ(), M_PI / 2);
  shoulder.translation = Vector3d(1.0, 2.0, 1.5);
  const SceneLayout a = localize_scene(shoulder, box);
  const Vector3d center = a.box_to_world(Vector3d::Zero());
  CHECK((center - Vector3d(1.0, 2.6, 1.07)).norm() < 1e-12);
  CHECK(a.table_top == doctest::Approx(1.07));

  // Leaning forward does not move the box.
  RigidTransform tilted = shoulder * RigidTransform::from_axis_angle(Vector3d::UnitY(), 0.35);
  const SceneLayout b = localize_scene(tilted, box);
  CHECK((b.box_to_world(Vector3d::Zero()) - center).norm() < 1e-12);
  CHECK(rotation_angle_between(a.box_frame.rotation, b.box_frame.rotation) < 1e-9);

  const RigidTransform vertical = RigidTransform::from_axis_angle(Vector3d::UnitY(), -M_PI / 2);
  CHECK_THROWS_AS(localize_scene(vertical, box), std::invalid_argument);
}

TEST_CASE("grasp attaches within the threshold")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  const Vector3d top = s.blocks[2].pose.translation + Vector3d(0, 0, 0.5 * c.blocks[2].height);

  SUBCASE("3 cm above the top")
  {
    put_hand_at(s, c, top + Vector3d(0, 0, 0.03));
    const auto ev = grasp_update(s, c, HandState::Closed);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].kind == WorldEventKind::Attach);
    CHECK(ev[0].block == BlockId{2});
    CHECK(s.attached == BlockId{2});
    CHECK(s.blocks[2].phase == BlockPhase::Attached);
    CHECK(s.history[2].attach_count == 1);

    const auto rel = grasp_update(s, c, HandState::Open);
    REQUIRE(rel.size() == 1);
    CHECK(rel[0].kind == WorldEventKind::Detach);
    CHECK_FALSE(s.attached);
    CHECK(s.blocks[2].phase == BlockPhase::Falling);
  }
  SUBCASE("nothing nearby")
  {
    put_hand_at(s, c, top + Vector3d(0, 0, 0.05));
    CHECK(grasp_update(s, c, HandState::Closed).empty());
    CHECK_FALSE(s.attached);
    CHECK(s.hand == HandState::Closed);
    CHECK(grasp_update(s, c, HandState::Open).empty());
  }
  SUBCASE("repeating the current state is a no-op")
  {
    put_hand_at(s, c, top + Vector3d(0, 0, 0.01));
    CHECK(grasp_update(s, c, HandState::Open).empty());
  }
}

TEST_CASE("nearest block wins")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  const Vector3d a = s.blocks[0].pose.translation;
  const Vector3d b = s.blocks[2].pose.translation;
  // Slightly toward block 2 from the midpoint, at the tops.
  const Vector3d p = 0.45 * a + 0.55 * b + Vector3d(0, 0, 0.5 * c.blocks[0].height + 0.005);
  put_hand_at(s, c, p);
  grasp_update(s, c, HandState::Closed);
  CHECK(s.attached == BlockId{2});
}

TEST_CASE("attached block follows the hand rigidly")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  put_hand_at(s, c, s.blocks[1].pose.translation + Vector3d(0, 0, 0.05));
  grasp_update(s, c, HandState::Closed);
  REQUIRE(s.attached == BlockId{1});
  const RigidTransform offset = s.hand_pose(c.arm).inverse() * s.blocks[1].pose;
  for (int k = 0; k < 300; ++k)
  {
    s.q[0] += 0.0005;
    s.q[4] -= 0.001;
    s.shoulder.translation.y() += 0.0002;
    world_tick(s, c);
    const RigidTransform now = s.hand_pose(c.arm).inverse() * s.blocks[1].pose;
    CHECK((now.translation - offset.translation).norm() < 1e-12);
    CHECK(rotation_angle_between(now.rotation, offset.rotation) < 1e-9);
  }
}

TEST_CASE("released block falls for sqrt(2h/g)")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  auto& b = s.blocks[0];
  const Vector3d xy = s.target_world(c, 0);
  b.phase = BlockPhase::Falling;
  b.release_position = Vector3d(xy.x(), xy.y(), s.scene.table_top + 0.1 + 0.5 * c.blocks[0].height);
  b.pose.translation = b.release_position;
  b.release_velocity.setZero();
  b.release_time = s.time;

  std::optional<double> rest;
  for (int k = 0; k < 1000 && !rest; ++k)
    for (const auto& e : world_tick(s, c))
      if (e.kind == WorldEventKind::Rest && e.block == BlockId{0})
        rest = e.time;
  REQUIRE(rest);
  CHECK(std::abs(*rest - std::sqrt(2 * 0.1 / c.gravity)) <= c.tick);
  CHECK(b.phase == BlockPhase::Resting);
  CHECK(b.pose.translation.z() == doctest::Approx(s.scene.table_top + 0.5 * c.blocks[0].height));
  CHECK(b.in_target);
}

TEST_CASE("dropped on another block rests on its top")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  auto& b = s.blocks[0];
  const Vector3d under = s.blocks[1].pose.translation;
  b.phase = BlockPhase::Falling;
  b.release_position = under + Vector3d(0.01, 0, 0.2);
  b.pose.translation = b.release_position;
  b.release_time = 0.0;
  for (int k = 0; k < 500; ++k)
    world_tick(s, c);
  CHECK(b.phase == BlockPhase::Resting);
  CHECK(b.pose.translation.z() == doctest::Approx(under.z() + c.blocks[1].height));
}

TEST_CASE("timeout fires exactly once")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  std::size_t timeouts = 0;
  double when = 0.0;
  for (int k = 0; k < 300500; ++k)
  {
    const auto ev = world_tick(s, c);
    if (count_kind(ev, WorldEventKind::Timeout))
    {
      ++timeouts;
      when = s.time;
    }
  }
  CHECK(timeouts == 1);
  CHECK(when == doctest::Approx(300.0).epsilon(1e-12));
  CHECK(s.timed_out);
}

TEST_CASE("crossing and target events while carrying")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  put_hand_at(s, c, s.blocks[0].pose.translation + Vector3d(0, 0, 0.05));
  grasp_update(s, c, HandState::Closed);
  REQUIRE(s.attached == BlockId{0});
  const Vector3d delta = s.target_world(c, 0) - s.blocks[0].pose.translation;
  std::vector<WorldEvent> all;
  for (int k = 1; k <= 400; ++k)
  {
    s.shoulder.translation += Vector3d(delta.x(), delta.y(), 0.0) / 400.0;
    const auto ev = world_tick(s, c);
    all.insert(all.end(), ev.begin(), ev.end());
  }
  CHECK(count_kind(all, WorldEventKind::Crossing) == 1);
  CHECK(count_kind(all, WorldEventKind::TargetEnter) == 1);
  CHECK(s.history[0].crossing_count == 1);
  const auto crossing = std::find_if(all.begin(), all.end(), [](const auto& e) { return e.kind == WorldEventKind::Crossing; });
  CHECK(crossing->direction == 1);
}

TEST_CASE("hand pushes a resting block into its target")
{
  const WorldConfig c;
  WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  const Vector3d target = s.target_world(c, 3);
  auto& b = s.blocks[3];
  const Vector3d ex = s.scene.box_frame.rotation * Vector3d::UnitX();
  b.pose.translation = target + 0.06 * ex + Vector3d(0, 0, 0.5 * c.blocks[3].height);
  b.side = Side::Place;
  put_hand_at(s, c, b.pose.translation + 0.03 * ex);
  const auto ev = world_tick(s, c);
  CHECK(count_kind(ev, WorldEventKind::TargetEnter) == 1);
  CHECK((b.pose.translation - target).head<2>().norm() == doctest::Approx(0.045));
}

TEST_CASE("outcome classification")
{
  const WorldConfig c;
  const WorldState s = spawn_trial(c, TrialConfig{}, 1.2);
  const Vector3d target = s.target_world(c, 0);
  const Vector3d ex = s.scene.box_frame.rotation * Vector3d::UnitX();
  const Vector3d ey = s.scene.box_frame.rotation * Vector3d::UnitY();
  BlockHistory moved;
  moved.attach_count = 1;
  moved.crossing_count = 1;

  CHECK(classify_outcome({moved, target + 0.03 * ex, BlockPhase::Resting, target}, s.scene, c.box) == Outcome::Success);
  CHECK(classify_outcome({moved, target + 0.0499 * ex, BlockPhase::Resting, target}, s.scene, c.box) == Outcome::Success);
  CHECK(classify_outcome({moved, target + 0.2 * ex, BlockPhase::Resting, target}, s.scene, c.box) ==
        Outcome::CrossedNotReached);
  CHECK(classify_outcome({BlockHistory{}, s.blocks[0].pose.translation, BlockPhase::Resting, target}, s.scene, c.box) ==
        Outcome::NeverGrasped);
  CHECK(classify_outcome({moved, target, BlockPhase::Attached, target}, s.scene, c.box) == Outcome::InProgressAtTimeout);

  BlockHistory same;
  same.attach_count = 1;
  CHECK(classify_outcome({same, s.blocks[0].pose.translation, BlockPhase::Resting, target}, s.scene, c.box) ==
        Outcome::DroppedSameSide);
  const Vector3d floor = s.scene.box_to_world(Vector3d(-0.5, 0, 0)) - Vector3d(0, 0, s.scene.table_top);
  CHECK(classify_outcome({same, floor, BlockPhase::Resting, target}, s.scene, c.box) == Outcome::DroppedFloor);
  const Vector3d beside = target + 0.7 * ey;
  CHECK(classify_outcome({same, beside, BlockPhase::Resting, target}, s.scene, c.box) == Outcome::DroppedFloor);

  const auto all = classify_outcomes(s, c);
  for (auto o : all)
    CHECK(o == Outcome::NeverGrasped);
  for (Outcome o : {Outcome::Success, Outcome::InProgressAtTimeout, Outcome::CrossedNotReached, Outcome::DroppedFloor,
                    Outcome::DroppedSameSide, Outcome::NeverGrasped})
    CHECK(parse_outcome(to_string(o)) == o);
}

TEST_CASE("counterbalanced session plan")
{
  using M = MethodId;
  CHECK(study_method_sequence(1) == std::array<M, 4>{M::A, M::C, M::B, M::D});
  CHECK(study_method_sequence(8) == std::array<M, 4>{M::C, M::A, M::D, M::B});
  CHECK_THROWS(study_method_sequence(0));
  CHECK_THROWS(study_method_sequence(9));

  // Each method takes every position exactly twice over the eight participants.
  for (std::size_t pos = 0; pos < 4; ++pos)
  {
    std::map<M, int> col;
    for (std::size_t p = 1; p <= 8; ++p)
      ++col[study_method_sequence(p)[pos]];
    CHECK(col.size() == 4);
    for (const auto& [m, n] : col)
      CHECK(n == 2);
  }

  const auto plan = counterbalanced_plan(3, 6, 100);
  REQUIRE(plan.size() == 24);
  std::set<std::pair<M, std::size_t>> method_arrangement;
  for (std::size_t k = 0; k < plan.size(); ++k)
  {
    CHECK(plan[k].method == study_method_sequence(3)[k / 6]);
    CHECK(plan[k].rng_seed == 100 + k);
    method_arrangement.insert({plan[k].method, plan[k].arrangement});
  }
  CHECK(method_arrangement.size() == 24);  // each method sees all six arrangements
  for (M m : kAllMethods)
    CHECK(parse_method(to_string(m)) == m);
}
