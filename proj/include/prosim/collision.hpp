#pragma once

#include "prosim/geometry.hpp"
#include "prosim/intent.hpp"
#include "prosim/kinematics.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace prosim
{

struct OrientedBox
{
  std::string name;
  RigidTransform pose;  // box center and orientation
  Vector3d half_extents = Vector3d::Zero();

  /// Euclidean distance from `p` to the solid box (0 inside).
  double distance(const Vector3d& p) const;
};

/// Upright cylinder in its own frame: axis = local Z, centered at the origin.
struct Cylinder
{
  BlockId block = 0;
  RigidTransform pose;
  double radius = 0.0;
  double height = 0.0;

  double distance(const Vector3d& p) const;
};

struct ObstacleSet
{
  std::vector<OrientedBox> boxes;
  std::vector<Cylinder> cylinders;

  ObstacleSet transformed(const RigidTransform& t) const;
  ObstacleSet without_block(BlockId id) const;

  /// Smallest distance from `p` to any obstacle, +inf when empty.
  double distance(const Vector3d& p) const;
};

struct Sphere
{
  Vector3d center;
  double radius;
};

/// Link bodies approximated by spheres along each segment
/// (shoulder→elbow, elbow→wrist, wrist→hand).
struct ArmCollisionModel
{
  std::array<double, 3> link_radius{0.045, 0.04, 0.025};
  std::size_t spheres_per_link = 6;  // endpoints included
};

/// A grasped block rigidly attached to the hand frame.
struct HeldBlock
{
  RigidTransform offset;  // hand frame → block center
  double radius = 0.025;
  double height = 0.05;
};

std::vector<Sphere> arm_spheres(const ArmPose& pose, const ArmCollisionModel& model);

/// Inscribed spheres stacked along the block axis, the end spheres tangent
/// to the top and bottom faces.
std::vector<Sphere> held_block_spheres(const RigidTransform& hand, const HeldBlock& held);

/// Penetration shallower than this counts as touching, not colliding.
inline constexpr double kContactTolerance = 1e-4;

bool spheres_clear(const std::vector<Sphere>& spheres, const ObstacleSet& obstacles);

/// Obstacles and q in the shoulder base frame.
bool collision_free(const ArmGeometry& geometry, const JointVector& q, const ObstacleSet& obstacles,
                    const std::optional<HeldBlock>& held = std::nullopt, const ArmCollisionModel& model = {});

}  // namespace prosim
