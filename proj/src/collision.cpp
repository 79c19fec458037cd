#include "prosim/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prosim
{

double OrientedBox::distance(const Vector3d& p) const
{
  const Vector3d local = pose.inverse() * p;
  const Vector3d outside = (local.cwiseAbs() - half_extents).cwiseMax(0.0);
  return outside.norm();
}

double Cylinder::distance(const Vector3d& p) const
{
  const Vector3d local = pose.inverse() * p;
  const double radial = std::max(0.0, std::hypot(local.x(), local.y()) - radius);
  const double axial = std::max(0.0, std::abs(local.z()) - 0.5 * height);
  return std::hypot(radial, axial);
}

ObstacleSet ObstacleSet::transformed(const RigidTransform& t) const
{
  ObstacleSet out = *this;
  for (auto& b : out.boxes)
    b.pose = t * b.pose;
  for (auto& c : out.cylinders)
    c.pose = t * c.pose;
  return out;
}

ObstacleSet ObstacleSet::without_block(BlockId id) const
{
  ObstacleSet out = *this;
  std::erase_if(out.cylinders, [id](const Cylinder& c) { return c.block == id; });
  return out;
}

double ObstacleSet::distance(const Vector3d& p) const
{
  double d = std::numeric_limits<double>::infinity();
  for (const auto& b : boxes)
    d = std::min(d, b.distance(p));
  for (const auto& c : cylinders)
    d = std::min(d, c.distance(p));
  return d;
}

std::vector<Sphere> arm_spheres(const ArmPose& pose, const ArmCollisionModel& model)
{
  const std::array<Vector3d, 4> joints = {pose.shoulder(), pose.elbow(), pose.wrist(), pose.hand()};
  const std::size_t n = std::max<std::size_t>(model.spheres_per_link, 2);
  std::vector<Sphere> out;
  out.reserve(3 * n);
  for (std::size_t link = 0; link < 3; ++link)
    for (std::size_t k = 0; k < n; ++k)
    {
      const double s = static_cast<double>(k) / static_cast<double>(n - 1);
      out.push_back({joints[link] + s * (joints[link + 1] - joints[link]), model.link_radius[link]});
    }
  return out;
}

std::vector<Sphere> held_block_spheres(const RigidTransform& hand, const HeldBlock& held)
{
  const RigidTransform block = hand * held.offset;
  const Vector3d axis = block.rotation * Vector3d::UnitZ();
  const double r = std::min(held.radius, 0.5 * held.height);
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(held.height / (2.0 * r) - 1e-9)));
  std::vector<Sphere> out;
  const double span = held.height - 2.0 * r;
  for (std::size_t k = 0; k < n; ++k)
  {
    const double s = n == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n - 1);
    out.push_back({block.translation + (-0.5 * span + s * span) * axis, r});
  }
  return out;
}

bool spheres_clear(const std::vector<Sphere>& spheres, const ObstacleSet& obstacles)
{
  for (const auto& s : spheres)
  {
    for (const auto& b : obstacles.boxes)
      if (b.distance(s.center) < s.radius - kContactTolerance)
        return false;
    for (const auto& c : obstacles.cylinders)
      if (c.distance(s.center) < s.radius - kContactTolerance)
        return false;
  }
  return true;
}

bool collision_free(const ArmGeometry& geometry, const JointVector& q, const ObstacleSet& obstacles,
                    const std::optional<HeldBlock>& held, const ArmCollisionModel& model)
{
  if (!geometry.within_limits(q))
    return false;
  const ArmPose pose = forward_kinematics_unchecked(geometry, q);
  if (!spheres_clear(arm_spheres(pose, model), obstacles))
    return false;
  if (held && !spheres_clear(held_block_spheres(pose.end_effector, *held), obstacles))
    return false;
  return true;
}

}  // namespace prosim
