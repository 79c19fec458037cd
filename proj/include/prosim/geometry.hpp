#pragma once

#include <Eigen/Geometry>

#include <cmath>

namespace prosim
{

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

/// Rigid-body transform stored as unit quaternion + translation.
struct RigidTransform
{
  Quaterniond rotation = Quaterniond::Identity();
  Vector3d translation = Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vector3d& t) { return {Quaterniond::Identity(), t}; }
  static RigidTransform from_rotation(const Quaterniond& q) { return {q.normalized(), Vector3d::Zero()}; }
  static RigidTransform from_axis_angle(const Vector3d& axis, double angle)
  {
    return from_rotation(Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
  }

  RigidTransform operator*(const RigidTransform& rhs) const
  {
    RigidTransform out;
    out.rotation = (rotation * rhs.rotation).normalized();
    out.translation = translation + rotation * rhs.translation;
    return out;
  }

  Vector3d operator*(const Vector3d& point) const { return rotation * point + translation; }

  RigidTransform inverse() const
  {
    RigidTransform out;
    out.rotation = rotation.conjugate();
    out.translation = -(out.rotation * translation);
    return out;
  }

  Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
};

/// Rotation angle of `a⁻¹ b`, in [0, π].
inline double rotation_angle_between(const Quaterniond& a, const Quaterniond& b)
{
  const Quaterniond d = a.conjugate() * b;
  const double w = std::min(1.0, std::abs(d.w()));
  return 2.0 * std::atan2(d.vec().norm(), w);
}

inline bool is_finite(const Vector3d& v) { return v.allFinite(); }

}  // namespace prosim
