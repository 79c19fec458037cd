#include "prosim/kinematics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <sstream>

namespace prosim
{

namespace
{

const std::array<std::string, kArmDof> kJointNames = {
    "shoulder flexion/extension",
    "shoulder adduction/abduction",
    "shoulder internal/external rotation",
    "elbow flexion/extension",
    "wrist pronation/supination",
    "wrist ulnar/radial deviation",
    "wrist flexion/extension",
};

std::string limit_message(std::size_t joint, double value)
{
  std::ostringstream os;
  os << "joint " << joint << " (" << kJointNames.at(joint) << ") value " << value << " outside limits";
  return os.str();
}

}  // namespace

const std::string& joint_name(std::size_t index) { return kJointNames.at(index); }

JointLimitError::JointLimitError(std::size_t joint, double value)
    : std::out_of_range(limit_message(joint, value)), joint_(joint)
{
}

ArmGeometry ArmGeometry::from_lengths(double upper_arm, double forearm, double hand_offset)
{
  ArmGeometry g;
  g.upper_arm = upper_arm;
  g.forearm = forearm;
  g.hand_offset = hand_offset;

  const Vector3d flex_axis(0.0, -1.0, 0.0);  // positive = forward
  const Vector3d abd_axis(-1.0, 0.0, 0.0);   // positive = away from the body (right arm, -Y)
  const Vector3d long_axis(0.0, 0.0, 1.0);
  const Vector3d dev_axis(1.0, 0.0, 0.0);

  g.joints[0] = {kJointNames[0], Vector3d::Zero(), flex_axis, -M_PI, M_PI};
  g.joints[1] = {kJointNames[1], Vector3d::Zero(), abd_axis, -M_PI / 2, M_PI / 2};
  g.joints[2] = {kJointNames[2], Vector3d::Zero(), long_axis, -M_PI, M_PI};
  g.joints[3] = {kJointNames[3], Vector3d(0.0, 0.0, -upper_arm), flex_axis, 0.0, 2.4};
  g.joints[4] = {kJointNames[4], Vector3d(0.0, 0.0, -forearm), long_axis, -M_PI, M_PI};
  g.joints[5] = {kJointNames[5], Vector3d::Zero(), dev_axis, -M_PI / 2, M_PI / 2};
  g.joints[6] = {kJointNames[6], Vector3d::Zero(), flex_axis, -M_PI, M_PI};
  g.tool_offset = Vector3d(0.0, 0.0, -hand_offset);

  g.home = JointVector::Zero();
  g.home[0] = 0.2;
  g.home[3] = 1.8;
  return g;
}

ArmGeometry ArmGeometry::default_geometry() { return from_lengths(0.36, 0.34, 0.08); }

void ArmGeometry::validate() const
{
  for (std::size_t i = 0; i < kArmDof; ++i)
  {
    const auto& j = joints[i];
    if (!(j.min < j.max))
      throw std::invalid_argument("joint " + std::to_string(i) + ": limit min must be < max");
    if (std::abs(j.axis.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("joint " + std::to_string(i) + ": axis must be a unit vector");
  }
  if (!(upper_arm > 0.0 && forearm > 0.0 && hand_offset >= 0.0))
    throw std::invalid_argument("segment lengths must be positive");
  if (!within_limits(home))
    throw std::invalid_argument("home configuration outside joint limits");
}

JointVector ArmGeometry::lower_limits() const
{
  JointVector v;
  for (std::size_t i = 0; i < kArmDof; ++i)
    v[i] = joints[i].min;
  return v;
}

JointVector ArmGeometry::upper_limits() const
{
  JointVector v;
  for (std::size_t i = 0; i < kArmDof; ++i)
    v[i] = joints[i].max;
  return v;
}

bool ArmGeometry::within_limits(const JointVector& q, double tolerance) const
{
  for (std::size_t i = 0; i < kArmDof; ++i)
    if (!(q[i] >= joints[i].min - tolerance && q[i] <= joints[i].max + tolerance))
      return false;
  return true;
}

JointVector ArmGeometry::clamp(const JointVector& q) const
{
  JointVector out;
  for (std::size_t i = 0; i < kArmDof; ++i)
    out[i] = std::clamp(q[i], joints[i].min, joints[i].max);
  return out;
}

ArmPose forward_kinematics_unchecked(const ArmGeometry& geometry, const JointVector& q)
{
  ArmPose pose;
  RigidTransform frame = RigidTransform::identity();
  for (std::size_t i = 0; i < kArmDof; ++i)
  {
    const auto& j = geometry.joints[i];
    frame = frame * RigidTransform::from_translation(j.offset) * RigidTransform::from_axis_angle(j.axis, q[i]);
    pose.links[i] = frame;
  }
  pose.end_effector = frame * RigidTransform::from_translation(geometry.tool_offset);
  return pose;
}

ArmPose forward_kinematics(const ArmGeometry& geometry, const JointVector& q)
{
  for (std::size_t i = 0; i < kArmDof; ++i)
  {
    const auto& j = geometry.joints[i];
    if (!(q[i] >= j.min - 1e-9 && q[i] <= j.max + 1e-9))
      throw JointLimitError(i, q[i]);
  }
  return forward_kinematics_unchecked(geometry, q);
}

Jacobian jacobian(const ArmGeometry& geometry, const ArmPose& pose)
{
  Jacobian jac;
  const Vector3d p_eef = pose.end_effector.translation;
  for (std::size_t i = 0; i < kArmDof; ++i)
  {
    // A joint's axis is unchanged by its own rotation, so the link frame gives it directly.
    const Vector3d axis = pose.links[i].rotation * geometry.joints[i].axis;
    const Vector3d origin = pose.links[i].translation;
    jac.block<3, 1>(0, i) = axis.cross(p_eef - origin);
    jac.block<3, 1>(3, i) = axis;
  }
  return jac;
}

Jacobian jacobian(const ArmGeometry& geometry, const JointVector& q)
{
  return jacobian(geometry, forward_kinematics(geometry, q));
}

double condition_number(const Jacobian& j)
{
  Eigen::JacobiSVD<Jacobian> svd(j);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (smin < 1e-12)
    return kSingularCondition;
  return smax / smin;
}

Eigen::Matrix<double, 7, 6> pseudo_inverse(const Jacobian& j)
{
  Eigen::JacobiSVD<Jacobian> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-9 * s(0);
  Eigen::Matrix<double, 7, 6> sinv = Eigen::Matrix<double, 7, 6>::Zero();
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff)
      sinv(i, i) = 1.0 / s(i);
  return svd.matrixV() * sinv * svd.matrixU().transpose();
}

const char* to_string(StepStatus status)
{
  switch (status)
  {
    case StepStatus::Ok: return "ok";
    case StepStatus::Guarded: return "guard";
    case StepStatus::NonFinite: return "non-finite";
  }
  return "unknown";
}

namespace
{

constexpr double kMaxSubstepJointMotion = 0.004;  // rad per linear piece

}  // namespace

StepResult eef_velocity_step(const ArmGeometry& geometry, const JointVector& q, const Twist& twist, double dt,
                             double cond_limit)
{
  if (!(dt > 0.0))
    throw std::invalid_argument("eef_velocity_step: dt must be positive");
  if (!twist.finite())
    throw std::invalid_argument("eef_velocity_step: twist must be finite");

  const Jacobian jac = jacobian(geometry, q);
  StepResult result{q, StepStatus::Ok, condition_number(jac)};
  if (result.condition > cond_limit)
  {
    result.status = StepStatus::Guarded;
    return result;
  }

  const Vector6d motion = twist.stacked() * dt;
  const JointVector first = pseudo_inverse(jac) * motion;
  if (!(q + first).allFinite())
  {
    result.status = StepStatus::NonFinite;
    return result;
  }
  // One linear step is exact to first order only; large joint motion near a
  // singularity is integrated in shorter pieces with a fresh Jacobian each.
  const double largest = first.cwiseAbs().maxCoeff();
  const auto pieces = static_cast<std::size_t>(std::clamp(std::ceil(largest / kMaxSubstepJointMotion), 1.0, 256.0));
  if (pieces == 1)
  {
    result.q = geometry.clamp(q + first);
    return result;
  }
  const Vector6d piece = motion / static_cast<double>(pieces);
  JointVector cur = q;
  for (std::size_t k = 0; k < pieces; ++k)
  {
    const Jacobian jk = k == 0 ? jac : jacobian(geometry, cur);
    if (k > 0 && condition_number(jk) > cond_limit)
      break;  // the next tick reports the guard
    const JointVector next = cur + pseudo_inverse(jk) * piece;
    if (!next.allFinite())
      break;
    cur = geometry.clamp(next);
  }
  result.q = cur;
  return result;
}

}  // namespace prosim
