#pragma once

#include "prosim/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace prosim
{

inline constexpr std::size_t kArmDof = 7;

using JointVector = Eigen::Matrix<double, 7, 1>;
using Jacobian = Eigen::Matrix<double, 6, 7>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Joints in the cycling order used by direct joint control.
enum class Joint : std::size_t
{
  ShoulderFlexion = 0,
  ShoulderAbduction,
  ShoulderRotation,
  ElbowFlexion,
  WristPronation,
  WristDeviation,
  WristFlexion,
};

/// Display name of joint `index` (0..6), e.g. "elbow flexion/extension".
const std::string& joint_name(std::size_t index);

/// End-effector velocity in the shoulder base frame.
struct Twist
{
  Vector3d linear = Vector3d::Zero();   // m/s
  Vector3d angular = Vector3d::Zero();  // rad/s

  Vector6d stacked() const
  {
    Vector6d v;
    v << linear, angular;
    return v;
  }
  bool finite() const { return linear.allFinite() && angular.allFinite(); }
};

struct JointSpec
{
  std::string name;
  Vector3d offset = Vector3d::Zero();  // translation from predecessor frame, applied before rotation
  Vector3d axis = Vector3d::UnitZ();   // rotation axis in the (translated) predecessor frame
  double min = -M_PI;
  double max = M_PI;
};

/// 7-DOF arm: three shoulder joints at the base origin, elbow after the upper
/// arm, three wrist joints after the forearm, and a tool offset to the hand frame.
/// At q = 0 the arm hangs straight down the base -Z axis.
struct ArmGeometry
{
  std::array<JointSpec, kArmDof> joints;
  Vector3d tool_offset = Vector3d::Zero();
  JointVector home = JointVector::Zero();

  double upper_arm = 0.0;
  double forearm = 0.0;
  double hand_offset = 0.0;

  static ArmGeometry from_lengths(double upper_arm, double forearm, double hand_offset);
  static ArmGeometry default_geometry();

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  double max_reach() const { return upper_arm + forearm + hand_offset; }
  JointVector lower_limits() const;
  JointVector upper_limits() const;
  bool within_limits(const JointVector& q, double tolerance = 1e-9) const;
  JointVector clamp(const JointVector& q) const;
};

class JointLimitError : public std::out_of_range
{
public:
  JointLimitError(std::size_t joint, double value);
  std::size_t joint() const noexcept { return joint_; }

private:
  std::size_t joint_;
};

struct ArmPose
{
  /// Frame of link k (after joint k's rotation), in the shoulder base frame.
  std::array<RigidTransform, kArmDof> links;
  /// Most distal wrist link shifted by the tool offset: the hand / grasp frame.
  RigidTransform end_effector;

  Vector3d shoulder() const { return links[0].translation; }
  Vector3d elbow() const { return links[3].translation; }
  Vector3d wrist() const { return links[4].translation; }
  Vector3d hand() const { return end_effector.translation; }
};

/// Throws JointLimitError if q is outside the limits.
ArmPose forward_kinematics(const ArmGeometry& geometry, const JointVector& q);

/// Same chain product without the limit check.
ArmPose forward_kinematics_unchecked(const ArmGeometry& geometry, const JointVector& q);

/// Geometric Jacobian [linear; angular] of the end effector, base frame.
Jacobian jacobian(const ArmGeometry& geometry, const JointVector& q);
Jacobian jacobian(const ArmGeometry& geometry, const ArmPose& pose);

inline constexpr double kSingularCondition = std::numeric_limits<double>::infinity();

/// σ_max / σ_min, or kSingularCondition when σ_min < 1e-12.
double condition_number(const Jacobian& j);

/// Moore-Penrose inverse via SVD; singular values below 1e-9·σ_max are dropped.
Eigen::Matrix<double, 7, 6> pseudo_inverse(const Jacobian& j);

enum class StepStatus
{
  Ok,
  Guarded,    // cond(J) above the limit; q unchanged
  NonFinite,  // result was not finite; q unchanged
};

const char* to_string(StepStatus status);

struct StepResult
{
  JointVector q;
  StepStatus status = StepStatus::Ok;
  double condition = 0.0;
};

inline constexpr double kDefaultConditionLimit = 60.0;

/// q' = clamp(q + J⁺·twist·dt), rejected when cond(J) > cond_limit. A step
/// that would move some joint by more than 4 mrad is integrated in equal
/// pieces, each with the Jacobian at the current q.
StepResult eef_velocity_step(const ArmGeometry& geometry, const JointVector& q, const Twist& twist, double dt,
                             double cond_limit = kDefaultConditionLimit);

}  // namespace prosim
