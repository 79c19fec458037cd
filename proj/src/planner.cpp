#include "prosim/planner.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace prosim
{

const char* to_string(GoalKind k) { return k == GoalKind::Exact ? "exact" : "intermediate"; }

const char* to_string(ExecStatus s)
{
  switch (s)
  {
    case ExecStatus::Running: return "running";
    case ExecStatus::Done: return "done";
    case ExecStatus::Aborted: return "aborted";
  }
  return "?";
}

namespace
{

const Vector3d kHandApproach{0.0, 0.0, -1.0};  // hand-local axis that points at the object

double angle_between(const Vector3d& a, const Vector3d& b)
{
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Task-space error [position; rotation vector] and the Jacobian adapted to the goal type.
void error_and_jacobian(const ArmGeometry& g, const JointVector& q, const PoseGoal& goal, Vector6d& e, Jacobian& j,
                        PoseError& err)
{
  const ArmPose pose = forward_kinematics_unchecked(g, q);
  const RigidTransform& hand = pose.end_effector;
  j = jacobian(g, pose);
  e.head<3>() = goal.position - hand.translation;
  e.tail<3>().setZero();
  err.position = e.head<3>().norm();
  err.orientation = 0.0;

  if (goal.orientation)
  {
    const Eigen::AngleAxisd aa(*goal.orientation * hand.rotation.conjugate());
    double angle = aa.angle();
    Vector3d axis = aa.axis();
    if (angle > M_PI)
    {
      angle = 2.0 * M_PI - angle;
      axis = -axis;
    }
    e.tail<3>() = angle * axis;
    err.orientation = angle;
  }
  else if (goal.approach_axis)
  {
    const Vector3d a = hand.rotation * kHandApproach;
    const Vector3d& d = *goal.approach_axis;
    const double angle = angle_between(a, d);
    const Vector3d c = a.cross(d);
    if (c.norm() > 1e-12)
      e.tail<3>() = angle * c.normalized();
    else if (angle > 1.0)  // antiparallel: any perpendicular axis
      e.tail<3>() = angle * a.unitOrthogonal();
    // Rotation about the approach axis is free.
    const Matrix3d p = Matrix3d::Identity() - a * a.transpose();
    j.bottomRows<3>() = p * j.bottomRows<3>();
    err.orientation = angle;
  }
  else
  {
    j.bottomRows<3>().setZero();
  }
}

bool converged(const PoseError& err, const IkOptions& o)
{
  return err.position <= o.position_tolerance && err.orientation <= o.orientation_tolerance;
}

double max_abs(const JointVector& v) { return v.cwiseAbs().maxCoeff(); }

JointVector dls_step(const Jacobian& j, const Vector6d& e, double damping, double max_step)
{
  const Eigen::Matrix<double, 6, 6> a = j * j.transpose() + damping * damping * Eigen::Matrix<double, 6, 6>::Identity();
  JointVector dq = j.transpose() * a.ldlt().solve(e);
  const double m = max_abs(dq);
  if (m > max_step)
    dq *= max_step / m;
  return dq;
}

std::optional<JointVector> ik_from_seed(const ArmGeometry& g, const PoseGoal& goal, JointVector q, const IkOptions& o)
{
  Vector6d e;
  Jacobian j;
  PoseError err;
  for (std::size_t it = 0;; ++it)
  {
    error_and_jacobian(g, q, goal, e, j, err);
    if (converged(err, o))
      return q;
    if (it == o.max_iterations)
      return std::nullopt;
    q = g.clamp(q + dls_step(j, e, o.damping, o.max_step));
  }
}

JointVector random_config(const ArmGeometry& g, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const JointVector lo = g.lower_limits();
  const JointVector hi = g.upper_limits();
  JointVector q;
  for (std::size_t i = 0; i < kArmDof; ++i)
    q[i] = lo[i] + u(rng) * (hi[i] - lo[i]);
  return q;
}

struct Tree
{
  std::vector<JointVector> q;
  std::vector<std::ptrdiff_t> parent;
  std::vector<double> goal_distance;  // EEF distance to the goal position

  std::size_t add(const JointVector& v, std::ptrdiff_t p, double d)
  {
    q.push_back(v);
    parent.push_back(p);
    goal_distance.push_back(d);
    return q.size() - 1;
  }

  std::size_t nearest(const JointVector& v) const
  {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.size(); ++i)
    {
      const double d = (q[i] - v).squaredNorm();
      if (d < best_d)
      {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  std::vector<JointVector> path_to_root(std::size_t i) const
  {
    std::vector<JointVector> out;
    for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i); k >= 0; k = parent[static_cast<std::size_t>(k)])
      out.push_back(q[static_cast<std::size_t>(k)]);
    return out;
  }

  std::size_t closest_to_goal() const
  {
    return static_cast<std::size_t>(std::min_element(goal_distance.begin(), goal_distance.end()) -
                                    goal_distance.begin());
  }
};

enum class Extend
{
  Trapped,
  Advanced,
  Reached,
};

struct Search
{
  const ArmGeometry& g;
  const PlanRequest& req;
  const PlannerConfig& cfg;

  double eef_distance(const JointVector& q) const
  {
    return (forward_kinematics_unchecked(g, q).end_effector.translation - req.goal.position).norm();
  }

  bool valid_edge(const JointVector& a, const JointVector& b) const
  {
    return motion_valid(g, a, b, req.obstacles, req.held, cfg);
  }

  Extend extend(Tree& t, const JointVector& target, std::size_t& added) const
  {
    const std::size_t near = t.nearest(target);
    const JointVector dir = target - t.q[near];
    const double len = dir.norm();
    Extend result = Extend::Reached;
    JointVector next = target;
    if (len > cfg.extend_step)
    {
      next = t.q[near] + dir * (cfg.extend_step / len);
      result = Extend::Advanced;
    }
    if (len < 1e-12)
    {
      added = near;
      return Extend::Reached;
    }
    if (!valid_edge(t.q[near], next))
      return Extend::Trapped;
    added = t.add(next, static_cast<std::ptrdiff_t>(near), eef_distance(next));
    return result;
  }

  Extend connect(Tree& t, const JointVector& target, std::size_t& added) const
  {
    Extend r = Extend::Advanced;
    while (r == Extend::Advanced)
      r = extend(t, target, added);
    return r;
  }

  /// Jacobian-guided step from the node nearest the goal in task space.
  void greedy_step(Tree& t) const
  {
    const std::size_t from = t.closest_to_goal();
    Vector6d e;
    Jacobian j;
    PoseError err;
    error_and_jacobian(g, t.q[from], req.goal, e, j, err);
    const JointVector next = g.clamp(t.q[from] + dls_step(j, e, 0.05, cfg.extend_step));
    if (max_abs(next - t.q[from]) < 1e-9 || !valid_edge(t.q[from], next))
      return;
    t.add(next, static_cast<std::ptrdiff_t>(from), eef_distance(next));
  }
};

std::vector<JointVector> shortcut(const Search& s, std::vector<JointVector> path, std::mt19937_64& rng)
{
  for (std::size_t k = 0; k < s.cfg.shortcut_attempts && path.size() > 2; ++k)
  {
    std::uniform_int_distribution<std::size_t> pick(0, path.size() - 1);
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i > j)
      std::swap(i, j);
    if (j - i < 2)
      continue;
    if (s.valid_edge(path[i], path[j]))
      path.erase(path.begin() + static_cast<std::ptrdiff_t>(i) + 1, path.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return path;
}

JointTrajectory time_parameterize(const std::vector<JointVector>& path, const PlannerConfig& cfg, GoalKind kind)
{
  JointTrajectory out;
  out.goal_kind = kind;
  out.waypoints.push_back({0.0, path.front()});
  for (std::size_t k = 1; k < path.size(); ++k)
  {
    const JointVector a = path[k - 1];
    const JointVector d = path[k] - a;
    const double span = max_abs(d);
    if (span < 1e-12)
      continue;
    const auto n = static_cast<std::size_t>(std::ceil(span / cfg.waypoint_spacing - 1e-9));
    for (std::size_t i = 1; i <= n; ++i)
    {
      const double s = static_cast<double>(i) / static_cast<double>(n);
      const JointVector q = i == n ? path[k] : JointVector(a + s * d);
      const double dt = max_abs(q - out.waypoints.back().q) / cfg.joint_speed;
      out.waypoints.push_back({out.waypoints.back().time + dt, q});
    }
  }
  return out;
}

}  // namespace

PoseError pose_error(const RigidTransform& hand, const PoseGoal& goal)
{
  PoseError err;
  err.position = (hand.translation - goal.position).norm();
  if (goal.orientation)
    err.orientation = rotation_angle_between(hand.rotation, *goal.orientation);
  else if (goal.approach_axis)
    err.orientation = angle_between(hand.rotation * kHandApproach, *goal.approach_axis);
  return err;
}

std::optional<JointVector> ik_solve(const ArmGeometry& geometry, const PoseGoal& goal,
                                    std::span<const JointVector> seeds, const IkOptions& options)
{
  if (!goal.position.allFinite())
    return std::nullopt;
  // Points beyond the reach sphere of the base can never be attained.
  if (goal.position.norm() > geometry.max_reach() + options.position_tolerance)
    return std::nullopt;
  for (const auto& seed : seeds)
  {
    if (!geometry.within_limits(seed))
      throw std::invalid_argument("ik_solve: seed outside joint limits");
    if (auto q = ik_from_seed(geometry, goal, seed, options))
      return q;
  }
  return std::nullopt;
}

bool motion_valid(const ArmGeometry& geometry, const JointVector& a, const JointVector& b,
                  const ObstacleSet& obstacles, const std::optional<HeldBlock>& held, const PlannerConfig& config)
{
  const JointVector d = b - a;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(max_abs(d) / config.collision_resolution)));
  for (std::size_t i = 1; i <= n; ++i)
  {
    const JointVector q = i == n ? b : JointVector(a + (static_cast<double>(i) / static_cast<double>(n)) * d);
    if (!collision_free(geometry, q, obstacles, held, config.collision))
      return false;
  }
  return true;
}

JointTrajectory plan_reach(const ArmGeometry& geometry, const PlanRequest& req, const PlannerConfig& cfg,
                           std::stop_token stop, PlanStats* stats_out)
{
  if (!req.start.allFinite() || !geometry.within_limits(req.start))
    throw PlanRejected("plan_reach: start outside joint limits");
  if (!(req.time_budget > 0.0))
    throw PlanRejected("plan_reach: time budget must be positive");
  if (!req.goal.position.allFinite())
    throw PlanRejected("plan_reach: goal is not finite");
  if (!collision_free(geometry, req.start, req.obstacles, req.held, cfg.collision))
    throw PlanRejected("plan_reach: start configuration in collision");

  PlanStats stats;
  const Search search{geometry, req, cfg};
  std::mt19937_64 rng(req.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  stats.start_distance = search.eef_distance(req.start);
  const auto finish = [&](JointTrajectory t) {
    stats.final_distance = search.eef_distance(t.final_q());
    if (stats_out)
      *stats_out = stats;
    return t;
  };

  if (converged(pose_error(forward_kinematics_unchecked(geometry, req.start).end_effector, req.goal), cfg.ik))
  {
    stats.goal_ik_found = true;
    JointTrajectory t;
    t.waypoints.push_back({0.0, req.start});
    return finish(t);
  }

  // Goal configuration: IK from the start, the home posture and random seeds.
  std::vector<JointVector> seeds{req.start, geometry.clamp(geometry.home)};
  for (std::size_t i = 0; i < cfg.random_ik_seeds; ++i)
    seeds.push_back(random_config(geometry, rng));
  std::optional<JointVector> goal_q;
  if (req.goal.position.norm() <= geometry.max_reach() + cfg.ik.position_tolerance)
    for (const auto& seed : seeds)
    {
      auto q = ik_from_seed(geometry, req.goal, seed, cfg.ik);
      if (q && collision_free(geometry, *q, req.obstacles, req.held, cfg.collision))
      {
        goal_q = q;
        break;
      }
    }
  stats.goal_ik_found = goal_q.has_value();

  const auto budget = static_cast<std::size_t>(std::ceil(req.time_budget * cfg.iterations_per_second));
  Tree start_tree;
  start_tree.add(req.start, -1, stats.start_distance);

  if (goal_q)
  {
    Tree goal_tree;
    goal_tree.add(*goal_q, -1, search.eef_distance(*goal_q));
    bool start_is_a = true;
    for (std::size_t it = 0; it < budget; ++it)
    {
      if (stop.stop_requested())
      {
        stats.cancelled = true;
        break;
      }
      ++stats.iterations;
      Tree& a = start_is_a ? start_tree : goal_tree;
      Tree& b = start_is_a ? goal_tree : start_tree;
      const JointVector target = unit(rng) < cfg.goal_bias ? b.q.front() : random_config(geometry, rng);
      std::size_t na = 0;
      if (search.extend(a, target, na) != Extend::Trapped)
      {
        std::size_t nb = 0;
        if (search.connect(b, a.q[na], nb) == Extend::Reached)
        {
          const std::size_t s_idx = start_is_a ? na : nb;
          const std::size_t g_idx = start_is_a ? nb : na;
          std::vector<JointVector> path = start_tree.path_to_root(s_idx);
          std::reverse(path.begin(), path.end());
          const auto tail = goal_tree.path_to_root(g_idx);
          path.insert(path.end(), tail.begin() + (path.back() == tail.front() ? 1 : 0), tail.end());
          stats.tree_nodes = start_tree.q.size() + goal_tree.q.size();
          return finish(time_parameterize(shortcut(search, std::move(path), rng), cfg, GoalKind::Exact));
        }
      }
      start_is_a = !start_is_a;
    }
    stats.tree_nodes = start_tree.q.size() + goal_tree.q.size();
  }
  else
  {
    for (std::size_t it = 0; it < budget; ++it)
    {
      if (stop.stop_requested())
      {
        stats.cancelled = true;
        break;
      }
      ++stats.iterations;
      if (unit(rng) < 0.3)
        search.greedy_step(start_tree);
      else
      {
        std::size_t added = 0;
        search.extend(start_tree, random_config(geometry, rng), added);
      }
    }
    stats.tree_nodes = start_tree.q.size();
  }

  std::vector<JointVector> path = start_tree.path_to_root(start_tree.closest_to_goal());
  std::reverse(path.begin(), path.end());
  return finish(time_parameterize(shortcut(search, std::move(path), rng), cfg, GoalKind::Intermediate));
}

ExecSample sample_trajectory(const JointTrajectory& t, double elapsed)
{
  if (t.waypoints.empty())
    return {JointVector::Zero(), ExecStatus::Done};
  const auto& w = t.waypoints;
  if (elapsed >= w.back().time)
    return {w.back().q, ExecStatus::Done};
  if (elapsed <= 0.0)
    return {w.front().q, ExecStatus::Running};
  const auto it = std::upper_bound(w.begin(), w.end(), elapsed,
                                   [](double v, const TrajectoryPoint& p) { return v < p.time; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double s = (elapsed - lo.time) / (hi.time - lo.time);
  return {lo.q + s * (hi.q - lo.q), ExecStatus::Running};
}

ExecSample TrajectoryExecutor::execute_tick(double elapsed, bool abort)
{
  if (status_ == ExecStatus::Aborted)
    return {last_, status_};
  if (abort)
  {
    if (!started_)
      last_ = trajectory_.waypoints.empty() ? JointVector::Zero() : trajectory_.waypoints.front().q;
    status_ = ExecStatus::Aborted;
    return {last_, status_};
  }
  const ExecSample s = sample_trajectory(trajectory_, std::max(0.0, elapsed));
  last_ = s.q;
  started_ = true;
  status_ = s.status;
  return s;
}

}  // namespace prosim
