#include "prosim/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace prosim
{

using nlohmann::json;

namespace
{

void allow_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys)
{
  if (!j.is_object())
    throw std::invalid_argument(std::string(where) + ": expected an object");
  const std::set<std::string_view> allowed(keys);
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k))
      throw std::invalid_argument(std::string(where) + ": unknown key \"" + k + "\"");
}

template <typename T>
void read(const json& j, const char* key, T& out)
{
  if (j.contains(key))
    out = j.at(key).get<T>();
}

template <std::size_t N>
std::array<double, N> array_from(const json& j, std::string_view what)
{
  if (!j.is_array() || j.size() != N)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i)
    out[i] = j[i].get<double>();
  return out;
}

Eigen::Vector2d vec2_from(const json& j)
{
  const auto a = array_from<2>(j, "2-vector");
  return {a[0], a[1]};
}

JointVector joints_from(const json& j)
{
  const auto a = array_from<kArmDof>(j, "joint vector");
  JointVector q;
  for (std::size_t i = 0; i < kArmDof; ++i)
    q[static_cast<Eigen::Index>(i)] = a[i];
  return q;
}

TrialConfig trial_from(const json& j)
{
  allow_keys(j, "trial", {"method", "arrangement", "order", "duration", "seed", "gaze_noise", "gaze_noise_deg"});
  TrialConfig t;
  if (j.contains("method"))
  {
    const auto m = parse_method(j.at("method").get<std::string>());
    if (!m)
      throw std::invalid_argument("trial: method must be one of A, B, C, D");
    t.method = *m;
  }
  read(j, "arrangement", t.arrangement);
  if (j.contains("order"))
  {
    const auto o = j.at("order").get<std::vector<std::size_t>>();
    if (o.size() != kBlockCount)
      throw std::invalid_argument("trial: order must list four block ids");
    std::copy(o.begin(), o.end(), t.order.begin());
  }
  read(j, "duration", t.duration);
  read(j, "seed", t.rng_seed);
  read(j, "gaze_noise", t.gaze_noise);
  read(j, "gaze_noise_deg", t.gaze_noise_deg);
  t.validate();
  return t;
}

json trial_to_json(const TrialConfig& t)
{
  return {{"method", to_string(t.method)}, {"arrangement", t.arrangement}, {"order", t.order},
          {"duration", t.duration},        {"seed", t.rng_seed},          {"gaze_noise", t.gaze_noise},
          {"gaze_noise_deg", t.gaze_noise_deg}};
}

BoxSpec box_from(const json& j)
{
  allow_keys(j, "world.box",
             {"floor_width", "floor_depth", "wall_height", "wall_thickness", "partition_height", "partition_thickness",
              "table_width", "table_depth", "table_thickness", "table_below_shoulder", "box_distance", "pick_slots",
              "targets", "target_radius"});
  BoxSpec b;
  read(j, "floor_width", b.floor_width);
  read(j, "floor_depth", b.floor_depth);
  read(j, "wall_height", b.wall_height);
  read(j, "wall_thickness", b.wall_thickness);
  read(j, "partition_height", b.partition_height);
  read(j, "partition_thickness", b.partition_thickness);
  read(j, "table_width", b.table_width);
  read(j, "table_depth", b.table_depth);
  read(j, "table_thickness", b.table_thickness);
  read(j, "table_below_shoulder", b.table_below_shoulder);
  read(j, "box_distance", b.box_distance);
  read(j, "target_radius", b.target_radius);
  for (const char* key : {"pick_slots", "targets"})
    if (j.contains(key))
    {
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != kBlockCount)
        throw std::invalid_argument(std::string("world.box.") + key + ": expected four [x, y] points");
      auto& dst = std::string_view(key) == "targets" ? b.targets : b.pick_slots;
      for (std::size_t i = 0; i < kBlockCount; ++i)
        dst[i] = vec2_from(a[i]);
    }
  b.validate();
  return b;
}

json box_to_json(const BoxSpec& b)
{
  json slots = json::array(), targets = json::array();
  for (std::size_t i = 0; i < kBlockCount; ++i)
  {
    slots.push_back({b.pick_slots[i].x(), b.pick_slots[i].y()});
    targets.push_back({b.targets[i].x(), b.targets[i].y()});
  }
  return {{"floor_width", b.floor_width},
          {"floor_depth", b.floor_depth},
          {"wall_height", b.wall_height},
          {"wall_thickness", b.wall_thickness},
          {"partition_height", b.partition_height},
          {"partition_thickness", b.partition_thickness},
          {"table_width", b.table_width},
          {"table_depth", b.table_depth},
          {"table_thickness", b.table_thickness},
          {"table_below_shoulder", b.table_below_shoulder},
          {"box_distance", b.box_distance},
          {"pick_slots", slots},
          {"targets", targets},
          {"target_radius", b.target_radius}};
}

std::string resolve(const std::string& p, const std::filesystem::path& base)
{
  if (p.empty())
    return p;
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? p : (base / path).string();
}

}  // namespace

const char* to_string(GestureSourceKind k)
{
  switch (k)
  {
    case GestureSourceKind::ClientEvents: return "client-events";
    case GestureSourceKind::Synthetic: return "synthetic";
    case GestureSourceKind::EmgFile: return "emg-file";
  }
  return "?";
}

json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(v[i]);
  return a;
}

Vector3d vec3_from(const json& j)
{
  const auto a = array_from<3>(j, "3-vector");
  return {a[0], a[1], a[2]};
}

json pose_json(const RigidTransform& t)
{
  const auto& q = t.rotation;
  return {{"position", vec_json(t.translation)}, {"orientation", {q.w(), q.x(), q.y(), q.z()}}};
}

RigidTransform pose_from(const json& j)
{
  allow_keys(j, "pose", {"position", "orientation"});
  RigidTransform t;
  if (j.contains("position"))
    t.translation = vec3_from(j.at("position"));
  if (j.contains("orientation"))
  {
    const auto q = array_from<4>(j.at("orientation"), "orientation (w, x, y, z)");
    const Quaterniond r(q[0], q[1], q[2], q[3]);
    if (!(r.norm() > 1e-9) || !r.coeffs().allFinite())
      throw std::invalid_argument("orientation quaternion must be finite and non-zero");
    t.rotation = r.normalized();
  }
  if (!t.translation.allFinite())
    throw std::invalid_argument("position must be finite");
  return t;
}

ArmGeometry arm_from_json(const json& j)
{
  allow_keys(j, "arm", {"upper_arm", "forearm", "hand_offset", "home", "limits"});
  const ArmGeometry d = ArmGeometry::default_geometry();
  ArmGeometry g = ArmGeometry::from_lengths(j.value("upper_arm", d.upper_arm), j.value("forearm", d.forearm),
                                            j.value("hand_offset", d.hand_offset));
  if (j.contains("home"))
    g.home = joints_from(j.at("home"));
  if (j.contains("limits"))
  {
    const auto& l = j.at("limits");
    if (!l.is_array() || l.size() != kArmDof)
      throw std::invalid_argument("arm.limits: expected seven [min, max] pairs");
    for (std::size_t i = 0; i < kArmDof; ++i)
    {
      const auto mm = vec2_from(l[i]);
      g.joints[i].min = mm.x();
      g.joints[i].max = mm.y();
    }
  }
  g.validate();
  return g;
}

json arm_to_json(const ArmGeometry& g)
{
  json limits = json::array();
  for (const auto& jt : g.joints)
    limits.push_back({jt.min, jt.max});
  return {{"upper_arm", g.upper_arm},
          {"forearm", g.forearm},
          {"hand_offset", g.hand_offset},
          {"home", vec_json(g.home)},
          {"limits", limits}};
}

SessionConfig SessionConfig::from_json(const json& j, const std::filesystem::path& base_dir)
{
  allow_keys(j, "config",
             {"arm", "control", "intent", "planner", "world", "shoulder", "head_offset", "mode_display_offset",
              "method", "trials", "plan", "gesture_source", "network", "log_dir", "snapshot_rate"});
  SessionConfig c;

  if (j.contains("arm"))
    c.world.arm = arm_from_json(j.at("arm"));

  if (j.contains("control"))
  {
    const auto& s = j.at("control");
    allow_keys(s, "control", {"joint_speed", "eef_linear_speed", "eef_angular_speed", "cond_limit"});
    read(s, "joint_speed", c.control.joint_speed);
    read(s, "eef_linear_speed", c.control.eef_linear_speed);
    read(s, "eef_angular_speed", c.control.eef_angular_speed);
    read(s, "cond_limit", c.control.cond_limit);
  }

  if (j.contains("intent"))
  {
    const auto& s = j.at("intent");
    allow_keys(s, "intent", {"sigma", "reference_depth", "priors"});
    read(s, "sigma", c.intent.sigma);
    read(s, "reference_depth", c.intent.reference_depth);
    if (s.contains("priors"))
    {
      const auto& p = s.at("priors");
      allow_keys(p, "intent.priors", {"after_red", "after_blue"});
      if (p.contains("after_red"))
        c.intent.priors.after_red = array_from<kBlockCount>(p.at("after_red"), "intent.priors.after_red");
      if (p.contains("after_blue"))
        c.intent.priors.after_blue = array_from<kBlockCount>(p.at("after_blue"), "intent.priors.after_blue");
    }
  }

  if (j.contains("planner"))
  {
    const auto& s = j.at("planner");
    allow_keys(s, "planner",
               {"time_budget", "iterations_per_second", "extend_step", "collision_resolution", "waypoint_spacing",
                "joint_speed", "shortcut_attempts", "random_ik_seeds", "goal_bias", "link_radius", "spheres_per_link"});
    auto& p = c.planner;
    read(s, "time_budget", p.time_budget);
    read(s, "iterations_per_second", p.iterations_per_second);
    read(s, "extend_step", p.extend_step);
    read(s, "collision_resolution", p.collision_resolution);
    read(s, "waypoint_spacing", p.waypoint_spacing);
    read(s, "joint_speed", p.joint_speed);
    read(s, "shortcut_attempts", p.shortcut_attempts);
    read(s, "random_ik_seeds", p.random_ik_seeds);
    read(s, "goal_bias", p.goal_bias);
    if (s.contains("link_radius"))
      p.collision.link_radius = array_from<3>(s.at("link_radius"), "planner.link_radius");
    read(s, "spheres_per_link", p.collision.spheres_per_link);
  }

  if (j.contains("world"))
  {
    const auto& s = j.at("world");
    allow_keys(s, "world",
               {"box", "block_diameter", "block_height", "grasp_threshold", "gravity", "tick", "hand_push_radius",
                "max_release_speed"});
    if (s.contains("box"))
      c.world.box = box_from(s.at("box"));
    c.world.blocks = default_blocks(s.value("block_diameter", 0.05), s.value("block_height", 0.05));
    read(s, "grasp_threshold", c.world.grasp_threshold);
    read(s, "gravity", c.world.gravity);
    read(s, "tick", c.world.tick);
    read(s, "hand_push_radius", c.world.hand_push_radius);
    read(s, "max_release_speed", c.world.max_release_speed);
  }

  if (j.contains("shoulder"))
    c.shoulder = pose_from(j.at("shoulder"));
  if (j.contains("head_offset"))
    c.head_offset = vec3_from(j.at("head_offset"));
  if (j.contains("mode_display_offset"))
    c.mode_display_offset = vec3_from(j.at("mode_display_offset"));

  const int trial_sources = j.contains("method") + j.contains("trials") + j.contains("plan");
  if (trial_sources > 1)
    throw std::invalid_argument("config: give only one of \"method\", \"trials\" or \"plan\"");
  if (j.contains("method"))
    c.trials = {trial_from(json{{"method", j.at("method")}})};
  if (j.contains("trials"))
  {
    c.trials.clear();
    for (const auto& t : j.at("trials"))
      c.trials.push_back(trial_from(t));
  }
  if (j.contains("plan"))
  {
    const auto& p = j.at("plan");
    allow_keys(p, "plan", {"participant", "trials_per_method", "base_seed", "duration"});
    c.trials = counterbalanced_plan(p.value("participant", std::size_t{1}), p.value("trials_per_method", std::size_t{1}),
                                    p.value("base_seed", std::uint64_t{1}));
    if (p.contains("duration"))
      for (auto& t : c.trials)
        t.duration = p.at("duration").get<double>();
  }

  if (j.contains("gesture_source"))
  {
    const auto& s = j.at("gesture_source");
    allow_keys(s, "gesture_source",
               {"kind", "path", "model", "channels", "seed", "window", "increment", "debounce"});
    auto& g = c.gesture_source;
    const std::string kind = s.value("kind", std::string("client-events"));
    if (kind == "client-events")
      g.kind = GestureSourceKind::ClientEvents;
    else if (kind == "synthetic")
      g.kind = GestureSourceKind::Synthetic;
    else if (kind == "emg-file")
      g.kind = GestureSourceKind::EmgFile;
    else
      throw std::invalid_argument("gesture_source.kind must be client-events, synthetic or emg-file");
    g.path = resolve(s.value("path", std::string()), base_dir);
    g.model_path = resolve(s.value("model", std::string()), base_dir);
    read(s, "channels", g.channels);
    read(s, "seed", g.seed);
    read(s, "window", g.pipeline.window);
    read(s, "increment", g.pipeline.increment);
    read(s, "debounce", g.pipeline.debounce_count);
  }

  if (j.contains("network"))
  {
    const auto& s = j.at("network");
    allow_keys(s, "network", {"bind", "port"});
    read(s, "bind", c.bind_address);
    read(s, "port", c.port);
  }
  if (j.contains("log_dir"))
    c.log_dir = resolve(j.at("log_dir").get<std::string>(), base_dir);
  read(j, "snapshot_rate", c.snapshot_rate);

  c.validate();
  return c;
}

SessionConfig SessionConfig::load(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open config file " + path);
  json j;
  try
  {
    j = json::parse(in, nullptr, true, true);  // comments allowed
  }
  catch (const json::parse_error& e)
  {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path());
}

json SessionConfig::to_json() const
{
  json trials_j = json::array();
  for (const auto& t : trials)
    trials_j.push_back(trial_to_json(t));
  const auto& p = planner;
  return {
      {"arm", arm_to_json(world.arm)},
      {"control",
       {{"joint_speed", control.joint_speed},
        {"eef_linear_speed", control.eef_linear_speed},
        {"eef_angular_speed", control.eef_angular_speed},
        {"cond_limit", control.cond_limit}}},
      {"intent",
       {{"sigma", intent.sigma},
        {"reference_depth", intent.reference_depth},
        {"priors", {{"after_red", intent.priors.after_red}, {"after_blue", intent.priors.after_blue}}}}},
      {"planner",
       {{"time_budget", p.time_budget},
        {"iterations_per_second", p.iterations_per_second},
        {"extend_step", p.extend_step},
        {"collision_resolution", p.collision_resolution},
        {"waypoint_spacing", p.waypoint_spacing},
        {"joint_speed", p.joint_speed},
        {"shortcut_attempts", p.shortcut_attempts},
        {"random_ik_seeds", p.random_ik_seeds},
        {"goal_bias", p.goal_bias},
        {"link_radius", p.collision.link_radius},
        {"spheres_per_link", p.collision.spheres_per_link}}},
      {"world",
       {{"box", box_to_json(world.box)},
        {"block_diameter", world.blocks[0].diameter},
        {"block_height", world.blocks[0].height},
        {"grasp_threshold", world.grasp_threshold},
        {"gravity", world.gravity},
        {"tick", world.tick},
        {"hand_push_radius", world.hand_push_radius},
        {"max_release_speed", world.max_release_speed}}},
      {"shoulder", pose_json(shoulder)},
      {"head_offset", vec_json(head_offset)},
      {"mode_display_offset", vec_json(mode_display_offset)},
      {"trials", trials_j},
      {"gesture_source",
       {{"kind", prosim::to_string(gesture_source.kind)},
        {"path", gesture_source.path},
        {"model", gesture_source.model_path},
        {"channels", gesture_source.channels},
        {"seed", gesture_source.seed},
        {"window", gesture_source.pipeline.window},
        {"increment", gesture_source.pipeline.increment},
        {"debounce", gesture_source.pipeline.debounce_count}}},
      {"network", {{"bind", bind_address}, {"port", port}}},
      {"log_dir", log_dir},
      {"snapshot_rate", snapshot_rate},
  };
}

void SessionConfig::validate() const
{
  world.arm.validate();
  world.box.validate();
  if (!(world.tick > 0.0))
    throw std::invalid_argument("world.tick must be positive");
  const double per_second = 1.0 / world.tick;
  if (std::abs(per_second - std::round(per_second)) > 1e-6)
    throw std::invalid_argument("world.tick must divide one second");
  if (snapshot_rate == 0 || snapshot_rate > std::round(per_second))
    throw std::invalid_argument("snapshot_rate must be in 1..tick rate");
  if (!(world.grasp_threshold > 0.0) || !(world.gravity > 0.0))
    throw std::invalid_argument("world: grasp_threshold and gravity must be positive");
  if (!(control.joint_speed > 0.0 && control.eef_linear_speed > 0.0 && control.eef_angular_speed > 0.0))
    throw std::invalid_argument("control speeds must be positive");
  if (!(control.cond_limit > 1.0))
    throw std::invalid_argument("control.cond_limit must exceed 1");
  if (!(intent.sigma > 0.0) || !(intent.reference_depth > 0.0))
    throw std::invalid_argument("intent: sigma and reference_depth must be positive");
  if (!(planner.time_budget > 0.0) || !(planner.joint_speed > 0.0) || !(planner.iterations_per_second > 0.0))
    throw std::invalid_argument("planner: time_budget, joint_speed and iterations_per_second must be positive");
  if (!(planner.extend_step > 0.0 && planner.collision_resolution > 0.0 && planner.waypoint_spacing > 0.0))
    throw std::invalid_argument("planner: step sizes must be positive");
  if (trials.empty())
    throw std::invalid_argument("config: at least one trial is required");
  for (const auto& t : trials)
    t.validate();
  if (!shoulder.translation.allFinite())
    throw std::invalid_argument("shoulder pose must be finite");

  const auto& g = gesture_source;
  if (g.pipeline.window == 0 || g.pipeline.increment == 0 || g.pipeline.debounce_count == 0)
    throw std::invalid_argument("gesture_source: window, increment and debounce must be positive");
  if (g.kind == GestureSourceKind::EmgFile)
  {
    if (g.path.empty())
      throw std::invalid_argument("gesture_source: emg-file needs a path");
    if (!std::filesystem::exists(g.path))
      throw std::invalid_argument("gesture_source: file not found: " + g.path);
  }
  if (g.kind != GestureSourceKind::ClientEvents && g.channels == 0)
    throw std::invalid_argument("gesture_source: channels must be positive");
  if (!g.model_path.empty() && !std::filesystem::exists(g.model_path))
    throw std::invalid_argument("gesture_source: model file not found: " + g.model_path);
  if (g.kind == GestureSourceKind::ClientEvents && (!g.path.empty() || !g.model_path.empty()))
    throw std::invalid_argument("gesture_source: client-events takes no path or model");
}

}  // namespace prosim
