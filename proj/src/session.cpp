#include "prosim/session.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace prosim
{

using nlohmann::json;
using nlohmann::ordered_json;

namespace
{

ordered_json v3(const Vector3d& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

ordered_json quat(const Quaterniond& q) { return ordered_json::array({q.w(), q.x(), q.y(), q.z()}); }

ordered_json pose_oj(const RigidTransform& t)
{
  ordered_json j;
  j["position"] = v3(t.translation);
  j["orientation"] = quat(t.rotation);
  return j;
}

ordered_json joints_oj(const JointVector& q)
{
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < q.size(); ++i)
    a.push_back(q[i]);
  return a;
}

LdaModel load_model(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open model " + path);
  return LdaModel::from_json(json::parse(in));
}

LdaModel train_on(const LabeledSignal& data, const EmgPipelineConfig& p)
{
  const TrainingSet set = windowed_training_set(data, p.window, p.increment, p.thresholds);
  return train_lda(set.features, set.labels);
}

}  // namespace

const char* to_string(Lifecycle l)
{
  switch (l)
  {
    case Lifecycle::Idle: return "idle";
    case Lifecycle::Running: return "running";
    case Lifecycle::Paused: return "paused";
    case Lifecycle::Finished: return "finished";
  }
  return "?";
}

std::size_t TrialResult::success_count() const
{
  std::size_t n = 0;
  for (auto o : outcomes)
    n += o == Outcome::Success;
  return n;
}

ordered_json TrialResult::to_json() const
{
  ordered_json j;
  j["type"] = "trial_end";
  j["trial"] = index;
  j["method"] = prosim::to_string(trial.method);
  j["arrangement"] = trial.arrangement;
  j["reason"] = end_reason;
  j["t"] = end_time;
  ordered_json o = ordered_json::array();
  for (auto x : outcomes)
    o.push_back(prosim::to_string(x));
  j["outcomes"] = o;
  j["success_count"] = success_count();
  j["log"] = log_path;
  return j;
}

ordered_json Snapshot::to_json(const WorldConfig& config) const
{
  ordered_json j;
  j["type"] = "snapshot";
  j["t"] = t;
  j["trial"] = trial_index;
  j["method"] = prosim::to_string(method);
  j["lifecycle"] = prosim::to_string(lifecycle);
  j["stage"] = prosim::to_string(stage);
  j["q"] = joints_oj(q);
  j["hand"] = prosim::to_string(hand);
  j["shoulder"] = pose_oj(shoulder);
  ordered_json arm = ordered_json::array();
  for (const auto& p : arm_points)
    arm.push_back(v3(p));
  j["arm"] = arm;
  j["hand_pose"] = pose_oj(hand_pose);
  ordered_json bl = ordered_json::array();
  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    ordered_json b;
    b["id"] = id;
    b["color"] = prosim::to_string(config.blocks[id].color);
    b["number"] = config.blocks[id].number;
    b["position"] = v3(blocks[id].pose.translation);
    b["orientation"] = quat(blocks[id].pose.rotation);
    b["phase"] = prosim::to_string(blocks[id].phase);
    b["in_target"] = blocks[id].in_target;
    bl.push_back(b);
  }
  j["blocks"] = bl;
  ordered_json sel;
  sel["block"] = selection.block ? ordered_json(*selection.block) : ordered_json(nullptr);
  sel["locked"] = selection.locked;
  j["selection"] = sel;
  ordered_json be = ordered_json::array();
  for (const auto& e : belief)
    be.push_back(ordered_json{{"block", e.id}, {"p", e.probability}});
  j["belief"] = be;
  if (marker)
    j["marker"] = ordered_json{{"point", v3(*marker)}, {"frozen", marker_frozen}};
  else
    j["marker"] = nullptr;
  j["mode_label"] = mode_label;
  j["guard"] = guard;
  j["plan_status"] = plan_status;
  ordered_json cu = ordered_json::array();
  for (const auto& c : cues)
    cu.push_back(ordered_json{{"kind", c.kind}, {"block", c.block}, {"t", c.t}});
  j["cues"] = cu;
  j["timer_remaining"] = timer_remaining;
  if (gaze)
    j["gaze"] = ordered_json{{"origin", v3(gaze->origin)}, {"direction", v3(gaze->direction)}};
  else
    j["gaze"] = nullptr;
  return j;
}

// ---------------------------------------------------------------------------

TrialLogWriter::TrialLogWriter(const std::string& path) : path_(path)
{
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty())
    std::filesystem::create_directories(parent);
  out_.open(path, std::ios::out | std::ios::trunc);
  if (!out_)
    throw std::runtime_error("cannot write log " + path);
}

void TrialLogWriter::write(double t, const char* kind, ordered_json payload)
{
  if (!out_.is_open())
    return;
  if (t < last_t_)
    throw std::logic_error("log records must have nondecreasing time");
  last_t_ = t;
  ordered_json rec;
  rec["t"] = t;
  rec["kind"] = kind;
  if (payload.is_object())
    for (auto it = payload.begin(); it != payload.end(); ++it)
      rec[it.key()] = std::move(it.value());
  out_ << rec.dump() << '\n';
}

void TrialLogWriter::close()
{
  if (out_.is_open())
  {
    out_.flush();
    out_.close();
  }
}

// ---------------------------------------------------------------------------

struct Session::PlanJob
{
  std::uint64_t id = 0;
  std::mutex m;
  bool done = false;
  std::optional<JointTrajectory> trajectory;
  PlanStats stats;
  std::string error;
};

Session::Session(SessionConfig config, RunMode mode)
    : cfg_(std::move(config)), mode_(mode), debouncer_(cfg_.gesture_source.pipeline.debounce_count)
{
  cfg_.validate();
  const auto& g = cfg_.gesture_source;
  if (g.kind == GestureSourceKind::Synthetic)
  {
    const LdaModel model = g.model_path.empty()
                               ? train_on(synthetic_training_recording(g.channels, 1000, 3, g.seed), g.pipeline)
                               : load_model(g.model_path);
    if (model.dimension() != static_cast<Eigen::Index>(g.channels * kFeaturesPerChannel))
      throw std::invalid_argument("gesture_source: model does not match the channel count");
    emg_stream_ = std::make_unique<EmgClassifierStream>(model, g.channels, g.pipeline);
  }
  else if (g.kind == GestureSourceKind::EmgFile)
  {
    recording_ = read_emg_file(g.path);
    if (std::abs(recording_->signal.sample_rate * cfg_.world.tick - 1.0) > 1e-9)
      throw std::invalid_argument("gesture_source: recording sample rate must equal the tick rate");
    LdaModel model;
    if (!g.model_path.empty())
      model = load_model(g.model_path);
    else if (!recording_->labels.empty())
      model = train_on(*recording_, g.pipeline);
    else
      throw std::invalid_argument("gesture_source: unlabeled recording needs a model file");
    emg_stream_ = std::make_unique<EmgClassifierStream>(model, recording_->signal.channel_count(), g.pipeline);
  }
  load_trial(0);
}

Session::~Session()
{
  if (worker_.joinable())
    worker_.request_stop();
  log_.close();
}

Lifecycle Session::lifecycle() const
{
  std::lock_guard lock(state_mutex_);
  return lifecycle_;
}

std::size_t Session::trial_index() const
{
  std::lock_guard lock(state_mutex_);
  return trial_index_;
}

Vector3d Session::eye_position() const { return world_.shoulder * cfg_.head_offset; }

std::uint64_t Session::frame_of(std::uint64_t tick) const
{
  const auto per_second = static_cast<std::uint64_t>(std::llround(1.0 / cfg_.world.tick));
  return tick * cfg_.snapshot_rate / per_second;
}

void Session::load_trial(std::size_t index)
{
  if (worker_.joinable())
    worker_.request_stop();
  job_.reset();
  executor_.reset();
  trial_index_ = index;
  trial_ = cfg_.trials.at(index);
  world_ = spawn_trial(cfg_.world, trial_, cfg_.shoulder);
  ctrl_ = initial_state(trial_.method);
  last_mode_label_ = mode_label(ctrl_);
  gaze_.reset();
  previous_color_.reset();
  pending_cues_.clear();
  gaze_rng_.seed(trial_.rng_seed);
  debouncer_.reset();
  intended_ = GestureClass::NM;
  const auto& g = cfg_.gesture_source;
  if (g.kind == GestureSourceKind::Synthetic)
  {
    synthetic_ = std::make_unique<SyntheticEmg>(g.channels, g.seed + 1 + index);
    emg_stream_ = std::make_unique<EmgClassifierStream>(*emg_stream_);
  }
  lifecycle_ = Lifecycle::Idle;
}

ordered_json Session::scene_layout() const
{
  ordered_json scene;
  scene["box_frame"] = pose_oj(world_.scene.box_frame);
  scene["table_top"] = world_.scene.table_top;
  scene["target_radius"] = cfg_.world.box.target_radius;
  scene["partition_height"] = cfg_.world.box.partition_height;
  scene["floor"] = {cfg_.world.box.floor_depth, cfg_.world.box.floor_width};
  return scene;
}

ordered_json Session::block_specs() const
{
  ordered_json blocks = ordered_json::array();
  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    const auto& b = cfg_.world.blocks[id];
    ordered_json o;
    o["id"] = id;
    o["color"] = to_string(b.color);
    o["number"] = b.number;
    o["diameter"] = b.diameter;
    o["height"] = b.height;
    o["target"] = v3(world_.target_world(cfg_.world, id));
    blocks.push_back(o);
  }
  return blocks;
}

ordered_json Session::scene_json() const
{
  std::lock_guard lock(state_mutex_);
  ordered_json j;
  j["type"] = "scene";
  j["head_offset"] = v3(cfg_.head_offset);
  j["mode_display_offset"] = v3(cfg_.mode_display_offset);
  j["wall_height"] = cfg_.world.box.wall_height;
  j["scene"] = scene_layout();
  j["blocks"] = block_specs();
  j["snapshot_rate"] = cfg_.snapshot_rate;
  return j;
}

void Session::write_header()
{
  ordered_json h;
  h["schema"] = kLogSchema;
  h["version"] = kLogVersion;
  h["trial_index"] = trial_index_;
  ordered_json t;
  t["method"] = to_string(trial_.method);
  t["arrangement"] = trial_.arrangement;
  t["order"] = trial_.order;
  t["duration"] = trial_.duration;
  t["seed"] = trial_.rng_seed;
  t["gaze_noise"] = trial_.gaze_noise;
  t["gaze_noise_deg"] = trial_.gaze_noise_deg;
  h["trial"] = t;
  h["gesture_source"] = to_string(cfg_.gesture_source.kind);
  h["tick"] = cfg_.world.tick;
  h["snapshot_rate"] = cfg_.snapshot_rate;
  h["arm"] = arm_to_json(cfg_.world.arm);
  h["shoulder"] = pose_oj(world_.shoulder);
  h["head_offset"] = v3(cfg_.head_offset);
  h["mode_display_offset"] = v3(cfg_.mode_display_offset);
  h["scene"] = scene_layout();
  ordered_json blocks = block_specs();
  for (BlockId id = 0; id < kBlockCount; ++id)
    blocks[id]["start"] = v3(world_.blocks[id].pose.translation);
  h["blocks"] = blocks;
  log_.write(0.0, "header", h);
}

Ack Session::handle_message(const ClientMessage& m)
{
  const auto source = cfg_.gesture_source.kind;
  switch (m.kind)
  {
    case ClientKind::Hello: return Ack::ok();
    case ClientKind::Gesture:
    case ClientKind::Classification:
      if (source != GestureSourceKind::ClientEvents)
        return Ack::reject(std::string("gestures come from the ") + to_string(source) + " source");
      if (m.kind == ClientKind::Gesture)
        gesture_box_.put(GestureEvent{m.gesture, 0.0});
      else
        classification_box_.put(m.gesture);
      return Ack::ok();
    case ClientKind::Intent:
      if (source != GestureSourceKind::Synthetic)
        return Ack::reject("intent messages need the synthetic gesture source");
      intent_box_.put(m.gesture);
      return Ack::ok();
    case ClientKind::Gaze:
      if (!m.gaze.valid())
        return Ack::reject("gaze ray must be finite with a unit direction");
      gaze_box_.put(m.gaze);
      return Ack::ok();
    case ClientKind::Shoulder:
      if (!m.shoulder.translation.allFinite() || std::abs(m.shoulder.rotation.norm() - 1.0) > 1e-6)
        return Ack::reject("shoulder pose must be finite with a unit quaternion");
      shoulder_box_.put(m.shoulder);
      return Ack::ok();
    case ClientKind::Method:
    {
      std::lock_guard lock(state_mutex_);
      if (lifecycle_ != Lifecycle::Idle)
        return Ack::reject(std::string("method can only change while idle (session is ") + to_string(lifecycle_) + ")");
      cfg_.trials[trial_index_].method = m.method;
      trial_.method = m.method;
      ctrl_ = initial_state(m.method);
      last_mode_label_ = mode_label(ctrl_);
      return Ack::ok();
    }
    case ClientKind::Control: break;
  }

  std::lock_guard lock(state_mutex_);
  const auto refuse = [&](const char* action) {
    return Ack::reject(std::string("cannot ") + action + " while " + to_string(lifecycle_));
  };
  switch (m.action)
  {
    case ControlAction::Start:
      if (lifecycle_ != Lifecycle::Idle)
        return refuse("start");
      {
        char name[64];
        std::snprintf(name, sizeof name, "trial_%02zu_%s.jsonl", trial_index_, to_string(trial_.method));
        log_ = TrialLogWriter((std::filesystem::path(cfg_.log_dir) / name).string());
      }
      write_header();
      gesture_box_.clear();
      classification_box_.clear();
      lifecycle_ = Lifecycle::Running;
      return Ack::ok();
    case ControlAction::Pause:
      if (lifecycle_ != Lifecycle::Running)
        return refuse("pause");
      lifecycle_ = Lifecycle::Paused;
      return Ack::ok();
    case ControlAction::Resume:
      if (lifecycle_ != Lifecycle::Paused)
        return refuse("resume");
      lifecycle_ = Lifecycle::Running;
      return Ack::ok();
    case ControlAction::Stop:
      if (lifecycle_ != Lifecycle::Running && lifecycle_ != Lifecycle::Paused)
        return refuse("stop");
      finish_trial("stopped");
      return Ack::ok();
    case ControlAction::Reset:
      if (lifecycle_ == Lifecycle::Finished)
        return refuse("reset");
      if (log_.is_open())
      {
        log_.write(world_.time, "trial_end", ordered_json{{"reason", "reset"}});
        log_.close();
      }
      load_trial(trial_index_);
      return Ack::ok();
  }
  return Ack::reject("unhandled control action");
}

void Session::client_disconnected()
{
  std::lock_guard lock(state_mutex_);
  if (lifecycle_ == Lifecycle::Running)
    lifecycle_ = Lifecycle::Paused;
}

void Session::drain_inputs(std::optional<GestureEvent>& event)
{
  if (auto s = shoulder_box_.take())
  {
    const bool moved = (s->translation - world_.shoulder.translation).norm() > 1e-12 ||
                       rotation_angle_between(s->rotation, world_.shoulder.rotation) > 1e-12;
    world_.shoulder = *s;
    if (moved && ctrl_.plan_active)
    {
      stop_plan("plan_invalidated", "base moved");
      notify_plan_invalidated(ctrl_, "base moved: replan with NM, WE");
    }
  }
  if (auto g = gaze_box_.take())
  {
    gaze_ = *g;
    gaze_->timestamp = world_.time;
  }

  const double now = world_.time;
  switch (cfg_.gesture_source.kind)
  {
    case GestureSourceKind::ClientEvents:
      if (auto c = classification_box_.take())
        event = debouncer_.push(*c, now);
      if (auto e = gesture_box_.take())
        event = GestureEvent{e->gesture, now};
      break;
    case GestureSourceKind::Synthetic:
    {
      if (auto i = intent_box_.take())
        intended_ = *i;
      const auto sample = synthetic_->next(intended_);
      if (auto c = emg_stream_->push(sample))
        event = debouncer_.push(c->gesture, now);
      break;
    }
    case GestureSourceKind::EmgFile:
    {
      const auto& sig = recording_->signal;
      const auto k = static_cast<std::size_t>(world_.tick_index);
      if (k < sig.sample_count())
      {
        std::vector<double> sample(sig.channel_count());
        for (std::size_t c = 0; c < sample.size(); ++c)
          sample[c] = sig.channels[c][k];
        if (auto c = emg_stream_->push(sample))
          event = debouncer_.push(c->gesture, now);
      }
      break;
    }
  }
}

TickInputs Session::build_inputs(bool refresh)
{
  TickInputs in;
  in.dt = cfg_.world.tick;
  in.q = world_.q;
  in.stage = world_.attached ? TaskStage::Place : TaskStage::Pick;
  const PlaneRegion region = place_region(world_, cfg_.world);
  in.place_center = region.center;
  if (!refresh || !gaze_)
    return in;

  GazeSample g = *gaze_;
  if (trial_.gaze_noise)
    g = perturb_gaze(g, trial_.gaze_noise_deg * M_PI / 180.0, gaze_rng_);

  GazeScene scene;
  scene.context.previous_color = previous_color_;
  scene.context.stage = in.stage;
  std::vector<Vector3d> centers;
  for (std::size_t slot = 0; slot < kBlockCount; ++slot)
  {
    const BlockId id = trial_.order[slot];
    const auto& b = world_.blocks[id];
    if (b.phase == BlockPhase::Attached || b.side == Side::Place)
      continue;
    scene.remaining.push_back({id, slot, cfg_.world.blocks[id].color});
    centers.push_back(b.pose.translation);
  }
  if (!scene.remaining.empty())
  {
    scene.distances = image_plane_distances(g, centers, cfg_.intent.reference_depth);
    in.gaze = std::move(scene);
  }
  in.marker_candidate = place_marker_target(g, region);
  return in;
}

PlanRequest Session::plan_request(const PlanCommand& cmd) const
{
  const RigidTransform to_base = world_.shoulder.inverse();
  PlanRequest req;
  req.start = world_.q;
  req.time_budget = cfg_.planner.time_budget;
  req.rng_seed = trial_.rng_seed * 1000003ULL + cmd.id;
  const Vector3d down = to_base.rotation * -Vector3d::UnitZ();
  ObstacleSet obstacles = world_obstacles(world_, cfg_.world);

  if (cmd.stage == TaskStage::Pick)
  {
    const BlockId id = *cmd.block;
    const auto& spec = cfg_.world.blocks[id];
    const Vector3d grasp = world_.blocks[id].pose.translation + Vector3d(0, 0, 0.5 * spec.height + spec.radius());
    req.goal = PoseGoal::free_yaw(to_base * grasp, down);
    obstacles = obstacles.without_block(id);
  }
  else
  {
    Vector3d hand_from_block = Vector3d(0, 0, 0.05);
    double half_height = 0.025;
    if (world_.attached)
    {
      const auto& spec = cfg_.world.blocks[*world_.attached];
      half_height = 0.5 * spec.height;
      hand_from_block = world_.hand_pose(cfg_.world.arm).translation - world_.blocks[*world_.attached].pose.translation;
      req.held = HeldBlock{world_.attach_offset, spec.radius(), spec.height};
    }
    const double pre_place = 0.05;
    const Vector3d block_center = cmd.point + Vector3d(0, 0, pre_place + half_height);
    req.goal = PoseGoal::free_yaw(to_base * (block_center + hand_from_block), down);
  }
  req.obstacles = obstacles.transformed(to_base);
  return req;
}

void Session::start_plan(const PlanCommand& cmd)
{
  const PlanRequest req = plan_request(cmd);
  ordered_json rec;
  rec["plan"] = cmd.id;
  rec["stage"] = to_string(cmd.stage);
  if (cmd.block)
    rec["block"] = *cmd.block;
  else
    rec["point"] = v3(cmd.point);
  rec["start"] = joints_oj(req.start);
  rec["goal"] = v3(world_.shoulder * req.goal.position);
  rec["seed"] = req.rng_seed;
  log_.write(world_.time, "plan_request", rec);

  if (mode_ == RunMode::Headless)
  {
    try
    {
      PlanStats stats;
      JointTrajectory t = plan_reach(cfg_.world.arm, req, cfg_.planner, {}, &stats);
      begin_execution(cmd.id, std::move(t), stats);
    }
    catch (const std::exception& e)
    {
      notify_plan_failed(ctrl_, cmd.id, e.what());
      log_.write(world_.time, "plan_rejected", ordered_json{{"plan", cmd.id}, {"reason", e.what()}});
    }
    return;
  }

  auto job = std::make_shared<PlanJob>();
  job->id = cmd.id;
  job_ = job;
  worker_ = std::jthread([job, req, arm = cfg_.world.arm, pc = cfg_.planner](std::stop_token stop) {
    PlanStats stats;
    std::optional<JointTrajectory> t;
    std::string error;
    try
    {
      t = plan_reach(arm, req, pc, stop, &stats);
    }
    catch (const std::exception& e)
    {
      error = e.what();
    }
    std::lock_guard lock(job->m);
    job->trajectory = std::move(t);
    job->stats = stats;
    job->error = error;
    job->done = true;
  });
}

void Session::take_plan_result()
{
  if (!job_)
    return;
  std::shared_ptr<PlanJob> job = job_;
  std::unique_lock lock(job->m);
  if (!job->done)
    return;
  job_.reset();
  if (!job->trajectory)
  {
    notify_plan_failed(ctrl_, job->id, job->error);
    log_.write(world_.time, "plan_rejected", ordered_json{{"plan", job->id}, {"reason", job->error}});
    return;
  }
  JointTrajectory t = std::move(*job->trajectory);
  const PlanStats stats = job->stats;
  lock.unlock();
  begin_execution(job->id, std::move(t), stats);
}

void Session::begin_execution(std::uint64_t id, JointTrajectory t, const PlanStats& stats)
{
  ordered_json rec;
  rec["plan"] = id;
  rec["goal_kind"] = to_string(t.goal_kind);
  rec["waypoints"] = t.waypoints.size();
  rec["duration"] = t.duration();
  rec["iterations"] = stats.iterations;
  rec["goal_ik_found"] = stats.goal_ik_found;
  rec["start_distance"] = stats.start_distance;
  rec["final_distance"] = stats.final_distance;
  rec["final_q"] = joints_oj(t.final_q());
  log_.write(world_.time, "plan_result", rec);
  notify_plan_started(ctrl_, id, t.goal_kind);
  executor_.emplace(std::move(t));
  executing_plan_ = id;
  exec_start_tick_ = world_.tick_index;
}

void Session::stop_plan(const char* record, const std::string& why)
{
  if (executor_)
  {
    const double elapsed = static_cast<double>(world_.tick_index - exec_start_tick_) * cfg_.world.tick;
    world_.q = executor_->execute_tick(elapsed, true).q;
    log_.write(world_.time, record,
               ordered_json{{"plan", executing_plan_}, {"reason", why}, {"phase", "executing"}, {"q", joints_oj(world_.q)}});
    executor_.reset();
  }
  else if (job_)
  {
    worker_.request_stop();
    log_.write(world_.time, record, ordered_json{{"plan", job_->id}, {"reason", why}, {"phase", "planning"}});
    job_.reset();
  }
}

void Session::advance_executor()
{
  if (!executor_)
    return;
  const double elapsed = static_cast<double>(world_.tick_index + 1 - exec_start_tick_) * cfg_.world.tick;
  const ExecSample s = executor_->execute_tick(elapsed, false);
  world_.q = s.q;
  if (s.status == ExecStatus::Done)
  {
    const GoalKind kind = executor_->trajectory().goal_kind;
    notify_plan_finished(ctrl_, executing_plan_, ExecStatus::Done, kind);
    log_.write(world_.time, "plan_done", ordered_json{{"plan", executing_plan_}, {"goal_kind", to_string(kind)}});
    executor_.reset();
  }
}

void Session::apply_command(const ControlCommand& cmd)
{
  if (cmd.abort)
    stop_plan("plan_abort", "gesture changed");
  if (cmd.joints && !executor_)
    world_.q = *cmd.joints;
  if (cmd.toggle_hand)
  {
    log_.write(world_.time, "hand", ordered_json{{"state", to_string(ctrl_.hand)}});
    record_world_events(grasp_update(world_, cfg_.world, ctrl_.hand));
  }
  if (cmd.plan)
    start_plan(*cmd.plan);
}

void Session::record_world_events(const std::vector<WorldEvent>& events)
{
  for (const auto& e : events)
  {
    ordered_json rec;
    if (e.block)
      rec["block"] = *e.block;
    if (e.kind != WorldEventKind::Timeout && e.kind != WorldEventKind::Complete)
      rec["position"] = v3(e.position);
    if (e.kind == WorldEventKind::Crossing)
      rec["direction"] = e.direction;
    log_.write(e.time, to_string(e.kind), rec);
    if (e.kind == WorldEventKind::Attach)
      pending_cues_.push_back({"contact_made", *e.block, e.time});
    if (e.kind == WorldEventKind::Detach)
    {
      pending_cues_.push_back({"contact_lost", *e.block, e.time});
      previous_color_ = cfg_.world.blocks[*e.block].color;
    }
  }
}

Snapshot Session::make_snapshot() const
{
  Snapshot s;
  s.t = world_.time;
  s.trial_index = trial_index_;
  s.method = trial_.method;
  s.lifecycle = lifecycle_;
  s.stage = world_.attached ? TaskStage::Place : TaskStage::Pick;
  s.q = world_.q;
  s.hand = world_.hand;
  s.shoulder = world_.shoulder;
  const ArmPose pose = forward_kinematics_unchecked(cfg_.world.arm, world_.q);
  s.arm_points = {world_.shoulder * pose.shoulder(), world_.shoulder * pose.elbow(), world_.shoulder * pose.wrist(),
                  world_.shoulder * pose.hand()};
  s.hand_pose = world_.shoulder * pose.end_effector;
  s.blocks = world_.blocks;
  s.selection = ctrl_.selection;
  s.belief = ctrl_.belief.entries;
  s.marker = ctrl_.marker;
  s.marker_frozen = ctrl_.marker_frozen;
  s.mode_label = mode_label(ctrl_);
  s.guard = to_string(ctrl_.guard);
  s.plan_status = ctrl_.plan_status;
  s.cues = pending_cues_;
  s.timer_remaining = std::max(0.0, world_.duration - world_.time);
  s.gaze = gaze_;
  return s;
}

Snapshot Session::snapshot() const
{
  std::lock_guard lock(state_mutex_);
  return make_snapshot();
}

void Session::emit_snapshot()
{
  const Snapshot snap = make_snapshot();
  ordered_json j = snap.to_json(cfg_.world);
  j.erase("type");
  j.erase("t");
  log_.write(snap.t, "snapshot", std::move(j));
  pending_cues_.clear();
  if (on_snapshot)
    on_snapshot(snap);
}

void Session::finish_trial(const std::string& reason)
{
  stop_plan("plan_abort", "trial ended");
  TrialResult r;
  r.index = trial_index_;
  r.trial = trial_;
  r.outcomes = classify_outcomes(world_, cfg_.world);
  r.end_time = world_.time;
  r.end_reason = reason;
  r.log_path = log_.path();
  for (BlockId id = 0; id < kBlockCount; ++id)
    log_.write(world_.time, "outcome", ordered_json{{"block", id}, {"outcome", to_string(r.outcomes[id])}});
  log_.write(world_.time, "trial_end", ordered_json{{"reason", reason}, {"success_count", r.success_count()}});
  log_.close();
  results_.push_back(r);
  if (on_trial_end)
    on_trial_end(r);
  if (trial_index_ + 1 < cfg_.trials.size())
    load_trial(trial_index_ + 1);
  else
    lifecycle_ = Lifecycle::Finished;
}

std::optional<TrialResult> Session::step()
{
  std::lock_guard lock(state_mutex_);
  if (lifecycle_ != Lifecycle::Running)
    return std::nullopt;

  std::optional<GestureEvent> event;
  drain_inputs(event);
  const std::uint64_t k = world_.tick_index;
  const bool boundary = frame_of(k + 1) != frame_of(k);

  const TickInputs in = build_inputs(boundary);
  const StepStatus guard_before = ctrl_.guard;
  const ControlCommand cmd =
      step_controller(ctrl_, event, in, cfg_.world.arm, cfg_.control, cfg_.intent);
  if (event)
    log_.write(world_.time, "gesture", ordered_json{{"gesture", to_string(event->gesture)}});
  if (ctrl_.guard != guard_before)
    log_.write(world_.time, "guard", ordered_json{{"status", to_string(ctrl_.guard)}});
  apply_command(cmd);
  if (mode_ == RunMode::Live)
    take_plan_result();
  advance_executor();

  record_world_events(world_tick(world_, cfg_.world));

  const std::string label = mode_label(ctrl_);
  if (label != last_mode_label_)
  {
    log_.write(world_.time, "mode", ordered_json{{"label", label}});
    last_mode_label_ = label;
  }
  if (boundary)
    emit_snapshot();

  if (world_.complete)
  {
    finish_trial("complete");
    return results_.back();
  }
  if (world_.timed_out)
  {
    finish_trial("timeout");
    return results_.back();
  }
  return std::nullopt;
}

TrialResult Session::run_trial(const Trace& trace, const std::function<void(const Session&)>& after_tick)
{
  {
    const Ack a = handle_message(ClientMessage::make_control(ControlAction::Start));
    if (!a.accepted)
      throw std::logic_error("run_trial: " + a.reason);
  }
  std::size_t next = 0;
  while (true)
  {
    const double now = world_.time;
    while (next < trace.size() && trace[next].t <= now + 1e-9)
    {
      const Ack a = handle_message(trace[next].message);
      if (!a.accepted)
        throw std::invalid_argument("trace message at t=" + std::to_string(trace[next].t) + " rejected: " + a.reason);
      ++next;
    }
    if (auto r = step())
      return *r;
    if (after_tick)
      after_tick(*this);
  }
}

std::vector<TrialResult> Session::run_headless(const Trace& trace)
{
  std::vector<TrialResult> out;
  while (lifecycle() == Lifecycle::Idle)
    out.push_back(run_trial(trace));
  return out;
}

}  // namespace prosim
