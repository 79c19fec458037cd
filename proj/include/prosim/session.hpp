#pragma once

#include "prosim/config.hpp"
#include "prosim/control.hpp"
#include "prosim/emg.hpp"
#include "prosim/mailbox.hpp"
#include "prosim/planner.hpp"
#include "prosim/protocol.hpp"
#include "prosim/world.hpp"

#include "json.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace prosim
{

enum class Lifecycle
{
  Idle,      // trial loaded, waiting for start
  Running,
  Paused,
  Finished,  // every configured trial is done
};

const char* to_string(Lifecycle l);

enum class RunMode
{
  Headless,  // synchronous planning, as fast as possible
  Live,      // planning on a worker thread, wall-clock paced by the caller
};

struct Ack
{
  bool accepted = true;
  std::string reason;

  static Ack ok() { return {}; }
  static Ack reject(std::string why) { return {false, std::move(why)}; }
};

struct Cue
{
  std::string kind;  // "contact_made" | "contact_lost"
  BlockId block = 0;
  double t = 0.0;
};

/// Immutable copy of everything the operator display needs.
struct Snapshot
{
  double t = 0.0;
  std::size_t trial_index = 0;
  MethodId method = MethodId::D;
  Lifecycle lifecycle = Lifecycle::Idle;
  TaskStage stage = TaskStage::Pick;
  JointVector q = JointVector::Zero();
  HandState hand = HandState::Open;
  RigidTransform shoulder;
  std::array<Vector3d, 4> arm_points;  // shoulder, elbow, wrist, hand (world)
  RigidTransform hand_pose;
  std::array<BlockState, kBlockCount> blocks;
  Selection selection;
  std::vector<Belief::Entry> belief;
  std::optional<Vector3d> marker;
  bool marker_frozen = false;
  std::string mode_label;
  std::string guard;
  std::string plan_status;
  std::vector<Cue> cues;
  double timer_remaining = 0.0;
  std::optional<GazeSample> gaze;

  nlohmann::ordered_json to_json(const WorldConfig& config) const;
};

struct TrialResult
{
  std::size_t index = 0;
  TrialConfig trial;
  std::array<Outcome, kBlockCount> outcomes{};
  std::string log_path;
  double end_time = 0.0;
  std::string end_reason;  // "complete" | "timeout" | "stopped"

  std::size_t success_count() const;
  /// {"type": "trial_end", ...} message for clients and CLI summaries.
  nlohmann::ordered_json to_json() const;
};

/// Append-only JSON-lines writer for one trial; records carry simulated time only.
class TrialLogWriter
{
public:
  TrialLogWriter() = default;
  explicit TrialLogWriter(const std::string& path);

  bool is_open() const { return out_.is_open(); }
  void write(double t, const char* kind, nlohmann::ordered_json payload = nlohmann::ordered_json::object());
  void close();
  const std::string& path() const { return path_; }

private:
  std::ofstream out_;
  std::string path_;
  double last_t_ = 0.0;
};

inline constexpr const char* kLogSchema = "prosim.trial-log";
inline constexpr int kLogVersion = 1;

/// One session owns the world, the controller and the gesture source. Input
/// methods are thread-safe; step() must be called from a single loop thread.
class Session
{
public:
  Session(SessionConfig config, RunMode mode);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionConfig& config() const { return cfg_; }

  // ---- input side (any thread) ----
  Ack handle_message(const ClientMessage& m);
  /// Network layer lost its client: a running trial pauses.
  void client_disconnected();

  // ---- loop side ----
  /// Advances one tick if running. Returns the result when a trial ended on this tick.
  std::optional<TrialResult> step();
  Lifecycle lifecycle() const;
  Snapshot snapshot() const;
  std::size_t trial_index() const;
  const std::vector<TrialResult>& results() const { return results_; }

  /// Called for every 60 Hz snapshot boundary while running.
  std::function<void(const Snapshot&)> on_snapshot;
  /// Called whenever a trial ends, whatever ended it. Runs under the session lock.
  std::function<void(const TrialResult&)> on_trial_end;

  /// Headless driver: runs every configured trial with the same input trace.
  std::vector<TrialResult> run_headless(const Trace& trace);
  /// Headless single trial with an inspection hook called after every tick.
  TrialResult run_trial(const Trace& trace, const std::function<void(const Session&)>& after_tick = {});

  // Read-only views for tests and metrics hooks (loop thread only).
  const WorldState& world() const { return world_; }
  const ControllerState& controller() const { return ctrl_; }
  const TrialConfig& trial() const { return trial_; }
  bool executing() const { return executor_.has_value(); }

  /// World position of the eyes for the current shoulder pose.
  Vector3d eye_position() const;

  /// {"type": "scene", ...}: box frame, targets and block specs, which stay
  /// fixed across the trials of a session. Thread-safe.
  nlohmann::ordered_json scene_json() const;

private:
  struct PlanJob;

  void load_trial(std::size_t index);
  void finish_trial(const std::string& reason);
  void drain_inputs(std::optional<GestureEvent>& event);
  TickInputs build_inputs(bool refresh);
  void apply_command(const ControlCommand& cmd);
  void start_plan(const PlanCommand& cmd);
  void take_plan_result();
  void begin_execution(std::uint64_t id, JointTrajectory t, const PlanStats& stats);
  void stop_plan(const char* record, const std::string& why);
  void advance_executor();
  void record_world_events(const std::vector<WorldEvent>& events);
  void emit_snapshot();
  void write_header();
  nlohmann::ordered_json scene_layout() const;
  nlohmann::ordered_json block_specs() const;
  Snapshot make_snapshot() const;
  PlanRequest plan_request(const PlanCommand& cmd) const;
  std::uint64_t frame_of(std::uint64_t tick) const;

  SessionConfig cfg_;
  RunMode mode_;

  // Inputs from other threads.
  LatestValueMailbox<GestureEvent> gesture_box_;
  LatestValueMailbox<GestureClass> classification_box_;
  LatestValueMailbox<GestureClass> intent_box_;
  LatestValueMailbox<GazeSample> gaze_box_;
  LatestValueMailbox<RigidTransform> shoulder_box_;

  mutable std::recursive_mutex state_mutex_;  // guards everything below against control messages
  Lifecycle lifecycle_ = Lifecycle::Idle;
  std::size_t trial_index_ = 0;
  TrialConfig trial_;
  WorldState world_;
  ControllerState ctrl_;
  std::optional<GazeSample> gaze_;
  std::optional<BlockColor> previous_color_;
  std::string last_mode_label_;
  std::vector<Cue> pending_cues_;
  std::mt19937_64 gaze_rng_;
  TrialLogWriter log_;
  std::vector<TrialResult> results_;

  // Gesture source.
  Debouncer debouncer_;
  std::unique_ptr<EmgClassifierStream> emg_stream_;
  std::unique_ptr<SyntheticEmg> synthetic_;
  std::optional<LabeledSignal> recording_;
  GestureClass intended_ = GestureClass::NM;

  // Planning / execution.
  std::shared_ptr<PlanJob> job_;
  std::jthread worker_;
  std::optional<TrajectoryExecutor> executor_;
  std::uint64_t executing_plan_ = 0;
  std::uint64_t exec_start_tick_ = 0;
};

}  // namespace prosim
