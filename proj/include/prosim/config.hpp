#pragma once

#include "prosim/control.hpp"
#include "prosim/emg.hpp"
#include "prosim/intent.hpp"
#include "prosim/planner.hpp"
#include "prosim/world.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace prosim
{

enum class GestureSourceKind
{
  ClientEvents,  // gesture / classification messages from a client or trace
  Synthetic,     // intended gestures drive a synthetic EMG generator + classifier
  EmgFile,       // a recorded EMG file is replayed through the classifier
};

const char* to_string(GestureSourceKind k);

struct GestureSourceConfig
{
  GestureSourceKind kind = GestureSourceKind::ClientEvents;
  std::string path;        // emg-file recording
  std::string model_path;  // optional LDA model; trained on a synthetic recording when empty
  std::size_t channels = 8;
  std::uint64_t seed = 1;
  EmgPipelineConfig pipeline;
};

struct SessionConfig
{
  WorldConfig world;
  ControlParams control;
  IntentParams intent;
  PlannerConfig planner;

  /// Seated, upright right shoulder (arm base) in the world.
  RigidTransform shoulder = RigidTransform::from_translation(Vector3d(0.0, 0.0, 1.2));
  /// Eye position relative to the shoulder frame.
  Vector3d head_offset = Vector3d(0.05, 0.18, 0.30);
  /// Mode text location relative to the wrist, world axes.
  Vector3d mode_display_offset = Vector3d(0.0, 0.0, 0.10);

  std::vector<TrialConfig> trials{TrialConfig{}};
  GestureSourceConfig gesture_source;

  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 8765;
  std::string log_dir = "logs";
  unsigned snapshot_rate = 60;  // Hz

  /// Relative paths in the file are resolved against `base_dir`.
  static SessionConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static SessionConfig load(const std::string& path);
  nlohmann::json to_json() const;

  /// Throws std::invalid_argument describing the first problem.
  void validate() const;
};

nlohmann::json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v);
Vector3d vec3_from(const nlohmann::json& j);
nlohmann::json pose_json(const RigidTransform& t);
RigidTransform pose_from(const nlohmann::json& j);
ArmGeometry arm_from_json(const nlohmann::json& j);
nlohmann::json arm_to_json(const ArmGeometry& g);

}  // namespace prosim
