#pragma once

#include "prosim/geometry.hpp"
#include "prosim/world.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace prosim
{

/// One parsed trial log: the header record plus every later record in order.
struct TrialLog
{
  nlohmann::json header;
  std::vector<nlohmann::json> records;

  static TrialLog parse(std::istream& in);
  static TrialLog read(const std::string& path);

  MethodId method() const;
  /// Success count from the closing trial_end record (nullopt for an unfinished log).
  std::optional<int> success_count() const;
  double end_time() const;
  Vector3d target(BlockId id) const;
};

struct TransferMetrics
{
  BlockId block = 0;
  std::optional<double> pick_duration;
  std::optional<double> place_duration;
  std::optional<double> min_target_distance;
  bool used_method_pick = false;
  bool used_method_place = false;

  bool operator==(const TransferMetrics&) const = default;
};

/// Trial start (or the previous release of another block) to the first grasp
/// of a block that later crosses the partition.
std::optional<double> pick_duration(const TrialLog& log, BlockId block);

/// Grasp to release for the first grasp during which the block crossed and
/// entered its target before release.
std::optional<double> place_duration(const TrialLog& log, BlockId block);

/// Smallest horizontal distance between block center and target over
/// snapshots taken after the first crossing.
std::optional<double> placement_accuracy(const TrialLog& log, BlockId block);

/// True when the arm joints moved more than `threshold` rad (summed L1 over
/// consecutive snapshot pairs) inside [t0, t1].
bool annotate_method_usage(const TrialLog& log, double t0, double t1, double threshold = 0.02);

std::vector<TransferMetrics> transfer_metrics(const TrialLog& log);

struct PoseSample
{
  double t = 0.0;
  RigidTransform pose;
};

struct CompensationSummary
{
  double translation = 0.0;  // m, path length
  double rotation = 0.0;     // rad, summed per-step angles
};

/// Uniform resampling with linear / spherical interpolation from the first
/// sample; the last sample is always kept, so the path end is never cut off.
std::vector<PoseSample> resample(const std::vector<PoseSample>& stream, double rate);

/// Path length and summed step angles of an already uniform stream.
CompensationSummary compensatory_motion(const std::vector<PoseSample>& stream);

/// Shoulder poses from the snapshots of a log inside [t0, t1], resampled at `rate`.
std::vector<PoseSample> shoulder_stream(const TrialLog& log, double t0, double t1, double rate = 10.0);

enum class GazeRegion
{
  Arm,  // links and mode display
  Hand,
  Targets,
  Other,
};

const char* to_string(GazeRegion r);

struct GazeGeometry
{
  std::array<Vector3d, 4> arm_points;  // shoulder, elbow, wrist, hand
  Vector3d hand = Vector3d::Zero();
  Vector3d mode_display = Vector3d::Zero();
  std::vector<Vector3d> targets;  // disc centers on a horizontal plane
  double target_radius = 0.05;
  double hand_radius = 0.08;
  double link_radius = 0.05;
  double display_radius = 0.05;
};

/// Region of the nearest hit along the ray.
GazeRegion classify_gaze(const Vector3d& origin, const Vector3d& direction, const GazeGeometry& g);

struct GazeAttention
{
  double arm = 0.0;
  double hand = 0.0;
  double targets = 0.0;
  double other = 0.0;
  bool has_samples = false;
};

/// Time-weighted shares of gaze samples (from snapshots) in [t0, t1].
GazeAttention gaze_attention(const TrialLog& log, double t0, double t1);

struct SuccessStats
{
  MethodId method = MethodId::A;
  std::size_t trials = 0;
  double mean = 0.0;
  double std_sample = 0.0;      // n − 1 denominator
  double std_population = 0.0;  // n denominator
  int min = 0;
  int max = 0;
  double median = 0.0;
};

struct TrialCount
{
  MethodId method = MethodId::A;
  int success_count = 0;
};

/// Per-method statistics in A, B, C, D order; methods without trials are omitted.
std::vector<SuccessStats> aggregate_success(const std::vector<TrialCount>& trials);

/// Reads every finished trial log in `dir` and reports per-trial and per-method results.
nlohmann::ordered_json aggregate_logs(const std::string& dir);

}  // namespace prosim
