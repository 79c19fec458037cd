#pragma once

#include "prosim/geometry.hpp"

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace prosim
{

/// Blocks are identified by their position in the prescribed task sequence
/// (Red #1, Blue #1, Red #2, Blue #2 by default).
using BlockId = std::size_t;
inline constexpr std::size_t kBlockCount = 4;

enum class BlockColor
{
  Red,
  Blue,
};

const char* to_string(BlockColor c);

enum class TaskStage
{
  Pick,
  Place,
};

const char* to_string(TaskStage s);

struct TaskContext
{
  std::optional<BlockColor> previous_color;  // empty until the first release
  TaskStage stage = TaskStage::Pick;
};

struct GazeSample
{
  Vector3d origin = Vector3d::Zero();
  Vector3d direction = Vector3d::UnitX();
  double timestamp = 0.0;

  bool valid() const { return origin.allFinite() && direction.allFinite() && std::abs(direction.norm() - 1.0) <= 1e-9; }
};

/// Distance assigned to blocks behind the gaze origin.
inline constexpr double kBehindGaze = std::numeric_limits<double>::infinity();

/// In-plane distance between each block center, centrally projected onto the
/// plane normal to the gaze at `reference_depth`, and the gaze-axis point on it.
std::vector<double> image_plane_distances(const GazeSample& gaze, std::span<const Vector3d> block_centers,
                                          double reference_depth = 1.0);

/// p(a_i | s): one weight per task-sequence slot, conditioned on the colour of
/// the last released block.
struct PriorTable
{
  std::array<double, kBlockCount> after_red{0.125, 0.375, 0.125, 0.375};
  std::array<double, kBlockCount> after_blue{0.375, 0.125, 0.375, 0.125};

  double weight(std::optional<BlockColor> previous, std::size_t slot) const;
};

enum class PriorMode
{
  Uniform,      // gaze only
  TaskContext,  // gaze biased by the colour of the previously released block
};

struct IntentCandidate
{
  BlockId id = 0;
  std::size_t sequence_slot = 0;  // index into the prior table and tie-break rank
  BlockColor color = BlockColor::Red;
};

struct Belief
{
  struct Entry
  {
    BlockId id;
    std::size_t sequence_slot;
    double probability;
  };
  std::vector<Entry> entries;  // ordered by sequence slot
  bool prior_only = false;     // every gaze likelihood vanished

  double probability_of(BlockId id) const;
};

struct IntentParams
{
  double sigma = 0.05;           // m, in the image plane
  double reference_depth = 1.0;  // m
  PriorTable priors;
};

/// belief_i ∝ exp(−x_i²/2σ²)·p(a_i|s) over the remaining candidates.
Belief posterior_belief(std::span<const double> distances, const TaskContext& context,
                        std::span<const IntentCandidate> remaining, double sigma, PriorMode mode,
                        const PriorTable& priors = {});

struct Selection
{
  std::optional<BlockId> block;
  bool locked = false;

  bool operator==(const Selection&) const = default;
};

/// Unlocked: argmax of the belief, ties to the earlier sequence slot. Locked: unchanged.
Selection select_target(const Belief& belief, const Selection& current);

/// Horizontal rectangle (gravity-aligned) in which the place marker may land.
struct PlaneRegion
{
  Vector3d center = Vector3d::Zero();
  Vector3d axis_u = Vector3d::UnitX();  // horizontal, unit
  Vector3d axis_v = Vector3d::UnitY();  // horizontal, unit, ⟂ axis_u
  double half_u = 0.0;
  double half_v = 0.0;

  Vector3d normal() const { return axis_u.cross(axis_v).normalized(); }
  bool contains(const Vector3d& p, double tolerance = 1e-12) const;
};

/// Ray/plane intersection restricted to the region; none when missed or parallel.
std::optional<Vector3d> place_marker_target(const GazeSample& gaze, const PlaneRegion& region);

/// Gaze direction perturbed by an isotropic angular Gaussian (σ per axis, radians).
GazeSample perturb_gaze(const GazeSample& gaze, double sigma_rad, std::mt19937_64& rng);

}  // namespace prosim
