#include "prosim/intent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prosim
{

const char* to_string(BlockColor c) { return c == BlockColor::Red ? "red" : "blue"; }

const char* to_string(TaskStage s) { return s == TaskStage::Pick ? "pick" : "place"; }

std::vector<double> image_plane_distances(const GazeSample& gaze, std::span<const Vector3d> block_centers,
                                          double reference_depth)
{
  if (!gaze.valid())
    throw std::invalid_argument("image_plane_distances: gaze direction must be a unit vector");
  if (!(reference_depth > 0.0))
    throw std::invalid_argument("image_plane_distances: reference depth must be positive");

  std::vector<double> out;
  out.reserve(block_centers.size());
  for (const auto& c : block_centers)
  {
    const Vector3d rel = c - gaze.origin;
    const double depth = rel.dot(gaze.direction);
    if (depth <= 0.0)
    {
      out.push_back(kBehindGaze);
      continue;
    }
    const Vector3d lateral = rel - depth * gaze.direction;
    out.push_back(lateral.norm() * reference_depth / depth);
  }
  return out;
}

double PriorTable::weight(std::optional<BlockColor> previous, std::size_t slot) const
{
  if (!previous)
    return 1.0 / static_cast<double>(kBlockCount);
  return (*previous == BlockColor::Red ? after_red : after_blue).at(slot);
}

double Belief::probability_of(BlockId id) const
{
  for (const auto& e : entries)
    if (e.id == id)
      return e.probability;
  return 0.0;
}

Belief posterior_belief(std::span<const double> distances, const TaskContext& context,
                        std::span<const IntentCandidate> remaining, double sigma, PriorMode mode,
                        const PriorTable& priors)
{
  if (!(sigma > 0.0))
    throw std::invalid_argument("posterior_belief: sigma must be positive");
  if (distances.size() != remaining.size())
    throw std::invalid_argument("posterior_belief: one distance per remaining block required");

  std::vector<std::size_t> order(remaining.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remaining[a].sequence_slot < remaining[b].sequence_slot;
  });

  std::vector<double> prior(remaining.size());
  for (std::size_t i = 0; i < remaining.size(); ++i)
    prior[i] = mode == PriorMode::Uniform ? 1.0 : priors.weight(context.previous_color, remaining[i].sequence_slot);

  // Shift exponents by the smallest distance; the common factor cancels in normalization.
  double x_min = kBehindGaze;
  for (double x : distances)
    x_min = std::min(x_min, x);

  std::vector<double> weight(remaining.size(), 0.0);
  double total = 0.0;
  if (std::isfinite(x_min))
  {
    const double two_sigma_sq = 2.0 * sigma * sigma;
    for (std::size_t i = 0; i < remaining.size(); ++i)
    {
      const double x = distances[i];
      const double likelihood = std::isfinite(x) ? std::exp(-(x * x - x_min * x_min) / two_sigma_sq) : 0.0;
      weight[i] = likelihood * prior[i];
      total += weight[i];
    }
  }

  Belief belief;
  if (!(total > 0.0) || !std::isfinite(total))
  {
    belief.prior_only = true;
    weight = prior;
    total = 0.0;
    for (double w : weight)
      total += w;
  }
  for (std::size_t i : order)
    belief.entries.push_back({remaining[i].id, remaining[i].sequence_slot, total > 0.0 ? weight[i] / total : 0.0});
  return belief;
}

Selection select_target(const Belief& belief, const Selection& current)
{
  if (current.locked)
    return current;
  Selection out;
  if (belief.entries.empty())
    return out;
  const Belief::Entry* best = &belief.entries.front();
  for (const auto& e : belief.entries)
  {
    // Entries are in sequence order, so near-ties resolve to the earlier slot.
    if (e.probability > best->probability * (1.0 + 1e-12) + 1e-300)
      best = &e;
  }
  out.block = best->id;
  return out;
}

bool PlaneRegion::contains(const Vector3d& p, double tolerance) const
{
  const Vector3d rel = p - center;
  return std::abs(rel.dot(axis_u)) <= half_u + tolerance && std::abs(rel.dot(axis_v)) <= half_v + tolerance;
}

std::optional<Vector3d> place_marker_target(const GazeSample& gaze, const PlaneRegion& region)
{
  if (!gaze.valid())
    return std::nullopt;
  const Vector3d n = region.normal();
  const double denom = gaze.direction.dot(n);
  if (std::abs(denom) < 1e-12)
    return std::nullopt;
  const double t = (region.center - gaze.origin).dot(n) / denom;
  if (t <= 0.0)
    return std::nullopt;
  const Vector3d hit = gaze.origin + t * gaze.direction;
  if (!region.contains(hit))
    return std::nullopt;
  return hit;
}

GazeSample perturb_gaze(const GazeSample& gaze, double sigma_rad, std::mt19937_64& rng)
{
  std::normal_distribution<double> normal(0.0, sigma_rad);
  const Vector3d d = gaze.direction;
  const Vector3d helper = std::abs(d.z()) < 0.9 ? Vector3d::UnitZ() : Vector3d::UnitX();
  const Vector3d e1 = d.cross(helper).normalized();
  const Vector3d e2 = d.cross(e1);
  const double a = normal(rng);
  const double b = normal(rng);
  GazeSample out = gaze;
  // Rotate by the combined small angle about the axis ⟂ to the gaze.
  const Vector3d axis_vec = a * e2 - b * e1;
  const double angle = axis_vec.norm();
  if (angle > 0.0)
    out.direction = (Eigen::AngleAxisd(angle, axis_vec / angle) * d).normalized();
  return out;
}

}  // namespace prosim
