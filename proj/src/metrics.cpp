#include "prosim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace prosim
{

using nlohmann::json;
using nlohmann::ordered_json;

namespace
{

Vector3d v3(const json& j) { return Vector3d(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

Quaterniond quat(const json& j)
{
  return Quaterniond(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>());
}

bool is(const json& r, const char* kind) { return r.at("kind") == kind; }

bool of_block(const json& r, BlockId id) { return r.contains("block") && r.at("block") == id; }

double t_of(const json& r) { return r.at("t").get<double>(); }

/// Well conditioned for small steps, unlike 2·acos(w).
double step_angle(const Quaterniond& a, const Quaterniond& b)
{
  const Quaterniond d = a.conjugate() * b;
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

struct Grasp
{
  double attach = 0.0;
  double release = std::numeric_limits<double>::infinity();  // open until released
  bool crossed = false;
  std::optional<double> target_entry;
};

std::vector<Grasp> grasps_of(const TrialLog& log, BlockId id)
{
  std::vector<Grasp> out;
  for (const auto& r : log.records)
  {
    if (!of_block(r, id))
      continue;
    if (is(r, "attach"))
      out.push_back({t_of(r)});
    else if (out.empty())
      continue;
    else if (is(r, "detach") && !std::isfinite(out.back().release))
      out.back().release = t_of(r);
    else if (is(r, "crossing") && r.at("direction") == 1 && !std::isfinite(out.back().release))
      out.back().crossed = true;
    else if (is(r, "target_enter") && !std::isfinite(out.back().release) && !out.back().target_entry)
      out.back().target_entry = t_of(r);
  }
  return out;
}

std::optional<double> first_crossing(const TrialLog& log, BlockId id)
{
  for (const auto& r : log.records)
    if (is(r, "crossing") && of_block(r, id) && r.at("direction") == 1)
      return t_of(r);
  return std::nullopt;
}

/// Ray entry parameter into a sphere, or +inf.
double ray_sphere(const Vector3d& o, const Vector3d& d, const Vector3d& c, double r)
{
  const Vector3d oc = o - c;
  const double b = oc.dot(d);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0.0)
    return std::numeric_limits<double>::infinity();
  const double s = std::sqrt(disc);
  const double t = -b - s;
  if (t >= 0.0)
    return t;
  return -b + s >= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Closest approach of the ray to segment ab; a hit when the gap is within r.
double ray_capsule(const Vector3d& o, const Vector3d& d, const Vector3d& a, const Vector3d& b, double r)
{
  const Vector3d u = b - a;
  const double uu = u.squaredNorm();
  if (uu < 1e-18)
    return ray_sphere(o, d, a, r);
  double best = std::numeric_limits<double>::infinity();
  // closest points of the line pair, then clamped to t ≥ 0 and s ∈ [0, 1]
  const Vector3d w = o - a;
  const double du = d.dot(u);
  const double denom = uu - du * du;
  double s = denom > 1e-12 ? std::clamp((w.dot(u) - du * d.dot(w)) / denom, 0.0, 1.0) : 0.0;
  double t = std::max(0.0, (a + s * u - o).dot(d));
  s = std::clamp((o + t * d - a).dot(u) / uu, 0.0, 1.0);
  t = std::max(0.0, (a + s * u - o).dot(d));
  const double gap = (o + t * d - (a + s * u)).norm();
  if (gap <= r)
    best = std::max(0.0, t - std::sqrt(r * r - gap * gap));
  return best;
}

double ray_disc(const Vector3d& o, const Vector3d& d, const Vector3d& c, double r)
{
  if (std::abs(d.z()) < 1e-12)
    return std::numeric_limits<double>::infinity();
  const double t = (c.z() - o.z()) / d.z();
  if (t < 0.0)
    return std::numeric_limits<double>::infinity();
  const Vector3d p = o + t * d;
  return std::hypot(p.x() - c.x(), p.y() - c.y()) <= r ? t : std::numeric_limits<double>::infinity();
}

}  // namespace

// ---------------------------------------------------------------------------

TrialLog TrialLog::parse(std::istream& in)
{
  TrialLog log;
  std::string line;
  double last = 0.0;
  std::size_t n = 0;
  while (std::getline(in, line))
  {
    ++n;
    if (line.empty())
      continue;
    json r = json::parse(line);
    if (!r.is_object() || !r.contains("t") || !r.contains("kind"))
      throw std::invalid_argument("log line " + std::to_string(n) + ": missing t or kind");
    const double t = t_of(r);
    if (t < last)
      throw std::invalid_argument("log line " + std::to_string(n) + ": time went backwards");
    last = t;
    if (log.header.is_null())
    {
      if (!is(r, "header") || r.value("schema", "") != std::string("prosim.trial-log"))
        throw std::invalid_argument("log does not start with a trial-log header");
      if (r.value("version", 0) != 1)
        throw std::invalid_argument("unsupported trial-log version");
      log.header = std::move(r);
    }
    else
      log.records.push_back(std::move(r));
  }
  if (log.header.is_null())
    throw std::invalid_argument("empty trial log");
  return log;
}

TrialLog TrialLog::read(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open log " + path);
  try
  {
    return parse(in);
  }
  catch (const std::exception& e)
  {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

MethodId TrialLog::method() const
{
  const auto m = parse_method(header.at("trial").at("method").get<std::string>());
  if (!m)
    throw std::invalid_argument("log header has an unknown method");
  return *m;
}

std::optional<int> TrialLog::success_count() const
{
  if (!records.empty() && is(records.back(), "trial_end") && records.back().contains("success_count"))
    return records.back().at("success_count").get<int>();
  return std::nullopt;
}

double TrialLog::end_time() const { return records.empty() ? 0.0 : t_of(records.back()); }

Vector3d TrialLog::target(BlockId id) const { return v3(header.at("blocks").at(id).at("target")); }

// ---------------------------------------------------------------------------

std::optional<double> pick_duration(const TrialLog& log, BlockId block)
{
  const auto grasps = grasps_of(log, block);
  const bool stable = std::any_of(grasps.begin(), grasps.end(), [](const Grasp& g) { return g.crossed; });
  if (!stable)
    return std::nullopt;
  const double attach = grasps.front().attach;
  double start = 0.0;
  for (const auto& r : log.records)
  {
    if (t_of(r) > attach)
      break;
    if (is(r, "detach") && !of_block(r, block))
      start = t_of(r);
  }
  return attach - start;
}

std::optional<double> place_duration(const TrialLog& log, BlockId block)
{
  for (const auto& g : grasps_of(log, block))
    if (g.crossed && g.target_entry && std::isfinite(g.release) && *g.target_entry <= g.release)
      return g.release - g.attach;
  return std::nullopt;
}

std::optional<double> placement_accuracy(const TrialLog& log, BlockId block)
{
  const auto crossed = first_crossing(log, block);
  if (!crossed)
    return std::nullopt;
  const Vector3d target = log.target(block);
  std::optional<double> best;
  for (const auto& r : log.records)
  {
    if (!is(r, "snapshot") || t_of(r) < *crossed)
      continue;
    const Vector3d p = v3(r.at("blocks").at(block).at("position"));
    const double d = std::hypot(p.x() - target.x(), p.y() - target.y());
    if (!best || d < *best)
      best = d;
  }
  return best;
}

bool annotate_method_usage(const TrialLog& log, double t0, double t1, double threshold)
{
  double total = 0.0;
  std::optional<std::vector<double>> prev;
  for (const auto& r : log.records)
  {
    if (!is(r, "snapshot"))
      continue;
    const double t = t_of(r);
    if (t < t0)
      continue;
    if (t > t1)
      break;
    const auto q = r.at("q").get<std::vector<double>>();
    if (prev)
      for (std::size_t j = 0; j < q.size(); ++j)
        total += std::abs(q[j] - (*prev)[j]);
    prev = q;
  }
  return total > threshold;
}

std::vector<TransferMetrics> transfer_metrics(const TrialLog& log)
{
  std::vector<TransferMetrics> out;
  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    TransferMetrics m;
    m.block = id;
    m.pick_duration = pick_duration(log, id);
    m.place_duration = place_duration(log, id);
    m.min_target_distance = placement_accuracy(log, id);
    const auto grasps = grasps_of(log, id);
    if (m.pick_duration)
    {
      const double attach = grasps.front().attach;
      m.used_method_pick = annotate_method_usage(log, attach - *m.pick_duration, attach);
    }
    if (m.place_duration)
      for (const auto& g : grasps)
        if (g.crossed && g.target_entry && std::isfinite(g.release))
        {
          m.used_method_place = annotate_method_usage(log, g.attach, g.release);
          break;
        }
    out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<PoseSample> resample(const std::vector<PoseSample>& stream, double rate)
{
  if (stream.size() < 2 || !(rate > 0.0))
    return stream;
  std::vector<PoseSample> out;
  const double t0 = stream.front().t;
  const double t1 = stream.back().t;
  std::size_t seg = 0;
  for (std::size_t k = 0;; ++k)
  {
    const double t = t0 + static_cast<double>(k) / rate;
    if (t > t1 + 1e-9)
      break;
    while (seg + 2 < stream.size() && stream[seg + 1].t < t)
      ++seg;
    const auto& a = stream[seg];
    const auto& b = stream[seg + 1];
    const double span = b.t - a.t;
    const double u = span > 0.0 ? std::clamp((t - a.t) / span, 0.0, 1.0) : 1.0;
    PoseSample s;
    s.t = t;
    s.pose.translation = a.pose.translation + u * (b.pose.translation - a.pose.translation);
    s.pose.rotation = a.pose.rotation.slerp(u, b.pose.rotation);
    out.push_back(s);
  }
  if (out.back().t < t1 - 1e-9)
    out.push_back({t1, stream.back().pose});
  return out;
}

CompensationSummary compensatory_motion(const std::vector<PoseSample>& stream)
{
  CompensationSummary c;
  for (std::size_t i = 1; i < stream.size(); ++i)
  {
    c.translation += (stream[i].pose.translation - stream[i - 1].pose.translation).norm();
    c.rotation += step_angle(stream[i - 1].pose.rotation, stream[i].pose.rotation);
  }
  return c;
}

std::vector<PoseSample> shoulder_stream(const TrialLog& log, double t0, double t1, double rate)
{
  std::vector<PoseSample> raw;
  for (const auto& r : log.records)
  {
    if (!is(r, "snapshot"))
      continue;
    const double t = t_of(r);
    if (t < t0 || t > t1)
      continue;
    const auto& s = r.at("shoulder");
    raw.push_back({t, RigidTransform{quat(s.at("orientation")), v3(s.at("position"))}});
  }
  return resample(raw, rate);
}

// ---------------------------------------------------------------------------

const char* to_string(GazeRegion r)
{
  switch (r)
  {
    case GazeRegion::Arm: return "arm";
    case GazeRegion::Hand: return "hand";
    case GazeRegion::Targets: return "targets";
    case GazeRegion::Other: return "other";
  }
  return "?";
}

GazeRegion classify_gaze(const Vector3d& origin, const Vector3d& direction, const GazeGeometry& g)
{
  const Vector3d d = direction.normalized();
  double best = std::numeric_limits<double>::infinity();
  GazeRegion region = GazeRegion::Other;
  const auto consider = [&](double t, GazeRegion r) {
    if (t < best)
    {
      best = t;
      region = r;
    }
  };
  consider(ray_sphere(origin, d, g.hand, g.hand_radius), GazeRegion::Hand);
  for (std::size_t i = 0; i + 1 < g.arm_points.size(); ++i)
    consider(ray_capsule(origin, d, g.arm_points[i], g.arm_points[i + 1], g.link_radius), GazeRegion::Arm);
  consider(ray_sphere(origin, d, g.mode_display, g.display_radius), GazeRegion::Arm);
  for (const auto& c : g.targets)
    consider(ray_disc(origin, d, c, g.target_radius), GazeRegion::Targets);
  return region;
}

GazeAttention gaze_attention(const TrialLog& log, double t0, double t1)
{
  GazeGeometry g;
  for (BlockId id = 0; id < kBlockCount; ++id)
  {
    Vector3d c = log.target(id);
    g.targets.push_back(c);
  }
  g.target_radius = log.header.at("scene").at("target_radius").get<double>();
  const Vector3d display_offset = v3(log.header.at("mode_display_offset"));

  struct Sample
  {
    double t;
    GazeRegion region;
  };
  std::vector<Sample> samples;
  for (const auto& r : log.records)
  {
    if (!is(r, "snapshot") || r.at("gaze").is_null())
      continue;
    const double t = t_of(r);
    if (t < t0 || t >= t1)
      continue;
    const auto& arm = r.at("arm");
    for (std::size_t i = 0; i < 4; ++i)
      g.arm_points[i] = v3(arm.at(i));
    g.hand = v3(r.at("hand_pose").at("position"));
    g.mode_display = g.arm_points[2] + display_offset;
    samples.push_back({t, classify_gaze(v3(r.at("gaze").at("origin")), v3(r.at("gaze").at("direction")), g)});
  }

  GazeAttention a;
  if (samples.empty())
    return a;
  a.has_samples = true;
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
  {
    const double end = i + 1 < samples.size() ? samples[i + 1].t : t1;
    const double w = std::max(0.0, end - samples[i].t);
    total += w;
    switch (samples[i].region)
    {
      case GazeRegion::Arm: a.arm += w; break;
      case GazeRegion::Hand: a.hand += w; break;
      case GazeRegion::Targets: a.targets += w; break;
      case GazeRegion::Other: a.other += w; break;
    }
  }
  if (total > 0.0)
  {
    a.arm /= total;
    a.hand /= total;
    a.targets /= total;
    a.other /= total;
  }
  return a;
}

// ---------------------------------------------------------------------------

std::vector<SuccessStats> aggregate_success(const std::vector<TrialCount>& trials)
{
  std::map<MethodId, std::vector<int>> by;
  for (const auto& t : trials)
  {
    if (t.success_count < 0 || t.success_count > static_cast<int>(kBlockCount))
      throw std::invalid_argument("success count must be within 0..4");
    by[t.method].push_back(t.success_count);
  }
  std::vector<SuccessStats> out;
  for (auto& [method, counts] : by)
  {
    std::sort(counts.begin(), counts.end());
    SuccessStats s;
    s.method = method;
    s.trials = counts.size();
    const double n = static_cast<double>(counts.size());
    double sum = 0.0;
    for (int c : counts)
      sum += c;
    s.mean = sum / n;
    double ss = 0.0;
    for (int c : counts)
      ss += (c - s.mean) * (c - s.mean);
    s.std_population = std::sqrt(ss / n);
    s.std_sample = counts.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.min = counts.front();
    s.max = counts.back();
    const std::size_t mid = counts.size() / 2;
    s.median = counts.size() % 2 ? counts[mid] : 0.5 * (counts[mid - 1] + counts[mid]);
    out.push_back(s);
  }
  return out;
}

ordered_json aggregate_logs(const std::string& dir)
{
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());

  ordered_json trials = ordered_json::array();
  std::vector<TrialCount> counts;
  for (const auto& f : files)
  {
    const TrialLog log = TrialLog::read(f.string());
    const auto success = log.success_count();
    if (!success)
      continue;
    const double end = log.end_time();
    ordered_json t;
    t["log"] = f.filename().string();
    t["trial_index"] = log.header.at("trial_index");
    t["method"] = to_string(log.method());
    t["success_count"] = *success;
    t["end_time"] = end;
    ordered_json transfers = ordered_json::array();
    for (const auto& m : transfer_metrics(log))
    {
      ordered_json x;
      x["block"] = m.block;
      x["pick_duration"] = m.pick_duration ? ordered_json(*m.pick_duration) : ordered_json(nullptr);
      x["place_duration"] = m.place_duration ? ordered_json(*m.place_duration) : ordered_json(nullptr);
      x["min_target_distance"] =
          m.min_target_distance ? ordered_json(*m.min_target_distance) : ordered_json(nullptr);
      x["used_method_pick"] = m.used_method_pick;
      x["used_method_place"] = m.used_method_place;
      transfers.push_back(x);
    }
    t["transfers"] = transfers;
    const auto comp = compensatory_motion(shoulder_stream(log, 0.0, end));
    t["compensation"] = {{"translation", comp.translation}, {"rotation", comp.rotation}};
    const auto gaze = gaze_attention(log, 0.0, end);
    t["gaze_attention"] = {{"arm", gaze.arm},
                           {"hand", gaze.hand},
                           {"targets", gaze.targets},
                           {"other", gaze.other},
                           {"has_samples", gaze.has_samples}};
    trials.push_back(t);
    counts.push_back({log.method(), *success});
  }

  ordered_json methods = ordered_json::array();
  for (const auto& s : aggregate_success(counts))
  {
    ordered_json m;
    m["method"] = to_string(s.method);
    m["trials"] = s.trials;
    m["mean"] = s.mean;
    m["std"] = s.std_sample;
    m["std_population"] = s.std_population;
    m["min"] = s.min;
    m["max"] = s.max;
    m["median"] = s.median;
    methods.push_back(m);
  }
  ordered_json out;
  out["std_convention"] = "std: sample (n - 1); std_population: n";
  out["methods"] = methods;
  out["trials"] = trials;
  return out;
}

}  // namespace prosim
