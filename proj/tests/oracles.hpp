#pragma once

// Independent reference computations used only by the tests.

#include "prosim/emg.hpp"
#include "prosim/kinematics.hpp"
#include "prosim/metrics.hpp"
#include "prosim/session.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace oracle
{

/// Columns by central differences of FK: position directly, orientation via
/// the rotation vector of R(q+h)·R(q−h)ᵀ.
inline prosim::Jacobian finite_difference_jacobian(const prosim::ArmGeometry& g, const prosim::JointVector& q,
                                                   double h)
{
  prosim::Jacobian j;
  for (std::size_t i = 0; i < prosim::kArmDof; ++i)
  {
    prosim::JointVector a = q;
    prosim::JointVector b = q;
    a[i] += h;
    b[i] -= h;
    const auto pa = prosim::forward_kinematics_unchecked(g, a).end_effector;
    const auto pb = prosim::forward_kinematics_unchecked(g, b).end_effector;
    j.block<3, 1>(0, i) = (pa.translation - pb.translation) / (2.0 * h);
    const Eigen::AngleAxisd d(pa.rotation * pb.rotation.conjugate());
    j.block<3, 1>(3, i) = d.axis() * d.angle() / (2.0 * h);
  }
  return j;
}

template <typename A, typename B>
double relative_error(const A& a, const B& b)
{
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Fully normalized Bayes rule: p(a|g,s) = p(g|a)·p(a|s) / p(g|s), with the
/// likelihood carrying its 1/(2πσ²) factor and a uniform 1/m state term.
inline std::vector<double> brute_force_posterior(const std::vector<double>& x, const std::vector<double>& prior,
                                                 double sigma, double m_states)
{
  std::vector<double> joint(x.size());
  double evidence = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    const double lik = std::exp(-x[i] * x[i] / (2 * sigma * sigma)) / (2 * M_PI * sigma * sigma);
    joint[i] = lik * prior[i] / m_states;
    evidence += joint[i];
  }
  for (auto& j : joint)
    j /= evidence;
  return joint;
}

/// Unnormalized score exp(−x²/2σ²)·p(a|s), without p(g|s) or 1/m.
inline std::vector<double> raw_scores(const std::vector<double>& x, const std::vector<double>& prior, double sigma)
{
  std::vector<double> s(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    s[i] = std::exp(-x[i] * x[i] / (2 * sigma * sigma)) * prior[i];
  return s;
}

inline std::size_t argmax_first(const std::vector<double>& v)
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best])
      best = i;
  return best;
}

// Plain transcriptions of the feature definitions, kept separate from the library.
struct NaiveFeatures
{
  double mav, zc, ssc, wl;
};

inline NaiveFeatures naive_features(const std::vector<double>& x, double zc_t, double ssc_t)
{
  NaiveFeatures f{0, 0, 0, 0};
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    f.mav += std::fabs(x[i]);
  f.mav /= static_cast<double>(n);
  for (std::size_t i = 0; i + 1 < n; ++i)
  {
    if (x[i] * x[i + 1] < 0 && std::fabs(x[i] - x[i + 1]) >= zc_t)
      f.zc += 1;
    f.wl += std::fabs(x[i + 1] - x[i]);
  }
  for (std::size_t i = 1; i + 1 < n; ++i)
  {
    const double a = x[i] - x[i - 1];
    const double b = x[i] - x[i + 1];
    if (a * b > 0 && (std::fabs(a) >= ssc_t || std::fabs(b) >= ssc_t))
      f.ssc += 1;
  }
  return f;
}

inline std::size_t windows_by_stepping(std::size_t n, std::size_t w, std::size_t inc)
{
  std::size_t count = 0;
  for (std::size_t start = 0; start + w <= n; start += inc)
    ++count;
  return count;
}

/// Event list with a run of three identical symbols marking each emission.
inline std::vector<prosim::GestureEvent> debounce_by_runs(const std::vector<std::pair<prosim::GestureClass, double>>& in)
{
  std::vector<prosim::GestureEvent> expected;
  std::size_t run = 0;
  for (std::size_t i = 0; i < in.size(); ++i)
  {
    run = (i > 0 && in[i].first == in[i - 1].first) ? run + 1 : 1;
    if (run == 3)
      expected.push_back({in[i].first, in[i].second});
  }
  return expected;
}

/// Five isotropic Gaussian clusters whose means are 10σ apart.
inline void separated_clusters(std::size_t per_class, std::size_t dim, std::uint64_t seed,
                               std::vector<prosim::FeatureVector>& f, std::vector<prosim::GestureClass>& y)
{
  using prosim::FeatureVector;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const double sigma = 0.3;
  for (std::size_t c = 0; c < prosim::kGestureCount; ++c)
  {
    FeatureVector mean = FeatureVector::Zero(static_cast<Eigen::Index>(dim));
    mean[static_cast<Eigen::Index>(c % dim)] = 10.0 * sigma / std::sqrt(2.0);
    if (c >= dim)
      mean[static_cast<Eigen::Index>((c + 1) % dim)] = 10.0 * sigma / std::sqrt(2.0);
    for (std::size_t k = 0; k < per_class; ++k)
    {
      FeatureVector v(static_cast<Eigen::Index>(dim));
      for (Eigen::Index d = 0; d < v.size(); ++d)
        v[d] = mean[d] + sigma * n(rng);
      f.push_back(v);
      y.push_back(prosim::kAllGestures[c]);
    }
  }
}

inline nlohmann::json log_header(prosim::MethodId method = prosim::MethodId::D)
{
  nlohmann::json blocks = nlohmann::json::array();
  for (prosim::BlockId id = 0; id < prosim::kBlockCount; ++id)
    blocks.push_back({{"id", id}, {"target", {0.1 * id, 0.1, 0.0}}});
  return {{"t", 0.0},
          {"kind", "header"},
          {"schema", prosim::kLogSchema},
          {"version", prosim::kLogVersion},
          {"trial_index", 0},
          {"trial", {{"method", prosim::to_string(method)}}},
          {"mode_display_offset", {0.0, 0.0, 0.1}},
          {"scene", {{"target_radius", 0.05}}},
          {"blocks", blocks}};
}

/// Builder for hand-written event logs.
struct LogBuilder
{
  prosim::TrialLog log;

  LogBuilder() { log.header = log_header(); }

  LogBuilder& ev(double t, const char* kind, prosim::BlockId block, int direction = 0)
  {
    nlohmann::json r{{"t", t}, {"kind", kind}, {"block", block}};
    if (std::string(kind) == "crossing")
      r["direction"] = direction;
    log.records.push_back(r);
    return *this;
  }
  LogBuilder& grab(double t, prosim::BlockId b) { return ev(t, "attach", b); }
  LogBuilder& drop(double t, prosim::BlockId b) { return ev(t, "detach", b); }
  LogBuilder& cross(double t, prosim::BlockId b, int dir = 1) { return ev(t, "crossing", b, dir); }
  LogBuilder& enter(double t, prosim::BlockId b) { return ev(t, "target_enter", b); }
  LogBuilder& exit(double t, prosim::BlockId b) { return ev(t, "target_exit", b); }
};

/// Three trials of four transfers each, with durations worked out by hand.
struct TwelveTransfers
{
  using O = std::optional<double>;
  std::array<prosim::TrialLog, 3> logs;
  std::array<std::array<O, 4>, 3> pick{{{O(12), O(6), O(9), O(8)}, {O(), O(), O(4), O(4)}, {O(3), O(5), O(2), O(8)}}};
  std::array<std::array<O, 4>, 3> place{{{O(7), O(6), O(7), O()}, {O(), O(), O(6), O(4)}, {O(), O(3), O(2), O()}}};
  std::size_t included_pick = 10;
  std::size_t included_place = 7;

  TwelveTransfers()
  {
    LogBuilder one;
    one.grab(12, 0).cross(14, 0).enter(18, 0).drop(19, 0);                    // pick 12, place 7
    one.grab(25, 1).cross(27, 1).enter(30, 1).drop(31, 1);                    // pick 6, place 6
    one.grab(40, 2).drop(41, 2).grab(45, 2).cross(47, 2).enter(50, 2).drop(52, 2);  // regrasp: pick 9 to the first grasp, place 7
    one.grab(60, 3).cross(62, 3).drop(63, 3);                                 // released before target entry: place excluded

    LogBuilder two;
    two.grab(5, 1).drop(6, 1);                                                // never crosses: both excluded
    two.grab(10, 2).cross(12, 2).enter(14, 2).exit(15, 2).drop(16, 2);        // pick 4, place 6
    two.grab(20, 3).cross(22, 3).cross(23, 3, -1).drop(24, 3);                // crossed back and dropped
    two.grab(30, 3).cross(31, 3).enter(33, 3).drop(34, 3);                    // pick 20 - 16 = 4, place 4
    // block 0 is never touched in trial two

    LogBuilder three;
    three.grab(3, 0).cross(5, 0).drop(6, 0).grab(8, 0).enter(9, 0).drop(10, 0);  // crossing only in the earlier grasp
    three.grab(15, 1).cross(16, 1).enter(17, 1).drop(18, 1);                 // pick 15 - 10 = 5, place 3
    three.grab(20, 2).cross(21, 2).enter(22, 2).drop(22, 2);                 // entry and release together: place 2
    three.grab(30, 3).cross(31, 3);                                          // still held at the end: place excluded

    logs = {one.log, two.log, three.log};
  }
};

/// Quarter turn about one axis in `steps` equal increments, 0.1 s apart.
inline std::vector<prosim::PoseSample> quarter_turn(std::size_t steps)
{
  std::vector<prosim::PoseSample> s;
  for (std::size_t i = 0; i <= steps; ++i)
  {
    const double a = 0.5 * M_PI * static_cast<double>(i) / static_cast<double>(steps);
    s.push_back({0.1 * static_cast<double>(i),
                 prosim::RigidTransform{prosim::Quaterniond(Eigen::AngleAxisd(a, prosim::Vector3d::UnitZ())),
                                        prosim::Vector3d::Zero()}});
  }
  return s;
}

/// Success counts shaped like the reported context-method row: 17 fours, 6 threes, 1 two.
inline std::vector<int> context_row_counts()
{
  std::vector<int> counts(17, 4);
  counts.insert(counts.end(), 6, 3);
  counts.push_back(2);
  return counts;
}

}  // namespace oracle
