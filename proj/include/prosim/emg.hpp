#pragma once

#include <Eigen/Core>
#include "json.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace prosim
{

/// The five discrete gestures; declaration order is the tie-break order.
enum class GestureClass : std::uint8_t
{
  HO = 0,  // hand open
  HC,      // hand close
  WF,      // wrist flex
  WE,      // wrist extend
  NM,      // no motion
};

inline constexpr std::size_t kGestureCount = 5;
inline constexpr std::array<GestureClass, kGestureCount> kAllGestures = {
    GestureClass::HO, GestureClass::HC, GestureClass::WF, GestureClass::WE, GestureClass::NM};

const char* to_string(GestureClass g);
std::optional<GestureClass> parse_gesture(std::string_view name);

struct GestureEvent
{
  GestureClass gesture = GestureClass::NM;
  double timestamp = 0.0;

  bool operator==(const GestureEvent&) const = default;
};

// ---------------------------------------------------------------------------
// Signals and windows

/// Multi-channel signal; every channel holds the same number of samples.
struct SignalBuffer
{
  std::vector<std::vector<double>> channels;
  double sample_rate = 1000.0;

  std::size_t channel_count() const { return channels.size(); }
  std::size_t sample_count() const { return channels.empty() ? 0 : channels.front().size(); }
  void validate() const;
};

/// Non-owning view of `length` samples of every channel starting at `start`.
struct SignalWindow
{
  std::vector<std::span<const double>> channels;
  std::size_t start = 0;

  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
};

/// floor((n - window) / increment) + 1, or 0 when window > n.
std::size_t window_count(std::size_t n, std::size_t window, std::size_t increment);

/// Windows at 0, increment, 2·increment, ... that fit entirely inside the buffer.
/// The windows borrow from `buffer`.
std::vector<SignalWindow> slide_windows(const SignalBuffer& buffer, std::size_t window, std::size_t increment);

// ---------------------------------------------------------------------------
// Features

struct FeatureThresholds
{
  double zero_crossing = 0.0;
  double slope_sign_change = 0.0;
};

struct ChannelFeatures
{
  double mav = 0.0;
  std::size_t zc = 0;
  std::size_t ssc = 0;
  double wl = 0.0;
};

inline constexpr std::size_t kFeaturesPerChannel = 4;

/// Layout: [MAV, ZC, SSC, WL] for channel 0, then channel 1, ...
using FeatureVector = Eigen::VectorXd;

ChannelFeatures channel_features(std::span<const double> x, const FeatureThresholds& thresholds = {});
FeatureVector extract_features(const SignalWindow& window, const FeatureThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// LDA

struct LdaModel
{
  std::array<Eigen::VectorXd, kGestureCount> means;
  Eigen::MatrixXd covariance;  // pooled within-class covariance
  Eigen::MatrixXd precision;   // SVD pseudo-inverse of `covariance`
  std::array<double, kGestureCount> priors{};

  Eigen::Index dimension() const { return covariance.rows(); }

  nlohmann::json to_json() const;
  static LdaModel from_json(const nlohmann::json& j);
};

/// Requires every class with at least two samples; throws std::invalid_argument otherwise.
LdaModel train_lda(std::span<const FeatureVector> features, std::span<const GestureClass> labels);

struct Classification
{
  GestureClass gesture = GestureClass::NM;
  std::array<double, kGestureCount> scores{};
};

/// Argmax of the linear discriminants; near-ties go to the lower-ordered class.
Classification classify(const LdaModel& model, const FeatureVector& f);

// ---------------------------------------------------------------------------
// Debouncing

/// Emits a GestureEvent on the N-th identical consecutive classification.
/// Further identical classifications only extend the held state.
class Debouncer
{
public:
  explicit Debouncer(std::size_t required = 3) : required_(required) {}

  std::optional<GestureEvent> push(GestureClass gesture, double timestamp);
  void reset();

  std::optional<GestureClass> held() const { return held_; }

private:
  std::size_t required_;
  std::optional<GestureClass> last_;
  std::size_t run_ = 0;
  std::optional<GestureClass> held_;
};

std::vector<GestureEvent> debounce(std::span<const std::pair<GestureClass, double>> stream, std::size_t required = 3);

// ---------------------------------------------------------------------------
// Sources

/// Per-gesture multi-channel AR(1) noise scaled by a gesture-specific envelope.
class SyntheticEmg
{
public:
  SyntheticEmg(std::size_t channels, std::uint64_t seed, double ar_coefficient = 0.3);

  std::size_t channel_count() const { return envelopes_[0].size(); }
  const std::vector<double>& envelope(GestureClass g) const { return envelopes_[static_cast<std::size_t>(g)]; }

  /// Next sample (one value per channel) for the given gesture.
  std::vector<double> next(GestureClass g);
  SignalBuffer generate(GestureClass g, std::size_t samples, double sample_rate = 1000.0);

private:
  std::array<std::vector<double>, kGestureCount> envelopes_;
  std::vector<double> state_;
  double phi_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct LabeledSignal
{
  SignalBuffer signal;
  std::vector<GestureClass> labels;  // per sample; empty when unlabeled
};

/// Text file: header lines `prosim-emg 1`, `sample_rate R`, `channels C`,
/// `samples N`, `labeled 0|1`; then one label line (if labeled) of N tokens,
/// then C lines of N whitespace-separated values.
LabeledSignal read_emg_file(std::istream& in);
LabeledSignal read_emg_file(const std::string& path);
void write_emg_file(std::ostream& out, const LabeledSignal& data);
void write_emg_file(const std::string& path, const LabeledSignal& data);

/// Synthetic labeled recording: each gesture held for `hold_samples`, sequence repeated.
LabeledSignal synthetic_training_recording(std::size_t channels, std::size_t hold_samples, std::size_t repetitions,
                                           std::uint64_t seed);

/// Window-level training set; each window is labeled by the majority of its samples.
struct TrainingSet
{
  std::vector<FeatureVector> features;
  std::vector<GestureClass> labels;
};

TrainingSet windowed_training_set(const LabeledSignal& data, std::size_t window, std::size_t increment,
                                  const FeatureThresholds& thresholds = {});

struct EmgPipelineConfig
{
  std::size_t window = 100;
  std::size_t increment = 50;
  FeatureThresholds thresholds;
  std::size_t debounce_count = 3;
};

/// Streaming classifier: feed samples one at a time, get a classification per
/// completed window (every `increment` samples once the first window fills).
class EmgClassifierStream
{
public:
  EmgClassifierStream(LdaModel model, std::size_t channels, EmgPipelineConfig config = {});

  std::optional<Classification> push(std::span<const double> sample);
  const EmgPipelineConfig& config() const { return config_; }

private:
  LdaModel model_;
  EmgPipelineConfig config_;
  std::vector<std::deque<double>> history_;
  std::size_t since_last_ = 0;
  std::size_t total_ = 0;
};

struct EmgEvalReport
{
  std::size_t windows = 0;
  std::size_t correct = 0;
  std::array<std::array<std::size_t, kGestureCount>, kGestureCount> confusion{};  // [truth][predicted]
  /// Debounced events, and how many matched the true label at emission time.
  std::size_t debounced_events = 0;
  std::size_t debounced_correct = 0;

  double accuracy() const { return windows == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(windows); }
  nlohmann::json to_json() const;
};

EmgEvalReport evaluate_emg(const LdaModel& model, const LabeledSignal& data, const EmgPipelineConfig& config = {});

}  // namespace prosim
