#include "prosim/emg.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace prosim
{

namespace
{

constexpr std::array<const char*, kGestureCount> kGestureNames = {"HO", "HC", "WF", "WE", "NM"};

std::size_t index_of(GestureClass g) { return static_cast<std::size_t>(g); }

/// Symmetric pseudo-inverse; singular values below 1e-9·σ_max are dropped.
Eigen::MatrixXd svd_pseudo_inverse(const Eigen::MatrixXd& m)
{
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  if (s.size() > 0 && s(0) > 0.0)
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > 1e-9 * s(0))
        inv(i) = 1.0 / s(i);
  const Eigen::MatrixXd p = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return 0.5 * (p + p.transpose());
}

}  // namespace

const char* to_string(GestureClass g) { return kGestureNames.at(index_of(g)); }

std::optional<GestureClass> parse_gesture(std::string_view name)
{
  for (std::size_t i = 0; i < kGestureCount; ++i)
    if (name == kGestureNames[i])
      return static_cast<GestureClass>(i);
  return std::nullopt;
}

void SignalBuffer::validate() const
{
  if (!(sample_rate > 0.0))
    throw std::invalid_argument("signal sample_rate must be positive");
  for (const auto& ch : channels)
    if (ch.size() != sample_count())
      throw std::invalid_argument("signal channels must have equal length");
}

std::size_t window_count(std::size_t n, std::size_t window, std::size_t increment)
{
  if (window == 0 || increment == 0 || window > n)
    return 0;
  return (n - window) / increment + 1;
}

std::vector<SignalWindow> slide_windows(const SignalBuffer& buffer, std::size_t window, std::size_t increment)
{
  if (increment == 0)
    throw std::invalid_argument("slide_windows: increment must be >= 1");
  buffer.validate();
  const std::size_t count = window_count(buffer.sample_count(), window, increment);
  std::vector<SignalWindow> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w)
  {
    SignalWindow view;
    view.start = w * increment;
    view.channels.reserve(buffer.channel_count());
    for (const auto& ch : buffer.channels)
      view.channels.emplace_back(ch.data() + view.start, window);
    out.push_back(std::move(view));
  }
  return out;
}

ChannelFeatures channel_features(std::span<const double> x, const FeatureThresholds& thresholds)
{
  ChannelFeatures f;
  const std::size_t n = x.size();
  if (n == 0)
    return f;

  double abs_sum = 0.0;
  for (double v : x)
    abs_sum += std::abs(v);
  f.mav = abs_sum / static_cast<double>(n);

  for (std::size_t i = 0; i + 1 < n; ++i)
  {
    const double diff = std::abs(x[i] - x[i + 1]);
    f.wl += diff;
    if (x[i] * x[i + 1] < 0.0 && diff >= thresholds.zero_crossing)
      ++f.zc;
  }

  for (std::size_t i = 1; i + 1 < n; ++i)
  {
    const double back = x[i] - x[i - 1];
    const double fwd = x[i] - x[i + 1];
    if (back * fwd > 0.0 &&
        (std::abs(back) >= thresholds.slope_sign_change || std::abs(fwd) >= thresholds.slope_sign_change))
      ++f.ssc;
  }
  return f;
}

FeatureVector extract_features(const SignalWindow& window, const FeatureThresholds& thresholds)
{
  FeatureVector out(static_cast<Eigen::Index>(window.channels.size() * kFeaturesPerChannel));
  Eigen::Index k = 0;
  for (const auto& ch : window.channels)
  {
    const ChannelFeatures f = channel_features(ch, thresholds);
    out[k++] = f.mav;
    out[k++] = static_cast<double>(f.zc);
    out[k++] = static_cast<double>(f.ssc);
    out[k++] = f.wl;
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json LdaModel::to_json() const
{
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["format"] = "prosim-lda";
  j["version"] = 1;
  j["dimension"] = dimension();
  for (std::size_t k = 0; k < kGestureCount; ++k)
  {
    j["classes"].push_back({{"gesture", kGestureNames[k]}, {"prior", priors[k]}, {"mean", vec(means[k])}});
  }
  std::vector<double> cov(covariance.data(), covariance.data() + covariance.size());
  j["covariance"] = cov;
  return j;
}

LdaModel LdaModel::from_json(const nlohmann::json& j)
{
  if (j.value("format", "") != "prosim-lda")
    throw std::invalid_argument("not a prosim-lda model");
  const auto dim = j.at("dimension").get<Eigen::Index>();
  LdaModel m;
  const auto& classes = j.at("classes");
  if (classes.size() != kGestureCount)
    throw std::invalid_argument("model must hold 5 classes");
  for (std::size_t k = 0; k < kGestureCount; ++k)
  {
    const auto mean = classes[k].at("mean").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != dim)
      throw std::invalid_argument("model mean has wrong dimension");
    m.means[k] = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
    m.priors[k] = classes[k].at("prior").get<double>();
  }
  const auto cov = j.at("covariance").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(cov.size()) != dim * dim)
    throw std::invalid_argument("model covariance has wrong size");
  m.covariance = Eigen::Map<const Eigen::MatrixXd>(cov.data(), dim, dim);
  m.precision = svd_pseudo_inverse(m.covariance);
  return m;
}

LdaModel train_lda(std::span<const FeatureVector> features, std::span<const GestureClass> labels)
{
  if (features.size() != labels.size())
    throw std::invalid_argument("train_lda: features and labels differ in length");
  if (features.empty())
    throw std::invalid_argument("train_lda: no training data");

  const Eigen::Index dim = features.front().size();
  std::array<std::size_t, kGestureCount> counts{};
  LdaModel m;
  for (auto& mean : m.means)
    mean = Eigen::VectorXd::Zero(dim);

  for (std::size_t i = 0; i < features.size(); ++i)
  {
    if (features[i].size() != dim)
      throw std::invalid_argument("train_lda: inconsistent feature dimension");
    const std::size_t k = index_of(labels[i]);
    m.means[k] += features[i];
    ++counts[k];
  }
  for (std::size_t k = 0; k < kGestureCount; ++k)
  {
    if (counts[k] < 2)
      throw std::invalid_argument(std::string("train_lda: class ") + kGestureNames[k] +
                                  " needs at least 2 samples, got " + std::to_string(counts[k]));
    m.means[k] /= static_cast<double>(counts[k]);
    m.priors[k] = static_cast<double>(counts[k]) / static_cast<double>(features.size());
  }

  m.covariance = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < features.size(); ++i)
  {
    const Eigen::VectorXd d = features[i] - m.means[index_of(labels[i])];
    m.covariance.noalias() += d * d.transpose();
  }
  m.covariance /= static_cast<double>(features.size() - kGestureCount);
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose());
  m.precision = svd_pseudo_inverse(m.covariance);
  return m;
}

Classification classify(const LdaModel& model, const FeatureVector& f)
{
  if (f.size() != model.dimension())
    throw std::invalid_argument("classify: feature dimension " + std::to_string(f.size()) + " != model dimension " +
                                std::to_string(model.dimension()));
  Classification c;
  double scale = 1.0;
  for (std::size_t k = 0; k < kGestureCount; ++k)
  {
    const Eigen::VectorXd pm = model.precision * model.means[k];
    c.scores[k] = f.dot(pm) - 0.5 * model.means[k].dot(pm) + std::log(model.priors[k]);
    scale = std::max(scale, std::abs(c.scores[k]));
  }
  const double tie = 1e-9 * scale;
  std::size_t best = 0;
  for (std::size_t k = 1; k < kGestureCount; ++k)
    if (c.scores[k] > c.scores[best] + tie)
      best = k;
  c.gesture = static_cast<GestureClass>(best);
  return c;
}

// ---------------------------------------------------------------------------

std::optional<GestureEvent> Debouncer::push(GestureClass gesture, double timestamp)
{
  if (last_ && *last_ == gesture)
    ++run_;
  else
  {
    last_ = gesture;
    run_ = 1;
  }
  if (run_ == required_)
  {
    held_ = gesture;
    return GestureEvent{gesture, timestamp};
  }
  return std::nullopt;
}

void Debouncer::reset()
{
  last_.reset();
  held_.reset();
  run_ = 0;
}

std::vector<GestureEvent> debounce(std::span<const std::pair<GestureClass, double>> stream, std::size_t required)
{
  Debouncer d(required);
  std::vector<GestureEvent> out;
  double last_t = -std::numeric_limits<double>::infinity();
  for (const auto& [g, t] : stream)
  {
    if (t < last_t)
      throw std::invalid_argument("debounce: timestamps must be nondecreasing");
    last_t = t;
    if (auto e = d.push(g, t))
      out.push_back(*e);
  }
  return out;
}

// ---------------------------------------------------------------------------

SyntheticEmg::SyntheticEmg(std::size_t channels, std::uint64_t seed, double ar_coefficient)
    : state_(channels, 0.0), phi_(ar_coefficient), rng_(seed)
{
  if (channels == 0)
    throw std::invalid_argument("SyntheticEmg: need at least one channel");
  for (std::size_t g = 0; g < kGestureCount; ++g)
  {
    envelopes_[g].resize(channels);
    for (std::size_t c = 0; c < channels; ++c)
    {
      if (static_cast<GestureClass>(g) == GestureClass::NM)
      {
        envelopes_[g][c] = 0.05;
        continue;
      }
      // Each active gesture peaks on a different group of channels.
      const double center = static_cast<double>(2 * g % channels);
      double d = std::abs(static_cast<double>(c) - center);
      d = std::min(d, static_cast<double>(channels) - d);
      envelopes_[g][c] = 0.15 + 0.85 * std::exp(-0.5 * d * d);
    }
  }
}

std::vector<double> SyntheticEmg::next(GestureClass g)
{
  const auto& env = envelopes_[index_of(g)];
  const double innovation = std::sqrt(1.0 - phi_ * phi_);
  std::vector<double> out(state_.size());
  for (std::size_t c = 0; c < state_.size(); ++c)
  {
    state_[c] = phi_ * state_[c] + innovation * normal_(rng_);
    out[c] = env[c] * state_[c];
  }
  return out;
}

SignalBuffer SyntheticEmg::generate(GestureClass g, std::size_t samples, double sample_rate)
{
  SignalBuffer buf;
  buf.sample_rate = sample_rate;
  buf.channels.assign(state_.size(), std::vector<double>(samples));
  for (std::size_t i = 0; i < samples; ++i)
  {
    const auto s = next(g);
    for (std::size_t c = 0; c < s.size(); ++c)
      buf.channels[c][i] = s[c];
  }
  return buf;
}

// ---------------------------------------------------------------------------

LabeledSignal read_emg_file(std::istream& in)
{
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key)
      throw std::runtime_error(std::string("emg file: expected '") + key + "'");
  };
  expect("prosim-emg");
  int version = 0;
  in >> version;
  if (version != 1)
    throw std::runtime_error("emg file: unsupported version");
  LabeledSignal out;
  std::size_t channels = 0, samples = 0;
  int labeled = 0;
  expect("sample_rate");
  in >> out.signal.sample_rate;
  expect("channels");
  in >> channels;
  expect("samples");
  in >> samples;
  expect("labeled");
  in >> labeled;
  if (!in)
    throw std::runtime_error("emg file: malformed header");

  if (labeled)
  {
    out.labels.reserve(samples);
    std::string tok;
    for (std::size_t i = 0; i < samples; ++i)
    {
      if (!(in >> tok))
        throw std::runtime_error("emg file: truncated label row");
      const auto g = parse_gesture(tok);
      if (!g)
        throw std::runtime_error("emg file: unknown label '" + tok + "'");
      out.labels.push_back(*g);
    }
  }
  out.signal.channels.assign(channels, std::vector<double>(samples));
  for (auto& ch : out.signal.channels)
    for (auto& v : ch)
      if (!(in >> v))
        throw std::runtime_error("emg file: truncated sample rows");
  out.signal.validate();
  return out;
}

LabeledSignal read_emg_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open emg file: " + path);
  return read_emg_file(in);
}

void write_emg_file(std::ostream& out, const LabeledSignal& data)
{
  const auto& s = data.signal;
  out << "prosim-emg 1\n"
      << "sample_rate " << s.sample_rate << "\n"
      << "channels " << s.channel_count() << "\n"
      << "samples " << s.sample_count() << "\n"
      << "labeled " << (data.labels.empty() ? 0 : 1) << "\n";
  if (!data.labels.empty())
  {
    for (std::size_t i = 0; i < data.labels.size(); ++i)
      out << (i ? " " : "") << to_string(data.labels[i]);
    out << "\n";
  }
  out.precision(17);
  for (const auto& ch : s.channels)
  {
    for (std::size_t i = 0; i < ch.size(); ++i)
      out << (i ? " " : "") << ch[i];
    out << "\n";
  }
}

void write_emg_file(const std::string& path, const LabeledSignal& data)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write emg file: " + path);
  write_emg_file(out, data);
}

LabeledSignal synthetic_training_recording(std::size_t channels, std::size_t hold_samples, std::size_t repetitions,
                                           std::uint64_t seed)
{
  SyntheticEmg gen(channels, seed);
  LabeledSignal out;
  out.signal.channels.assign(channels, {});
  for (std::size_t r = 0; r < repetitions; ++r)
    for (GestureClass g : kAllGestures)
      for (std::size_t i = 0; i < hold_samples; ++i)
      {
        const auto s = gen.next(g);
        for (std::size_t c = 0; c < channels; ++c)
          out.signal.channels[c].push_back(s[c]);
        out.labels.push_back(g);
      }
  return out;
}

TrainingSet windowed_training_set(const LabeledSignal& data, std::size_t window, std::size_t increment,
                                  const FeatureThresholds& thresholds)
{
  if (data.labels.size() != data.signal.sample_count())
    throw std::invalid_argument("training data must be labeled per sample");
  TrainingSet set;
  for (const auto& w : slide_windows(data.signal, window, increment))
  {
    std::array<std::size_t, kGestureCount> votes{};
    for (std::size_t i = w.start; i < w.start + w.length(); ++i)
      ++votes[index_of(data.labels[i])];
    const auto top = std::max_element(votes.begin(), votes.end());
    // Windows straddling a transition are ambiguous; keep only clean majorities.
    if (*top * 4 < w.length() * 3)
      continue;
    set.features.push_back(extract_features(w, thresholds));
    set.labels.push_back(static_cast<GestureClass>(top - votes.begin()));
  }
  return set;
}

// ---------------------------------------------------------------------------

EmgClassifierStream::EmgClassifierStream(LdaModel model, std::size_t channels, EmgPipelineConfig config)
    : model_(std::move(model)), config_(config), history_(channels)
{
  if (static_cast<Eigen::Index>(channels * kFeaturesPerChannel) != model_.dimension())
    throw std::invalid_argument("EmgClassifierStream: channel count does not match model dimension");
  if (config_.window == 0 || config_.increment == 0)
    throw std::invalid_argument("EmgClassifierStream: window and increment must be positive");
}

std::optional<Classification> EmgClassifierStream::push(std::span<const double> sample)
{
  if (sample.size() != history_.size())
    throw std::invalid_argument("EmgClassifierStream: sample has wrong channel count");
  for (std::size_t c = 0; c < sample.size(); ++c)
  {
    history_[c].push_back(sample[c]);
    if (history_[c].size() > config_.window)
      history_[c].pop_front();
  }
  ++total_;
  if (total_ < config_.window)
    return std::nullopt;
  if (total_ > config_.window && ++since_last_ < config_.increment)
    return std::nullopt;
  since_last_ = 0;

  std::vector<std::vector<double>> copy(history_.size());
  SignalWindow view;
  for (std::size_t c = 0; c < history_.size(); ++c)
  {
    copy[c].assign(history_[c].begin(), history_[c].end());
    view.channels.emplace_back(copy[c]);
  }
  return classify(model_, extract_features(view, config_.thresholds));
}

nlohmann::json EmgEvalReport::to_json() const
{
  nlohmann::json j;
  j["windows"] = windows;
  j["correct"] = correct;
  j["accuracy"] = accuracy();
  j["debounced_events"] = debounced_events;
  j["debounced_correct"] = debounced_correct;
  for (std::size_t t = 0; t < kGestureCount; ++t)
  {
    nlohmann::json row;
    for (std::size_t p = 0; p < kGestureCount; ++p)
      row[kGestureNames[p]] = confusion[t][p];
    j["confusion"][kGestureNames[t]] = row;
  }
  return j;
}

EmgEvalReport evaluate_emg(const LdaModel& model, const LabeledSignal& data, const EmgPipelineConfig& config)
{
  if (data.labels.size() != data.signal.sample_count())
    throw std::invalid_argument("evaluation data must be labeled per sample");
  EmgEvalReport report;
  Debouncer debouncer(config.debounce_count);
  const double dt = 1.0 / data.signal.sample_rate;
  for (const auto& w : slide_windows(data.signal, config.window, config.increment))
  {
    const std::size_t last = w.start + w.length() - 1;
    const GestureClass truth = data.labels[last];
    const auto c = classify(model, extract_features(w, config.thresholds));
    ++report.windows;
    ++report.confusion[index_of(truth)][index_of(c.gesture)];
    if (c.gesture == truth)
      ++report.correct;
    if (auto e = debouncer.push(c.gesture, static_cast<double>(last) * dt))
    {
      ++report.debounced_events;
      if (e->gesture == truth)
        ++report.debounced_correct;
    }
  }
  return report;
}

}  // namespace prosim
