// prosim: live server, headless runs, log analysis and EMG model tools.

#include "prosim/config.hpp"
#include "prosim/emg.hpp"
#include "prosim/metrics.hpp"
#include "prosim/scenario.hpp"
#include "prosim/server.hpp"
#include "prosim/session.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace prosim;
using nlohmann::json;
using nlohmann::ordered_json;

namespace
{

LiveServer* g_server = nullptr;

void on_signal(int)
{
  if (g_server)
    g_server->stop();
}

std::string opt_num(const std::optional<double>& v, const char* fmt = "%.3f")
{
  if (!v)
    return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

Trace load_trace(const std::string& path) { return path.empty() ? Trace{} : read_trace(path); }

int cmd_serve(const std::string& config_path, const std::optional<std::uint16_t>& port,
              const std::optional<std::string>& bind)
{
  SessionConfig c = SessionConfig::load(config_path);
  if (port)
    c.port = *port;
  if (bind)
    c.bind_address = *bind;
  LiveServer server(c);
  server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving ws://" << c.bind_address << ':' << server.port() << "  (" << c.trials.size()
            << " trial(s), gesture source " << to_string(c.gesture_source.kind) << ", logs in " << c.log_dir << ")"
            << std::endl;
  server.run();
  g_server = nullptr;
  for (const auto& r : server.session().results())
    std::cout << r.to_json().dump() << '\n';
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& trace_path, const std::string& log_dir, bool as_json)
{
  SessionConfig c = SessionConfig::load(config_path);
  if (!log_dir.empty())
    c.log_dir = log_dir;
  const Trace trace = load_trace(trace_path);
  Session s(c, RunMode::Headless);
  const auto results = s.run_headless(trace);
  if (as_json)
  {
    ordered_json out = ordered_json::array();
    for (const auto& r : results)
      out.push_back(r.to_json());
    std::cout << out.dump(2) << '\n';
    return 0;
  }
  std::printf("%-5s %-6s %-4s %-9s %8s  %-60s %s\n", "trial", "method", "arr", "end", "t [s]", "outcomes", "log");
  for (const auto& r : results)
  {
    std::string o;
    for (auto x : r.outcomes)
      o += std::string(o.empty() ? "" : ",") + to_string(x);
    std::printf("%-5zu %-6s %-4zu %-9s %8.3f  %-60s %s\n", r.index, to_string(r.trial.method), r.trial.arrangement,
                r.end_reason.c_str(), r.end_time, o.c_str(), r.log_path.c_str());
  }
  return 0;
}

ordered_json log_summary(const TrialLog& log)
{
  ordered_json j;
  j["method"] = to_string(log.method());
  j["trial_index"] = log.header.at("trial_index");
  j["end_time"] = log.end_time();
  j["success_count"] = log.success_count() ? ordered_json(*log.success_count()) : ordered_json(nullptr);
  std::map<std::string, int> kinds;
  for (const auto& r : log.records)
    ++kinds[r.at("kind").get<std::string>()];
  j["records"] = kinds;
  ordered_json transfers = ordered_json::array();
  for (const auto& m : transfer_metrics(log))
    transfers.push_back({{"block", m.block},
                         {"pick_duration", m.pick_duration ? ordered_json(*m.pick_duration) : ordered_json(nullptr)},
                         {"place_duration", m.place_duration ? ordered_json(*m.place_duration) : ordered_json(nullptr)},
                         {"min_target_distance",
                          m.min_target_distance ? ordered_json(*m.min_target_distance) : ordered_json(nullptr)},
                         {"used_method_pick", m.used_method_pick},
                         {"used_method_place", m.used_method_place}});
  j["transfers"] = transfers;
  const auto comp = compensatory_motion(shoulder_stream(log, 0.0, log.end_time()));
  j["compensation"] = {{"translation", comp.translation}, {"rotation", comp.rotation}};
  const auto g = gaze_attention(log, 0.0, log.end_time());
  j["gaze_attention"] = {{"arm", g.arm}, {"hand", g.hand}, {"targets", g.targets}, {"other", g.other},
                         {"has_samples", g.has_samples}};
  return j;
}

int cmd_replay(const std::vector<std::string>& logs, bool as_json)
{
  ordered_json all = ordered_json::array();
  for (const auto& path : logs)
  {
    const TrialLog log = TrialLog::read(path);
    ordered_json s = log_summary(log);
    s["log"] = path;
    if (as_json)
    {
      all.push_back(s);
      continue;
    }
    std::printf("%s\n  method %s, trial %d, ended at %.3f s, success %s\n", path.c_str(),
                s["method"].get<std::string>().c_str(), s["trial_index"].get<int>(), log.end_time(),
                s["success_count"].is_null() ? "-" : std::to_string(s["success_count"].get<int>()).c_str());
    std::printf("  %-5s %9s %9s %9s %6s %6s\n", "block", "pick [s]", "place [s]", "min d [m]", "m.pick", "m.place");
    for (const auto& m : transfer_metrics(log))
      std::printf("  %-5zu %9s %9s %9s %6s %6s\n", m.block, opt_num(m.pick_duration).c_str(),
                  opt_num(m.place_duration).c_str(), opt_num(m.min_target_distance, "%.4f").c_str(),
                  m.used_method_pick ? "yes" : "no", m.used_method_place ? "yes" : "no");
    const auto& comp = s["compensation"];
    const auto& g = s["gaze_attention"];
    std::printf("  compensation: %.4f m, %.4f rad   gaze: arm %.2f hand %.2f targets %.2f other %.2f\n",
                comp["translation"].get<double>(), comp["rotation"].get<double>(), g["arm"].get<double>(),
                g["hand"].get<double>(), g["targets"].get<double>(), g["other"].get<double>());
  }
  if (as_json)
    std::cout << all.dump(2) << '\n';
  return 0;
}

int cmd_aggregate(const std::string& dir, bool as_json)
{
  const ordered_json report = aggregate_logs(dir);
  if (as_json)
  {
    std::cout << report.dump(2) << '\n';
    return 0;
  }
  std::printf("%-6s %6s %6s %6s %6s %4s %4s %6s\n", "method", "trials", "mean", "std", "std_n", "min", "max",
              "median");
  for (const auto& m : report.at("methods"))
    std::printf("%-6s %6zu %6.2f %6.2f %6.2f %4d %4d %6.1f\n", m.at("method").get<std::string>().c_str(),
                m.at("trials").get<std::size_t>(), m.at("mean").get<double>(), m.at("std").get<double>(),
                m.at("std_population").get<double>(), m.at("min").get<int>(), m.at("max").get<int>(),
                m.at("median").get<double>());
  std::printf("(%s)\n", report.at("std_convention").get<std::string>().c_str());
  return 0;
}

LabeledSignal training_data(const std::string& path, std::size_t channels, std::uint64_t seed)
{
  if (path == "synthetic")
    return synthetic_training_recording(channels, 1000, 3, seed);
  LabeledSignal d = read_emg_file(path);
  if (d.labels.empty())
    throw std::invalid_argument(path + ": recording has no labels");
  return d;
}

int cmd_emg_train(const std::string& data, const std::string& out, const EmgPipelineConfig& p, std::size_t channels,
                  std::uint64_t seed)
{
  const LabeledSignal d = training_data(data, channels, seed);
  const TrainingSet set = windowed_training_set(d, p.window, p.increment, p.thresholds);
  const LdaModel model = train_lda(set.features, set.labels);
  const json j = model.to_json();
  std::ofstream f(out);
  if (!f)
    throw std::runtime_error("cannot write " + out);
  f << j.dump(2) << '\n';
  const EmgEvalReport r = evaluate_emg(model, d, p);
  std::printf("trained on %zu windows (%zu channels), training accuracy %.4f -> %s\n", set.features.size(),
              d.signal.channel_count(), r.accuracy(), out.c_str());
  return 0;
}

int cmd_emg_eval(const std::string& model_path, const std::string& data, const EmgPipelineConfig& p,
                 std::size_t channels, std::uint64_t seed, bool as_json)
{
  std::ifstream f(model_path);
  if (!f)
    throw std::invalid_argument("cannot open model " + model_path);
  const LdaModel model = LdaModel::from_json(json::parse(f));
  const LabeledSignal d = training_data(data, channels, seed);
  const EmgEvalReport r = evaluate_emg(model, d, p);
  if (as_json)
  {
    std::cout << r.to_json().dump(2) << '\n';
    return 0;
  }
  std::printf("windows %zu, accuracy %.4f, debounced events %zu (%zu correct)\n", r.windows, r.accuracy(),
              r.debounced_events, r.debounced_correct);
  std::printf("truth\\pred");
  for (std::size_t g = 0; g < kGestureCount; ++g)
    std::printf(" %6s", to_string(static_cast<GestureClass>(g)));
  std::printf("\n");
  for (std::size_t t = 0; t < kGestureCount; ++t)
  {
    std::printf("%-10s", to_string(static_cast<GestureClass>(t)));
    for (std::size_t g = 0; g < kGestureCount; ++g)
      std::printf(" %6zu", r.confusion[t][g]);
    std::printf("\n");
  }
  return 0;
}

int cmd_emg_synth(const std::string& out, std::size_t channels, std::size_t hold, std::size_t reps, std::uint64_t seed)
{
  write_emg_file(out, synthetic_training_recording(channels, hold, reps, seed));
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_author(const std::string& config_path, const std::string& scenario, const std::string& out)
{
  const auto kind = parse_scenario(scenario);
  if (!kind)
    throw std::invalid_argument("unknown scenario " + scenario);
  const SessionConfig c = config_path.empty() ? SessionConfig{} : SessionConfig::load(config_path);
  const AuthoredRun run = author_scenario(c, *kind);
  write_trace(out, run.trace);
  std::string o;
  for (auto x : run.result.outcomes)
    o += std::string(o.empty() ? "" : ",") + to_string(x);
  std::printf("%s: %zu messages, %s at %.3f s, outcomes %s -> %s\n", scenario.c_str(), run.trace.size(),
              run.result.end_reason.c_str(), run.result.end_time, o.c_str(), out.c_str());
  return 0;
}

void pipeline_options(CLI::App* app, EmgPipelineConfig& p, std::size_t& channels, std::uint64_t& seed)
{
  app->add_option("--window", p.window, "Window length in samples")->check(CLI::PositiveNumber);
  app->add_option("--increment", p.increment, "Window increment in samples")->check(CLI::PositiveNumber);
  app->add_option("--channels", channels, "Channels of a synthetic recording")->check(CLI::PositiveNumber);
  app->add_option("--seed", seed, "Seed of a synthetic recording");
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Whole-arm prosthesis Box-and-Blocks simulator"};
  app.require_subcommand(1);

  std::string config, trace, log_dir, dir, data, model, out, scenario;
  std::vector<std::string> logs;
  std::optional<std::uint16_t> port;
  std::optional<std::string> bind;
  bool as_json = false;
  EmgPipelineConfig pipe;
  std::size_t channels = 8, hold = 1000, reps = 3;
  std::uint64_t seed = 1;

  auto* serve = app.add_subcommand("serve", "Run a live session behind a WebSocket endpoint");
  serve->add_option("--config", config, "Session config file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Override the configured port (0 = any free port)");
  serve->add_option("--bind", bind, "Override the bind address");

  auto* simulate = app.add_subcommand("simulate", "Run every configured trial headless from a trace");
  simulate->add_option("--config", config, "Session config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--trace", trace, "Input trace (JSON lines); omit for no input")->check(CLI::ExistingFile);
  simulate->add_option("--log-dir", log_dir, "Override the configured log directory");
  simulate->add_flag("--json", as_json, "Machine-readable output");

  auto* replay = app.add_subcommand("replay", "Recompute per-transfer metrics from trial logs");
  replay->add_option("logs", logs, "Trial log files")->required()->check(CLI::ExistingFile);
  replay->add_flag("--json", as_json, "Machine-readable output");

  auto* aggregate = app.add_subcommand("aggregate", "Per-method success statistics over a log directory");
  aggregate->add_option("--logs", dir, "Directory of trial logs")->required()->check(CLI::ExistingDirectory);
  aggregate->add_flag("--json", as_json, "Full machine-readable report");

  auto* train = app.add_subcommand("emg-train", "Train the LDA gesture model");
  train->add_option("--data", data, "Labeled EMG recording, or 'synthetic'")->required();
  train->add_option("--out", out, "Model file to write")->required();
  pipeline_options(train, pipe, channels, seed);

  auto* eval = app.add_subcommand("emg-eval", "Evaluate a model on a labeled recording");
  eval->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "Labeled EMG recording, or 'synthetic' (default)");
  eval->add_flag("--json", as_json, "Machine-readable output");
  pipeline_options(eval, pipe, channels, seed);

  auto* synth = app.add_subcommand("emg-synth", "Write a synthetic labeled EMG recording");
  synth->add_option("--out", out, "Recording file to write")->required();
  synth->add_option("--channels", channels, "Channels")->check(CLI::PositiveNumber);
  synth->add_option("--hold", hold, "Samples per gesture hold")->check(CLI::PositiveNumber);
  synth->add_option("--reps,--repetitions", reps, "Repetitions of the gesture sequence")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Noise seed");

  auto* author = app.add_subcommand("author", "Record a trace from a scripted operator");
  author->add_option("--scenario", scenario,
                     "perfect-d | crossed-not-reached | dropped-floor | dropped-same-side | never-grasped")
      ->required();
  author->add_option("--config", config, "Session config file (defaults when omitted)")->check(CLI::ExistingFile);
  author->add_option("--out", out, "Trace file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try
  {
    if (*serve)
      return cmd_serve(config, port, bind);
    if (*simulate)
      return cmd_simulate(config, trace, log_dir, as_json);
    if (*replay)
      return cmd_replay(logs, as_json);
    if (*aggregate)
      return cmd_aggregate(dir, as_json);
    if (*train)
      return cmd_emg_train(data, out, pipe, channels, seed);
    if (*eval)
      return cmd_emg_eval(model, data.empty() ? "synthetic" : data, pipe, channels, eval->count("--seed") ? seed : seed + 100,
                          as_json);
    if (*synth)
      return cmd_emg_synth(out, channels, hold, reps, seed);
    if (*author)
      return cmd_author(config, scenario, out);
  }
  catch (const std::exception& e)
  {
    std::cerr << "prosim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
