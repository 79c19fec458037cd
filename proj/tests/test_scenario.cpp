#include "doctest.h"

#include "prosim/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace prosim;
namespace fs = std::filesystem;

namespace
{

SessionConfig scenario_config(const std::string& name, double duration)
{
  SessionConfig c;
  c.trials[0].method = MethodId::D;
  c.trials[0].duration = duration;
  c.log_dir = (fs::temp_directory_path() / ("prosim_scenario_" + name)).string();
  fs::remove_all(c.log_dir);
  return c;
}

std::string slurp(const std::string& path)
{
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Replays a recorded trace on a fresh session writing to another directory.
TrialResult replay(SessionConfig c, const Trace& trace, const std::string& name)
{
  c.log_dir = (fs::temp_directory_path() / ("prosim_scenario_" + name)).string();
  fs::remove_all(c.log_dir);
  std::stringstream ss;
  write_trace(ss, trace);
  Session s(c, RunMode::Headless);
  return s.run_trial(read_trace(ss));
}

}  // namespace

TEST_CASE("scenario names round trip")
{
  for (auto k : {ScenarioKind::PerfectD, ScenarioKind::CrossedNotReached, ScenarioKind::DroppedFloor,
                 ScenarioKind::DroppedSameSide, ScenarioKind::NeverGrasped})
    CHECK(parse_scenario(to_string(k)) == k);
  CHECK_FALSE(parse_scenario("perfect"));
}

TEST_CASE("perfect method D operator places all four blocks and replays identically")
{
  const SessionConfig c = scenario_config("perfect", 300.0);
  const AuthoredRun run = author_scenario(c, ScenarioKind::PerfectD);
  CHECK(run.result.end_reason == "complete");
  CHECK(run.result.success_count() == 4);
  CHECK(run.result.end_time < 300.0);
  MESSAGE("perfect D finished at t = " << run.result.end_time << " s with " << run.trace.size() << " messages");

  const TrialResult again = replay(c, run.trace, "perfect_replay");
  CHECK(again.success_count() == 4);
  CHECK(again.end_time == run.result.end_time);
  CHECK(slurp(again.log_path) == slurp(run.result.log_path));
}

TEST_CASE("failure scenarios produce their outcome for the first block")
{
  struct Case
  {
    ScenarioKind kind;
    Outcome expected;
  };
  for (const Case& k : {Case{ScenarioKind::CrossedNotReached, Outcome::CrossedNotReached},
                        Case{ScenarioKind::DroppedFloor, Outcome::DroppedFloor},
                        Case{ScenarioKind::DroppedSameSide, Outcome::DroppedSameSide},
                        Case{ScenarioKind::NeverGrasped, Outcome::NeverGrasped}})
  {
    CAPTURE(to_string(k.kind));
    const SessionConfig c = scenario_config(to_string(k.kind), 30.0);
    const AuthoredRun run = author_scenario(c, k.kind);
    const BlockId first = c.trials[0].order[0];
    CHECK(run.result.outcomes[first] == k.expected);
    CHECK(run.result.end_reason == "timeout");
    for (BlockId id = 0; id < kBlockCount; ++id)
      if (id != first)
        CHECK(run.result.outcomes[id] == Outcome::NeverGrasped);
    const TrialResult again = replay(c, run.trace, std::string(to_string(k.kind)) + "_replay");
    CHECK(again.outcomes == run.result.outcomes);
  }
}

TEST_CASE("manual methods are refused for assisted scenarios")
{
  SessionConfig c = scenario_config("manual", 30.0);
  c.trials[0].method = MethodId::A;
  CHECK_THROWS_AS(author_scenario(c, ScenarioKind::DroppedSameSide), std::invalid_argument);
  CHECK_NOTHROW(author_scenario(c, ScenarioKind::PerfectD));
}
