#pragma once

#include "prosim/session.hpp"

#include <optional>
#include <string>

namespace prosim
{

/// Canned operator behaviours used to author reproducible traces.
enum class ScenarioKind
{
  PerfectD,           // every block picked and placed on its target with method D
  CrossedNotReached,  // first block released over the place half, away from its target
  DroppedFloor,       // first block carried off the table and released
  DroppedSameSide,    // first block grasped and released in place
  NeverGrasped,       // no input at all
};

const char* to_string(ScenarioKind k);
std::optional<ScenarioKind> parse_scenario(const std::string& name);

struct AuthoredRun
{
  Trace trace;         // every message the operator sent, stamped with simulated time
  TrialResult result;  // outcome of the authoring run itself
};

/// Runs an adaptive scripted operator against a headless session on the first
/// configured trial. The operator watches the session state, so the recorded
/// trace replays to the same result on an identical config.
AuthoredRun author_scenario(const SessionConfig& config, ScenarioKind kind);

}  // namespace prosim
