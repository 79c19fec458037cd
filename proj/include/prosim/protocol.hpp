#pragma once

#include "prosim/emg.hpp"
#include "prosim/geometry.hpp"
#include "prosim/intent.hpp"
#include "prosim/world.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace prosim
{

inline constexpr std::string_view kProtocolName = "prosim";
inline constexpr int kProtocolVersion = 1;

enum class ClientKind
{
  Hello,
  Gesture,         // an already debounced gesture event
  Classification,  // one raw classifier output; passes through the debouncer
  Intent,          // intended gesture for the synthetic EMG source
  Gaze,
  Shoulder,
  Control,
  Method,
};

const char* to_string(ClientKind k);

enum class ControlAction
{
  Start,
  Stop,
  Reset,
  Pause,
  Resume,
};

const char* to_string(ControlAction a);

struct ClientMessage
{
  ClientKind kind = ClientKind::Hello;
  std::optional<std::int64_t> id;  // echoed in the ack / reject

  int version = kProtocolVersion;        // hello
  GestureClass gesture = GestureClass::NM;  // gesture, classification, intent
  GazeSample gaze;                       // gaze (direction normalized)
  RigidTransform shoulder;               // shoulder
  ControlAction action = ControlAction::Start;
  MethodId method = MethodId::D;

  static ClientMessage make_gesture(GestureClass g);
  static ClientMessage make_classification(GestureClass g);
  static ClientMessage make_intent(GestureClass g);
  static ClientMessage make_gaze(const Vector3d& origin, const Vector3d& direction);
  static ClientMessage make_shoulder(const RigidTransform& pose);
  static ClientMessage make_control(ControlAction a);
  static ClientMessage make_method(MethodId m);
};

/// Either a message or the reason it was refused.
using ParseResult = std::variant<ClientMessage, std::string>;

ParseResult parse_client_message(const nlohmann::json& j);
ParseResult parse_client_text(std::string_view text);
nlohmann::json to_json(const ClientMessage& m);

nlohmann::json server_hello_json();
nlohmann::json ack_json(const std::optional<std::int64_t>& id, ClientKind kind);
nlohmann::json reject_json(const std::optional<std::int64_t>& id, const std::string& reason);

/// Headless input script: one client message per line plus its timestamp "t"
/// (seconds from trial start). Only gesture, classification, intent, gaze and
/// shoulder messages are allowed; timestamps must be nondecreasing.
struct TimedMessage
{
  double t = 0.0;
  ClientMessage message;
};

using Trace = std::vector<TimedMessage>;

Trace read_trace(std::istream& in);
Trace read_trace(const std::string& path);
void write_trace(std::ostream& out, const Trace& trace);
void write_trace(const std::string& path, const Trace& trace);

}  // namespace prosim
