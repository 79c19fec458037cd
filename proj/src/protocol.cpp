#include "prosim/protocol.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace prosim
{

using nlohmann::json;

namespace
{

constexpr std::array<std::pair<ClientKind, const char*>, 8> kKinds = {{
    {ClientKind::Hello, "hello"},
    {ClientKind::Gesture, "gesture"},
    {ClientKind::Classification, "classification"},
    {ClientKind::Intent, "intent"},
    {ClientKind::Gaze, "gaze"},
    {ClientKind::Shoulder, "shoulder"},
    {ClientKind::Control, "control"},
    {ClientKind::Method, "method"},
}};

constexpr std::array<std::pair<ControlAction, const char*>, 5> kActions = {{
    {ControlAction::Start, "start"},
    {ControlAction::Stop, "stop"},
    {ControlAction::Reset, "reset"},
    {ControlAction::Pause, "pause"},
    {ControlAction::Resume, "resume"},
}};

/// Message-level failure; becomes the rejection reason.
struct Bad
{
  std::string reason;
};

void only_keys(const json& j, std::initializer_list<std::string_view> keys)
{
  std::set<std::string_view> allowed(keys);
  allowed.insert("type");
  allowed.insert("id");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k))
      throw Bad{"unknown field \"" + k + "\""};
}

const json& field(const json& j, const char* key)
{
  const auto it = j.find(key);
  if (it == j.end())
    throw Bad{std::string("missing field \"") + key + "\""};
  return *it;
}

std::string string_field(const json& j, const char* key)
{
  const json& v = field(j, key);
  if (!v.is_string())
    throw Bad{std::string("field \"") + key + "\" must be a string"};
  return v.get<std::string>();
}

Vector3d vector_field(const json& j, const char* key)
{
  const json& v = field(j, key);
  if (!v.is_array() || v.size() != 3)
    throw Bad{std::string("field \"") + key + "\" must be an array of 3 numbers"};
  Vector3d out;
  for (int i = 0; i < 3; ++i)
  {
    if (!v[static_cast<std::size_t>(i)].is_number())
      throw Bad{std::string("field \"") + key + "\" must be an array of 3 numbers"};
    out[i] = v[static_cast<std::size_t>(i)].get<double>();
  }
  if (!out.allFinite())
    throw Bad{std::string("field \"") + key + "\" must be finite"};
  return out;
}

GestureClass gesture_field(const json& j)
{
  const auto g = parse_gesture(string_field(j, "gesture"));
  if (!g)
    throw Bad{"gesture must be one of HO, HC, WF, WE, NM"};
  return *g;
}

ClientMessage parse_or_throw(const json& j)
{
  if (!j.is_object())
    throw Bad{"message must be a JSON object"};
  const std::string type = string_field(j, "type");
  ClientMessage m;
  bool known = false;
  for (const auto& [k, name] : kKinds)
    if (type == name)
    {
      m.kind = k;
      known = true;
    }
  if (!known)
    throw Bad{"unknown message type \"" + type + "\""};

  if (const auto it = j.find("id"); it != j.end())
  {
    if (!it->is_number_integer())
      throw Bad{"field \"id\" must be an integer"};
    m.id = it->get<std::int64_t>();
  }

  switch (m.kind)
  {
    case ClientKind::Hello:
    {
      only_keys(j, {"protocol", "version"});
      if (string_field(j, "protocol") != kProtocolName)
        throw Bad{"unsupported protocol"};
      const json& v = field(j, "version");
      if (!v.is_number_integer())
        throw Bad{"field \"version\" must be an integer"};
      m.version = v.get<int>();
      if (m.version != kProtocolVersion)
        throw Bad{"unsupported protocol version " + std::to_string(m.version) + " (server speaks " +
                  std::to_string(kProtocolVersion) + ")"};
      break;
    }
    case ClientKind::Gesture:
    case ClientKind::Classification:
    case ClientKind::Intent:
      only_keys(j, {"gesture"});
      m.gesture = gesture_field(j);
      break;
    case ClientKind::Gaze:
    {
      only_keys(j, {"origin", "direction"});
      m.gaze.origin = vector_field(j, "origin");
      const Vector3d d = vector_field(j, "direction");
      const double n = d.norm();
      if (!(n > 1e-9) || !std::isfinite(n))
        throw Bad{"gaze direction must be non-zero"};
      // already-unit vectors pass through untouched so recorded traces replay bit for bit
      m.gaze.direction = std::abs(n - 1.0) <= 1e-12 ? d : Vector3d(d / n);
      break;
    }
    case ClientKind::Shoulder:
    {
      only_keys(j, {"position", "orientation"});
      m.shoulder.translation = vector_field(j, "position");
      const json& q = field(j, "orientation");
      if (!q.is_array() || q.size() != 4)
        throw Bad{"field \"orientation\" must be [w, x, y, z]"};
      std::array<double, 4> c{};
      for (std::size_t i = 0; i < 4; ++i)
      {
        if (!q[i].is_number())
          throw Bad{"field \"orientation\" must be [w, x, y, z]"};
        c[i] = q[i].get<double>();
      }
      const Quaterniond r(c[0], c[1], c[2], c[3]);
      const double n = r.norm();
      if (!(n > 1e-9) || !std::isfinite(n))
        throw Bad{"orientation must be a finite non-zero quaternion"};
      m.shoulder.rotation = std::abs(n - 1.0) <= 1e-12 ? r : r.normalized();
      break;
    }
    case ClientKind::Control:
    {
      only_keys(j, {"action"});
      const std::string a = string_field(j, "action");
      bool ok = false;
      for (const auto& [act, name] : kActions)
        if (a == name)
        {
          m.action = act;
          ok = true;
        }
      if (!ok)
        throw Bad{"action must be one of start, stop, reset, pause, resume"};
      break;
    }
    case ClientKind::Method:
    {
      only_keys(j, {"method"});
      const auto method = parse_method(string_field(j, "method"));
      if (!method)
        throw Bad{"method must be one of A, B, C, D"};
      m.method = *method;
      break;
    }
  }
  return m;
}

}  // namespace

const char* to_string(ClientKind k)
{
  for (const auto& [kind, name] : kKinds)
    if (kind == k)
      return name;
  return "?";
}

const char* to_string(ControlAction a)
{
  for (const auto& [act, name] : kActions)
    if (act == a)
      return name;
  return "?";
}

ClientMessage ClientMessage::make_gesture(GestureClass g)
{
  ClientMessage m;
  m.kind = ClientKind::Gesture;
  m.gesture = g;
  return m;
}

ClientMessage ClientMessage::make_classification(GestureClass g)
{
  ClientMessage m = make_gesture(g);
  m.kind = ClientKind::Classification;
  return m;
}

ClientMessage ClientMessage::make_intent(GestureClass g)
{
  ClientMessage m = make_gesture(g);
  m.kind = ClientKind::Intent;
  return m;
}

ClientMessage ClientMessage::make_gaze(const Vector3d& origin, const Vector3d& direction)
{
  ClientMessage m;
  m.kind = ClientKind::Gaze;
  m.gaze.origin = origin;
  m.gaze.direction = direction.normalized();
  return m;
}

ClientMessage ClientMessage::make_shoulder(const RigidTransform& pose)
{
  ClientMessage m;
  m.kind = ClientKind::Shoulder;
  m.shoulder = pose;
  return m;
}

ClientMessage ClientMessage::make_control(ControlAction a)
{
  ClientMessage m;
  m.kind = ClientKind::Control;
  m.action = a;
  return m;
}

ClientMessage ClientMessage::make_method(MethodId method)
{
  ClientMessage m;
  m.kind = ClientKind::Method;
  m.method = method;
  return m;
}

ParseResult parse_client_message(const json& j)
{
  try
  {
    return parse_or_throw(j);
  }
  catch (const Bad& b)
  {
    return b.reason;
  }
  catch (const json::exception& e)
  {
    return std::string("malformed message: ") + e.what();
  }
}

ParseResult parse_client_text(std::string_view text)
{
  json j;
  try
  {
    j = json::parse(text);
  }
  catch (const json::parse_error&)
  {
    return std::string("message is not valid JSON");
  }
  return parse_client_message(j);
}

json to_json(const ClientMessage& m)
{
  json j{{"type", to_string(m.kind)}};
  if (m.id)
    j["id"] = *m.id;
  const auto v3 = [](const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); };
  switch (m.kind)
  {
    case ClientKind::Hello:
      j["protocol"] = kProtocolName;
      j["version"] = m.version;
      break;
    case ClientKind::Gesture:
    case ClientKind::Classification:
    case ClientKind::Intent: j["gesture"] = to_string(m.gesture); break;
    case ClientKind::Gaze:
      j["origin"] = v3(m.gaze.origin);
      j["direction"] = v3(m.gaze.direction);
      break;
    case ClientKind::Shoulder:
    {
      const auto& q = m.shoulder.rotation;
      j["position"] = v3(m.shoulder.translation);
      j["orientation"] = {q.w(), q.x(), q.y(), q.z()};
      break;
    }
    case ClientKind::Control: j["action"] = to_string(m.action); break;
    case ClientKind::Method: j["method"] = to_string(m.method); break;
  }
  return j;
}

json server_hello_json() { return {{"type", "hello"}, {"protocol", kProtocolName}, {"version", kProtocolVersion}}; }

json ack_json(const std::optional<std::int64_t>& id, ClientKind kind)
{
  json j{{"type", "ack"}, {"of", to_string(kind)}};
  if (id)
    j["id"] = *id;
  return j;
}

json reject_json(const std::optional<std::int64_t>& id, const std::string& reason)
{
  json j{{"type", "reject"}, {"reason", reason}};
  if (id)
    j["id"] = *id;
  return j;
}

Trace read_trace(std::istream& in)
{
  Trace out;
  std::string line;
  std::size_t lineno = 0;
  double last = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line))
  {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#')
      continue;
    const std::string where = "trace line " + std::to_string(lineno) + ": ";
    json j;
    try
    {
      j = json::parse(line);
    }
    catch (const json::parse_error&)
    {
      throw std::invalid_argument(where + "not valid JSON");
    }
    if (!j.is_object() || !j.contains("t") || !j.at("t").is_number())
      throw std::invalid_argument(where + "missing numeric \"t\"");
    const double t = j.at("t").get<double>();
    if (!std::isfinite(t) || t < 0.0)
      throw std::invalid_argument(where + "\"t\" must be a finite, non-negative time");
    if (t < last)
      throw std::invalid_argument(where + "timestamps are not sorted");
    last = t;
    j.erase("t");
    auto parsed = parse_client_message(j);
    if (auto* err = std::get_if<std::string>(&parsed))
      throw std::invalid_argument(where + *err);
    const auto& m = std::get<ClientMessage>(parsed);
    switch (m.kind)
    {
      case ClientKind::Gesture:
      case ClientKind::Classification:
      case ClientKind::Intent:
      case ClientKind::Gaze:
      case ClientKind::Shoulder: break;
      default: throw std::invalid_argument(where + "message type \"" + to_string(m.kind) + "\" is not allowed in traces");
    }
    out.push_back({t, m});
  }
  return out;
}

Trace read_trace(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open trace " + path);
  return read_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace)
{
  for (const auto& tm : trace)
  {
    nlohmann::ordered_json line;
    line["t"] = tm.t;
    const json body = to_json(tm.message);
    for (const auto& [k, v] : body.items())
      line[k] = v;
    out << line.dump() << '\n';
  }
}

void write_trace(const std::string& path, const Trace& trace)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write trace " + path);
  write_trace(out, trace);
}

}  // namespace prosim
