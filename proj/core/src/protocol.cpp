#include "skytalk/protocol.hpp"

#include <limits>

#include "json.hpp"

namespace skytalk {
namespace {

using nlohmann::json;

[[noreturn]] void violation(const std::string& message) {
  throw ProtocolError(ProtocolErrorKind::SchemaViolation, message);
}

json parse_body(std::string_view body) {
  try {
    return json::parse(body.begin(), body.end());
  } catch (const json::parse_error& e) {
    throw ProtocolError(ProtocolErrorKind::MalformedEnvelope, std::string("body is not JSON: ") + e.what());
  }
}

void only_keys(const json& node, const std::string& where, std::initializer_list<std::string_view> keys) {
  if (!node.is_object()) violation(where + " must be an object");
  for (const auto& [key, _] : node.items()) {
    bool allowed = false;
    for (auto k : keys) allowed = allowed || key == k;
    if (!allowed) violation(where + " has unknown key '" + key + "'");
  }
}

const json& field(const json& node, const std::string& where, const char* key) {
  auto it = node.find(key);
  if (it == node.end()) violation(where + "." + key + " is required");
  return *it;
}

std::string string_field(const json& node, const std::string& where, const char* key) {
  const json& value = field(node, where, key);
  if (!value.is_string()) violation(where + "." + key + " must be a string");
  return value.get<std::string>();
}

double number_in(const json& value, const std::string& where, double lo, double hi) {
  if (!value.is_number()) violation(where + " must be a number");
  const double v = value.get<double>();
  if (!(v >= lo && v <= hi)) violation(where + " out of range");
  return v;
}

json pose_json(const Pose& pose) {
  return {{"position", {pose.position.x, pose.position.y, pose.position.z}}, {"yaw", pose.yaw}};
}

Pose pose_from(const json& node, const std::string& where) {
  only_keys(node, where, {"position", "yaw"});
  const json& position = field(node, where, "position");
  if (!position.is_array() || position.size() != 3) violation(where + ".position must be [x, y, z]");
  Pose pose;
  const double inf = std::numeric_limits<double>::max();
  pose.position = {number_in(position[0], where + ".position[0]", -inf, inf),
                   number_in(position[1], where + ".position[1]", -inf, inf),
                   number_in(position[2], where + ".position[2]", -inf, inf)};
  pose.yaw = number_in(field(node, where, "yaw"), where + ".yaw", -inf, inf);
  return pose;
}

json grid_json(const SalienceGrid& grid) {
  return {{"width", grid.width}, {"height", grid.height}, {"values", grid.values}};
}

SalienceGrid grid_from(const json& node) {
  only_keys(node, "salience", {"width", "height", "values"});
  const json& width = field(node, "salience", "width");
  const json& height = field(node, "salience", "height");
  if (!width.is_number_integer() || !height.is_number_integer() || width.get<long long>() < 1 ||
      height.get<long long>() < 1 || width.get<long long>() > 4096 || height.get<long long>() > 4096) {
    violation("salience dims must be integers in [1, 4096]");
  }
  SalienceGrid grid;
  grid.width = width.get<int>();
  grid.height = height.get<int>();
  const json& values = field(node, "salience", "values");
  if (!values.is_array() || values.size() != static_cast<std::size_t>(grid.width) * grid.height) {
    violation("salience.values must hold width*height numbers");
  }
  grid.values.reserve(values.size());
  for (const auto& v : values) grid.values.push_back(number_in(v, "salience.values[]", 0.0, 1.0));
  return grid;
}

std::string_view role_name(Role role) { return role == Role::Engine ? "engine" : "controller"; }

}  // namespace

std::string_view protocol_error_name(ProtocolErrorKind kind) {
  switch (kind) {
    case ProtocolErrorKind::ExhaustedRetries: return "exhausted retries";
    case ProtocolErrorKind::MalformedEnvelope: return "malformed envelope";
    case ProtocolErrorKind::SchemaViolation: return "schema violation";
    case ProtocolErrorKind::Rejected: return "request rejected";
  }
  return "protocol error";
}

void BackendEndpoint::validate() const {
  if (base_url.empty()) throw std::invalid_argument("endpoint base URL is empty");
  if (timeout_ms <= 0) throw std::invalid_argument("timeout must be positive");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (backoff_initial_ms < 0 || !(backoff_multiplier >= 1.0)) {
    throw std::invalid_argument("backoff must be non-negative with multiplier >= 1");
  }
}

std::string encode_controller_request(const ControllerTurnRequest& request) {
  json history = json::array();
  for (const auto& message : request.history) {
    history.push_back({{"role", role_name(message.role)}, {"text", message.text}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"history", std::move(history)},
              {"mode", mode_name(request.mode)},
              {"preamble_id", request.preamble_id}}
      .dump();
}

ControllerTurnRequest decode_controller_request(std::string_view body) {
  const json doc = parse_body(body);
  only_keys(doc, "request", {"schema_version", "history", "mode", "preamble_id"});
  if (string_field(doc, "request", "schema_version") != kSchemaVersion) violation("unsupported schema_version");
  ControllerTurnRequest request;
  const json& history = field(doc, "request", "history");
  if (!history.is_array() || history.empty()) violation("request.history must be a nonempty array");
  for (const auto& item : history) {
    only_keys(item, "history[]", {"role", "text"});
    const std::string role = string_field(item, "history[]", "role");
    if (role != "engine" && role != "controller") violation("history[].role must be engine or controller");
    request.history.push_back({role == "engine" ? Role::Engine : Role::Controller,
                               string_field(item, "history[]", "text")});
  }
  if (request.history.front().role != Role::Engine) violation("history must open with the engine bootstrap");
  try {
    request.mode = parse_mode(string_field(doc, "request", "mode"));
  } catch (const std::invalid_argument& e) {
    violation(e.what());
  }
  request.preamble_id = string_field(doc, "request", "preamble_id");
  return request;
}

std::string encode_controller_response(std::string_view text) {
  return json{{"schema_version", kSchemaVersion}, {"text", text}}.dump();
}

std::string decode_controller_response(std::string_view body) {
  const json doc = parse_body(body);
  if (!doc.is_object()) throw ProtocolError(ProtocolErrorKind::MalformedEnvelope, "response must be an object");
  only_keys(doc, "response", {"schema_version", "text"});
  if (string_field(doc, "response", "schema_version") != kSchemaVersion) violation("unsupported schema_version");
  return string_field(doc, "response", "text");
}

std::string encode_perception_request(const PerceptionQueryRequest& request) {
  json view;
  if (request.view) {
    view = {{"pose", pose_json(request.view->pose)}, {"scene", request.view->scene}};
  } else if (request.image_base64) {
    view = {{"image_base64", *request.image_base64}};
  }
  return json{{"schema_version", kSchemaVersion},
              {"question", request.question},
              {"view", std::move(view)},
              {"sample_key", request.sample_key}}
      .dump();
}

PerceptionQueryRequest decode_perception_request(std::string_view body) {
  const json doc = parse_body(body);
  only_keys(doc, "request", {"schema_version", "question", "view", "sample_key"});
  if (string_field(doc, "request", "schema_version") != kSchemaVersion) violation("unsupported schema_version");
  PerceptionQueryRequest request;
  request.question = string_field(doc, "request", "question");
  if (request.question.empty()) violation("request.question must be nonempty");
  const json& view = field(doc, "request", "view");
  only_keys(view, "view", {"pose", "scene", "image_base64"});
  const bool structured = view.contains("pose") || view.contains("scene");
  const bool image = view.contains("image_base64");
  if (structured == image) violation("view must hold exactly one of {pose, scene} or image_base64");
  if (structured) {
    request.view = StructuredView{pose_from(field(view, "view", "pose"), "view.pose"),
                                  string_field(view, "view", "scene")};
  } else {
    request.image_base64 = string_field(view, "view", "image_base64");
  }
  if (auto it = doc.find("sample_key"); it != doc.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
      violation("sample_key must be a non-negative integer");
    }
    request.sample_key = it->get<std::uint64_t>();
  }
  return request;
}

std::string encode_perception_response(const PerceptionQueryResponse& response) {
  json doc{{"schema_version", kSchemaVersion},
           {"answer", response.answer},
           {"caption", response.caption},
           {"match_score", response.match_score}};
  if (response.salience) doc["salience"] = grid_json(*response.salience);
  return doc.dump();
}

PerceptionQueryResponse decode_perception_response(std::string_view body) {
  const json doc = parse_body(body);
  if (!doc.is_object()) throw ProtocolError(ProtocolErrorKind::MalformedEnvelope, "response must be an object");
  only_keys(doc, "response", {"schema_version", "answer", "caption", "match_score", "salience"});
  if (string_field(doc, "response", "schema_version") != kSchemaVersion) violation("unsupported schema_version");
  PerceptionQueryResponse response;
  response.answer = string_field(doc, "response", "answer");
  response.caption = string_field(doc, "response", "caption");
  response.match_score = number_in(field(doc, "response", "match_score"), "response.match_score", 0.0, 1.0);
  if (auto it = doc.find("salience"); it != doc.end() && !it->is_null()) response.salience = grid_from(*it);
  return response;
}

std::string build_controller_preamble(const PreambleConfig& config) {
  std::string text =
      "This is a game. You pilot a drone through a simulated environment and the commands below are "
      "your only controls. A visual question answering model looks through the drone camera: after "
      "every turn you receive its answer to your question, a caption of the current view and a "
      "matching score between 0 and 1 telling how well that caption fits the image.\n"
      "\n"
      "Active perception commands:\n"
      "- move closer: move 10 meters forward.\n"
      "- move back: move 5 meters backwards.\n"
      "- move right: move 10 meters to the right.\n"
      "- move left: move 10 meters to the left.\n"
      "\n"
      "General control commands:\n"
      "- save position: save the current position of the drone so it can be revisited.\n"
      "- ask a question: ask the vision model an exploratory question.\n"
      "- i know enough: finish exploring and return to the starting position.\n"
      "\n"
      "General rules:\n"
      "- Answer with exactly one line 'command: <command>' using one of the seven commands above.\n"
      "- A move or 'ask a question' may add one line 'question: <question>'. 'save position' and 'i "
      "know enough' never carry a question.\n"
      "- Prefer questions of the form 'is there a <thing>?', 'how many <thing>?' or 'what <property> "
      "is the <thing>?'.\n"
      "- Write nothing else: no explanations, no extra lines.\n"
      "\n"
      "Active perception rules:\n"
      "- Move towards regions whose captions score well and away from views that return nothing.\n"
      "- Look to the left and to the right before deciding that you know enough.\n"
      "- Save the position whenever the view shows something new or scores highly.\n"
      "\n"
      "Visual question answering rules:\n"
      "- Treat captions with a low matching score as unreliable.\n"
      "- Ask about anything you are unsure of instead of assuming it.\n"
      "- Only report objects that the captions or answers actually mention.\n"
      "\n"
      "Goal: build a detailed description of the observed scene and stay alert for anomalies such as "
      "fire, smoke or crashed vehicles that could make the situation hazardous. When asked for a "
      "summary, reply with 'description: <text>', 'caption: <text>' and one 'validate: <fact>' line "
      "for each piece of information you want to check again.\n";
  if (config.early_stop) {
    text +=
        "\nAnomaly rule: as soon as you suspect an anomaly, stop exploring and reply 'command: i know "
        "enough' so that validation and the final report start right away.\n";
  }
  return text;
}

std::string call_controller(const ProtocolClient& client, const ControllerTurnRequest& request,
                            CallStats* stats) {
  return decode_controller_response(client.post(kControllerTurnPath, encode_controller_request(request), stats));
}

std::string call_controller_summary(const ProtocolClient& client, const ControllerTurnRequest& request,
                                    CallStats* stats) {
  return decode_controller_response(
      client.post(kControllerSummaryPath, encode_controller_request(request), stats));
}

PerceptionQueryResponse call_perception(const ProtocolClient& client, const PerceptionQueryRequest& request,
                                        CallStats* stats) {
  return decode_perception_response(client.post(kPerceptionQueryPath, encode_perception_request(request), stats));
}

std::string RemoteController::next_turn(const std::vector<Message>& history, Mode mode) {
  return call_controller(*client_, {history, mode, std::string(kPreambleId)});
}

std::string RemoteController::summary(const std::vector<Message>& history) {
  return call_controller_summary(*client_, {history, Mode::Validation, std::string(kPreambleId)});
}

PerceptionQueryResponse RemotePerception::query(const PerceptionQueryRequest& request) {
  return call_perception(*client_, request);
}

}  // namespace skytalk
