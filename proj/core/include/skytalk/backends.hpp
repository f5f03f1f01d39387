#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "skytalk/perception.hpp"
#include "skytalk/scene.hpp"

namespace skytalk {

enum class Mode { ActivePerception, Validation, Explanation, Done };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

enum class Role { Engine, Controller };

struct Message {
  Role role = Role::Engine;
  std::string text;
  friend bool operator==(const Message&, const Message&) = default;
};

/// What the engine reports back to the controller after each turn.
///
/// Rendered as "key: value" lines: event, question, answer, caption, score.
/// Only the keys that apply are present.
struct Observation {
  std::string event;
  std::optional<std::string> question;
  std::optional<std::string> answer;
  std::optional<std::string> caption;
  std::optional<double> score;

  bool has_result() const { return caption.has_value(); }
  friend bool operator==(const Observation&, const Observation&) = default;
};

std::string format_observation(const Observation& observation);
Observation parse_observation(std::string_view text);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Raised when a backend cannot produce a usable reply.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The f(A, C) side. Replies are text in the canonical turn / summary grammar.
class ControllerBackend {
 public:
  virtual ~ControllerBackend() = default;
  virtual std::string next_turn(const std::vector<Message>& history, Mode mode) = 0;
  virtual std::string summary(const std::vector<Message>& history) = 0;
};

struct StructuredView {
  Pose pose;
  std::string scene;
};

struct PerceptionQueryRequest {
  std::string question;
  std::optional<StructuredView> view;
  std::optional<std::string> image_base64;
  /// Keys the noise draws of synthetic backends; real models ignore it.
  std::uint64_t sample_key = 0;
};

struct PerceptionQueryResponse {
  std::string answer;
  std::string caption;
  double match_score = 0.0;
  std::optional<SalienceGrid> salience;
  friend bool operator==(const PerceptionQueryResponse&, const PerceptionQueryResponse&) = default;
};

/// The g(Q, I) side.
class PerceptionBackend {
 public:
  virtual ~PerceptionBackend() = default;
  virtual PerceptionQueryResponse query(const PerceptionQueryRequest& request) = 0;
};

/// In-process synthetic perception over a set of named scenes.
class OraclePerception final : public PerceptionBackend {
 public:
  OraclePerception(NoiseModel noise, GridDims grid = {});

  void add_scene(std::shared_ptr<const Scene> scene);
  const Scene* scene(std::string_view name) const;

  PerceptionQueryResponse query(const PerceptionQueryRequest& request) override;

  /// Full oracle output for a request, including structured facts.
  PerceptionResult query_full(const PerceptionQueryRequest& request) const;

  const NoiseModel& noise() const { return noise_; }

 private:
  NoiseModel noise_;
  GridDims grid_;
  std::map<std::string, std::shared_ptr<const Scene>, std::less<>> scenes_;
};

}  // namespace skytalk
