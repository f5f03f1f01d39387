#include "skytalk/backends.hpp"

#include <charconv>
#include <system_error>

#include "skytalk/grammar.hpp"

namespace skytalk {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::ActivePerception: return "active_perception";
    case Mode::Validation: return "validation";
    case Mode::Explanation: return "explanation";
    case Mode::Done: return "done";
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::ActivePerception, Mode::Validation, Mode::Explanation, Mode::Done}) {
    if (mode_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

std::string format_double(double value) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw std::runtime_error("cannot format double");
  return std::string(buffer, end);
}

std::string format_observation(const Observation& observation) {
  std::string out = "event: " + observation.event;
  if (observation.question) out += "\nquestion: " + *observation.question;
  if (observation.answer) out += "\nanswer: " + *observation.answer;
  if (observation.caption) out += "\ncaption: " + *observation.caption;
  if (observation.score) out += "\nscore: " + format_double(*observation.score);
  return out;
}

Observation parse_observation(std::string_view text) {
  Observation observation;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const std::string_view line =
        trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const std::string_view key = trim(line.substr(0, colon));
    const std::string value(trim(line.substr(colon + 1)));
    if (key == "event") {
      observation.event = value;
    } else if (key == "question") {
      observation.question = value;
    } else if (key == "answer") {
      observation.answer = value;
    } else if (key == "caption") {
      observation.caption = value;
    } else if (key == "score") {
      double score = 0.0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), score);
      if (ec == std::errc{} && ptr == value.data() + value.size()) observation.score = score;
    }
  }
  return observation;
}

OraclePerception::OraclePerception(NoiseModel noise, GridDims grid) : noise_(noise), grid_(grid) {
  noise_.validate();
}

void OraclePerception::add_scene(std::shared_ptr<const Scene> scene) {
  const std::string name = scene->name;
  scenes_[name] = std::move(scene);
}

const Scene* OraclePerception::scene(std::string_view name) const {
  auto it = scenes_.find(name);
  return it == scenes_.end() ? nullptr : it->second.get();
}

PerceptionResult OraclePerception::query_full(const PerceptionQueryRequest& request) const {
  if (!request.view) throw BackendError("synthetic perception needs a structured view");
  const Scene* target = scene(request.view->scene);
  if (target == nullptr) throw BackendError("unknown scene '" + request.view->scene + "'");
  Rng rng(derive_seed(noise_.seed, request.sample_key));
  try {
    return skytalk::query(*target, ViewQuery{request.view->pose, parse_question(request.question)},
                          noise_, rng, grid_);
  } catch (const PerceptionError& e) {
    throw BackendError(e.what());
  }
}

PerceptionQueryResponse OraclePerception::query(const PerceptionQueryRequest& request) {
  PerceptionResult result = query_full(request);
  return {std::move(result.answer), std::move(result.caption), result.match_score,
          std::move(result.salience)};
}

}  // namespace skytalk
