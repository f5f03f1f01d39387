#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "skytalk/backends.hpp"

namespace fake {

// Replays canned turns; repeats the last one when the queue runs dry.
class Controller final : public skytalk::ControllerBackend {
 public:
  Controller(std::deque<std::string> turns, std::string summary)
      : turns_(std::move(turns)), summary_(std::move(summary)) {}

  std::string next_turn(const std::vector<skytalk::Message>&, skytalk::Mode) override {
    ++turn_calls;
    if (turns_.size() > 1) {
      std::string t = turns_.front();
      turns_.pop_front();
      return t;
    }
    return turns_.front();
  }
  std::string summary(const std::vector<skytalk::Message>&) override {
    ++summary_calls;
    return summary_;
  }

  int turn_calls = 0;
  int summary_calls = 0;

 private:
  std::deque<std::string> turns_;
  std::string summary_;
};

class Perception final : public skytalk::PerceptionBackend {
 public:
  using Handler = std::function<skytalk::PerceptionQueryResponse(const skytalk::PerceptionQueryRequest&)>;
  explicit Perception(Handler handler) : handler_(std::move(handler)) {}
  skytalk::PerceptionQueryResponse query(const skytalk::PerceptionQueryRequest& request) override {
    requests.push_back(request);
    return handler_(request);
  }
  std::vector<skytalk::PerceptionQueryRequest> requests;

 private:
  Handler handler_;
};

inline skytalk::PerceptionQueryResponse reply(std::string answer, std::string caption, double score) {
  return {std::move(answer), std::move(caption), score, std::nullopt};
}

}  // namespace fake
