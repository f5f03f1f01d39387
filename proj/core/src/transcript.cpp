#include "json.hpp"
#include "skytalk/engine.hpp"

namespace skytalk {

std::string transcript_jsonl(const std::vector<TurnRecord>& transcript) {
  using nlohmann::json;
  std::string out;
  for (const auto& record : transcript) {
    json line;
    line["step"] = record.step;
    line["mode"] = std::string(mode_name(record.mode));
    line["directive_text"] = record.directive_text;
    line["question"] = record.question ? json(*record.question) : json(nullptr);
    line["answer"] = record.answer ? json(*record.answer) : json(nullptr);
    line["caption"] = record.caption ? json(*record.caption) : json(nullptr);
    line["match_score"] = record.match_score ? json(*record.match_score) : json(nullptr);
    line["pose"] = {{"position", {record.pose.position.x, record.pose.position.y, record.pose.position.z}},
                    {"yaw", record.pose.yaw}};
    line["flags"] = record.flags;
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace skytalk
