#include "skytalk/controller.hpp"

#include <algorithm>

namespace skytalk {
namespace {

constexpr const char* kFireNote =
    "Fire hazard: alert fire services, keep people clear of the area and prepare evacuation and "
    "suppression.";
constexpr const char* kCrashNote =
    "Vehicle crash: notify emergency services and secure the site for responders.";
constexpr const char* kSmokeNote =
    "Smoke observed: investigate the source and monitor for a spreading fire.";

const std::string kOpenQuestion = "what do you see?";

std::string list_phrases(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    out += items[i];
  }
  return out;
}

std::string with_article(const Fact& fact) {
  return fact.polarity == Polarity::Absent ? render_fact(fact) : std::string(indefinite_article(fact_phrase(fact))) + " " + fact_phrase(fact);
}

bool watch_fact(const Fact& fact, const std::vector<std::string>& watchlist) {
  return fact.polarity == Polarity::Present && has_anomaly_token(fact, watchlist);
}

}  // namespace

SafetyTable::SafetyTable()
    : notes_{{"fire", kFireNote},   {"flame", kFireNote},   {"burning", kFireNote},
             {"crash", kCrashNote}, {"crashed", kCrashNote}, {"smoke", kSmokeNote}} {}

const std::string* SafetyTable::lookup(std::string_view token) const {
  auto it = notes_.find(token);
  return it == notes_.end() ? nullptr : &it->second;
}

std::vector<std::string> SafetyTable::tokens() const {
  std::vector<std::string> out;
  for (const auto& [token, _] : notes_) out.push_back(token);
  return out;
}

void absorb_result(ControllerBelief& belief, const std::vector<Fact>& caption_facts, double score,
                   const PolicyConfig& config) {
  const int step = belief.observations++;
  bool novel_label = false;
  for (const auto& fact : caption_facts) {
    if (fact.polarity != Polarity::Present) continue;
    const bool label_known =
        std::any_of(belief.heard_facts.begin(), belief.heard_facts.end(),
                    [&](const HeardFact& h) { return h.fact.subject_label == fact.subject_label; });
    if (!label_known) novel_label = true;
    auto it = std::find_if(belief.heard_facts.begin(), belief.heard_facts.end(),
                           [&](const HeardFact& h) { return h.fact == fact; });
    if (it == belief.heard_facts.end()) {
      belief.heard_facts.push_back({fact, 1, step, step});
    } else {
      ++it->count;
      it->last_heard = step;
    }
    for (const auto& token : config.watchlist) {
      if (has_anomaly_token(fact, {token})) belief.watchlist_hits.insert(token);
    }
  }
  belief.last_scores.push_back(score);
  while (belief.last_scores.size() > ControllerBelief::kScoreWindow) belief.last_scores.pop_front();
  belief.save_pending = novel_label || score >= config.save_score_threshold;
}

void absorb_directive(ControllerBelief& belief, const TurnDirective& directive) {
  switch (directive.command) {
    case Command::SavePosition:
      ++belief.saves_made;
      belief.save_pending = false;
      belief.saved_spots.insert({belief.forward_offset, belief.lateral_offset});
      break;
    case Command::MoveCloser:
      ++belief.closer_moves;
      belief.forward_offset += 10;
      belief.swept_directions.insert("closer");
      break;
    case Command::MoveLeft:
      if (++belief.lateral_offset >= 1) belief.swept_directions.insert("left");
      break;
    case Command::MoveRight:
      if (--belief.lateral_offset <= -1) belief.swept_directions.insert("right");
      break;
    case Command::AskQuestion:
      if (directive.question && directive.question->kind == QuestionKind::Presence) {
        try {
          const Fact subject = parse_fact(directive.question->subject);
          belief.asked_tokens.insert(subject.subject_label);
          for (const auto& a : subject.attributes) belief.asked_tokens.insert(a);
        } catch (const GrammarError&) {
        }
      }
      break;
    case Command::MoveBack:
      belief.forward_offset -= 5;
      break;
    case Command::IKnowEnough:
      break;
  }
}

bool window_improving(const ControllerBelief& belief) {
  const auto& w = belief.last_scores;
  if (w.size() < 2) return false;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (!(w[i] > w[i - 1])) return false;
  }
  return true;
}

TurnDirective scripted_next_turn(const ControllerBelief& belief, const std::vector<Fact>& last_caption_facts,
                                 const PolicyConfig& config) {
  const bool spot_saved = belief.saved_spots.count({belief.forward_offset, belief.lateral_offset}) > 0;
  if (belief.save_pending && !spot_saved && belief.saves_made < config.save_budget) {
    return {Command::SavePosition, std::nullopt};
  }

  for (const auto& fact : last_caption_facts) {
    if (!watch_fact(fact, config.watchlist)) continue;
    bool asked = belief.asked_tokens.count(fact.subject_label) > 0;
    for (const auto& a : fact.attributes) asked = asked || belief.asked_tokens.count(a) > 0;
    if (!asked) return {Command::AskQuestion, Question::presence(fact_phrase(fact))};
  }

  if (window_improving(belief) && belief.closer_moves < config.closer_budget) {
    return {Command::MoveCloser, Question::open(kOpenQuestion)};
  }
  if (!belief.swept_directions.count("left")) {
    return {Command::MoveLeft, Question::open(kOpenQuestion)};
  }
  if (!belief.swept_directions.count("right")) {
    return {Command::MoveRight, Question::open(kOpenQuestion)};
  }
  return {Command::IKnowEnough, std::nullopt};
}

SummaryDirective scripted_summary(const ControllerBelief& belief, const PolicyConfig& config) {
  SummaryDirective summary;

  auto by_recency = belief.heard_facts;
  std::stable_sort(by_recency.begin(), by_recency.end(),
                   [](const HeardFact& a, const HeardFact& b) { return a.last_heard > b.last_heard; });
  std::vector<std::string> phrases;
  for (const auto& h : by_recency) phrases.push_back(with_article(h.fact));
  summary.description = phrases.empty() ? "Nothing notable has been observed."
                                        : "Observed so far: " + list_phrases(phrases) + ".";

  auto by_count = belief.heard_facts;
  std::stable_sort(by_count.begin(), by_count.end(), [](const HeardFact& a, const HeardFact& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.first_heard < b.first_heard;
  });
  std::vector<Fact> caption_facts;
  for (const auto& h : by_count) {
    if (caption_facts.size() == kCaptionFactCap) break;
    caption_facts.push_back(h.fact);
  }
  summary.caption = render_caption(caption_facts);

  auto add_target = [&](const Fact& fact) {
    if (std::find(summary.validation_targets.begin(), summary.validation_targets.end(), fact) ==
        summary.validation_targets.end()) {
      summary.validation_targets.push_back(fact);
    }
  };
  for (const auto& h : belief.heard_facts) {
    if (h.count == 1) add_target(h.fact);
  }
  for (const auto& h : belief.heard_facts) {
    if (watch_fact(h.fact, config.watchlist)) add_target(h.fact);
  }
  // Everything was heard repeatedly: validate the caption instead of nothing.
  if (summary.validation_targets.empty()) {
    for (const auto& fact : caption_facts) add_target(fact);
  }
  return summary;
}

FinalComposition compose_final(const std::vector<Fact>& confirmed, const SafetyTable& safety) {
  const auto tokens = safety.tokens();
  std::vector<Fact> anomalies;
  std::vector<Fact> ordinary;
  for (const auto& fact : confirmed) {
    (watch_fact(fact, tokens) ? anomalies : ordinary).push_back(fact);
  }

  FinalComposition out;
  if (confirmed.empty()) {
    out.description = "No notable objects were confirmed in the scene and no anomalies were detected.";
    out.caption = std::string(kNothingNotable);
    return out;
  }

  std::vector<std::string> phrases;
  for (const auto& fact : confirmed) phrases.push_back(with_article(fact));
  out.description = "The validated scene contains " + list_phrases(phrases) + ".";
  if (anomalies.empty()) {
    out.description += " No anomalies were detected.";
  } else {
    std::vector<std::string> hazards;
    for (const auto& fact : anomalies) hazards.push_back(with_article(fact));
    out.description += " Hazard detected: " + list_phrases(hazards) + ".";
  }

  std::vector<Fact> caption_facts;
  for (const auto* group : {&anomalies, &ordinary}) {
    for (const auto& fact : *group) {
      if (fact.polarity != Polarity::Present || caption_facts.size() == kCaptionFactCap) continue;
      caption_facts.push_back(fact);
    }
  }
  out.caption = render_caption(caption_facts);

  for (const auto& fact : anomalies) {
    std::vector<std::string> fact_tokens = fact.attributes;
    fact_tokens.push_back(fact.subject_label);
    for (const auto& token : fact_tokens) {
      const std::string* note = safety.lookup(token);
      if (note && std::find(out.safety_notes.begin(), out.safety_notes.end(), *note) ==
                      out.safety_notes.end()) {
        out.safety_notes.push_back(*note);
      }
    }
  }
  return out;
}

ControllerBelief replay_history(const std::vector<Message>& history, const PolicyConfig& config) {
  ControllerBelief belief;
  for (const auto& message : history) {
    if (message.role == Role::Controller) {
      try {
        absorb_directive(belief, parse_turn(message.text));
      } catch (const GrammarError&) {
        // Summaries and rejected turns carry no directive.
      }
      continue;
    }
    const Observation observation = parse_observation(message.text);
    if (!observation.has_result()) continue;
    std::vector<Fact> facts;
    try {
      facts = parse_caption(*observation.caption);
    } catch (const GrammarError&) {
    }
    absorb_result(belief, facts, observation.score.value_or(0.0), config);
  }
  return belief;
}

namespace {
std::vector<Fact> last_caption_facts(const std::vector<Message>& history) {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->role != Role::Engine) continue;
    const Observation observation = parse_observation(it->text);
    if (!observation.has_result()) continue;
    try {
      return parse_caption(*observation.caption);
    } catch (const GrammarError&) {
      return {};
    }
  }
  return {};
}
}  // namespace

std::string ScriptedController::next_turn(const std::vector<Message>& history, Mode /*mode*/) {
  const ControllerBelief belief = replay_history(history, config_);
  return serialize(scripted_next_turn(belief, last_caption_facts(history), config_));
}

std::string ScriptedController::summary(const std::vector<Message>& history) {
  return serialize(scripted_summary(replay_history(history, config_), config_));
}

}  // namespace skytalk
