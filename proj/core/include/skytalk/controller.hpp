#pragma once

#include <deque>
#include <map>
#include <set>
#include <utility>
#include <string>
#include <vector>

#include "skytalk/backends.hpp"
#include "skytalk/fact.hpp"
#include "skytalk/grammar.hpp"

namespace skytalk {

/// Anomaly token -> safety note. Every watchlist token has an entry.
class SafetyTable {
 public:
  SafetyTable();
  explicit SafetyTable(std::map<std::string, std::string> notes) : notes_(notes.begin(), notes.end()) {}

  const std::string* lookup(std::string_view token) const;
  std::vector<std::string> tokens() const;

 private:
  std::map<std::string, std::string, std::less<>> notes_;
};

struct PolicyConfig {
  int save_budget = 3;
  int closer_budget = 3;
  double save_score_threshold = 0.8;
  std::vector<std::string> watchlist = default_anomaly_lexicon();
};

struct HeardFact {
  Fact fact;
  int count = 0;
  int first_heard = 0;
  int last_heard = 0;
};

/// What the scripted controller remembers of the dialogue so far.
struct ControllerBelief {
  std::vector<HeardFact> heard_facts;
  std::deque<double> last_scores;  // at most kScoreWindow entries
  std::set<std::string> swept_directions;  // "closer", "left", "right"
  std::set<std::string> watchlist_hits;
  std::set<std::string> asked_tokens;
  int saves_made = 0;
  int closer_moves = 0;
  int lateral_offset = 0;  // +1 per move left, -1 per move right
  int forward_offset = 0;  // meters, dead reckoning of closer/back moves
  std::set<std::pair<int, int>> saved_spots;  // (forward_offset, lateral_offset)
  int observations = 0;
  bool save_pending = false;

  static constexpr std::size_t kScoreWindow = 3;
};

/// Folds one perception result into the belief.
void absorb_result(ControllerBelief& belief, const std::vector<Fact>& caption_facts, double score,
                   const PolicyConfig& config);
/// Folds one of the controller's own directives into the belief.
void absorb_directive(ControllerBelief& belief, const TurnDirective& directive);

/// Rebuilds the belief from a dialogue history.
ControllerBelief replay_history(const std::vector<Message>& history, const PolicyConfig& config);

bool window_improving(const ControllerBelief& belief);

/// Deterministic stand-in for the LLM's next turn. Rules in priority order:
/// save on novelty or a high score, ask about watchlist tokens, move closer
/// while scores improve, sweep left then right, then stop.
TurnDirective scripted_next_turn(const ControllerBelief& belief, const std::vector<Fact>& last_caption_facts,
                                 const PolicyConfig& config = {});

SummaryDirective scripted_summary(const ControllerBelief& belief, const PolicyConfig& config = {});

struct FinalComposition {
  std::string description;
  std::string caption;
  std::vector<std::string> safety_notes;
};

FinalComposition compose_final(const std::vector<Fact>& confirmed, const SafetyTable& safety);

/// ControllerBackend implemented by the scripted policy. Stateless: the belief
/// is rebuilt from the history on every call.
class ScriptedController final : public ControllerBackend {
 public:
  explicit ScriptedController(PolicyConfig config = {}) : config_(std::move(config)) {}

  std::string next_turn(const std::vector<Message>& history, Mode mode) override;
  std::string summary(const std::vector<Message>& history) override;

  const PolicyConfig& config() const { return config_; }

 private:
  PolicyConfig config_;
};

}  // namespace skytalk
