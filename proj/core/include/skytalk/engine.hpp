#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skytalk/backends.hpp"
#include "skytalk/controller.hpp"
#include "skytalk/fact.hpp"
#include "skytalk/grammar.hpp"
#include "skytalk/perception.hpp"
#include "skytalk/rng.hpp"
#include "skytalk/scene.hpp"

namespace skytalk {

struct EpisodeConfig {
  int max_steps = 24;
  double sigma = 1.0;  // meters, perturbation of saved positions
  int validation_samples = 3;
  bool early_stop = true;
  std::vector<std::string> anomaly_lexicon = default_anomaly_lexicon();
  std::uint64_t seed = 0;
  GridDims salience_grid{};

  /// Throws std::invalid_argument on a broken invariant.
  void validate() const;
};

enum class FactStatus { Candidate, Confirmed, Refuted };
std::string_view status_name(FactStatus status);

struct LedgerEntry {
  Fact fact;
  int source_step = 0;
  Pose source_pose;
  FactStatus status = FactStatus::Candidate;
  int votes_for = 0;
  int votes_against = 0;
  /// Index into the validation positions whose samples decide this fact.
  int anchor = -1;
};

/// One line of the transcript.
struct TurnRecord {
  int step = 0;
  Mode mode = Mode::ActivePerception;
  std::string directive_text;
  std::optional<std::string> question;
  std::optional<std::string> answer;
  std::optional<std::string> caption;
  std::optional<double> match_score;
  Pose pose;
  std::vector<std::string> flags;

  bool queried() const { return match_score.has_value(); }
  bool has_flag(std::string_view flag) const;
};

struct BestPair {
  Fact target;
  std::string question;
  Pose pose;
  double match_score = 0.0;
  SalienceGrid salience;
  int step = 0;  // transcript index of the query
};

struct EpisodeState {
  Mode mode = Mode::ActivePerception;
  Pose pose;
  std::vector<Pose> saved;
  std::vector<LedgerEntry> ledger;
  std::vector<TurnRecord> transcript;
  std::vector<Message> history;
  int step = 0;  // active-perception steps taken
  bool anomaly_flag = false;
  std::vector<BestPair> best_pairs;  // descending match_score

  std::optional<SummaryDirective> summary;
  std::uint64_t queries_issued = 0;
  int validation_queries = 0;
  double spawn_score = 0.0;
  std::vector<double> validation_scores;
  std::vector<Pose> validation_positions;
};

struct ExplanationPair {
  std::string question;
  SalienceGrid salience;
  int step = 0;
};

struct PositionScore {
  Pose pose;
  double match_score = 0.0;
};

struct EpisodeMetrics {
  double spawn_score = 0.0;
  std::vector<double> validation_scores;
  std::vector<PositionScore> position_scores;
  int active_steps = 0;
  int total_queries = 0;
  int validation_queries = 0;
  int validation_positions = 0;
  int validation_targets = 0;
  bool anomaly_detected = false;
};

struct EpisodeReport {
  std::string final_description;
  std::string final_caption;
  std::vector<std::string> safety_notes;
  std::vector<Fact> confirmed_facts;
  std::vector<Fact> refuted_facts;
  std::vector<ExplanationPair> explanation_pairs;
  EpisodeMetrics metrics;
  std::vector<TurnRecord> transcript;
  SummaryDirective summary;
};

/// Everything an episode reads but does not own.
struct EpisodeContext {
  const Scene& scene;
  const EpisodeConfig& config;
  ControllerBackend& controller;
  PerceptionBackend& perception;
  SafetyTable safety{};
};

enum class EpisodeErrorKind { ControllerParse, SummaryParse, Backend, Precondition };

/// An episode that cannot continue. `turn()` is the transcript index at which
/// it stopped.
class EpisodeError : public std::runtime_error {
 public:
  EpisodeError(EpisodeErrorKind kind, int turn, const std::string& message)
      : std::runtime_error("turn " + std::to_string(turn) + ": " + message), kind_(kind), turn_(turn) {}
  EpisodeErrorKind kind() const { return kind_; }
  int turn() const { return turn_; }

 private:
  EpisodeErrorKind kind_;
  int turn_;
};

EpisodeState start_episode(const EpisodeContext& context);
EpisodeState step_active(EpisodeState state, const EpisodeContext& context);
EpisodeState run_validation(EpisodeState state, const EpisodeContext& context, Rng& rng);
EpisodeReport finalize(EpisodeState& state, const EpisodeContext& context);

/// Runs all modes to Done. Validation perturbations draw from a stream
/// derived from config.seed.
EpisodeReport run_episode(const EpisodeContext& context);

/// Seed of the validation perturbation stream for an episode seed.
std::uint64_t validation_stream_seed(std::uint64_t episode_seed);
/// sample_key of the n-th perception query of an episode.
std::uint64_t query_sample_key(std::uint64_t episode_seed, std::uint64_t query_index);

/// One JSON object per line: step, mode, directive_text, question, answer,
/// caption, match_score, pose, flags.
std::string transcript_jsonl(const std::vector<TurnRecord>& transcript);

}  // namespace skytalk
