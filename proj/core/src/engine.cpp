#include "skytalk/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace skytalk {
namespace {

constexpr std::uint64_t kValidationStreamTag = 0x76616c6964ULL;  // "valid"
constexpr std::uint64_t kQueryStreamTag = 0x7175657279ULL;       // "query"

struct QueryOutcome {
  PerceptionQueryResponse response;
  std::vector<Fact> facts;
  int record_index = 0;
};

int next_record_index(const EpisodeState& state) { return static_cast<int>(state.transcript.size()); }

PerceptionQueryResponse ask(EpisodeState& state, const EpisodeContext& context, const Pose& pose,
                            const std::string& question) {
  PerceptionQueryRequest request;
  request.question = question;
  request.view = StructuredView{pose, context.scene.name};
  request.sample_key = query_sample_key(context.config.seed, state.queries_issued++);
  try {
    PerceptionQueryResponse response = context.perception.query(request);
    if (!(response.match_score >= 0.0 && response.match_score <= 1.0)) {
      throw BackendError("perception score outside [0, 1]");
    }
    return response;
  } catch (const BackendError& e) {
    throw EpisodeError(EpisodeErrorKind::Backend, next_record_index(state), e.what());
  }
}

std::vector<Fact> caption_facts_of(const PerceptionQueryResponse& response) {
  try {
    return parse_caption(response.caption);
  } catch (const GrammarError&) {
    return {};
  }
}

// Adds unseen facts to the ledger. Returns true if any new present fact
// carries an anomaly token.
bool merge_facts(EpisodeState& state, const std::vector<Fact>& facts, int source_step, const Pose& pose,
                 const EpisodeConfig& config) {
  bool anomaly = false;
  for (const auto& fact : facts) {
    const bool known = std::any_of(state.ledger.begin(), state.ledger.end(),
                                   [&](const LedgerEntry& e) { return e.fact == fact; });
    if (known) continue;
    state.ledger.push_back({fact, source_step, pose, FactStatus::Candidate, 0, 0, -1});
    if (fact.polarity == Polarity::Present && has_anomaly_token(fact, config.anomaly_lexicon)) {
      anomaly = true;
    }
  }
  return anomaly;
}

void save_pose(EpisodeState& state, const Pose& pose) { state.saved.push_back(pose); }

// Handles a perception result in active perception: ledger, anomaly flag,
// early stop. Returns the flags to attach to the record.
std::vector<std::string> absorb_observation(EpisodeState& state, const EpisodeContext& context,
                                            const std::vector<Fact>& facts, int record_index) {
  std::vector<std::string> flags;
  if (merge_facts(state, facts, record_index, state.pose, context.config)) {
    state.anomaly_flag = true;
    flags.emplace_back("anomaly");
    if (context.config.early_stop && state.mode == Mode::ActivePerception) {
      // The sighting pose is kept so validation revisits the anomaly.
      if (std::find(state.saved.begin(), state.saved.end(), state.pose) == state.saved.end()) {
        save_pose(state, state.pose);
        flags.emplace_back("auto_saved");
      }
      state.mode = Mode::Validation;
      flags.emplace_back("early_stop");
    }
  }
  return flags;
}

Observation observation_of(std::string event, const std::string& question,
                           const PerceptionQueryResponse& response) {
  return {std::move(event), question, response.answer, response.caption, response.match_score};
}

double pose_distance(const Pose& a, const Pose& b) {
  const double dx = a.position.x - b.position.x;
  const double dy = a.position.y - b.position.y;
  const double dz = a.position.z - b.position.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

int nearest_position(const std::vector<Pose>& positions, const Pose& pose) {
  int best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double d = pose_distance(positions[i], pose);
    if (d < best_distance) {
      best_distance = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void require_mode(const EpisodeState& state, Mode expected, const char* operation) {
  if (state.mode != expected) {
    throw EpisodeError(EpisodeErrorKind::Precondition, static_cast<int>(state.transcript.size()),
                       std::string(operation) + " called in mode " + std::string(mode_name(state.mode)));
  }
}

}  // namespace

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (validation_samples < 1 || validation_samples % 2 == 0) {
    throw std::invalid_argument("validation_samples must be odd and >= 1");
  }
  if (salience_grid.width < 1 || salience_grid.height < 1) {
    throw std::invalid_argument("salience grid dims must be >= 1");
  }
}

std::string_view status_name(FactStatus status) {
  switch (status) {
    case FactStatus::Candidate: return "candidate";
    case FactStatus::Confirmed: return "confirmed";
    case FactStatus::Refuted: return "refuted";
  }
  return "unknown";
}

bool TurnRecord::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

std::uint64_t validation_stream_seed(std::uint64_t episode_seed) {
  return derive_seed(episode_seed, kValidationStreamTag);
}

std::uint64_t query_sample_key(std::uint64_t episode_seed, std::uint64_t query_index) {
  return derive_seed(derive_seed(episode_seed, kQueryStreamTag), query_index);
}

EpisodeState start_episode(const EpisodeContext& context) {
  context.config.validate();
  EpisodeState state;
  state.mode = Mode::ActivePerception;
  state.pose = context.scene.spawn;

  const std::string question(kBootstrapQuestion);
  const int index = next_record_index(state);
  const PerceptionQueryResponse response = ask(state, context, state.pose, question);
  state.spawn_score = response.match_score;

  TurnRecord record;
  record.step = index;
  record.mode = Mode::ActivePerception;
  record.question = question;
  record.answer = response.answer;
  record.caption = response.caption;
  record.match_score = response.match_score;
  record.pose = state.pose;
  record.flags.emplace_back("bootstrap");
  const auto flags = absorb_observation(state, context, caption_facts_of(response), index);
  record.flags.insert(record.flags.end(), flags.begin(), flags.end());
  state.transcript.push_back(std::move(record));
  state.history.push_back(
      {Role::Engine, format_observation(observation_of("bootstrap", question, response))});
  return state;
}

EpisodeState step_active(EpisodeState state, const EpisodeContext& context) {
  require_mode(state, Mode::ActivePerception, "step_active");
  if (state.step >= context.config.max_steps) {
    throw EpisodeError(EpisodeErrorKind::Precondition, next_record_index(state), "step budget exhausted");
  }

  // One malformed reply is tolerated; a second aborts the episode.
  std::optional<TurnDirective> directive;
  std::string text;
  for (int attempt = 0; attempt < 2 && !directive; ++attempt) {
    try {
      text = context.controller.next_turn(state.history, state.mode);
    } catch (const BackendError& e) {
      throw EpisodeError(EpisodeErrorKind::Backend, next_record_index(state), e.what());
    }
    state.history.push_back({Role::Controller, text});
    try {
      directive = parse_turn(text);
    } catch (const GrammarError& e) {
      TurnRecord rejected;
      rejected.step = next_record_index(state);
      rejected.mode = state.mode;
      rejected.directive_text = text;
      rejected.pose = state.pose;
      rejected.flags.emplace_back("parse_error");
      state.transcript.push_back(std::move(rejected));
      state.history.push_back({Role::Engine, format_observation({std::string("error: ") + e.what(), {}, {}, {}, {}})});
      if (attempt == 1) {
        throw EpisodeError(EpisodeErrorKind::ControllerParse, next_record_index(state) - 1, e.what());
      }
    }
  }

  ++state.step;
  TurnRecord record;
  record.step = next_record_index(state);
  record.mode = state.mode;
  record.directive_text = text;
  Observation observation;

  std::optional<std::string> question_text;
  if (directive->question) question_text = directive->question->text();

  switch (directive->command) {
    case Command::MoveCloser:
    case Command::MoveBack:
    case Command::MoveLeft:
    case Command::MoveRight: {
      const MoveResult moved = apply_move(state.pose, to_move(directive->command), context.scene.bounds);
      state.pose = moved.pose;
      observation.event = moved.clamped ? "moved clamped" : "moved";
      if (moved.clamped) record.flags.emplace_back("clamped");
      break;
    }
    case Command::SavePosition:
      save_pose(state, state.pose);
      observation.event = "saved " + std::to_string(state.saved.size());
      record.flags.emplace_back("saved");
      break;
    case Command::AskQuestion:
      observation.event = "asked";
      break;
    case Command::IKnowEnough:
      observation.event = "stopping";
      state.mode = Mode::Validation;
      record.flags.emplace_back("i_know_enough");
      break;
  }

  if (question_text) {
    const PerceptionQueryResponse response = ask(state, context, state.pose, *question_text);
    record.question = question_text;
    record.answer = response.answer;
    record.caption = response.caption;
    record.match_score = response.match_score;
    observation.question = question_text;
    observation.answer = response.answer;
    observation.caption = response.caption;
    observation.score = response.match_score;
    const auto flags = absorb_observation(state, context, caption_facts_of(response), record.step);
    record.flags.insert(record.flags.end(), flags.begin(), flags.end());
  }

  if (state.mode == Mode::ActivePerception && state.step >= context.config.max_steps) {
    state.mode = Mode::Validation;
    record.flags.emplace_back("budget_exhausted");
  }
  record.pose = state.pose;
  state.transcript.push_back(std::move(record));
  state.history.push_back({Role::Engine, format_observation(observation)});
  return state;
}

EpisodeState run_validation(EpisodeState state, const EpisodeContext& context, Rng& rng) {
  require_mode(state, Mode::Validation, "run_validation");

  std::string text;
  try {
    text = context.controller.summary(state.history);
  } catch (const BackendError& e) {
    throw EpisodeError(EpisodeErrorKind::Backend, next_record_index(state), e.what());
  }
  state.history.push_back({Role::Controller, text});
  SummaryDirective summary;
  try {
    summary = parse_summary(text);
  } catch (const GrammarError& e) {
    throw EpisodeError(EpisodeErrorKind::SummaryParse, next_record_index(state),
                       std::string("summary rejected: ") + e.what());
  }

  std::vector<Fact> targets;
  for (const auto& fact : summary.validation_targets) {
    if (std::find(targets.begin(), targets.end(), fact) == targets.end()) targets.push_back(fact);
  }

  TurnRecord header;
  header.step = next_record_index(state);
  header.mode = Mode::Validation;
  header.directive_text = text;
  header.pose = state.pose;
  state.validation_positions = state.saved;
  if (state.validation_positions.empty()) {
    state.validation_positions.push_back(context.scene.spawn);
    header.flags.emplace_back("validate_at_spawn");
  }
  state.transcript.push_back(std::move(header));

  // Bind each target to the revisit position nearest to where it was heard.
  std::vector<std::size_t> entry_of_target;
  for (const auto& target : targets) {
    auto it = std::find_if(state.ledger.begin(), state.ledger.end(),
                           [&](const LedgerEntry& e) { return e.fact == target; });
    if (it == state.ledger.end()) {
      state.ledger.push_back({target, next_record_index(state) - 1, context.scene.spawn, FactStatus::Candidate, 0, 0, -1});
      it = state.ledger.end() - 1;
    }
    it->anchor = nearest_position(state.validation_positions, it->source_pose);
    it->votes_for = 0;
    it->votes_against = 0;
    entry_of_target.push_back(static_cast<std::size_t>(it - state.ledger.begin()));
  }

  std::vector<std::optional<BestPair>> best(targets.size());
  for (std::size_t p = 0; p < state.validation_positions.size(); ++p) {
    for (int sample = 0; sample < context.config.validation_samples; ++sample) {
      const Pose pose =
          perturb_pose(state.validation_positions[p], context.config.sigma, rng, context.scene.bounds);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const Fact& target = targets[t];
        const std::string question = Question::presence(fact_phrase(target)).text();
        const int index = next_record_index(state);
        const PerceptionQueryResponse response = ask(state, context, pose, question);
        ++state.validation_queries;
        state.validation_scores.push_back(response.match_score);

        const bool yes = response.answer == "yes";
        const bool supports = (target.polarity == Polarity::Present) == yes;
        LedgerEntry& entry = state.ledger[entry_of_target[t]];
        const bool counted = entry.anchor == static_cast<int>(p);
        if (counted) (supports ? entry.votes_for : entry.votes_against) += 1;

        TurnRecord record;
        record.step = index;
        record.mode = Mode::Validation;
        record.question = question;
        record.answer = response.answer;
        record.caption = response.caption;
        record.match_score = response.match_score;
        record.pose = pose;
        record.flags.push_back("position " + std::to_string(p));
        record.flags.push_back("target " + std::to_string(t));
        record.flags.emplace_back(supports ? "supports" : "contradicts");
        if (counted) record.flags.emplace_back("counted");
        state.transcript.push_back(std::move(record));

        if (!best[t] || response.match_score > best[t]->match_score) {
          best[t] = BestPair{target, question, pose, response.match_score,
                             response.salience.value_or(SalienceGrid::zeros(
                                 context.config.salience_grid.width, context.config.salience_grid.height)),
                             index};
        }
      }
    }
  }

  for (std::size_t t = 0; t < targets.size(); ++t) {
    LedgerEntry& entry = state.ledger[entry_of_target[t]];
    entry.status = entry.votes_for > entry.votes_against ? FactStatus::Confirmed : FactStatus::Refuted;
  }

  state.best_pairs.clear();
  for (auto& pair : best) {
    if (pair) state.best_pairs.push_back(std::move(*pair));
  }
  std::stable_sort(state.best_pairs.begin(), state.best_pairs.end(),
                   [](const BestPair& a, const BestPair& b) { return a.match_score > b.match_score; });

  std::string verdicts = "event: validation complete";
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const LedgerEntry& entry = state.ledger[entry_of_target[t]];
    verdicts += "\nverdict: " + render_fact(entry.fact) + " " + std::string(status_name(entry.status));
  }
  state.history.push_back({Role::Engine, verdicts});
  state.summary = std::move(summary);
  state.mode = Mode::Explanation;
  return state;
}

EpisodeReport finalize(EpisodeState& state, const EpisodeContext& context) {
  require_mode(state, Mode::Explanation, "finalize");
  state.pose = context.scene.spawn;

  EpisodeReport report;
  const auto& targets = state.summary ? state.summary->validation_targets : std::vector<Fact>{};
  for (const auto& entry : state.ledger) {
    const bool targeted = std::find(targets.begin(), targets.end(), entry.fact) != targets.end();
    if (!targeted) continue;
    if (entry.status == FactStatus::Confirmed) report.confirmed_facts.push_back(entry.fact);
    if (entry.status == FactStatus::Refuted) report.refuted_facts.push_back(entry.fact);
  }

  const FinalComposition composed = compose_final(report.confirmed_facts, context.safety);
  report.final_description = composed.description;
  report.final_caption = composed.caption;
  report.safety_notes = composed.safety_notes;

  for (const auto& pair : state.best_pairs) {
    report.explanation_pairs.push_back({pair.question, pair.salience, pair.step});
  }

  auto& metrics = report.metrics;
  metrics.spawn_score = state.spawn_score;
  metrics.validation_scores = state.validation_scores;
  for (const auto& record : state.transcript) {
    if (record.queried()) metrics.position_scores.push_back({record.pose, *record.match_score});
  }
  metrics.active_steps = state.step;
  metrics.total_queries = static_cast<int>(state.queries_issued);
  metrics.validation_queries = state.validation_queries;
  metrics.validation_positions = static_cast<int>(state.validation_positions.size());
  std::vector<Fact> unique_targets;
  for (const auto& fact : targets) {
    if (std::find(unique_targets.begin(), unique_targets.end(), fact) == unique_targets.end()) {
      unique_targets.push_back(fact);
    }
  }
  metrics.validation_targets = static_cast<int>(unique_targets.size());
  metrics.anomaly_detected = std::any_of(
      report.confirmed_facts.begin(), report.confirmed_facts.end(), [&](const Fact& f) {
        return f.polarity == Polarity::Present && has_anomaly_token(f, context.config.anomaly_lexicon);
      });

  TurnRecord record;
  record.step = next_record_index(state);
  record.mode = Mode::Done;
  record.caption = report.final_caption;
  record.pose = state.pose;
  record.flags.emplace_back("returned_to_spawn");
  state.transcript.push_back(std::move(record));
  state.mode = Mode::Done;

  report.transcript = state.transcript;
  if (state.summary) report.summary = *state.summary;
  return report;
}

EpisodeReport run_episode(const EpisodeContext& context) {
  EpisodeState state = start_episode(context);
  while (state.mode == Mode::ActivePerception) state = step_active(std::move(state), context);
  Rng rng(validation_stream_seed(context.config.seed));
  state = run_validation(std::move(state), context, rng);
  return finalize(state, context);
}

}  // namespace skytalk
