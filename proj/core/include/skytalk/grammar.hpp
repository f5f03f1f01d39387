#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "skytalk/fact.hpp"

namespace skytalk {

/// The controller's seven commands.
enum class Command {
  MoveCloser,
  MoveBack,
  MoveLeft,
  MoveRight,
  SavePosition,
  AskQuestion,
  IKnowEnough,
};

inline constexpr Command kAllCommands[] = {
    Command::MoveCloser,   Command::MoveBack,    Command::MoveLeft,   Command::MoveRight,
    Command::SavePosition, Command::AskQuestion, Command::IKnowEnough,
};

/// Canonical command name, e.g. "move closer".
std::string_view command_name(Command command);
bool is_move(Command command);
MoveCommand to_move(Command command);

enum class QuestionKind { Presence, Count, Attribute, Open };

/// A question in the closed grammar:
///   presence   "is there a|an <subject>?"
///   count      "how many <subject>?"
///   attribute  "what <aspect> is the <subject>?"
///   open       anything else
/// Presence subjects may carry attribute tokens ("burning tree").
struct Question {
  QuestionKind kind = QuestionKind::Open;
  std::string subject;
  std::string aspect;  // attribute questions only, e.g. "color"
  std::string raw;     // as written; canonical text for closed kinds

  static Question presence(std::string subject);
  static Question count(std::string subject);
  static Question attribute(std::string aspect, std::string subject);
  static Question open(std::string text);

  /// Canonical text. Closed kinds are rebuilt from fields; open returns raw.
  std::string text() const;

  friend bool operator==(const Question& a, const Question& b) {
    return a.kind == b.kind && a.subject == b.subject && a.aspect == b.aspect &&
           a.text() == b.text();
  }
};

inline constexpr std::string_view kBootstrapQuestion = "What do you see?";

/// Parses question text through the closed grammar.
Question parse_question(std::string_view text);

struct TurnDirective {
  Command command = Command::IKnowEnough;
  std::optional<Question> question;

  friend bool operator==(const TurnDirective&, const TurnDirective&) = default;
};

struct SummaryDirective {
  std::string description;
  std::string caption;
  std::vector<Fact> validation_targets;

  friend bool operator==(const SummaryDirective&, const SummaryDirective&) = default;
};

enum class GrammarErrorKind {
  Empty,
  UnknownCommand,
  MissingCommand,
  MultipleCommands,
  MissingQuestion,
  MultipleQuestions,
  QuestionNotAllowed,
  EmptyQuestion,
  UnexpectedLine,
  MissingDescription,
  MissingCaption,
  DuplicateSection,
  UnparseableFact,
};

std::string_view grammar_error_name(GrammarErrorKind kind);

class GrammarError : public std::runtime_error {
 public:
  GrammarError(GrammarErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(grammar_error_name(kind)) + ": " + detail), kind_(kind) {}
  GrammarErrorKind kind() const { return kind_; }

 private:
  GrammarErrorKind kind_;
};

/// Parses "command: <name>" with an optional "question: <text>" line.
/// Keys and command names are case-insensitive; blank lines and surrounding
/// whitespace are ignored. Throws GrammarError.
TurnDirective parse_turn(std::string_view text);

/// Parses "description:", "caption:" and repeated "validate: <fact>" lines.
SummaryDirective parse_summary(std::string_view text);

/// "<attributes...> <label>" with an optional leading "no" and article.
Fact parse_fact(std::string_view text);

/// Inverse of render_caption.
std::vector<Fact> parse_caption(std::string_view caption);

std::string serialize(const TurnDirective& directive);
std::string serialize(const SummaryDirective& directive);

/// Throws GrammarError if the directive breaks a structural invariant.
void check_directive(const TurnDirective& directive);

}  // namespace skytalk
