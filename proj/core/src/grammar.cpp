#include "skytalk/grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace skytalk {
namespace {

constexpr std::array<std::pair<Command, std::string_view>, 7> kCommandNames{{
    {Command::MoveCloser, "move closer"},
    {Command::MoveBack, "move back"},
    {Command::MoveLeft, "move left"},
    {Command::MoveRight, "move right"},
    {Command::SavePosition, "save position"},
    {Command::AskQuestion, "ask a question"},
    {Command::IKnowEnough, "i know enough"},
}};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) words.emplace_back(s.substr(start, i - start));
  }
  return words;
}

std::string join(const std::vector<std::string>& words, std::size_t from = 0) {
  std::string out;
  for (std::size_t i = from; i < words.size(); ++i) {
    if (i > from) out += ' ';
    out += words[i];
  }
  return out;
}

bool is_reserved(std::string_view word) {
  return word == "a" || word == "an" || word == "no" || word == "and";
}

bool is_token(std::string_view word) {
  if (word.empty() || is_reserved(word)) return false;
  return std::all_of(word.begin(), word.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

bool all_tokens(const std::vector<std::string>& words, std::size_t from = 0) {
  if (from >= words.size()) return false;
  return std::all_of(words.begin() + static_cast<std::ptrdiff_t>(from), words.end(),
                     [](const std::string& w) { return is_token(w); });
}

struct Line {
  std::string key;
  std::string_view value;
};

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      lines.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return lines;
}

std::optional<Line> split_key(std::string_view line) {
  const auto colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  return Line{lower(trim(line.substr(0, colon))), trim(line.substr(colon + 1))};
}

std::string_view strip_question_mark(std::string_view s) {
  s = trim(s);
  while (!s.empty() && s.back() == '?') {
    s.remove_suffix(1);
    s = trim(s);
  }
  return s;
}

}  // namespace

std::string_view command_name(Command command) {
  for (const auto& [c, name] : kCommandNames) {
    if (c == command) return name;
  }
  return "unknown";
}

bool is_move(Command command) {
  return command == Command::MoveCloser || command == Command::MoveBack ||
         command == Command::MoveLeft || command == Command::MoveRight;
}

MoveCommand to_move(Command command) {
  switch (command) {
    case Command::MoveCloser: return MoveCommand::Closer;
    case Command::MoveBack: return MoveCommand::Back;
    case Command::MoveLeft: return MoveCommand::Left;
    case Command::MoveRight: return MoveCommand::Right;
    default: throw std::invalid_argument("not a move command");
  }
}

std::string_view grammar_error_name(GrammarErrorKind kind) {
  switch (kind) {
    case GrammarErrorKind::Empty: return "empty input";
    case GrammarErrorKind::UnknownCommand: return "unknown command";
    case GrammarErrorKind::MissingCommand: return "missing command";
    case GrammarErrorKind::MultipleCommands: return "multiple commands";
    case GrammarErrorKind::MissingQuestion: return "missing question";
    case GrammarErrorKind::MultipleQuestions: return "multiple questions";
    case GrammarErrorKind::QuestionNotAllowed: return "question not allowed";
    case GrammarErrorKind::EmptyQuestion: return "empty question";
    case GrammarErrorKind::UnexpectedLine: return "unexpected line";
    case GrammarErrorKind::MissingDescription: return "missing description";
    case GrammarErrorKind::MissingCaption: return "missing caption";
    case GrammarErrorKind::DuplicateSection: return "duplicate section";
    case GrammarErrorKind::UnparseableFact: return "unparseable fact";
  }
  return "grammar error";
}

// Questions ------------------------------------------------------------------

Question Question::presence(std::string subject) {
  Question q{QuestionKind::Presence, std::move(subject), {}, {}};
  q.raw = q.text();
  return q;
}

Question Question::count(std::string subject) {
  Question q{QuestionKind::Count, std::move(subject), {}, {}};
  q.raw = q.text();
  return q;
}

Question Question::attribute(std::string aspect, std::string subject) {
  Question q{QuestionKind::Attribute, std::move(subject), std::move(aspect), {}};
  q.raw = q.text();
  return q;
}

Question Question::open(std::string text) {
  return Question{QuestionKind::Open, {}, {}, std::move(text)};
}

std::string Question::text() const {
  switch (kind) {
    case QuestionKind::Presence: return "is there " + std::string(indefinite_article(subject)) + " " + subject + "?";
    case QuestionKind::Count: return "how many " + subject + "?";
    case QuestionKind::Attribute: return "what " + aspect + " is the " + subject + "?";
    case QuestionKind::Open: return raw;
  }
  return raw;
}

Question parse_question(std::string_view text) {
  const std::string_view trimmed = trim(text);
  const auto words = split_words(lower(strip_question_mark(trimmed)));

  if (words.size() >= 4 && words[0] == "is" && words[1] == "there" &&
      (words[2] == "a" || words[2] == "an" || words[2] == "any") && all_tokens(words, 3)) {
    return Question::presence(join(words, 3));
  }
  if (words.size() >= 3 && words[0] == "how" && words[1] == "many") {
    auto rest = std::vector<std::string>(words.begin() + 2, words.end());
    if (rest.size() >= 3 && rest[rest.size() - 1] == "there" &&
        (rest[rest.size() - 2] == "are" || rest[rest.size() - 2] == "is")) {
      rest.resize(rest.size() - 2);
    }
    if (all_tokens(rest)) return Question::count(join(rest));
  }
  if (words.size() >= 5 && words[0] == "what" && words[2] == "is" && words[3] == "the" &&
      is_token(words[1]) && all_tokens(words, 4)) {
    return Question::attribute(words[1], join(words, 4));
  }
  return Question::open(std::string(trimmed));
}

// Turns ----------------------------------------------------------------------

void check_directive(const TurnDirective& directive) {
  const bool takes_question = directive.command == Command::AskQuestion || is_move(directive.command);
  if (directive.question && !takes_question) {
    throw GrammarError(GrammarErrorKind::QuestionNotAllowed,
                       std::string(command_name(directive.command)) + " carries no question");
  }
  if (directive.command == Command::AskQuestion && !directive.question) {
    throw GrammarError(GrammarErrorKind::MissingQuestion, "ask a question needs a question line");
  }
  if (directive.question) {
    const std::string text = directive.question->text();
    if (trim(text).empty()) throw GrammarError(GrammarErrorKind::EmptyQuestion, "question is empty");
    if (text.find('\n') != std::string::npos) {
      throw GrammarError(GrammarErrorKind::UnexpectedLine, "question spans several lines");
    }
  }
}

TurnDirective parse_turn(std::string_view text) {
  std::optional<Command> command;
  std::optional<std::string_view> question_text;
  bool any_content = false;

  for (std::string_view raw_line : split_lines(text)) {
    const std::string_view line = trim(raw_line);
    if (line.empty()) continue;
    any_content = true;
    const auto parts = split_key(line);
    if (!parts) {
      throw GrammarError(GrammarErrorKind::UnexpectedLine, "expected 'key: value'");
    }
    if (parts->key == "command") {
      if (command) throw GrammarError(GrammarErrorKind::MultipleCommands, "one command per turn");
      const std::string name = join(split_words(lower(parts->value)));
      const auto it = std::find_if(kCommandNames.begin(), kCommandNames.end(),
                                   [&](const auto& entry) { return entry.second == name; });
      if (it == kCommandNames.end()) {
        throw GrammarError(GrammarErrorKind::UnknownCommand, "'" + name + "'");
      }
      command = it->first;
    } else if (parts->key == "question") {
      if (question_text) {
        throw GrammarError(GrammarErrorKind::MultipleQuestions, "one question per turn");
      }
      question_text = parts->value;
    } else {
      throw GrammarError(GrammarErrorKind::UnexpectedLine, "unknown key '" + parts->key + "'");
    }
  }

  if (!any_content) throw GrammarError(GrammarErrorKind::Empty, "no content");
  if (!command) throw GrammarError(GrammarErrorKind::MissingCommand, "no command line");

  TurnDirective directive{*command, std::nullopt};
  if (question_text) {
    if (strip_question_mark(*question_text).empty()) {
      throw GrammarError(GrammarErrorKind::EmptyQuestion, "question is empty");
    }
    directive.question = parse_question(*question_text);
  }
  check_directive(directive);
  return directive;
}

std::string serialize(const TurnDirective& directive) {
  check_directive(directive);
  std::string out = "command: ";
  out += command_name(directive.command);
  if (directive.question) {
    out += "\nquestion: ";
    out += directive.question->text();
  }
  return out;
}

// Summaries and facts --------------------------------------------------------

Fact parse_fact(std::string_view text) {
  auto words = split_words(lower(text));
  Fact fact;
  std::size_t from = 0;
  if (from < words.size() && words[from] == "no") {
    fact.polarity = Polarity::Absent;
    ++from;
  }
  if (from < words.size() && (words[from] == "a" || words[from] == "an")) ++from;
  if (!all_tokens(words, from)) {
    throw GrammarError(GrammarErrorKind::UnparseableFact, "'" + std::string(trim(text)) + "'");
  }
  fact.subject_label = words.back();
  fact.attributes.assign(words.begin() + static_cast<std::ptrdiff_t>(from), words.end() - 1);
  return fact;
}

std::vector<Fact> parse_caption(std::string_view caption) {
  const std::string normalized = join(split_words(lower(caption)));
  if (normalized.empty() || normalized == kNothingNotable) return {};
  std::vector<Fact> facts;
  std::size_t start = 0;
  while (true) {
    const auto next = normalized.find(" and ", start);
    facts.push_back(parse_fact(std::string_view(normalized).substr(
        start, next == std::string::npos ? std::string::npos : next - start)));
    if (next == std::string::npos) break;
    start = next + 5;
  }
  return facts;
}

SummaryDirective parse_summary(std::string_view text) {
  std::optional<std::string> description;
  std::optional<std::string> caption;
  std::vector<Fact> targets;

  for (std::string_view raw_line : split_lines(text)) {
    const std::string_view line = trim(raw_line);
    if (line.empty()) continue;
    const auto parts = split_key(line);
    if (!parts) throw GrammarError(GrammarErrorKind::UnexpectedLine, "expected 'key: value'");
    if (parts->key == "description") {
      if (description) throw GrammarError(GrammarErrorKind::DuplicateSection, "description");
      description = std::string(parts->value);
    } else if (parts->key == "caption") {
      if (caption) throw GrammarError(GrammarErrorKind::DuplicateSection, "caption");
      caption = std::string(parts->value);
    } else if (parts->key == "validate") {
      targets.push_back(parse_fact(parts->value));
    } else {
      throw GrammarError(GrammarErrorKind::UnexpectedLine, "unknown key '" + parts->key + "'");
    }
  }

  if (!description || description->empty()) {
    throw GrammarError(GrammarErrorKind::MissingDescription, "summary needs a description line");
  }
  if (!caption || caption->empty()) {
    throw GrammarError(GrammarErrorKind::MissingCaption, "summary needs a caption line");
  }
  return {std::move(*description), std::move(*caption), std::move(targets)};
}

std::string serialize(const SummaryDirective& directive) {
  std::string out = "description: " + directive.description + "\ncaption: " + directive.caption;
  for (const auto& fact : directive.validation_targets) {
    out += "\nvalidate: ";
    out += render_fact(fact);
  }
  return out;
}

}  // namespace skytalk
