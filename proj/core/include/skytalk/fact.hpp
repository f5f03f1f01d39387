#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "skytalk/scene.hpp"

namespace skytalk {

enum class Polarity { Present, Absent };

/// Atomic claim about a scene: "<attributes...> <label>", possibly negated.
struct Fact {
  std::string subject_label;
  std::vector<std::string> attributes;
  Polarity polarity = Polarity::Present;

  static Fact present(std::string label, std::vector<std::string> attributes = {}) {
    return {std::move(label), std::move(attributes), Polarity::Present};
  }
  static Fact absent(std::string label, std::vector<std::string> attributes = {}) {
    return {std::move(label), std::move(attributes), Polarity::Absent};
  }

  friend bool operator==(const Fact&, const Fact&) = default;
  friend auto operator<=>(const Fact&, const Fact&) = default;
};

inline constexpr std::string_view kNothingNotable = "nothing notable";

/// "burning tree", or "no smoke" for absent facts.
std::string render_fact(const Fact& fact);

/// "an" before a vowel, else "a".
std::string_view indefinite_article(std::string_view phrase);

/// The phrase without polarity: "burning tree".
std::string fact_phrase(const Fact& fact);

/// Caption template: "a|an <attributes> <label>" joined by " and ", or
/// "nothing notable" when empty.
std::string render_caption(const std::vector<Fact>& facts);

/// Label equal and every fact attribute carried by the object. Polarity is
/// ignored.
bool describes_object(const Fact& fact, const SceneObject& object);

/// Checks the fact against the set of visible objects: a present fact needs a
/// matching visible object, an absent fact needs none.
bool verify_fact(const Fact& fact, const std::vector<Visibility>& visible, const Scene& scene);

/// True when some object anywhere in the scene matches (present) or none does
/// (absent).
bool fact_true_in_scene(const Fact& fact, const Scene& scene);

bool has_anomaly_token(const Fact& fact, const std::vector<std::string>& lexicon);

}  // namespace skytalk
