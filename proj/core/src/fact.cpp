#include "skytalk/fact.hpp"

#include <algorithm>

namespace skytalk {

std::string fact_phrase(const Fact& fact) {
  std::string out;
  for (const auto& attribute : fact.attributes) {
    out += attribute;
    out += ' ';
  }
  out += fact.subject_label;
  return out;
}

std::string render_fact(const Fact& fact) {
  return fact.polarity == Polarity::Absent ? "no " + fact_phrase(fact) : fact_phrase(fact);
}

std::string_view indefinite_article(std::string_view phrase) {
  if (!phrase.empty() && std::string_view("aeiou").find(phrase.front()) != std::string_view::npos) return "an";
  return "a";
}

std::string render_caption(const std::vector<Fact>& facts) {
  if (facts.empty()) return std::string(kNothingNotable);
  std::string out;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (i > 0) out += " and ";
    const std::string phrase = fact_phrase(facts[i]);
    out += facts[i].polarity == Polarity::Absent ? std::string_view("no") : indefinite_article(phrase);
    out += ' ';
    out += phrase;
  }
  return out;
}

bool describes_object(const Fact& fact, const SceneObject& object) {
  if (fact.subject_label != object.label) return false;
  return std::all_of(fact.attributes.begin(), fact.attributes.end(), [&](const std::string& a) {
    return std::find(object.attributes.begin(), object.attributes.end(), a) !=
           object.attributes.end();
  });
}

bool verify_fact(const Fact& fact, const std::vector<Visibility>& visible, const Scene& scene) {
  const bool seen = std::any_of(visible.begin(), visible.end(), [&](const Visibility& v) {
    const SceneObject* object = scene.find(v.object_id);
    return object != nullptr && v.fraction > 0.0 && describes_object(fact, *object);
  });
  return fact.polarity == Polarity::Present ? seen : !seen;
}

bool fact_true_in_scene(const Fact& fact, const Scene& scene) {
  const bool exists = std::any_of(scene.objects.begin(), scene.objects.end(),
                                  [&](const SceneObject& o) { return describes_object(fact, o); });
  return fact.polarity == Polarity::Present ? exists : !exists;
}

bool has_anomaly_token(const Fact& fact, const std::vector<std::string>& lexicon) {
  if (is_anomaly_token(fact.subject_label, lexicon)) return true;
  return std::any_of(fact.attributes.begin(), fact.attributes.end(),
                     [&](const std::string& a) { return is_anomaly_token(a, lexicon); });
}

}  // namespace skytalk
