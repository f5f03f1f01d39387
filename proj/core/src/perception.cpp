#include "skytalk/perception.hpp"

#include <algorithm>
#include <string>

namespace skytalk {
namespace {

void push_unique(std::vector<Fact>& facts, const Fact& fact) {
  if (std::find(facts.begin(), facts.end(), fact) == facts.end()) facts.push_back(fact);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

// Subject of a closed question as a present fact, or nullopt if the subject
// is not in fact form.
std::optional<Fact> subject_fact(const Question& question) {
  if (question.kind == QuestionKind::Open || question.subject.empty()) return std::nullopt;
  try {
    Fact fact = parse_fact(question.subject);
    fact.polarity = Polarity::Present;
    return fact;
  } catch (const GrammarError&) {
    return std::nullopt;
  }
}

// Subject attributes are a subset of the perceived fact's attributes.
bool covers(const Fact& subject, const Fact& perceived) {
  if (subject.subject_label != perceived.subject_label) return false;
  return std::all_of(subject.attributes.begin(), subject.attributes.end(), [&](const std::string& a) {
    return std::find(perceived.attributes.begin(), perceived.attributes.end(), a) !=
           perceived.attributes.end();
  });
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

void NoiseModel::validate() const {
  if (!is_probability(miss_base) || !is_probability(hallucination_rate) ||
      !is_probability(miss_per_meter)) {
    throw std::invalid_argument("noise probabilities must lie in [0, 1]");
  }
}

double miss_probability(const NoiseModel& noise, const Visibility& visibility) {
  const double p = noise.miss_base +
                   noise.miss_per_meter * visibility.distance * (1.0 - visibility.fraction * 0.5);
  return std::clamp(p, 0.0, 1.0);
}

double match_score(const std::vector<Fact>& caption_facts, const std::vector<Visibility>& ground_visible,
                   const Scene& scene) {
  if (caption_facts.empty()) return 0.0;
  std::size_t verified = 0;
  for (const auto& fact : caption_facts) {
    if (verify_fact(fact, ground_visible, scene)) ++verified;
  }
  return static_cast<double>(verified) / static_cast<double>(caption_facts.size());
}

PerceptionResult query(const Scene& scene, const ViewQuery& view, const NoiseModel& noise, Rng& rng,
                       GridDims grid) {
  if (!scene.bounds.contains(view.pose.position)) {
    throw PerceptionError("query pose lies outside the scene bounds");
  }
  noise.validate();

  const auto visible = visible_objects(scene, view.pose);

  // Each object's miss trial is keyed by its id so that adding or removing an
  // object leaves the other objects' outcomes unchanged.
  const std::uint64_t trial_key = rng.next_u64();
  std::vector<Visibility> detected;
  std::vector<const SceneObject*> detected_objects;
  for (const auto& v : visible) {
    const double u = keyed_uniform(derive_seed(trial_key, hash_tag(v.object_id)));
    if (u >= miss_probability(noise, v)) {
      detected.push_back(v);
      detected_objects.push_back(scene.find(v.object_id));
    }
  }

  std::optional<Fact> hallucinated;
  const double h = rng.uniform();
  const std::uint64_t pick = rng.next_u64();
  if (h < noise.hallucination_rate) {
    const auto labels = scene.labels();
    hallucinated = Fact::present(labels[pick % labels.size()]);
  }

  PerceptionResult result;
  for (const SceneObject* object : detected_objects) {
    push_unique(result.detected_facts, Fact::present(object->label, object->attributes));
  }
  for (const auto& fact : result.detected_facts) {
    if (result.caption_facts.size() == kCaptionFactCap) break;
    result.caption_facts.push_back(fact);
  }
  if (hallucinated) {
    push_unique(result.detected_facts, *hallucinated);
    if (std::find(result.caption_facts.begin(), result.caption_facts.end(), *hallucinated) ==
        result.caption_facts.end()) {
      if (result.caption_facts.size() == kCaptionFactCap) result.caption_facts.pop_back();
      result.caption_facts.push_back(*hallucinated);
    }
  }
  result.caption = render_caption(result.caption_facts);

  const auto subject = subject_fact(view.question);
  std::vector<Fact> salience_targets;
  switch (view.question.kind) {
    case QuestionKind::Presence: {
      const bool yes = subject && std::any_of(result.detected_facts.begin(), result.detected_facts.end(),
                                              [&](const Fact& f) { return covers(*subject, f); });
      result.answer = yes ? "yes" : "no";
      if (subject) {
        Fact answered = *subject;
        answered.polarity = yes ? Polarity::Present : Polarity::Absent;
        result.answer_facts.push_back(answered);
        salience_targets.push_back(*subject);
      }
      break;
    }
    case QuestionKind::Count: {
      std::size_t n = 0;
      if (subject) {
        for (const SceneObject* object : detected_objects) {
          if (describes_object(*subject, *object)) ++n;
        }
        if (n == 0 && hallucinated && covers(*subject, *hallucinated)) n = 1;
        salience_targets.push_back(*subject);
      }
      result.answer = std::to_string(n);
      break;
    }
    case QuestionKind::Attribute: {
      result.answer = "unknown";
      if (subject) {
        for (const SceneObject* object : detected_objects) {
          if (describes_object(*subject, *object)) {
            result.answer = object->attributes.empty() ? "none" : join_words(object->attributes);
            break;
          }
        }
        salience_targets.push_back(*subject);
      }
      break;
    }
    case QuestionKind::Open:
      result.answer = result.caption;
      salience_targets = result.caption_facts;
      break;
  }

  result.match_score = match_score(result.caption_facts, visible, scene);
  result.salience = render_salience(scene, view.pose, salience_targets, detected, grid);
  return result;
}

}  // namespace skytalk
