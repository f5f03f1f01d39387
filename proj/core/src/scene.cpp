#include "skytalk/scene.hpp"

#include <algorithm>
#include <numbers>
#include <set>

namespace skytalk {

double length(Vec3 v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

bool Box::contains(Vec3 p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
         p.z <= max.z;
}

Vec3 Box::clamp(Vec3 p) const {
  return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y),
          std::clamp(p.z, min.z, max.z)};
}

double Box::volume() const {
  return std::max(0.0, max.x - min.x) * std::max(0.0, max.y - min.y) *
         std::max(0.0, max.z - min.z);
}

double normalize_yaw(double yaw) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(yaw, kTwoPi);
  if (wrapped < 0.0) wrapped += kTwoPi;
  // fmod of a tiny negative value can round up to exactly 2pi.
  if (wrapped >= kTwoPi) wrapped = 0.0;
  return wrapped;
}

const SceneObject* Scene::find(std::string_view id) const {
  for (const auto& object : objects) {
    if (object.id == id) return &object;
  }
  return nullptr;
}

std::vector<std::string> Scene::labels() const {
  std::set<std::string> unique;
  for (const auto& object : objects) unique.insert(object.label);
  return {unique.begin(), unique.end()};
}

const std::vector<std::string>& default_anomaly_lexicon() {
  static const std::vector<std::string> lexicon{"fire",  "smoke",   "flame",
                                                "crash", "crashed", "burning"};
  return lexicon;
}

bool is_anomaly_token(std::string_view token, const std::vector<std::string>& lexicon) {
  return std::find(lexicon.begin(), lexicon.end(), token) != lexicon.end();
}

void validate_scene(const Scene& scene) {
  if (scene.name.empty()) throw SceneError("name", "must be nonempty");
  if (!scene.bounds.min.finite() || !scene.bounds.max.finite()) {
    throw SceneError("bounds", "components must be finite");
  }
  if (!(scene.bounds.volume() > 0.0)) throw SceneError("bounds", "volume must be positive");
  if (!scene.spawn.position.finite() || !std::isfinite(scene.spawn.yaw)) {
    throw SceneError("spawn", "components must be finite");
  }
  if (!scene.bounds.contains(scene.spawn.position)) {
    throw SceneError("spawn.position", "spawn lies outside bounds");
  }
  const auto& camera = scene.camera;
  if (!(camera.horizontal_fov_deg > 0.0 && camera.horizontal_fov_deg < 180.0)) {
    throw SceneError("camera.fov_deg", "must lie in (0, 180)");
  }
  if (!(camera.max_range > 0.0) || !std::isfinite(camera.max_range)) {
    throw SceneError("camera.max_range", "must be positive");
  }
  if (scene.objects.empty()) throw SceneError("objects", "scene needs at least one object");

  const auto& anomaly_lexicon = default_anomaly_lexicon();
  std::set<std::string> ids;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& object = scene.objects[i];
    const std::string at = "objects[" + std::to_string(i) + "]";
    if (object.id.empty()) throw SceneError(at + ".id", "must be nonempty");
    if (!ids.insert(object.id).second) {
      throw SceneError(at + ".id", "duplicate object id '" + object.id + "'");
    }
    if (object.label.empty()) throw SceneError(at + ".label", "must be nonempty");
    if (!object.center.finite()) throw SceneError(at + ".center", "components must be finite");
    if (!object.extent.finite() || !(object.extent.x > 0.0) || !(object.extent.y > 0.0) ||
        !(object.extent.z > 0.0)) {
      throw SceneError(at + ".extent", "half sizes must be strictly positive");
    }
    if (object.is_anomaly) {
      const bool tagged = std::any_of(
          object.attributes.begin(), object.attributes.end(),
          [&](const std::string& a) { return is_anomaly_token(a, anomaly_lexicon); });
      if (!tagged) {
        throw SceneError(at + ".attributes", "anomaly object needs an anomaly-lexicon attribute");
      }
    }
  }
}

}  // namespace skytalk
