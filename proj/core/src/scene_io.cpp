#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "skytalk/scene.hpp"

namespace skytalk {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& node, const std::string& path,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, _] : node.items()) {
    if (!allowed.count(key)) {
      throw SceneError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

const json& require(const json& node, const std::string& path, const char* key) {
  auto it = node.find(key);
  const std::string at = path.empty() ? key : path + "." + key;
  if (it == node.end()) throw SceneError(at, "missing required key");
  return *it;
}

double read_number(const json& node, const std::string& path) {
  if (!node.is_number()) throw SceneError(path, "expected a number");
  return node.get<double>();
}

Vec3 read_vec3(const json& node, const std::string& path) {
  if (!node.is_array() || node.size() != 3) throw SceneError(path, "expected [x, y, z]");
  Vec3 v{read_number(node[0], path + "[0]"), read_number(node[1], path + "[1]"),
         read_number(node[2], path + "[2]")};
  if (!v.finite()) throw SceneError(path, "components must be finite");
  return v;
}

std::string read_string(const json& node, const std::string& path) {
  if (!node.is_string()) throw SceneError(path, "expected a string");
  return node.get<std::string>();
}

bool read_bool(const json& node, const std::string& path) {
  if (!node.is_boolean()) throw SceneError(path, "expected a boolean");
  return node.get<bool>();
}

SceneObject read_object(const json& node, const std::string& path) {
  if (!node.is_object()) throw SceneError(path, "expected an object");
  reject_unknown_keys(node, path,
                      {"id", "label", "attributes", "center", "extent", "is_anomaly", "is_occluder"});
  SceneObject object;
  object.id = read_string(require(node, path, "id"), path + ".id");
  object.label = read_string(require(node, path, "label"), path + ".label");
  const auto& attributes = require(node, path, "attributes");
  if (!attributes.is_array()) throw SceneError(path + ".attributes", "expected an array");
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    object.attributes.push_back(
        read_string(attributes[i], path + ".attributes[" + std::to_string(i) + "]"));
  }
  object.center = read_vec3(require(node, path, "center"), path + ".center");
  object.extent = read_vec3(require(node, path, "extent"), path + ".extent");
  object.is_anomaly = read_bool(require(node, path, "is_anomaly"), path + ".is_anomaly");
  object.is_occluder = read_bool(require(node, path, "is_occluder"), path + ".is_occluder");
  return object;
}

}  // namespace

Scene load_scene_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw SceneError("$", std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw SceneError("$", "document must be a JSON object");
  reject_unknown_keys(doc, "", {"name", "bounds", "spawn", "camera", "objects"});

  Scene scene;
  scene.name = read_string(require(doc, "", "name"), "name");

  const auto& bounds = require(doc, "", "bounds");
  if (!bounds.is_object()) throw SceneError("bounds", "expected an object");
  reject_unknown_keys(bounds, "bounds", {"min", "max"});
  scene.bounds.min = read_vec3(require(bounds, "bounds", "min"), "bounds.min");
  scene.bounds.max = read_vec3(require(bounds, "bounds", "max"), "bounds.max");

  const auto& spawn = require(doc, "", "spawn");
  if (!spawn.is_object()) throw SceneError("spawn", "expected an object");
  reject_unknown_keys(spawn, "spawn", {"position", "yaw"});
  scene.spawn.position = read_vec3(require(spawn, "spawn", "position"), "spawn.position");
  const double yaw = read_number(require(spawn, "spawn", "yaw"), "spawn.yaw");
  if (!std::isfinite(yaw)) throw SceneError("spawn.yaw", "must be finite");
  scene.spawn.yaw = normalize_yaw(yaw);

  const auto& camera = require(doc, "", "camera");
  if (!camera.is_object()) throw SceneError("camera", "expected an object");
  reject_unknown_keys(camera, "camera", {"fov_deg", "max_range"});
  scene.camera.horizontal_fov_deg = read_number(require(camera, "camera", "fov_deg"), "camera.fov_deg");
  scene.camera.max_range = read_number(require(camera, "camera", "max_range"), "camera.max_range");

  const auto& objects = require(doc, "", "objects");
  if (!objects.is_array()) throw SceneError("objects", "expected an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    scene.objects.push_back(read_object(objects[i], "objects[" + std::to_string(i) + "]"));
  }

  validate_scene(scene);
  return scene;
}

Scene load_scene(std::istream& source) {
  std::ostringstream buffer;
  buffer << source.rdbuf();
  return load_scene_text(buffer.str());
}

Scene load_scene_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SceneError("$", "cannot open scene file '" + path + "'");
  return load_scene(in);
}

}  // namespace skytalk
