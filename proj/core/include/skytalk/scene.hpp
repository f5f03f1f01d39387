#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace skytalk {

class Rng;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

double length(Vec3 v);

/// Axis-aligned box given by its min and max corners.
struct Box {
  Vec3 min;
  Vec3 max;

  static Box from_center(Vec3 center, Vec3 half_extent) {
    return {center - half_extent, center + half_extent};
  }
  bool contains(Vec3 p) const;
  Vec3 clamp(Vec3 p) const;
  double volume() const;
  friend bool operator==(const Box&, const Box&) = default;
};

struct Pose {
  Vec3 position;
  double yaw = 0.0;  // radians in [0, 2pi), 0 faces +x

  Vec3 heading() const { return {std::cos(yaw), std::sin(yaw), 0.0}; }
  /// Unit vector 90 degrees counter-clockwise from the heading.
  Vec3 left() const { return {-std::sin(yaw), std::cos(yaw), 0.0}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Wrap an angle into [0, 2pi).
double normalize_yaw(double yaw);

struct CameraModel {
  double horizontal_fov_deg = 90.0;
  double max_range = 100.0;
};

struct SceneObject {
  std::string id;
  std::string label;
  std::vector<std::string> attributes;
  Vec3 center;
  Vec3 extent;  // half sizes
  bool is_anomaly = false;
  bool is_occluder = false;

  Box box() const { return Box::from_center(center, extent); }
};

struct Scene {
  std::string name;
  Box bounds;
  Pose spawn;
  std::vector<SceneObject> objects;
  CameraModel camera;

  const SceneObject* find(std::string_view id) const;
  /// Distinct object labels, sorted.
  std::vector<std::string> labels() const;
};

/// Default anomaly tokens. Anomaly objects must carry one as an attribute.
const std::vector<std::string>& default_anomaly_lexicon();
bool is_anomaly_token(std::string_view token, const std::vector<std::string>& lexicon);

/// Raised by load_scene. `path()` names the offending field, e.g.
/// "objects[2].extent".
class SceneError : public std::runtime_error {
 public:
  SceneError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

Scene load_scene(std::istream& source);
Scene load_scene_text(std::string_view text);
Scene load_scene_file(const std::string& path);

/// Throws SceneError when a scene invariant is broken.
void validate_scene(const Scene& scene);

// Kinematics ---------------------------------------------------------------

enum class MoveCommand { Closer, Back, Left, Right };

inline constexpr double kMoveCloserMeters = 10.0;
inline constexpr double kMoveBackMeters = 5.0;
inline constexpr double kMoveSideMeters = 10.0;

struct MoveResult {
  Pose pose;
  bool clamped = false;
};

MoveResult apply_move(const Pose& pose, MoveCommand command, const Box& bounds);

/// Adds N(0, sigma^2) offsets to x then y; altitude and yaw are unchanged.
Pose perturb_pose(const Pose& pose, double sigma, Rng& rng, const Box& bounds);

// Visibility ---------------------------------------------------------------

struct Visibility {
  std::string object_id;
  double fraction = 0.0;
  double distance = 0.0;
};

inline constexpr int kDefaultVisibilitySamples = 64;

/// Signed horizontal angle of `point` relative to the pose heading, in
/// radians; positive is to the left.
double bearing(const Pose& pose, Vec3 point);

/// Objects inside the horizontal FOV wedge and range with nonzero unblocked
/// fraction, sorted by descending fraction, ascending distance, then id.
std::vector<Visibility> visible_objects(const Scene& scene, const Pose& pose,
                                        int samples = kDefaultVisibilitySamples);

/// True when the open segment from `from` to `to` passes through `box`.
bool segment_hits_box(Vec3 from, Vec3 to, const Box& box);

}  // namespace skytalk
