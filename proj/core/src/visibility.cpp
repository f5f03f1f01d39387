#include <algorithm>
#include <cmath>
#include <numbers>

#include "skytalk/scene.hpp"

namespace skytalk {
namespace {

constexpr double kSegmentEpsilon = 1e-9;

// Lattice points at cell centers of a k x k x k subdivision of the box.
std::vector<Vec3> sample_points(const Box& box, int samples) {
  const int k = std::max(1, static_cast<int>(std::lround(std::cbrt(static_cast<double>(samples)))));
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(k) * k * k);
  const Vec3 size = box.max - box.min;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      for (int l = 0; l < k; ++l) {
        points.push_back({box.min.x + size.x * (i + 0.5) / k, box.min.y + size.y * (j + 0.5) / k,
                          box.min.z + size.z * (l + 0.5) / k});
      }
    }
  }
  return points;
}

}  // namespace

bool segment_hits_box(Vec3 from, Vec3 to, const Box& box) {
  double t_enter = kSegmentEpsilon;
  double t_exit = 1.0 - kSegmentEpsilon;
  const double origin[3] = {from.x, from.y, from.z};
  const double dir[3] = {to.x - from.x, to.y - from.y, to.z - from.z};
  const double lo[3] = {box.min.x, box.min.y, box.min.z};
  const double hi[3] = {box.max.x, box.max.y, box.max.z};
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(dir[axis]) < 1e-15) {
      if (origin[axis] < lo[axis] || origin[axis] > hi[axis]) return false;
      continue;
    }
    double t0 = (lo[axis] - origin[axis]) / dir[axis];
    double t1 = (hi[axis] - origin[axis]) / dir[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return false;
  }
  return true;
}

double bearing(const Pose& pose, Vec3 point) {
  const Vec3 d = point - pose.position;
  const Vec3 h = pose.heading();
  const Vec3 l = pose.left();
  return std::atan2(d.x * l.x + d.y * l.y, d.x * h.x + d.y * h.y);
}

std::vector<Visibility> visible_objects(const Scene& scene, const Pose& pose, int samples) {
  const double half_fov = scene.camera.horizontal_fov_deg * std::numbers::pi / 360.0;
  const Vec3 eye = pose.position;

  std::vector<const SceneObject*> occluders;
  for (const auto& object : scene.objects) {
    if (object.is_occluder) occluders.push_back(&object);
  }

  std::vector<Visibility> out;
  for (const auto& object : scene.objects) {
    const double distance = length(object.center - eye);
    if (distance > scene.camera.max_range) continue;
    if (std::abs(bearing(pose, object.center)) > half_fov) continue;

    const auto points = sample_points(object.box(), samples);
    std::size_t clear = 0;
    for (const Vec3& target : points) {
      const bool blocked = std::any_of(occluders.begin(), occluders.end(), [&](const SceneObject* o) {
        return o != &object && segment_hits_box(eye, target, o->box());
      });
      if (!blocked) ++clear;
    }
    if (clear == 0) continue;
    out.push_back({object.id, static_cast<double>(clear) / static_cast<double>(points.size()),
                   distance});
  }

  std::sort(out.begin(), out.end(), [](const Visibility& a, const Visibility& b) {
    if (a.fraction != b.fraction) return a.fraction > b.fraction;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.object_id < b.object_id;
  });
  return out;
}

}  // namespace skytalk
