#pragma once

// Reference computations written independently of the library code paths
// they check.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "skytalk/scene.hpp"

namespace oracle {

inline std::string data_path(const std::string& relative) { return std::string(SKYTALK_DATA_DIR) + "/" + relative; }

// P(more than half of n Bernoulli(p) trials succeed), n odd.
inline double binomial_majority(double p, int n) {
  double total = 0.0;
  for (int k = n / 2 + 1; k <= n; ++k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    total += c * std::pow(p, k) * std::pow(1.0 - p, n - k);
  }
  return total;
}

// Point-in-box marching along the segment. Coarse but shares no code with the
// slab test.
inline bool marched_hit(skytalk::Vec3 a, skytalk::Vec3 b, const skytalk::Box& box, int steps = 4000) {
  for (int i = 1; i < steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double x = a.x + (b.x - a.x) * t;
    const double y = a.y + (b.y - a.y) * t;
    const double z = a.z + (b.z - a.z) * t;
    if (x > box.min.x && x < box.max.x && y > box.min.y && y < box.max.y && z > box.min.z && z < box.max.z) {
      return true;
    }
  }
  return false;
}

// Unblocked fraction of an n*n*n lattice over the object's box.
inline double marched_fraction(const skytalk::Scene& scene, const skytalk::Vec3& eye, const std::string& id,
                               int n) {
  const skytalk::SceneObject* target = nullptr;
  for (const auto& o : scene.objects) {
    if (o.id == id) target = &o;
  }
  if (!target) return -1.0;
  const skytalk::Vec3 lo{target->center.x - target->extent.x, target->center.y - target->extent.y,
                         target->center.z - target->extent.z};
  int clear = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const skytalk::Vec3 p{lo.x + 2 * target->extent.x * (i + 0.5) / n, lo.y + 2 * target->extent.y * (j + 0.5) / n,
                              lo.z + 2 * target->extent.z * (k + 0.5) / n};
        bool blocked = false;
        for (const auto& o : scene.objects) {
          if (!o.is_occluder || o.id == id) continue;
          const skytalk::Box box{{o.center.x - o.extent.x, o.center.y - o.extent.y, o.center.z - o.extent.z},
                                 {o.center.x + o.extent.x, o.center.y + o.extent.y, o.center.z + o.extent.z}};
          if (marched_hit(eye, p, box, 600)) {
            blocked = true;
            break;
          }
        }
        clear += blocked ? 0 : 1;
      }
    }
  }
  return static_cast<double>(clear) / (n * n * n);
}

// Box-Muller from raw mt19937_64 output, written out by hand.
struct ReferenceGaussian {
  explicit ReferenceGaussian(std::uint64_t seed) : engine(seed) {}
  std::mt19937_64 engine;
  bool have_spare = false;
  double spare = 0.0;
  double next() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    const double u1 = 1.0 - std::ldexp(static_cast<double>(engine() >> 11), -53);
    const double u2 = std::ldexp(static_cast<double>(engine() >> 11), -53);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * 3.14159265358979323846 * u2);
    have_spare = true;
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }
};

}  // namespace oracle
