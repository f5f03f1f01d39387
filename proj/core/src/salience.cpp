#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "skytalk/perception.hpp"

namespace skytalk {
namespace {
constexpr double kBlobSigmaCells = 1.0;
}

SalienceGrid SalienceGrid::zeros(int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("salience grid needs dims >= 1");
  return {width, height, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
}

bool SalienceGrid::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

double salience_column(double bearing_rad, double fov_deg, int width) {
  const double fov = fov_deg * std::numbers::pi / 180.0;
  return (0.5 - bearing_rad / fov) * width;
}

double salience_row(double distance, double max_range, int height) {
  return distance / max_range * height;
}

SalienceGrid render_salience(const Scene& scene, const Pose& pose, const std::vector<Fact>& target_facts,
                             const std::vector<Visibility>& candidates, GridDims dims) {
  SalienceGrid grid = SalienceGrid::zeros(dims.width, dims.height);
  for (const auto& v : candidates) {
    const SceneObject* object = scene.find(v.object_id);
    if (object == nullptr || v.fraction <= 0.0) continue;
    const bool targeted = std::any_of(target_facts.begin(), target_facts.end(), [&](const Fact& f) {
      return f.polarity == Polarity::Present && describes_object(f, *object);
    });
    if (!targeted) continue;

    const double u = salience_column(bearing(pose, object->center), scene.camera.horizontal_fov_deg,
                                     grid.width);
    const double w = salience_row(v.distance, scene.camera.max_range, grid.height);
    for (int row = 0; row < grid.height; ++row) {
      for (int col = 0; col < grid.width; ++col) {
        const double dx = col + 0.5 - u;
        const double dy = row + 0.5 - w;
        const double value =
            v.fraction * std::exp(-(dx * dx + dy * dy) / (2.0 * kBlobSigmaCells * kBlobSigmaCells));
        grid.at(row, col) = std::clamp(std::max(grid.at(row, col), value), 0.0, 1.0);
      }
    }
  }
  return grid;
}

SalienceGrid render_salience(const Scene& scene, const Pose& pose, const std::vector<Fact>& target_facts,
                             GridDims dims) {
  return render_salience(scene, pose, target_facts, visible_objects(scene, pose), dims);
}

void write_pgm(std::ostream& out, const SalienceGrid& grid) {
  out << "P2\n" << grid.width << ' ' << grid.height << "\n255\n";
  for (int row = 0; row < grid.height; ++row) {
    for (int col = 0; col < grid.width; ++col) {
      if (col > 0) out << ' ';
      out << std::lround(std::clamp(grid.at(row, col), 0.0, 1.0) * 255.0);
    }
    out << '\n';
  }
}

}  // namespace skytalk
